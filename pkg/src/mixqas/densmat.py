"""Exact state-vector and density-matrix simulation of small qubit systems.

Qubit 0 is the least significant bit of the basis-state index, so applying
X to qubit q of |0...0> produces the basis state with index 2^q.  Gates are
applied through strided views of the state, never by materializing the
2^n x 2^n embedded unitary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import cnot_permutation, mix_apply

ATOL_NORM = 1e-9
REHERMITIZE_EVERY = 32

# ---------------------------------------------------------------------------
# gate matrices
# ---------------------------------------------------------------------------

I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)


def rx(theta):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta):
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta):
    e = np.exp(-0.5j * theta)
    return np.array([[e, 0], [0, np.conj(e)]])


def drx(theta):
    """d/dtheta of rx: -(i/2) X rx(theta)."""
    return -0.5j * (X @ rx(theta))


def dry(theta):
    return -0.5j * (Y @ ry(theta))


def drz(theta):
    return -0.5j * (Z @ rz(theta))


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass
class PureState:
    """An n-qubit state vector; amplitudes indexed little-endian."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"amplitude vector of length {self.amplitudes.shape} does not "
                f"match n_qubits={self.n_qubits}")
        norm = np.sum(np.abs(self.amplitudes) ** 2)
        if abs(norm - 1.0) > ATOL_NORM:
            raise ValueError(f"state not normalized: |psi|^2 = {norm}")

    @classmethod
    def basis(cls, n_qubits, index=0):
        amp = np.zeros(1 << n_qubits, dtype=np.complex128)
        amp[index] = 1.0
        return cls(n_qubits, amp)


@dataclass
class DensityMatrix:
    """An n-qubit mixed state: Hermitian, PSD, unit-trace matrix."""

    n_qubits: int
    mat: np.ndarray
    channel_count: int = field(default=0, compare=False)

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=np.complex128)
        N = 1 << self.n_qubits
        if self.mat.shape != (N, N):
            raise ValueError(f"matrix shape {self.mat.shape} does not match n_qubits={self.n_qubits}")

    @classmethod
    def basis(cls, n_qubits, index=0):
        N = 1 << n_qubits
        m = np.zeros((N, N), dtype=np.complex128)
        m[index, index] = 1.0
        return cls(n_qubits, m)

    def validate(self, atol=ATOL_NORM, eig_floor=-1e-8):
        """Check Hermiticity, trace and positivity; raises on violation."""
        defect = np.abs(self.mat - self.mat.conj().T).max()
        if defect > atol:
            raise ValueError(f"Hermiticity defect {defect}")
        tr = np.trace(self.mat)
        if abs(tr - 1.0) > atol:
            raise ValueError(f"trace {tr} != 1")
        lo = np.linalg.eigvalsh(self.mat).min()
        if lo < eig_floor:
            raise ValueError(f"negative eigenvalue {lo}")
        return self


class NoiseKind:
    BIT_FLIP = "bitflip"
    PHASE_FLIP = "phaseflip"
    BIT_PHASE_FLIP = "bitphaseflip"
    DEPOLARIZING = "depolarizing"
    NONE = "none"

    ALL = (BIT_FLIP, PHASE_FLIP, BIT_PHASE_FLIP, DEPOLARIZING, NONE)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = NoiseKind.NONE
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in NoiseKind.ALL:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise probability {self.p} outside [0, 1]")


# ---------------------------------------------------------------------------
# raw-array kernels (shared by the typed ops, the tape and the baseline)
# ---------------------------------------------------------------------------


def apply_1q_vec(vec, U, q, n):
    """U acting on qubit q of a length-2^n state vector."""
    hi, lo = 1 << (n - 1 - q), 1 << q
    v = vec.reshape(hi, 2, lo)
    return np.einsum("ab,hbl->hal", U, v).reshape(-1)


def apply_cnot_vec(vec, control, target, n):
    return vec[cnot_permutation(n, control, target)]


def apply_1q_mat(mat, U, q, n):
    """U rho U^dagger on qubit q, via the fused block kernel."""
    M4 = np.kron(U, np.conj(U))
    return mix_apply(mat, M4, q)


def apply_cnot_mat(mat, control, target, n):
    perm = cnot_permutation(n, control, target)
    return mat[np.ix_(perm, perm)]


def hermitize(mat):
    return 0.5 * (mat + mat.conj().T)


def noise_channel_mat(mat, spec, n, qubits=None):
    """Apply a noise channel to a raw density matrix.

    Flip channels act per qubit (all qubits when ``qubits`` is None); the
    depolarizing channel acts globally: (1 - p) rho + (p / N) I_N.
    """
    if spec.kind == NoiseKind.NONE or spec.p == 0.0:
        return mat
    if spec.kind == NoiseKind.DEPOLARIZING:
        N = 1 << n
        out = (1.0 - spec.p) * mat
        out[np.diag_indices(N)] += spec.p / N
        return out
    if qubits is None:
        qubits = range(n)
    p = spec.p
    for q in qubits:
        if spec.kind in (NoiseKind.BIT_FLIP, NoiseKind.BIT_PHASE_FLIP):
            M4 = (1.0 - p) * np.eye(4) + p * np.kron(X, X)
            mat = mix_apply(mat, M4.astype(np.complex128), q)
        if spec.kind in (NoiseKind.PHASE_FLIP, NoiseKind.BIT_PHASE_FLIP):
            M4 = (1.0 - p) * np.eye(4) + p * np.kron(Z, Z)
            mat = mix_apply(mat, M4.astype(np.complex128), q)
    return mat


# ---------------------------------------------------------------------------
# public operations on the typed states
# ---------------------------------------------------------------------------


def pure_to_density(psi: PureState) -> DensityMatrix:
    """rho = |psi><psi|."""
    return DensityMatrix(psi.n_qubits, np.outer(psi.amplitudes, np.conj(psi.amplitudes)))


def _bump(rho: DensityMatrix, mat) -> DensityMatrix:
    count = rho.channel_count + 1
    if count % REHERMITIZE_EVERY == 0:
        mat = hermitize(mat)
    return DensityMatrix(rho.n_qubits, mat, channel_count=count)


def apply_1q_gate(rho: DensityMatrix, U, q) -> DensityMatrix:
    """rho -> (I x ... U ... x I) rho (.)^dagger with U on qubit q."""
    if not 0 <= q < rho.n_qubits:
        raise IndexError(f"qubit {q} out of range for n={rho.n_qubits}")
    U = np.asarray(U, dtype=np.complex128)
    if U.shape != (2, 2):
        raise ValueError("apply_1q_gate expects a 2x2 unitary")
    return _bump(rho, apply_1q_mat(rho.mat, U, q, rho.n_qubits))


def apply_cnot(rho: DensityMatrix, control, target) -> DensityMatrix:
    return _bump(rho, apply_cnot_mat(rho.mat, control, target, rho.n_qubits))


def apply_noise(rho: DensityMatrix, spec: NoiseSpec, qubits=None) -> DensityMatrix:
    """Noise channel; ``qubits=None`` means every qubit for flip channels."""
    return _bump(rho, noise_channel_mat(rho.mat, spec, rho.n_qubits, qubits))


def fidelity(rho: DensityMatrix, phi: PureState) -> float:
    """F(rho, |phi>) = <phi| rho |phi>."""
    if rho.n_qubits != phi.n_qubits:
        raise ValueError("fidelity: qubit counts differ")
    v = phi.amplitudes
    f = np.einsum("i,ij,j->", np.conj(v), rho.mat, v)
    return float(np.real(f))


def expectation_diag(rho: DensityMatrix, h) -> float:
    """tr(rho H) for a diagonal observable H given by its diagonal h."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (1 << rho.n_qubits,):
        raise ValueError("expectation_diag: diagonal length mismatch")
    return float(np.sum(h * np.real(np.diagonal(rho.mat))))


def measurement_probs(rho: DensityMatrix) -> np.ndarray:
    """Diagonal of rho as real probabilities, clamped to [0, 1]."""
    return np.clip(np.real(np.diagonal(rho.mat)), 0.0, 1.0)
