"""Architecture encoding and the mixture-channel forward passes.

A candidate circuit on n qubits with m layers assigns one gate from the
candidate set to every grid position (layer i, qubit j).  Relaxing the
assignment to per-position softmax distributions turns the circuit into a
channel: at each position the state is evolved by the probability-weighted
mixture of all candidate conjugations, so the resulting density matrix is
the exact mixture of the outputs of every circuit in the search space.

Gate set layout: ``[I, RX, RY, RZ, CNOT+1, ..., CNOT+(n-1)]`` where
``CNOT+d`` at grid position (i, j) uses qubit j as control and qubit
``(j + d) mod n`` as target.  In the micro setting the offsets act on the
subcircuit's local qubits before mapping through the super-circuit row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import densmat
from .densmat import DensityMatrix, NoiseSpec, PureState
from .kernels import block_operator, mix_apply

GATE_I = 0
GATE_RX = 1
GATE_RY = 2
GATE_RZ = 3
N_SINGLE = 4  # number of single-qubit candidates preceding the CNOT block

_ROT = {GATE_RX: densmat.rx, GATE_RY: densmat.ry, GATE_RZ: densmat.rz}
_DROT = {GATE_RX: densmat.drx, GATE_RY: densmat.dry, GATE_RZ: densmat.drz}


@dataclass(frozen=True)
class GateId:
    """One candidate gate: 'I', 'RX', 'RY', 'RZ' or 'CNOT' with an offset."""

    kind: str
    offset: int = 0  # CNOT target offset, 1 <= offset < n_local

    @property
    def parameterized(self):
        return self.kind in ("RX", "RY", "RZ")

    @property
    def name(self):
        return f"CNOT+{self.offset}" if self.kind == "CNOT" else self.kind


@dataclass(frozen=True)
class GateSet:
    """Ordered candidate gates for a search over n_local qubits."""

    entries: tuple
    n_local: int

    def __len__(self):
        return len(self.entries)

    @property
    def names(self):
        return [g.name for g in self.entries]

    def unitary(self, k, theta):
        """2x2 matrix of single-qubit candidate k (raises for CNOT)."""
        g = self.entries[k]
        if g.kind == "I":
            return densmat.I2
        if g.kind == "CNOT":
            raise ValueError("CNOT candidates have no 2x2 unitary")
        return _ROT[_KIND_CODE[g.kind]](theta)

    def dunitary(self, k, theta):
        g = self.entries[k]
        if not g.parameterized:
            raise ValueError(f"{g.name} has no angle derivative")
        return _DROT[_KIND_CODE[g.kind]](theta)


_KIND_CODE = {"RX": GATE_RX, "RY": GATE_RY, "RZ": GATE_RZ}


def gate_set_for(n_local) -> GateSet:
    """The standard candidate set: {I, RX, RY, RZ} plus n_local - 1 CNOTs."""
    if n_local < 1:
        raise ValueError("need at least one qubit")
    entries = [GateId("I"), GateId("RX"), GateId("RY"), GateId("RZ")]
    entries += [GateId("CNOT", d) for d in range(1, n_local)]
    return GateSet(tuple(entries), n_local)


# ---------------------------------------------------------------------------
# architecture parameters
# ---------------------------------------------------------------------------


@dataclass
class ArchLogits:
    """Per-position gate logits, optionally factored through hidden units.

    Without hidden units, ``alpha`` has shape (m, n_local, G).  With hidden
    units, each position's logits are recomputed as ``H_ij @ v_ij`` with
    ``hidden`` of shape (m, n_local, G, K) and ``hidden_vec`` (m, n_local, K);
    alpha is never stored separately in that case.
    """

    alpha: np.ndarray | None = None
    hidden: np.ndarray | None = None
    hidden_vec: np.ndarray | None = None

    @property
    def has_hidden(self):
        return self.hidden is not None

    @property
    def shape(self):
        t = self.alpha if self.alpha is not None else self.hidden[..., 0]
        return t.shape[:2] + ((self.alpha.shape[2],) if self.alpha is not None
                              else (self.hidden.shape[2],))

    def tensor(self):
        """Effective logits (m, n_local, G), recomputed when factored."""
        if self.has_hidden:
            return np.einsum("ijgk,ijk->ijg", self.hidden, self.hidden_vec)
        return self.alpha

    def parameters(self):
        """Trainable arrays keyed by name, for the optimizer."""
        if self.has_hidden:
            return {"hidden": self.hidden, "hidden_vec": self.hidden_vec}
        return {"alpha": self.alpha}

    def replace_parameters(self, params):
        if self.has_hidden:
            return ArchLogits(hidden=params["hidden"], hidden_vec=params["hidden_vec"])
        return ArchLogits(alpha=params["alpha"])


def init_logits(rng, m, n_local, gate_count, hidden_units=False) -> ArchLogits:
    """Random initialization: alpha ~ N(0, 0.01^2), H and v ~ N(0, 1/sqrt(K))."""
    if hidden_units:
        K = 2 * gate_count
        scale = 1.0 / np.sqrt(K)
        return ArchLogits(
            hidden=rng.normal(0.0, scale, size=(m, n_local, gate_count, K)),
            hidden_vec=rng.normal(0.0, scale, size=(m, n_local, K)),
        )
    return ArchLogits(alpha=rng.normal(0.0, 0.01, size=(m, n_local, gate_count)))


def init_theta(rng, shape) -> np.ndarray:
    """Rotation angles drawn uniformly from [-pi, pi]."""
    return rng.uniform(-np.pi, np.pi, size=shape)


def gate_probs(logits) -> np.ndarray:
    """Softmax over the gate axis; rows sum to 1."""
    t = logits.tensor() if isinstance(logits, ArchLogits) else np.asarray(logits)
    t = t - t.max(axis=-1, keepdims=True)
    e = np.exp(t)
    return e / e.sum(axis=-1, keepdims=True)


def arch_probability(A, P) -> float:
    """Probability of selecting architecture A: product of its gate probs."""
    A = np.asarray(A)
    i, j = np.indices(A.shape)
    return float(np.prod(P[i, j, A]))


def discretize(P) -> np.ndarray:
    """Per-position argmax gate; ties resolve to the lowest gate index."""
    return np.argmax(P, axis=-1)


@dataclass(frozen=True)
class SuperCircuitStructure:
    """Qubit rows of the micro-search super circuit: C[c] lists the global
    qubits subcircuit c acts on."""

    rows: np.ndarray
    n_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.int64))
        if self.rows.ndim != 2:
            raise ValueError("super-circuit rows must be 2-D (N_c, n_s)")
        for r, row in enumerate(self.rows):
            if len(set(row.tolist())) != len(row):
                raise ValueError(f"super-circuit row {r} repeats a qubit")
            if row.min() < 0 or row.max() >= self.n_qubits:
                raise ValueError(f"super-circuit row {r} references qubit outside 0..{self.n_qubits - 1}")

    @property
    def n_subcircuits(self):
        return self.rows.shape[0]

    @property
    def n_sub_qubits(self):
        return self.rows.shape[1]


# ---------------------------------------------------------------------------
# programs: the position/noise schedule of one forward pass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixPosition:
    """One mixture-channel application: grid position (i, j), acting with
    control qubit ``control`` and CNOT targets ``targets`` (one per offset),
    reading theta at ``theta_idx``."""

    i: int
    j: int
    control: int
    targets: tuple
    theta_idx: tuple


@dataclass(frozen=True)
class NoiseStep:
    spec: NoiseSpec


@dataclass(frozen=True)
class Program:
    n_qubits: int
    n_local: int
    steps: tuple
    gateset: GateSet


def _position_targets(control_local, n_local, qubit_map):
    return tuple(int(qubit_map[(control_local + d) % n_local]) for d in range(1, n_local))


def build_macro_program(n, m, noise=NoiseSpec()) -> Program:
    """Positions in lexicographic order (layer-major), noise after each layer."""
    gs = gate_set_for(n)
    ident = np.arange(n)
    steps = []
    for i in range(m):
        for j in range(n):
            steps.append(MixPosition(i, j, j, _position_targets(j, n, ident), (i, j)))
        if noise.kind != densmat.NoiseKind.NONE and noise.p > 0.0:
            steps.append(NoiseStep(noise))
    return Program(n, n, tuple(steps), gs)


def build_micro_program(structure: SuperCircuitStructure, m, noise=NoiseSpec()) -> Program:
    """Subcircuits in row order, each a full m x n_s grid with shared logits;
    theta is per subcircuit copy."""
    n_s = structure.n_sub_qubits
    gs = gate_set_for(n_s)
    steps = []
    for c, row in enumerate(structure.rows):
        for i in range(m):
            for j in range(n_s):
                steps.append(MixPosition(i, j, int(row[j]),
                                         _position_targets(j, n_s, row), (c, i, j)))
            if noise.kind != densmat.NoiseKind.NONE and noise.p > 0.0:
                steps.append(NoiseStep(noise))
    return Program(structure.n_qubits, n_s, tuple(steps), gs)


# ---------------------------------------------------------------------------
# forward evaluation
# ---------------------------------------------------------------------------


def single_qubit_stack(gateset, theta):
    """The four single-qubit candidate matrices, stacked (4, 2, 2)."""
    return np.stack([densmat.I2] + [gateset.unitary(k, theta)
                                    for k in range(1, N_SINGLE)])


def position_block_operator(gateset, p_row, theta):
    """4x4 pre-summed operator of the single-qubit candidates."""
    return block_operator(single_qubit_stack(gateset, theta), p_row[:N_SINGLE])


def apply_mix_step(mat, step, P, theta, program):
    """sum_g P_g U_g rho U_g^dagger at one grid position (raw arrays)."""
    p_row = P[step.i, step.j]
    th = theta[step.theta_idx]
    M4 = position_block_operator(program.gateset, p_row, th)
    targets = np.asarray(step.targets, dtype=np.int64)
    return mix_apply(mat, M4, step.control, targets,
                     np.ascontiguousarray(p_row[N_SINGLE:]))


def run_program(program: Program, P, theta, rho0_mat):
    """Execute a program on a raw density matrix."""
    mat = rho0_mat
    count = 0
    for step in program.steps:
        if isinstance(step, MixPosition):
            mat = apply_mix_step(mat, step, P, theta, program)
        else:
            mat = densmat.noise_channel_mat(mat, step.spec, program.n_qubits)
        count += 1
        if count % densmat.REHERMITIZE_EVERY == 0:
            mat = densmat.hermitize(mat)
    return mat


def forward_macro(rho0: DensityMatrix, logits, theta, noise=NoiseSpec()) -> DensityMatrix:
    """Full macro-search mixture pass over an m x n grid."""
    P = gate_probs(logits)
    m, n = P.shape[0], P.shape[1]
    if n != rho0.n_qubits:
        raise ValueError("logits qubit axis does not match the state")
    program = build_macro_program(n, m, noise)
    return DensityMatrix(n, run_program(program, P, np.asarray(theta), rho0.mat))


def forward_micro(rho0: DensityMatrix, logits, theta,
                  structure: SuperCircuitStructure, noise=NoiseSpec()) -> DensityMatrix:
    """Micro-search mixture pass: shared subcircuit logits, per-copy angles."""
    P = gate_probs(logits)
    theta = np.asarray(theta)
    m = P.shape[0]
    if P.shape[1] != structure.n_sub_qubits:
        raise ValueError("logits qubit axis does not match the subcircuit size")
    if theta.shape != (structure.n_subcircuits, m, structure.n_sub_qubits):
        raise ValueError(f"theta shape {theta.shape} does not match (N_c, m, n_s)")
    if structure.n_qubits != rho0.n_qubits:
        raise ValueError("super circuit does not match the state size")
    program = build_micro_program(structure, m, noise)
    return DensityMatrix(rho0.n_qubits, run_program(program, P, theta, rho0.mat))


# ---------------------------------------------------------------------------
# discrete circuits
# ---------------------------------------------------------------------------


def _discrete_ops(A, theta, program):
    """(kind, payload) ops of the discrete circuit selected by A."""
    gs = program.gateset
    ops = []
    for step in program.steps:
        if isinstance(step, NoiseStep):
            ops.append(("noise", step.spec))
            continue
        k = int(A[step.i, step.j])
        g = gs.entries[k]
        if g.kind == "I":
            continue
        if g.kind == "CNOT":
            ops.append(("cnot", (step.control, step.targets[g.offset - 1])))
        else:
            ops.append(("gate", (gs.unitary(k, theta[step.theta_idx]), step.control)))
    return ops


def simulate_discrete(A, theta, initial, noise=NoiseSpec(), structure=None, m=None):
    """Evaluate the discrete circuit selected by architecture matrix A.

    ``initial`` may be a PureState (noiseless fast path, returns PureState)
    or a DensityMatrix (returns DensityMatrix).  For micro architectures
    pass the super-circuit ``structure``.
    """
    A = np.asarray(A)
    theta = np.asarray(theta)
    if m is None:
        m = A.shape[0]
    if structure is None:
        program = build_macro_program(initial.n_qubits, m, noise)
    else:
        program = build_micro_program(structure, m, noise)
    ops = _discrete_ops(A, theta, program)
    n = initial.n_qubits

    if isinstance(initial, PureState):
        if any(kind == "noise" for kind, _ in ops):
            raise ValueError("pure-state path cannot apply noise channels")
        vec = initial.amplitudes
        for kind, payload in ops:
            if kind == "gate":
                U, q = payload
                vec = densmat.apply_1q_vec(vec, U, q, n)
            else:
                c, t = payload
                vec = densmat.apply_cnot_vec(vec, c, t, n)
        return PureState(n, vec)

    mat = initial.mat
    for kind, payload in ops:
        if kind == "gate":
            U, q = payload
            mat = densmat.apply_1q_mat(mat, U, q, n)
        elif kind == "cnot":
            c, t = payload
            mat = densmat.apply_cnot_mat(mat, c, t, n)
        else:
            mat = densmat.noise_channel_mat(mat, payload, n)
    return DensityMatrix(n, mat)
