"""State-initialization targets (GHZ and W families) and their fidelity loss."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..densmat import PureState


def ghz_state(n) -> PureState:
    """(|0...0> + |1...1>) / sqrt(2)."""
    if n < 2:
        raise ValueError("GHZ state needs at least 2 qubits")
    amp = np.zeros(1 << n, dtype=np.complex128)
    amp[0] = amp[-1] = 1.0 / np.sqrt(2.0)
    return PureState(n, amp)


def w_state(n) -> PureState:
    """Equal superposition of the n basis states with a single 1 bit."""
    if n < 2:
        raise ValueError("W state needs at least 2 qubits")
    amp = np.zeros(1 << n, dtype=np.complex128)
    for q in range(n):
        amp[1 << q] = 1.0 / np.sqrt(n)
    return PureState(n, amp)


def state_init_loss(rho_mat, target: PureState) -> float:
    """1 - <target| rho |target>."""
    v = target.amplitudes
    return 1.0 - float(np.real(np.einsum("i,ij,j->", np.conj(v), rho_mat, v)))


def state_init_adjoint(target: PureState) -> np.ndarray:
    """Loss adjoint seed: dL/drho = -|target><target| (state independent)."""
    v = target.amplitudes
    return -np.outer(v, np.conj(v))


@dataclass
class StateInitTask:
    """Prepare a target entangled state from |0...0>."""

    kind: str  # 'ghz' or 'w'
    n: int
    target: PureState = field(init=False)

    def __post_init__(self):
        if self.kind == "ghz":
            self.target = ghz_state(self.n)
        elif self.kind == "w":
            self.target = w_state(self.n)
        else:
            raise ValueError(f"unknown state-init target {self.kind!r}")

    @property
    def n_qubits(self):
        return self.n

    def default_layers(self):
        return 2 * self.n

    def initial_vec(self):
        return PureState.basis(self.n).amplitudes

    def initial_mat(self):
        amp = self.initial_vec()
        return np.outer(amp, np.conj(amp))

    # density-matrix path ----------------------------------------------------

    def loss_mat(self, rho_mat):
        return state_init_loss(rho_mat, self.target)

    def adjoint_mat(self, rho_mat):
        return state_init_adjoint(self.target)

    # state-vector path (baseline) -------------------------------------------

    def loss_vec(self, psi):
        ov = np.vdot(self.target.amplitudes, psi)
        return 1.0 - float(np.abs(ov) ** 2)

    def adjoint_vec(self, psi):
        """dL/d(psi*) for L = 1 - |<target|psi>|^2."""
        v = self.target.amplitudes
        return -v * np.vdot(v, psi)

    # evaluation ---------------------------------------------------------------

    def final_metrics(self, state) -> dict:
        """Fidelity of a discretized-circuit output (PureState or raw rho)."""
        v = self.target.amplitudes
        if isinstance(state, PureState):
            fid = float(np.abs(np.vdot(v, state.amplitudes)) ** 2)
        else:
            mat = state.mat if hasattr(state, "mat") else state
            fid = float(np.real(np.einsum("i,ij,j->", np.conj(v), mat, v)))
        return {"fidelity": fid}
