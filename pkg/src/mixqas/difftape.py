"""Reverse-mode differentiation through mixture-channel programs.

``record_forward`` runs a program while caching the input state of each
step; ``backward`` walks the tape in reverse, propagating the Hermitian
loss adjoint G (defined by dL = Re tr(G^dagger d rho)) through the adjoint
channel of every step and accumulating analytic parameter gradients:

* each candidate's probability gradient comes from the reduced overlap
  tensor W of the upstream adjoint with the cached input state;
* angle gradients use dRx/dtheta = -(i/2) X Rx (and likewise for Ry, Rz),
  with the Rx/Ry/Rz candidates at a position sharing one angle;
* probability gradients are chained through the softmax Jacobian to the
  logits, and through the hidden-unit factorization when present.

Memory is O(steps * N^2) with full caching (the default); a checkpoint
stride > 1 caches every stride-th state and recomputes the rest segment by
segment during the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import densmat
from .densmat import REHERMITIZE_EVERY, NoiseKind, hermitize
from .kernels import block_operator, block_overlaps, mix_apply, mix_backward
from .searchspace import (
    N_SINGLE,
    ArchLogits,
    MixPosition,
    Program,
    apply_mix_step,
    gate_probs,
    single_qubit_stack,
)


@dataclass
class GradientBundle:
    """Gradients of a scalar loss with respect to the trainable parameters."""

    d_theta: np.ndarray
    d_alpha: np.ndarray
    d_hidden: np.ndarray | None = None
    d_hidden_vec: np.ndarray | None = None

    def check_finite(self):
        for name in ("d_theta", "d_alpha", "d_hidden", "d_hidden_vec"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
                raise FloatingPointError(f"non-finite gradient in {name} at {bad}")
        return self

    def scaled(self, factor):
        return GradientBundle(
            d_theta=self.d_theta * factor,
            d_alpha=self.d_alpha * factor,
            d_hidden=None if self.d_hidden is None else self.d_hidden * factor,
            d_hidden_vec=None if self.d_hidden_vec is None else self.d_hidden_vec * factor,
        )

    def add_(self, other):
        self.d_theta += other.d_theta
        self.d_alpha += other.d_alpha
        if self.d_hidden is not None:
            self.d_hidden += other.d_hidden
            self.d_hidden_vec += other.d_hidden_vec
        return self


@dataclass
class _Node:
    step: object
    rho_in: np.ndarray | None


@dataclass
class Tape:
    """Recorded forward pass; single-owner, consumed by one backward call."""

    program: Program
    logits: ArchLogits
    P: np.ndarray
    theta: np.ndarray
    rho0: np.ndarray
    checkpoint_stride: int = 1
    nodes: list = field(default_factory=list)
    rho_out: np.ndarray | None = None
    consumed: bool = False

    def record(self, step, mat):
        keep = (len(self.nodes) % self.checkpoint_stride) == 0
        self.nodes.append(_Node(step, mat if keep else None))

    # -- forward replay ----------------------------------------------------

    def _apply(self, mat, idx):
        step = self.nodes[idx].step
        if isinstance(step, MixPosition):
            mat = apply_mix_step(mat, step, self.P, self.theta, self.program)
        else:
            mat = densmat.noise_channel_mat(mat, step.spec, self.program.n_qubits)
        if (idx + 1) % REHERMITIZE_EVERY == 0:
            mat = hermitize(mat)
        return mat

    def replay(self):
        """Re-run the recorded program from rho0; matches rho_out exactly."""
        mat = self.rho0
        for idx in range(len(self.nodes)):
            mat = self._apply(mat, idx)
        return mat

    def _fetch_input(self, idx):
        node = self.nodes[idx]
        if node.rho_in is None:
            base = idx - idx % self.checkpoint_stride
            mat = self.nodes[base].rho_in
            for k in range(base, idx):
                mat = self._apply(mat, k)
                self.nodes[k + 1].rho_in = mat
        return self.nodes[idx].rho_in


def record_forward(program: Program, logits, theta, rho0_mat,
                   checkpoint_stride=1):
    """Run a program on rho0 while recording a tape for ``backward``.

    Returns ``(rho_out, tape)``; the output equals the un-taped forward
    pass bit for bit since the same kernels execute in the same order.
    """
    if not isinstance(logits, ArchLogits):
        logits = ArchLogits(alpha=np.asarray(logits, dtype=np.float64))
    theta = np.asarray(theta, dtype=np.float64)
    P = gate_probs(logits)
    tape = Tape(program, logits, P, theta, rho0_mat,
                checkpoint_stride=max(1, int(checkpoint_stride)))
    mat = rho0_mat
    for step in program.steps:
        tape.record(step, mat)
        mat = tape._apply(mat, len(tape.nodes) - 1)
    tape.rho_out = mat
    return mat, tape


def heisenberg_observable(program: Program, logits, theta, obs):
    """Pull a diagonal-free observable back through the whole program.

    Returns ``(M, c)`` such that tr(obs @ forward(rho0)) = Re tr(M^dagger
    rho0) + c for every input rho0: M is the adjoint-channel image of
    ``obs`` and c collects the affine contributions of depolarizing nodes
    (zero for noiseless programs).  Observables must be Hermitian.
    """
    if not isinstance(logits, ArchLogits):
        logits = ArchLogits(alpha=np.asarray(logits, dtype=np.float64))
    theta = np.asarray(theta, dtype=np.float64)
    P = gate_probs(logits)
    gs = program.gateset
    M = np.asarray(obs, dtype=np.complex128)
    affine = False
    for idx in range(len(program.steps) - 1, -1, -1):
        if (idx + 1) % REHERMITIZE_EVERY == 0:
            M = hermitize(M)
        step = program.steps[idx]
        if isinstance(step, MixPosition):
            p_row = P[step.i, step.j]
            units = single_qubit_stack(gs, theta[step.theta_idx])
            M4_adj = block_operator(np.conj(np.swapaxes(units, 1, 2)),
                                    p_row[:N_SINGLE])
            M = mix_apply(M, M4_adj, step.control,
                          np.asarray(step.targets, dtype=np.int64),
                          np.ascontiguousarray(p_row[N_SINGLE:]))
        else:
            spec = step.spec
            if spec.kind == NoiseKind.DEPOLARIZING:
                M = (1.0 - spec.p) * M
                affine = True
            elif spec.kind != NoiseKind.NONE:
                M = densmat.noise_channel_mat(M, spec, program.n_qubits)
    c = 0.0
    if affine:
        from .searchspace import run_program

        N = 1 << program.n_qubits
        injected = run_program(program, P, theta, np.zeros((N, N), dtype=np.complex128))
        c = float(np.real(np.sum(np.conj(obs) * injected)))
    return M, c


def softmax_grad(P_row, dP_row):
    """Chain dL/dP through the softmax Jacobian to dL/d(logits)."""
    inner = np.sum(dP_row * P_row, axis=-1, keepdims=True)
    return P_row * (dP_row - inner)


def chain_alpha_to_hidden(d_alpha, logits: ArchLogits):
    """Hidden-unit chain rule: dH = outer(d_alpha, v), dv = H^T d_alpha."""
    d_hidden = np.einsum("ijg,ijk->ijgk", d_alpha, logits.hidden_vec)
    d_hidden_vec = np.einsum("ijgk,ijg->ijk", logits.hidden, d_alpha)
    return d_hidden, d_hidden_vec


def backward(tape: Tape, seed) -> GradientBundle:
    """Pull a Hermitian loss adjoint back through the tape.

    ``seed`` is dL/d(rho_out) in the convention dL = Re tr(seed^dagger
    d rho).  Returns gradients for theta and the architecture logits.
    """
    if tape.consumed:
        raise RuntimeError("tape already consumed by a previous backward call")
    tape.consumed = True

    program = tape.program
    gs = program.gateset
    P = tape.P
    dP = np.zeros_like(P)
    d_theta = np.zeros_like(tape.theta)
    G = np.asarray(seed, dtype=np.complex128)

    for idx in range(len(tape.nodes) - 1, -1, -1):
        if (idx + 1) % REHERMITIZE_EVERY == 0:
            G = hermitize(G)
        step = tape.nodes[idx].step
        if isinstance(step, MixPosition):
            rho_in = tape._fetch_input(idx)
            p_row = P[step.i, step.j]
            th = tape.theta[step.theta_idx]
            targets = np.asarray(step.targets, dtype=np.int64)

            units = single_qubit_stack(gs, th)
            M4_adj = block_operator(np.conj(np.swapaxes(units, 1, 2)),
                                    p_row[:N_SINGLE])
            G, W, s = mix_backward(G, rho_in, M4_adj, step.control, targets,
                                   np.ascontiguousarray(p_row[N_SINGLE:]))

            dP[step.i, step.j, :N_SINGLE] += block_overlaps(W, units, units)
            dP[step.i, step.j, N_SINGLE:] += s
            d_units = np.stack([gs.dunitary(k, th) for k in range(1, N_SINGLE)])
            d_theta[step.theta_idx] += 2.0 * float(
                p_row[1:N_SINGLE] @ block_overlaps(W, d_units, units[1:]))
        else:
            spec = step.spec
            if spec.kind == NoiseKind.DEPOLARIZING:
                G = (1.0 - spec.p) * G
            elif spec.kind != NoiseKind.NONE:
                # flip channels are self-adjoint
                G = densmat.noise_channel_mat(G, spec, program.n_qubits)
        tape.nodes[idx].rho_in = None

    d_alpha = softmax_grad(P, dP)
    if tape.logits.has_hidden:
        d_hidden, d_hidden_vec = chain_alpha_to_hidden(d_alpha, tape.logits)
        return GradientBundle(d_theta, d_alpha, d_hidden, d_hidden_vec).check_finite()
    return GradientBundle(d_theta, d_alpha).check_finite()
