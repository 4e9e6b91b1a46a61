"""Sampling-based architecture search baseline over state vectors.

Each epoch one discrete circuit is drawn per position with the Gumbel-max
trick, the gate angles are refined for a fixed number of inner iterations
on the sampled circuit, and the architecture logits then receive a single
straight-through update: the forward pass uses the hard sample while the
backward pass differentiates the tau-tempered soft weights.

State vectors cannot represent the depolarizing channel, so only the flip
noise channels are supported, realized as stochastic Kraus trajectories
(one trajectory per epoch, frozen alongside the sampled circuit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densmat import NoiseKind, NoiseSpec, X, Z, apply_1q_vec, apply_cnot_vec
from .difftape import chain_alpha_to_hidden
from .regopt import (
    AdamCosine,
    EntropyScheduleCfg,
    angle_penalty,
    angle_penalty_grad,
    entropy_term,
    entropy_term_grad,
)
from .searchspace import (
    MixPosition,
    build_macro_program,
    discretize,
    gate_probs,
    init_logits,
    init_theta,
)

_TINY = 1e-300


@dataclass(frozen=True)
class GumbelCfg:
    tau: float = 0.05
    num_inner_iter: int = 10

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class QdartsHyper:
    m: int
    epochs: int
    learning_rate: float
    t_max: int
    entropy: EntropyScheduleCfg = field(default_factory=EntropyScheduleCfg)
    s_theta: float = 0.01
    hidden_units: bool = False
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    restart: bool = True


def sample_gumbel(rng, size):
    u = np.clip(rng.uniform(size=size), _TINY, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def gumbel_sample_position(logits_row, rng, tau):
    """Hard one-hot sample and the soft weights used in the backward pass."""
    logits_row = np.asarray(logits_row, dtype=np.float64)
    g = sample_gumbel(rng, logits_row.shape)
    hard = np.zeros_like(logits_row)
    hard[np.argmax(logits_row + g)] = 1.0
    log_p = logits_row - _logsumexp(logits_row)
    z = (log_p + g) / tau
    z -= z.max()
    soft = np.exp(z)
    soft /= soft.sum()
    return hard, soft


def _logsumexp(v):
    m = v.max()
    return m + np.log(np.sum(np.exp(v - m)))


# ---------------------------------------------------------------------------
# one sampled circuit as a flat op list
# ---------------------------------------------------------------------------


def _sample_epoch(program, alpha_t, rng, tau, noise):
    """Draw the epoch's circuit (and noise trajectory) and its soft weights."""
    m, n, G = alpha_t.shape
    A = np.zeros((m, n), dtype=np.int64)
    soft = np.zeros((m, n, G))
    ops = []
    for step in program.steps:
        if isinstance(step, MixPosition):
            hard, h_soft = gumbel_sample_position(alpha_t[step.i, step.j], rng, tau)
            k = int(np.argmax(hard))
            A[step.i, step.j] = k
            soft[step.i, step.j] = h_soft
            ops.append(("pos", step, k))
        else:
            # frozen bit/phase-flip trajectory for this epoch
            for q in range(program.n_qubits):
                if noise.kind in (NoiseKind.BIT_FLIP, NoiseKind.BIT_PHASE_FLIP):
                    if rng.uniform() < noise.p:
                        ops.append(("flip", X, q))
                if noise.kind in (NoiseKind.PHASE_FLIP, NoiseKind.BIT_PHASE_FLIP):
                    if rng.uniform() < noise.p:
                        ops.append(("flip", Z, q))
    return A, soft, ops


def _forward_states(ops, gs, theta, psi0, n):
    """Evolve psi0 through the op list, keeping the input of every op."""
    states = np.empty((len(ops) + 1, psi0.size), dtype=np.complex128)
    states[0] = psi0
    psi = psi0
    for t, op in enumerate(ops):
        if op[0] == "flip":
            psi = apply_1q_vec(psi, op[1], op[2], n)
        else:
            _, step, k = op
            g = gs.entries[k]
            if g.kind == "I":
                pass
            elif g.kind == "CNOT":
                psi = apply_cnot_vec(psi, step.control, step.targets[g.offset - 1], n)
            else:
                psi = apply_1q_vec(psi, gs.unitary(k, theta[step.theta_idx]), step.control, n)
        states[t + 1] = psi
    return states


def _backward(ops, gs, theta, states, lam, n, d_theta=None, m_weights=None):
    """Adjoint walk; fills theta gradients and per-candidate weights.

    ``lam`` is dL/d(psi*) at the output.  A gate U contributes
    2 Re(lam^dagger dU psi_in) to its angle and, for the straight-through
    estimator, 2 Re(lam^dagger G_k psi_in) to candidate weight k.
    """
    for t in range(len(ops) - 1, -1, -1):
        op = ops[t]
        psi_in = states[t]
        if op[0] == "flip":
            lam = apply_1q_vec(lam, op[1], op[2], n)  # X, Z self-inverse
            continue
        _, step, k = op
        if m_weights is not None:
            row = m_weights[step.i, step.j]
            for kc in range(len(gs)):
                g = gs.entries[kc]
                if g.kind == "CNOT":
                    moved = apply_cnot_vec(psi_in, step.control,
                                           step.targets[g.offset - 1], n)
                else:
                    moved = apply_1q_vec(psi_in, gs.unitary(kc, theta[step.theta_idx]),
                                         step.control, n)
                row[kc] += 2.0 * np.real(np.vdot(lam, moved))
        g = gs.entries[k]
        if d_theta is not None and g.parameterized:
            dU = gs.dunitary(k, theta[step.theta_idx])
            moved = apply_1q_vec(psi_in, dU, step.control, n)
            d_theta[step.theta_idx] += 2.0 * np.real(np.vdot(lam, moved))
        if g.kind == "CNOT":
            lam = apply_cnot_vec(lam, step.control, step.targets[g.offset - 1], n)
        elif g.kind != "I":
            U = gs.unitary(k, theta[step.theta_idx])
            lam = apply_1q_vec(lam, U.conj().T, step.control, n)
    return lam


def _batch_pass(task, batch_idx, ops, gs, theta, n, want_theta, want_m, P_shape):
    """Task loss and requested gradients over one (possibly batched) input."""
    d_theta = np.zeros_like(theta) if want_theta else None
    m_weights = np.zeros(P_shape) if want_m else None
    if batch_idx is None:
        states = _forward_states(ops, gs, theta, task.initial_vec(), n)
        loss = task.loss_vec(states[-1])
        _backward(ops, gs, theta, states, task.adjoint_vec(states[-1]), n,
                  d_theta, m_weights)
        return loss, d_theta, m_weights
    # classification: mean BCE over the minibatch
    from .tasks.classify import bce_grad, bce_loss, prediction_from_vec
    preds = np.empty(len(batch_idx))
    all_states = []
    for pos, idx in enumerate(batch_idx):
        states = _forward_states(ops, gs, theta, task.train_states[idx].amplitudes, n)
        preds[pos] = prediction_from_vec(states[-1])
        all_states.append(states)
    labels = task.train_labels[batch_idx]
    loss = bce_loss(preds, labels)
    dldp = bce_grad(preds, labels)
    for pos, states in enumerate(all_states):
        psi = states[-1]
        lam = np.zeros_like(psi)
        lam[1::2] = dldp[pos] * psi[1::2]  # d p / d psi* on odd indices
        _backward(ops, gs, theta, states, lam, n, d_theta, m_weights)
    return loss, d_theta, m_weights


def qdarts_search(task, cfg: GumbelCfg, hyper: QdartsHyper, rng_init, rng_sample,
                  rng_batch=None):
    """Macro architecture search by Gumbel-softmax circuit sampling.

    Returns ``(architecture, theta, trace)`` where trace holds per-epoch
    series.  Requires a flip-type (or no) noise channel.
    """
    if hyper.noise.kind == NoiseKind.DEPOLARIZING:
        raise ValueError("state-vector search cannot model depolarizing noise")
    n = task.n_qubits
    program = build_macro_program(n, hyper.m, hyper.noise)
    gs = program.gateset
    G = len(gs)
    logits = init_logits(rng_init, hyper.m, n, G, hyper.hidden_units)
    theta = init_theta(rng_init, (hyper.m, n))
    opt_theta = AdamCosine(hyper.learning_rate, hyper.t_max, restart=hyper.restart)
    opt_alpha = AdamCosine(hyper.learning_rate, hyper.t_max, restart=hyper.restart)
    is_classify = hasattr(task, "train_states")

    trace = {"loss": [], "task_loss": [], "entropy": [], "learning_rate": []}
    for epoch in range(hyper.epochs):
        t_norm = epoch / hyper.epochs
        opt_theta.schedule_step = epoch
        opt_alpha.schedule_step = epoch
        lr_now = opt_theta.learning_rate()
        # one sampled circuit per update; classification takes one update
        # per minibatch of the epoch's pass, other tasks a single update
        if is_classify:
            update_batches = list(task.epoch_batches(rng_batch))
        else:
            update_batches = [None]

        losses, totals = [], []
        P = gate_probs(logits)
        for batch_idx in update_batches:
            alpha_t = logits.tensor()
            P = gate_probs(logits)
            A, soft, ops = _sample_epoch(program, alpha_t, rng_sample, cfg.tau,
                                         hyper.noise)

            # inner loop: gate angles on the frozen sampled circuit
            for _ in range(cfg.num_inner_iter):
                _, d_theta, _ = _batch_pass(task, batch_idx, ops, gs, theta, n,
                                            True, False, P.shape)
                d_theta += angle_penalty_grad(theta, hyper.s_theta)
                theta = opt_theta.step({"theta": theta}, {"theta": d_theta})["theta"]

            # one architecture update through the soft weights
            loss_a, _, m_w = _batch_pass(task, batch_idx, ops, gs, theta, n,
                                         False, True, P.shape)
            dz = (soft * (m_w - np.sum(m_w * soft, axis=-1, keepdims=True))) / cfg.tau
            d_alpha = dz - P * np.sum(dz, axis=-1, keepdims=True)
            d_alpha += entropy_term_grad(P, t_norm, hyper.entropy)
            params = logits.parameters()
            if logits.has_hidden:
                dH, dv = chain_alpha_to_hidden(d_alpha, logits)
                grads = {"hidden": dH, "hidden_vec": dv}
            else:
                grads = {"alpha": d_alpha}
            logits = logits.replace_parameters(opt_alpha.step(params, grads))
            losses.append(loss_a)
            totals.append(loss_a + entropy_term(P, t_norm, hyper.entropy)
                          + angle_penalty(theta, hyper.s_theta))

        trace["task_loss"].append(float(np.mean(losses)))
        trace["loss"].append(float(np.mean(totals)))
        trace["entropy"].append(float(np.sum(-np.sum(
            P * np.log(np.clip(P, 1e-300, None)), axis=-1))) / (P.shape[0] * P.shape[1] * np.log(G)))
        trace["learning_rate"].append(lr_now)

    return discretize(gate_probs(logits)), theta, trace
