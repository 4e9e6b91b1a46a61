"""Entropy and angle regularization, and the Adam/cosine optimizer stack."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .difftape import softmax_grad


@dataclass(frozen=True)
class EntropyScheduleCfg:
    """Sinusoidal entropy-weight schedule: s0 at t=0 rising to s1 at t=0.5,
    then held at s1 until t=1."""

    s0: float = 0.0
    s1: float = 0.1

    def __post_init__(self):
        if self.s1 <= 0:
            raise ValueError("s1 must be positive")


def schedule(t, cfg: EntropyScheduleCfg) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"normalized epoch t={t} outside [0, 1]")
    if t <= 0.5:
        return cfg.s0 + (cfg.s1 - cfg.s0) * np.sin(np.pi * t)
    return cfg.s1


def _entropies(P):
    logP = np.log(P, out=np.zeros_like(P), where=P > 0)
    return -np.sum(P * logP, axis=-1)


def entropy_term(P, t, cfg: EntropyScheduleCfg) -> float:
    """Scheduled, normalized mean entropy of the gate distributions.

    Equals s1 for uniform distributions once t >= 0.5 and 0 when every
    position is one-hot.
    """
    m, n, G = P.shape
    return schedule(t, cfg) * float(np.sum(_entropies(P))) / (m * n * np.log(G))


def entropy_term_grad(P, t, cfg: EntropyScheduleCfg) -> np.ndarray:
    """Gradient of entropy_term with respect to the logits."""
    m, n, G = P.shape
    coeff = schedule(t, cfg) / (m * n * np.log(G))
    logP = np.log(P, out=np.zeros_like(P), where=P > 0)
    dP = -coeff * (logP + 1.0)
    return softmax_grad(P, dP)


def angle_penalty(theta, s_theta) -> float:
    """Quadratic penalty on angles outside [-pi, pi]."""
    over = np.maximum(theta - np.pi, 0.0) + np.maximum(-theta - np.pi, 0.0)
    return s_theta * float(np.sum(over**2))


def angle_penalty_grad(theta, s_theta) -> np.ndarray:
    over = np.maximum(theta - np.pi, 0.0)
    under = np.maximum(-theta - np.pi, 0.0)
    return s_theta * 2.0 * (over - under)


@dataclass
class AdamCosine:
    """Adam with a cosine-annealed learning rate.

    eta(step) = eta_min + (eta_base - eta_min)(1 + cos(pi s / T_max)) / 2
    with s = step mod T_max when ``restart`` (warm restarts every T_max
    steps), else s = min(step, T_max).  By default the annealing follows
    the update counter; setting ``schedule_step`` decouples it (used when
    several minibatch updates share one epoch's learning rate).
    """

    eta_base: float
    t_max: int
    eta_min: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    restart: bool = True
    schedule_step: int | None = None
    step_count: int = field(default=0, init=False)
    _m: dict = field(default_factory=dict, init=False)
    _v: dict = field(default_factory=dict, init=False)

    def learning_rate(self, step=None) -> float:
        if step is None:
            step = self.schedule_step if self.schedule_step is not None else self.step_count
        s = step % self.t_max if self.restart else min(step, self.t_max)
        return self.eta_min + 0.5 * (self.eta_base - self.eta_min) * (
            1.0 + np.cos(np.pi * s / self.t_max))

    def step(self, params: dict, grads: dict) -> dict:
        """One joint update; returns a new dict of parameter arrays."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                bad = tuple(int(i) for i in np.argwhere(~np.isfinite(np.asarray(g)))[0])
                raise FloatingPointError(f"non-finite gradient for {name!r} at {bad}")
        eta = self.learning_rate()
        self.step_count += 1
        t = self.step_count
        out = {}
        for name, p in params.items():
            g = grads[name]
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            v = self._v[name]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name], self._v[name] = m, v
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            out[name] = p - eta * m_hat / (np.sqrt(v_hat) + self.eps)
        return out
