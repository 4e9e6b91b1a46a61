"""Independent oracles and the property-check suite behind ``mixqas verify``.

Everything here deliberately avoids the package's fused kernels: unitaries
are embedded with explicit Kronecker products, mixtures are enumerated
architecture by architecture, gradients are re-derived by central finite
differences, and cut counts come from a literal loop over partitions.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import densmat
from .densmat import DensityMatrix, NoiseSpec
from .difftape import backward, record_forward
from .regopt import EntropyScheduleCfg, angle_penalty, entropy_term
from .searchspace import (
    ArchLogits,
    MixPosition,
    SuperCircuitStructure,
    build_macro_program,
    build_micro_program,
    gate_probs,
    run_program,
)
from .tasks.maxcut import Graph, maxcut_hamiltonian

# ---------------------------------------------------------------------------
# dense kron-product circuit construction (oracle side)
# ---------------------------------------------------------------------------


def embed_1q(U, q, n):
    """Kronecker embedding of a 2x2 gate on qubit q (qubit 0 = LSB)."""
    M = np.eye(1, dtype=np.complex128)
    for k in range(n - 1, -1, -1):
        M = np.kron(M, U if k == q else np.eye(2))
    return M


def cnot_matrix(n, control, target):
    N = 1 << n
    M = np.zeros((N, N), dtype=np.complex128)
    for k in range(N):
        M[k ^ (((k >> control) & 1) << target), k] = 1.0
    return M


def _step_unitaries(step, gateset, theta, n):
    """Full 2^n unitaries of every candidate at one program step."""
    out = []
    for k, g in enumerate(gateset.entries):
        if g.kind == "CNOT":
            out.append(cnot_matrix(n, step.control, step.targets[g.offset - 1]))
        else:
            out.append(embed_1q(gateset.unitary(k, theta[step.theta_idx]),
                                step.control, n))
    return out


def enumerate_mixture(program, P, theta, rho0):
    """Explicit sum over the search space: sum_A P_A U_A rho U_A^dagger.

    Program steps are enumerated independently, which for macro programs
    is exactly the architecture space; for micro programs each subcircuit
    copy's gate choice is enumerated independently (the semantics of
    applying the shared-distribution channel once per copy).
    """
    steps = [s for s in program.steps if isinstance(s, MixPosition)]
    step_unitaries = [_step_unitaries(s, program.gateset, theta, program.n_qubits)
                      for s in steps]
    G = len(program.gateset)
    out = np.zeros_like(rho0)
    for choice in itertools.product(range(G), repeat=len(steps)):
        prob = 1.0
        U = np.eye(rho0.shape[0], dtype=np.complex128)
        for s, mats, k in zip(steps, step_unitaries, choice):
            prob *= P[s.i, s.j, k]
            U = mats[k] @ U
        out += prob * (U @ rho0 @ U.conj().T)
    return out


def brute_force_cut_counts(graph: Graph):
    """Cut size of every partition by direct bit comparison."""
    n = graph.n_vertices
    counts = np.zeros(1 << n)
    for k in range(1 << n):
        bits = [(k >> q) & 1 for q in range(n)]
        counts[k] = sum(1 for u, v in graph.edges if bits[u] != bits[v])
    return counts


# ---------------------------------------------------------------------------
# randomized setups and the finite-difference oracle
# ---------------------------------------------------------------------------


def random_density(rng, n, rank=2):
    """Random mixed state: a convex mixture of Haar-ish pure states."""
    N = 1 << n
    weights = rng.dirichlet(np.ones(rank))
    mat = np.zeros((N, N), dtype=np.complex128)
    for w in weights:
        v = rng.normal(size=N) + 1j * rng.normal(size=N)
        v /= np.linalg.norm(v)
        mat += w * np.outer(v, np.conj(v))
    return mat


def random_setup(rng, micro=False, hidden=False, with_noise=True,
                 max_n=3, max_m=5):
    """A random program plus parameters, loss definition and input state."""
    if micro:
        n = int(rng.integers(2, max_n + 1))
        n_s = 2
        n_c = int(rng.integers(1, 3))
        rows = np.array([rng.choice(n, size=n_s, replace=False) for _ in range(n_c)])
        structure = SuperCircuitStructure(rows, n)
        m = int(rng.integers(1, 3))
        noise = _random_noise(rng) if with_noise else NoiseSpec()
        program = build_micro_program(structure, m, noise)
        theta_shape = (n_c, m, n_s)
        n_loc = n_s
    else:
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(1, max_m + 1))
        noise = _random_noise(rng) if with_noise else NoiseSpec()
        program = build_macro_program(n, m, noise)
        theta_shape = (m, n)
        n_loc = n
    G = len(program.gateset)
    if hidden:
        K = 2 * G
        logits = ArchLogits(hidden=rng.normal(0, 0.5, size=(m, n_loc, G, K)),
                            hidden_vec=rng.normal(0, 0.5, size=(m, n_loc, K)))
    else:
        logits = ArchLogits(alpha=rng.normal(0, 0.7, size=(m, n_loc, G)))
    theta = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, size=theta_shape)
    rho0 = random_density(rng, n)

    if rng.uniform() < 0.5:
        v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        v /= np.linalg.norm(v)
        task_loss = lambda mat: 1.0 - float(np.real(np.einsum("i,ij,j->", np.conj(v), mat, v)))
        seed_fn = lambda mat: -np.outer(v, np.conj(v))
    else:
        h = rng.normal(size=1 << n)
        task_loss = lambda mat: float(np.sum(h * np.real(np.diagonal(mat))))
        seed_fn = lambda mat: np.diag(h.astype(np.complex128))
    t_norm = float(rng.uniform(0, 1))
    ent_cfg = EntropyScheduleCfg(s0=-0.05, s1=0.1)
    s_theta = 0.01
    return program, logits, theta, rho0, task_loss, seed_fn, t_norm, ent_cfg, s_theta


def _random_noise(rng):
    kind = rng.choice([densmat.NoiseKind.NONE, densmat.NoiseKind.BIT_FLIP,
                       densmat.NoiseKind.PHASE_FLIP, densmat.NoiseKind.BIT_PHASE_FLIP,
                       densmat.NoiseKind.DEPOLARIZING])
    if kind == densmat.NoiseKind.NONE:
        return NoiseSpec()
    return NoiseSpec(str(kind), float(rng.uniform(0.01, 0.15)))


def total_loss_fn(setup):
    """Scalar loss closure over raw parameter arrays (for FD probing)."""
    program, logits, _, rho0, task_loss, _, t_norm, ent_cfg, s_theta = setup

    def evaluate(arrays):
        lg = _logits_like(logits, arrays)
        P = gate_probs(lg)
        out = run_program(program, P, arrays["theta"], rho0)
        return (task_loss(out) + entropy_term(P, t_norm, ent_cfg)
                + angle_penalty(arrays["theta"], s_theta))

    return evaluate


def _logits_like(logits, arrays):
    if logits.has_hidden:
        return ArchLogits(hidden=arrays["hidden"], hidden_vec=arrays["hidden_vec"])
    return ArchLogits(alpha=arrays["alpha"])


def analytic_gradients(setup):
    """Gradients of the same total loss via the tape plus analytic terms."""
    from .difftape import chain_alpha_to_hidden
    from .regopt import angle_penalty_grad, entropy_term_grad

    program, logits, theta, rho0, task_loss, seed_fn, t_norm, ent_cfg, s_theta = setup
    out, tape = record_forward(program, logits, theta, rho0)
    bundle = backward(tape, seed_fn(out))
    P = gate_probs(logits)
    d_alpha = bundle.d_alpha + entropy_term_grad(P, t_norm, ent_cfg)
    d_theta = bundle.d_theta + angle_penalty_grad(theta, s_theta)
    grads = {"theta": d_theta}
    if logits.has_hidden:
        dH, dv = chain_alpha_to_hidden(d_alpha, logits)
        grads["hidden"], grads["hidden_vec"] = dH, dv
    else:
        grads["alpha"] = d_alpha
    return grads


def fd_gradient_worst_error(setup, h=1e-4, rel_tol=1e-5, abs_floor=1e-8,
                            max_entries=None, rng=None):
    """Compare every analytic gradient entry against central differences.

    Returns (worst_excess, n_checked) where worst_excess is the largest
    value of |analytic - fd| - max(abs_floor, rel_tol * |fd|); <= 0 passes.
    """
    program, logits, theta = setup[0], setup[1], setup[2]
    arrays = {"theta": np.array(theta, dtype=np.float64)}
    if logits.has_hidden:
        arrays["hidden"] = np.array(logits.hidden)
        arrays["hidden_vec"] = np.array(logits.hidden_vec)
    else:
        arrays["alpha"] = np.array(logits.alpha)
    loss = total_loss_fn(setup)
    grads = analytic_gradients(setup)

    worst = -np.inf
    checked = 0
    for name, arr in arrays.items():
        flat = arr.ravel()
        indices = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        for i in indices:
            orig = flat[i]
            flat[i] = orig + h
            up = loss(arrays)
            flat[i] = orig - h
            down = loss(arrays)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            an = grads[name].ravel()[i]
            excess = abs(an - fd) - max(abs_floor, rel_tol * abs(fd))
            worst = max(worst, excess)
            checked += 1
    return worst, checked


# ---------------------------------------------------------------------------
# the `verify` check suite
# ---------------------------------------------------------------------------


def check_enumeration(rng, cases=8, tol=1e-10):
    worst = 0.0
    for _ in range(cases):
        micro = bool(rng.uniform() < 0.4)
        setup = random_setup(rng, micro=micro, with_noise=False,
                             max_n=3 if micro else 2, max_m=2)
        program, logits, theta, rho0 = setup[0], setup[1], setup[2], setup[3]
        n_steps = sum(isinstance(s, MixPosition) for s in program.steps)
        if n_steps > 6:
            continue
        P = gate_probs(logits)
        fwd = run_program(program, P, theta, rho0)
        oracle = enumerate_mixture(program, P, theta, rho0)
        worst = max(worst, float(np.abs(fwd - oracle).max()))
    return worst <= tol, f"max |forward - enumeration| = {worst:.3e}"


def check_gradients(rng, programs=10):
    worst = -np.inf
    for _ in range(programs):
        setup = random_setup(rng, micro=bool(rng.uniform() < 0.3),
                             hidden=bool(rng.uniform() < 0.25))
        excess, _ = fd_gradient_worst_error(setup, max_entries=40, rng=rng)
        worst = max(worst, excess)
    return worst <= 0.0, f"worst fd excess = {worst:.3e}"


def check_cptp(rng, n_ops=500, n=3):
    from .searchspace import apply_mix_step

    rho = DensityMatrix(n, random_density(rng, n))
    program = build_macro_program(n, 1)
    for _ in range(n_ops):
        kind = rng.choice(["mix", "gate", "cnot", "noise"])
        if kind == "mix":
            step = program.steps[int(rng.integers(0, n))]
            P = gate_probs(ArchLogits(alpha=rng.normal(0, 1, size=(1, n, len(program.gateset)))))
            theta = rng.uniform(-np.pi, np.pi, size=(1, n))
            rho = densmat.DensityMatrix(n, apply_mix_step(rho.mat, step, P, theta, program),
                                        channel_count=rho.channel_count + 1)
        elif kind == "gate":
            U = [densmat.rx, densmat.ry, densmat.rz][int(rng.integers(0, 3))](rng.uniform(-np.pi, np.pi))
            rho = densmat.apply_1q_gate(rho, U, int(rng.integers(0, n)))
        elif kind == "cnot":
            c, t = rng.choice(n, size=2, replace=False)
            rho = densmat.apply_cnot(rho, int(c), int(t))
        else:
            rho = densmat.apply_noise(rho, _random_noise(rng))
    defect = float(np.abs(rho.mat - rho.mat.conj().T).max())
    tr_err = abs(float(np.real(np.trace(rho.mat))) - 1.0)
    eig_min = float(np.linalg.eigvalsh(rho.mat).min())
    ok = defect < 1e-9 and tr_err < 1e-9 and eig_min >= -1e-8
    # full-strength depolarizing maps any state to the maximally mixed one
    full = densmat.apply_noise(rho, NoiseSpec(densmat.NoiseKind.DEPOLARIZING, 1.0))
    dep_err = float(np.abs(full.mat - np.eye(1 << n) / (1 << n)).max())
    ok = ok and dep_err <= 1e-12
    return ok, (f"trace err {tr_err:.2e}, herm defect {defect:.2e}, "
                f"min eig {eig_min:.2e}, depol(1) err {dep_err:.2e}")


def check_maxcut_hamiltonian(rng, graphs=5, max_n=7):
    from .tasks.maxcut import erdos_renyi

    for _ in range(graphs):
        n = int(rng.integers(3, max_n + 1))
        g = erdos_renyi(n, float(rng.uniform(0.3, 0.8)), rng)
        if np.any(maxcut_hamiltonian(g) != brute_force_cut_counts(g)):
            return False, f"mismatch on n={n} graph {g.edges}"
    return True, f"{graphs} random graphs match the brute-force counter"


def check_regularizers():
    cfg = EntropyScheduleCfg(s0=0.0, s1=0.1)
    P = np.full((3, 2, 5), 0.2)
    ok = abs(entropy_term(P, 0.75, cfg) - 0.1) < 1e-12
    ok = ok and abs(angle_penalty(np.array([2 * np.pi]), 0.01) - 0.01 * np.pi**2) < 1e-12
    onehot = np.zeros((1, 1, 5))
    onehot[..., 2] = 1.0
    ok = ok and abs(entropy_term(onehot, 0.9, cfg)) < 1e-12
    return ok, "uniform/one-hot entropy and angle-penalty values"


def run_all(seed=2024, verbose=True):
    """Run every check; returns True when all pass."""
    checks = [
        ("enumeration-equivalence", lambda: check_enumeration(np.random.default_rng(seed))),
        ("gradient-finite-difference", lambda: check_gradients(np.random.default_rng(seed + 1))),
        ("cptp-500-channels", lambda: check_cptp(np.random.default_rng(seed + 2))),
        ("maxcut-brute-force", lambda: check_maxcut_hamiltonian(np.random.default_rng(seed + 3))),
        ("regularizer-values", check_regularizers),
    ]
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok = all_ok and ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
