"""Low-level kernels for gate-mixture channels on density matrices.

Layout conventions used everywhere in this package:

* qubit 0 is the least significant bit of the computational-basis index
  (state ``|...b1 b0>`` has index ``sum b_q 2^q``);
* a density matrix is a C-contiguous complex128 ``(N, N)`` array, ``N = 2^n``;
* density matrices passed to these kernels must be Hermitian.  The kernels
  compute the upper triangle only and mirror it, which both halves the work
  and keeps Hermiticity exact in floating point.

The mixture channel at one grid position is

    out = sum_g  P_g  U_g  rho  U_g^dagger

where the single-qubit candidates (identity and the Pauli rotations, all
acting on the same qubit ``q``) are pre-summed into a single 4x4 block
operator ``M4`` acting on the (row bit, column bit) pair of qubit ``q``,
indexed ``M4[2a + a', 2b + b'] = sum_g P_g U_g[a, b] conj(U_g[a', b'])``,
and each CNOT candidate (control ``q``, target ``targets[d]``) is realized
by XOR index arithmetic.

Two implementations are provided: numba-compiled fused loops (fast path)
and a pure-numpy fallback.  ``set_backend`` switches between them; results
agree to ~1e-14 but are not bit-identical across backends, so a run must
stick to one backend for reproducibility (the default is stable within an
installation).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_BACKEND = "numba" if _HAVE_NUMBA else "numpy"

NO_TARGETS = np.empty(0, dtype=np.int64)
NO_PROBS = np.empty(0, dtype=np.float64)

# index swap (a, a') -> (a', a) on the 4-element block axis, used to
# complete symmetric reductions taken over the upper triangle only
_SWAP = np.array([0, 2, 1, 3])


def set_backend(name):
    """Select 'numba', 'numpy', or 'auto'. Returns the active backend name."""
    global _BACKEND
    if name == "auto":
        name = "numba" if _HAVE_NUMBA else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _BACKEND = name
    return _BACKEND


def get_backend():
    return _BACKEND


def cnot_permutation(n, control, target):
    """Basis-index permutation of CNOT(control, target) on n qubits."""
    if control == target:
        raise ValueError("CNOT control and target must differ")
    if not (0 <= control < n and 0 <= target < n):
        raise ValueError(f"qubit index out of range for n={n}")
    k = np.arange(1 << n, dtype=np.int64)
    return k ^ (((k >> control) & 1) << target)


# ---------------------------------------------------------------------------
# numba fast path
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _mix_apply_nb(rho, M4, q, targets, pvec, out):
        N = rho.shape[0]
        mask = 1 << q
        nc = targets.shape[0]
        for r in range(N):
            rb = (r >> q) & 1
            r0 = r & ~mask
            r1 = r | mask
            for c in range(r, N):
                cb = (c >> q) & 1
                a = 2 * rb + cb
                c0 = c & ~mask
                c1 = c | mask
                acc = (M4[a, 0] * rho[r0, c0] + M4[a, 1] * rho[r0, c1]
                       + M4[a, 2] * rho[r1, c0] + M4[a, 3] * rho[r1, c1])
                for d in range(nc):
                    t = 1 << targets[d]
                    pr = r ^ t if rb else r
                    pc = c ^ t if cb else c
                    acc += pvec[d] * rho[pr, pc]
                out[r, c] = acc
                out[c, r] = acc.conjugate()
        return out

    @njit(cache=True)
    def _mix_backward_nb(grad, rho, M4a, q, targets, pvec, g_prev, W, s):
        """Fused adjoint propagation and gradient reductions.

        g_prev = sum_g P_g U_g^dagger grad U_g (via M4a and the CNOTs);
        W and s accumulate the upper-triangle halves of the reduced
        overlaps of grad with rho (see mix_backward for their definition).
        """
        N = rho.shape[0]
        mask = 1 << q
        nc = targets.shape[0]
        tmask = np.empty(nc, np.int64)
        for d in range(nc):
            tmask[d] = 1 << targets[d]
        prs = np.empty(nc, np.int64)
        for r in range(N):
            rb = (r >> q) & 1
            r0 = r & ~mask
            r1 = r | mask
            for d in range(nc):
                prs[d] = r ^ tmask[d] if rb else r
            # diagonal entry: counted with half weight in the reductions
            a = 3 if rb else 0
            acc = (M4a[a, 0] * grad[r0, r0] + M4a[a, 1] * grad[r0, r1]
                   + M4a[a, 2] * grad[r1, r0] + M4a[a, 3] * grad[r1, r1])
            gs = 0.5 * grad[r, r].conjugate()
            W[a, 0] += gs * rho[r0, r0]
            W[a, 1] += gs * rho[r0, r1]
            W[a, 2] += gs * rho[r1, r0]
            W[a, 3] += gs * rho[r1, r1]
            for d in range(nc):
                pc = prs[d]
                acc += pvec[d] * grad[prs[d], pc]
                s[d] += gs * rho[prs[d], pc]
            g_prev[r, r] = acc
            for c in range(r + 1, N):
                cb = (c >> q) & 1
                a = 2 * rb + cb
                c0 = c & ~mask
                c1 = c | mask
                acc = (M4a[a, 0] * grad[r0, c0] + M4a[a, 1] * grad[r0, c1]
                       + M4a[a, 2] * grad[r1, c0] + M4a[a, 3] * grad[r1, c1])
                g = grad[r, c].conjugate()
                W[a, 0] += g * rho[r0, c0]
                W[a, 1] += g * rho[r0, c1]
                W[a, 2] += g * rho[r1, c0]
                W[a, 3] += g * rho[r1, c1]
                if cb:
                    for d in range(nc):
                        pc = c ^ tmask[d]
                        acc += pvec[d] * grad[prs[d], pc]
                        s[d] += g * rho[prs[d], pc]
                else:
                    for d in range(nc):
                        acc += pvec[d] * grad[prs[d], c]
                        s[d] += g * rho[prs[d], c]
                g_prev[r, c] = acc
                g_prev[c, r] = acc.conjugate()
        return g_prev


# ---------------------------------------------------------------------------
# pure-numpy fallback
# ---------------------------------------------------------------------------


def _blocked4(mat, q, n):
    """(4, N^2/4) view of the (row bit, col bit) blocks of qubit q. Copies."""
    hi, lo = 1 << (n - 1 - q), 1 << q
    b = mat.reshape(hi, 2, lo, hi, 2, lo)
    return np.moveaxis(b, (1, 4), (0, 1)).reshape(4, -1)


def _unblock4(blocked, q, n, N):
    hi, lo = 1 << (n - 1 - q), 1 << q
    b = blocked.reshape(2, 2, hi, lo, hi, lo)
    return np.moveaxis(b, (0, 1), (1, 4)).reshape(N, N)


def _cnot_perms(n, q, targets):
    k = np.arange(1 << n, dtype=np.int64)
    cbit = (k >> q) & 1
    return [k ^ (cbit << int(t)) for t in targets]


def _mix_apply_np(rho, M4, q, targets, pvec, out):
    n = rho.shape[0].bit_length() - 1
    res = _unblock4(M4 @ _blocked4(rho, q, n), q, n, rho.shape[0])
    for p_d, perm in zip(pvec, _cnot_perms(n, q, targets)):
        res += p_d * rho[np.ix_(perm, perm)]
    # enforce exact Hermiticity, as the fused kernel does
    np.conjugate(res.T, out=out)
    out += res
    out *= 0.5
    return out


def _mix_backward_np(grad, rho, M4a, q, targets, pvec, g_prev, W, s):
    n = rho.shape[0].bit_length() - 1
    _mix_apply_np(grad, M4a, q, targets, pvec, g_prev)
    gb = _blocked4(grad, q, n)
    rb = _blocked4(rho, q, n)
    W += 0.5 * (np.conj(gb) @ rb.T)
    for d, perm in enumerate(_cnot_perms(n, q, targets)):
        s[d] = 0.5 * np.vdot(grad, rho[np.ix_(perm, perm)])
    return g_prev


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def mix_apply(rho, M4, q, targets=NO_TARGETS, pvec=NO_PROBS, out=None):
    """Apply ``sum_g P_g U_g rho U_g^dagger`` for one mixture position.

    ``M4`` carries the pre-summed single-qubit block operator on qubit
    ``q``; ``targets``/``pvec`` carry the CNOT target qubits and their
    probabilities.  ``rho`` must be Hermitian; ``out`` must not alias it.
    """
    if out is None:
        out = np.empty_like(rho)
    if _BACKEND == "numba":
        return _mix_apply_nb(rho, np.ascontiguousarray(M4), q, targets, pvec, out)
    return _mix_apply_np(rho, M4, q, targets, pvec, out)


def mix_backward(grad, rho, M4_adj, q, targets=NO_TARGETS, pvec=NO_PROBS):
    """Adjoint state and gradient overlaps for one mixture position.

    Returns ``(g_prev, W, s)``: the pulled-back adjoint ``sum_g P_g
    U_g^dagger grad U_g`` (``M4_adj`` holds the single-qubit part), the
    reduced overlap tensor ``W[2a+a', 2b+b'] = sum conj(grad[(a,i),(a',j)])
    rho[(b,i),(b',j)]``, and the per-CNOT overlaps ``s[d] = Re sum
    conj(grad) (C_d rho C_d)``.  grad and rho must be Hermitian.
    """
    g_prev = np.empty_like(grad)
    Wh = np.zeros((4, 4), dtype=np.complex128)
    sh = np.zeros(len(targets), dtype=np.complex128)
    if _BACKEND == "numba":
        _mix_backward_nb(grad, rho, np.ascontiguousarray(M4_adj), q,
                         targets, pvec, g_prev, Wh, sh)
    else:
        _mix_backward_np(grad, rho, M4_adj, q, targets, pvec, g_prev, Wh, sh)
    W = Wh + np.conj(Wh[np.ix_(_SWAP, _SWAP)])
    s = 2.0 * np.real(sh)
    return g_prev, W, s


def block_operator(unitaries, probs):
    """Pre-sum single-qubit candidates into the 4x4 block operator."""
    U = np.asarray(unitaries)
    M4 = np.einsum("k,kab,kcd->acbd", np.asarray(probs), U, np.conj(U))
    return np.ascontiguousarray(M4.reshape(4, 4))


def block_overlaps(W, left, right):
    """Re sum_over_blocks W * (left_k x conj(right_k)) for stacked 2x2s."""
    w4 = W.reshape(2, 2, 2, 2)
    return np.real(np.einsum("kab,kcd,acbd->k", np.asarray(left),
                             np.conj(np.asarray(right)), w4))
