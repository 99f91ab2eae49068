"""Compiled inner loop of the epsilon-constrained DE solver.

Everything here is numba-jitted and works on plain float64 arrays; validation,
configuration handling and result packaging live in solver.py.  The kernel
owns the full evaluation budget accounting, so a single compiled call runs one
complete solve deterministically from its integer seed.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OBJ_SPHERE = 0
OBJ_ACKLEY = 1
OBJ_ROSENBROCK = 2
OBJ_SCHAFFER = 3

STATUS_EXHAUSTED = 0
STATUS_SOLVED = 1

_E = float(np.exp(1.0))
_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _objective(obj_id, x):
    n = x.size
    if obj_id == OBJ_SPHERE:
        s = 0.0
        for i in range(n):
            s += x[i] * x[i]
        return s
    if obj_id == OBJ_ACKLEY:
        s = 0.0
        c = 0.0
        for i in range(n):
            s += x[i] * x[i]
            c += math.cos(_TWO_PI * x[i])
        return ((20.0 - 20.0 * math.exp(-0.2 * math.sqrt(s / n)))
                + (_E - math.exp(c / n)))
    if obj_id == OBJ_ROSENBROCK:
        s = 0.0
        for i in range(n - 1):
            yi = x[i] + 1.0
            yj = x[i + 1] + 1.0
            d = yj - yi * yi
            s += 100.0 * d * d + x[i] * x[i]
        return s
    # Schaffer F6 summed over consecutive coordinate pairs
    s = 0.0
    for i in range(n - 1):
        t = x[i] * x[i] + x[i + 1] * x[i + 1]
        sn = math.sin(math.sqrt(t))
        den = 1.0 + 0.001 * t
        s += 0.5 + (sn * sn - 0.5) / (den * den)
    return s


@njit(cache=True)
def _constraint_values(x, lin_a, lin_b, quad_q, quad_l, quad_b, out):
    """Fill `out` with g_r(x), linear constraints first, then quadratics."""
    n = x.size
    kl = lin_b.size
    for r in range(kl):
        g = lin_b[r]
        for j in range(n):
            g += lin_a[r, j] * x[j]
        out[r] = g
    for r in range(quad_b.size):
        g = quad_b[r]
        for j in range(n):
            g += quad_q[r, j] * x[j] * x[j] + quad_l[r, j] * x[j]
        out[kl + r] = g


@njit(cache=True)
def _positive_sum(values):
    s = 0.0
    for i in range(values.size):
        if values[i] > 0.0:
            s += values[i]
    return s


@njit(cache=True)
def _heap_worse(phit, f, a, b):
    """Is archive entry a worse than b under the current comparison?"""
    if phit[a] != phit[b]:
        return phit[a] > phit[b]
    return f[a] > f[b]


@njit(cache=True)
def _heap_siftdown(heap, phit, f, root, size):
    while True:
        child = 2 * root + 1
        if child >= size:
            return
        if child + 1 < size and _heap_worse(phit, f, heap[child + 1], heap[child]):
            child += 1
        if _heap_worse(phit, f, heap[child], heap[root]):
            heap[root], heap[child] = heap[child], heap[root]
            root = child
        else:
            return


@njit(cache=True)
def _heap_build(heap, phit, f, size):
    """Max-heap of archive indices, worst entry at the root."""
    for i in range(size):
        heap[i] = i
    for root in range(size // 2 - 1, -1, -1):
        _heap_siftdown(heap, phit, f, root, size)


@njit(cache=True)
def _gradient_step(x, g_values, lin_a, quad_q, quad_l, lower, upper):
    """One repair step x <- clip(x - J^+ C) on the violated subsystem.

    Returns False when no constraint is violated or every violated gradient
    is zero, in which case x is left untouched.
    """
    n = x.size
    k = g_values.size
    kl = lin_a.shape[0]
    m = 0
    for r in range(k):
        if g_values[r] > 0.0:
            m += 1
    if m == 0:
        return False
    jac = np.empty((m, n))
    c = np.empty(m)
    row = 0
    for r in range(k):
        if g_values[r] > 0.0:
            c[row] = g_values[r]
            if r < kl:
                for j in range(n):
                    jac[row, j] = lin_a[r, j]
            else:
                for j in range(n):
                    jac[row, j] = 2.0 * quad_q[r - kl, j] * x[j] + quad_l[r - kl, j]
            row += 1
    nonzero = False
    for i in range(m):
        for j in range(n):
            if jac[i, j] != 0.0:
                nonzero = True
                break
        if nonzero:
            break
    if not nonzero:
        return False
    # Min-norm solve of J dx = C.  The Gram path equals the pseudo-inverse
    # when J has full row rank; otherwise fall back to lstsq.  The one- and
    # two-row systems dominate and get closed forms.
    if m == 1:
        s = 0.0
        for j in range(n):
            s += jac[0, j] * jac[0, j]
        scale = c[0] / s
        dx = np.empty(n)
        for j in range(n):
            dx[j] = jac[0, j] * scale
    elif m == 2:
        g11 = 0.0
        g12 = 0.0
        g22 = 0.0
        for j in range(n):
            g11 += jac[0, j] * jac[0, j]
            g12 += jac[0, j] * jac[1, j]
            g22 += jac[1, j] * jac[1, j]
        det = g11 * g22 - g12 * g12
        if det > 1e-12 * g11 * g22:
            y0 = (g22 * c[0] - g12 * c[1]) / det
            y1 = (g11 * c[1] - g12 * c[0]) / det
            dx = np.empty(n)
            for j in range(n):
                dx[j] = jac[0, j] * y0 + jac[1, j] * y1
        else:
            dx, _, _, _ = np.linalg.lstsq(jac, c)
    else:
        gram = jac @ jac.T
        det = np.linalg.det(gram)
        diag_prod = 1.0
        for i in range(m):
            diag_prod *= gram[i, i]
        if det > 1e-12 * diag_prod and diag_prod > 0.0:
            dx = jac.T @ np.linalg.solve(gram, c)
        else:
            dx, _, _, _ = np.linalg.lstsq(jac, c)
    for j in range(n):
        v = x[j] - dx[j]
        if v < lower[j]:
            v = lower[j]
        elif v > upper[j]:
            v = upper[j]
        x[j] = v
    return True


@njit(cache=True)
def solve_kernel(
    obj_id,
    lin_a,
    lin_b,
    quad_q,
    quad_l,
    quad_b,
    lower,
    upper,
    pop_size,
    archive_size,
    generations,
    crossover_rate,
    scale_factor,
    control_generation,
    level_fraction,
    grad_rate,
    grad_repeats,
    schedule_exponent,
    fen_max,
    tol,
    seed,
    record_history,
):
    """Run one complete epsilon-constrained DE solve.

    Returns (status, fen, best_x, best_f, best_phi, eps_trace, trace_len,
    hist_f, hist_phi, hist_len).  eps_trace[t] is the comparison level used
    in generation t; hist_* snapshots the population objective/violation
    after initialization and after each generation when record_history is
    nonzero.
    """
    np.random.seed(seed)
    n = lower.size
    k = lin_b.size + quad_b.size
    N = pop_size
    M = archive_size

    fen = 0
    best_x = np.zeros(n)
    best_f = np.inf
    best_phi = np.inf
    solved = False

    eps_trace = np.zeros(generations)
    trace_len = 0
    if record_history != 0:
        hist_f = np.zeros((generations + 1, N))
        hist_phi = np.zeros((generations + 1, N))
    else:
        hist_f = np.zeros((1, 1))
        hist_phi = np.zeros((1, 1))
    hist_len = 0

    # Archive of uniform samples; doubles as the pool the initial
    # population is drawn from.
    ax = np.empty((M, n))
    af = np.empty(M)
    aphi = np.empty(M)
    g_buf = np.empty(k)
    filled = 0
    for i in range(M):
        if fen >= fen_max or solved:
            break
        for j in range(n):
            ax[i, j] = lower[j] + np.random.random() * (upper[j] - lower[j])
        f = _objective(obj_id, ax[i])
        _constraint_values(ax[i], lin_a, lin_b, quad_q, quad_l, quad_b, g_buf)
        phi = _positive_sum(g_buf)
        af[i] = f
        aphi[i] = phi
        filled = i + 1
        fen += 1
        if phi < best_phi or (phi == best_phi and f < best_f):
            best_phi = phi
            best_f = f
            for j in range(n):
                best_x[j] = ax[i, j]
            if phi == 0.0 and abs(f) <= tol:
                solved = True

    if solved or filled < M or fen >= fen_max:
        status = STATUS_SOLVED if solved else STATUS_EXHAUSTED
        return (status, fen, best_x, best_f, best_phi, eps_trace, trace_len,
                hist_f, hist_phi, hist_len)

    # Initial comparison level: violation of the ceil(q * M)-th best
    # archive member ranked by violation alone.
    rank = int(math.ceil(level_fraction * M - 1e-12))
    if rank < 1:
        rank = 1
    if rank > M:
        rank = M
    sorted_phi = np.sort(aphi)
    eps_zero = sorted_phi[rank - 1]

    # Population: best N archive members under the eps_zero comparison,
    # ties broken by insertion order via two stable sorts.
    phi_tilde = np.empty(M)
    for i in range(M):
        phi_tilde[i] = aphi[i] if aphi[i] > eps_zero else 0.0
    by_f = np.argsort(af, kind="mergesort")
    by_phi = np.argsort(phi_tilde[by_f], kind="mergesort")
    order = by_f[by_phi]
    px = np.empty((N, n))
    pf = np.empty(N)
    pphi = np.empty(N)
    for i in range(N):
        src = order[i]
        for j in range(n):
            px[i, j] = ax[src, j]
        pf[i] = af[src]
        pphi[i] = aphi[src]

    if record_history != 0:
        for i in range(N):
            hist_f[0, i] = pf[i]
            hist_phi[0, i] = pphi[i]
        hist_len = 1

    trial = np.empty(n)
    heap = np.empty(M, dtype=np.int64)
    aphit = np.empty(M)
    for t in range(generations):
        if solved or fen >= fen_max:
            break
        if t < control_generation:
            eps = eps_zero * (1.0 - t / control_generation) ** schedule_exponent
        else:
            eps = 0.0
        eps_trace[t] = eps
        trace_len = t + 1
        # the archive worst depends on eps, so rebuild the heap per generation
        for i in range(M):
            aphit[i] = aphi[i] if aphi[i] > eps else 0.0
        _heap_build(heap, aphit, af, M)
        for i in range(N):
            if solved or fen >= fen_max:
                break
            r1 = np.random.randint(0, N)
            while r1 == i:
                r1 = np.random.randint(0, N)
            r2 = np.random.randint(0, N)
            while r2 == i or r2 == r1:
                r2 = np.random.randint(0, N)
            r3 = np.random.randint(0, N)
            while r3 == i or r3 == r1 or r3 == r2:
                r3 = np.random.randint(0, N)

            # exponential crossover: contiguous wrapping block, length
            # grows while draws stay within the crossover rate
            start = np.random.randint(0, n)
            length = 1
            while length < n and np.random.random() <= crossover_rate:
                length += 1
            for j in range(n):
                trial[j] = px[i, j]
            for m in range(length):
                j = (start + m) % n
                v = px[r3, j] + scale_factor * (px[r1, j] - px[r2, j])
                if v < lower[j]:
                    v = lower[j]
                elif v > upper[j]:
                    v = upper[j]
                trial[j] = v

            f = _objective(obj_id, trial)
            _constraint_values(trial, lin_a, lin_b, quad_q, quad_l, quad_b, g_buf)
            phi = _positive_sum(g_buf)
            fen += 1
            if phi < best_phi or (phi == best_phi and f < best_f):
                best_phi = phi
                best_f = f
                for j in range(n):
                    best_x[j] = trial[j]
                if phi == 0.0 and abs(f) <= tol:
                    solved = True
            if solved:
                break

            # gradient-based repair of infeasible children
            if phi > 0.0 and grad_repeats > 0 and np.random.random() < grad_rate:
                for _rep in range(grad_repeats):
                    if not _gradient_step(trial, g_buf, lin_a, quad_q, quad_l,
                                          lower, upper):
                        break
                    if fen >= fen_max:
                        break
                    f = _objective(obj_id, trial)
                    _constraint_values(trial, lin_a, lin_b, quad_q, quad_l,
                                       quad_b, g_buf)
                    phi = _positive_sum(g_buf)
                    fen += 1
                    if phi < best_phi or (phi == best_phi and f < best_f):
                        best_phi = phi
                        best_f = f
                        for j in range(n):
                            best_x[j] = trial[j]
                        if phi == 0.0 and abs(f) <= tol:
                            solved = True
                    if solved or phi == 0.0:
                        break
                if solved:
                    break

            # survivor selection: child replaces parent unless strictly
            # worse under the current eps comparison
            cp = phi if phi > eps else 0.0
            pp = pphi[i] if pphi[i] > eps else 0.0
            if cp < pp or (cp == pp and f <= pf[i]):
                for j in range(n):
                    px[i, j] = trial[j]
                pf[i] = f
                pphi[i] = phi

            # archive update: child replaces the current worst member if
            # strictly better under the same comparison
            worst = heap[0]
            if cp < aphit[worst] or (cp == aphit[worst] and f < af[worst]):
                for j in range(n):
                    ax[worst, j] = trial[j]
                af[worst] = f
                aphi[worst] = phi
                aphit[worst] = cp
                _heap_siftdown(heap, aphit, af, 0, M)

        if record_history != 0 and hist_len <= generations:
            for i in range(N):
                hist_f[hist_len, i] = pf[i]
                hist_phi[hist_len, i] = pphi[i]
            hist_len += 1

    status = STATUS_SOLVED if solved else STATUS_EXHAUSTED
    return (status, fen, best_x, best_f, best_phi, eps_trace, trace_len,
            hist_f, hist_phi, hist_len)
