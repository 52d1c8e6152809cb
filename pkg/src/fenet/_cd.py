"""Numba kernels for the block coordinate-descent inner loop.

The production penalty metric makes every per-block quadratic form diagonal,
so the blockwise minimizer reduces to one scalar root-find (see
`root_scaled_norm`).  The sweep kernel walks the blocks in fixed cyclic
order, maintaining the full residual incrementally.

Layout: all blocks are stacked into flat length-`total_M` vectors; `offs`
delimits block j as columns offs[j]:offs[j+1]; `at` holds the design columns
(score columns scaled by h^{-1/2}) as contiguous rows of shape (total_M, n).
"""

import numpy as np
from numba import njit

_ROOT_TOL = 1e-13
_ROOT_MAX_ITER = 200


@njit(cache=True)
def root_scaled_norm(rho, omega, lam1, nr):
    """Solve sum_k rho_k^2 / (s*omega_k + lam1)^2 = 1 for s > 0.

    Requires nr = ||rho||_2 > lam1 > 0 and omega_k > 0.  The left side is
    convex and strictly decreasing in s, so Newton from the left bracket
    endpoint increases monotonically to the root; the right endpoint caps
    any overshoot from rounding.
    """
    m = rho.shape[0]
    omax = omega[0]
    omin = omega[0]
    for k in range(1, m):
        if omega[k] > omax:
            omax = omega[k]
        if omega[k] < omin:
            omin = omega[k]
    s = (nr - lam1) / omax
    s_hi = (nr - lam1) / omin
    for _ in range(_ROOT_MAX_ITER):
        f = -1.0
        fp = 0.0
        for k in range(m):
            den = s * omega[k] + lam1
            t = rho[k] / den
            f += t * t
            fp -= 2.0 * t * t * omega[k] / den
        if f <= 0.0:
            break
        s_new = s - f / fp
        if s_new > s_hi:
            s_new = s_hi
        if s_new - s <= _ROOT_TOL * (1.0 + s):
            s = s_new
            break
        s = s_new
    return s


@njit(cache=True)
def cd_sweep(at, offs, q, omega, lam1, r, d, work):
    """One cyclic sweep of exact blockwise minimization.

    `r` is the full residual y - A d and `d` the stacked coefficients; both
    are updated in place.  `q` holds the diagonal of (1/n) A_j^T A_j and
    `omega` the diagonal of the blockwise quadratic form (q + lam2/h).
    `work` is scratch of length >= max block size.  Returns the largest
    absolute coefficient change.
    """
    n = r.shape[0]
    p = offs.shape[0] - 1
    max_change = 0.0
    for j in range(p):
        o0 = offs[j]
        o1 = offs[j + 1]
        m = o1 - o0
        if m == 0:
            continue
        nr2 = 0.0
        for k in range(m):
            col = o0 + k
            a = at[col]
            acc = 0.0
            for i in range(n):
                acc += a[i] * r[i]
            v = acc / n + q[col] * d[col]
            work[k] = v
            nr2 += v * v
        nr = np.sqrt(nr2)
        if nr <= lam1:
            for k in range(m):
                col = o0 + k
                dk = d[col]
                if dk != 0.0:
                    if abs(dk) > max_change:
                        max_change = abs(dk)
                    a = at[col]
                    for i in range(n):
                        r[i] += a[i] * dk
                    d[col] = 0.0
        else:
            if lam1 == 0.0:
                for k in range(m):
                    col = o0 + k
                    dnew = work[k] / omega[col]
                    delta = dnew - d[col]
                    if abs(delta) > max_change:
                        max_change = abs(delta)
                    if delta != 0.0:
                        a = at[col]
                        for i in range(n):
                            r[i] -= a[i] * delta
                    d[col] = dnew
            else:
                s = root_scaled_norm(work[:m], omega[o0:o1], lam1, nr)
                for k in range(m):
                    col = o0 + k
                    dnew = s * work[k] / (s * omega[col] + lam1)
                    delta = dnew - d[col]
                    if abs(delta) > max_change:
                        max_change = abs(delta)
                    if delta != 0.0:
                        a = at[col]
                        for i in range(n):
                            r[i] -= a[i] * delta
                    d[col] = dnew
    return max_change


@njit(cache=True)
def cd_gradients(at, r, n):
    """All block gradient pieces (1/n) A^T r in one pass."""
    total = at.shape[0]
    g = np.empty(total)
    for col in range(total):
        a = at[col]
        acc = 0.0
        for i in range(n):
            acc += a[i] * r[i]
        g[col] = acc / n
    return g
