"""Compiled inner loops: tridiagonal solves and the two-field relaxation."""
import numpy as np
from numba import njit

CONVERGED = 0
DEGENERATE = 1
TIME_CAP = 2


@njit(cache=True)
def thomas(lower, diag, upper, rhs, out):
    """Solve a tridiagonal system in place of ``out``.

    Row i reads lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i];
    lower[0] and upper[-1] are ignored. No pivoting: callers pass
    diagonally dominant M-matrices.
    """
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / den if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


@njit(cache=True)
def _advection_diffusion_rows(n, D, s, h, dt):
    lo = np.full(n, -D / (h * h) - s / (2.0 * h))
    di = np.full(n, 1.0 / dt + 2.0 * D / (h * h))
    up = np.full(n, -D / (h * h) + s / (2.0 * h))
    return lo, di, up


@njit(cache=True)
def relax_kernel(p, q, iq, h, s, d, r, a, b, p_level, q_level,
                 p_right_rate, q_left_rate, q_right_rate,
                 dt, tol, t_max, deg_thresh, k_deg, q_left_level=0.0):
    """March the relaxation system to steady state, updating p and q in place.

    p lives on all nodes; q on nodes iq..n-1 of the same grid (q[k] sits at
    node iq+k) and acts on p only there. Reaction is explicit, diffusion and
    advection implicit. A NaN rate selects a Dirichlet condition (p: level
    on the left, 0 on the right; q: q_left_level on the left, level on the
    right), otherwise a first-order Robin condition with that exponential
    rate.

    Returns (status, t, steps, last_rate, max_p_drop, max_q_rise): the
    last two record the worst violation of p nondecreasing / q
    nonincreasing between consecutive steps.
    """
    n = p.shape[0]
    m = q.shape[0]
    plo, pdi, pup = _advection_diffusion_rows(n, 1.0, s, h, dt)
    qlo, qdi, qup = _advection_diffusion_rows(m, d, s, h, dt)
    # boundary rows
    pdi[0] = 1.0
    pup[0] = 0.0
    if np.isnan(p_right_rate):
        pdi[n - 1] = 1.0
        plo[n - 1] = 0.0
    else:
        pdi[n - 1] = 1.0 / h - p_right_rate
        plo[n - 1] = -1.0 / h
    if np.isnan(q_left_rate):
        qdi[0] = 1.0
        qup[0] = 0.0
    else:
        qdi[0] = 1.0 / h + q_left_rate
        qup[0] = -1.0 / h
    if np.isnan(q_right_rate):
        qdi[m - 1] = 1.0
        qlo[m - 1] = 0.0
        q_right_rhs = q_level
    else:
        qdi[m - 1] = 1.0 / h - q_right_rate
        qlo[m - 1] = -1.0 / h
        q_right_rhs = -q_right_rate * q_level

    rp = np.empty(n)
    rq = np.empty(m)
    dpv = np.empty(n)
    dqv = np.empty(m)
    inv_dt = 1.0 / dt
    inv_h2 = 1.0 / (h * h)
    half_inv_h = 0.5 / h
    t = 0.0
    steps = 0
    rate = np.inf
    p_drop = 0.0
    q_rise = 0.0
    status = TIME_CAP
    # increment form: (1/dt + L) delta = f(p) - L p, so the update keeps the
    # sign of the steady residual exactly (Thomas on an M-matrix)
    while t < t_max:
        for j in range(1, n - 1):
            qq = q[j - iq] if j >= iq else 0.0
            fwd = p[j + 1] - p[j]
            bwd = p[j] - p[j - 1]
            lp = -(fwd - bwd) * inv_h2 + s * (fwd + bwd) * half_inv_h
            rp[j] = p[j] * (p_level - p[j] - a * qq) - lp
        rp[0] = 0.0
        if np.isnan(p_right_rate):
            rp[n - 1] = -p[n - 1]
        else:
            rp[n - 1] = -(pdi[n - 1] * p[n - 1] + plo[n - 1] * p[n - 2])
        for k in range(1, m - 1):
            fwd = q[k + 1] - q[k]
            bwd = q[k] - q[k - 1]
            lq = -d * (fwd - bwd) * inv_h2 + s * (fwd + bwd) * half_inv_h
            rq[k] = r * q[k] * (q_level - q[k] - b * p[iq + k]) - lq
        if np.isnan(q_left_rate):
            rq[0] = q_left_level - q[0]
        else:
            rq[0] = -(qdi[0] * q[0] + qup[0] * q[1])
        rq[m - 1] = q_right_rhs - (qdi[m - 1] * q[m - 1] + qlo[m - 1] * q[m - 2])
        thomas(plo, pdi, pup, rp, dpv)
        thomas(qlo, qdi, qup, rq, dqv)
        biggest = 0.0
        for j in range(n):
            diff = dpv[j]
            if -diff > p_drop:
                p_drop = -diff
            if abs(diff) > biggest:
                biggest = abs(diff)
            p[j] += diff
        qmax_bulk = 0.0
        for k in range(m):
            diff = dqv[k]
            if diff > q_rise:
                q_rise = diff
            if abs(diff) > biggest:
                biggest = abs(diff)
            q[k] += diff
            if k < k_deg and q[k] > qmax_bulk:
                qmax_bulk = q[k]
        t += dt
        steps += 1
        rate = biggest * inv_dt
        if rate < tol:
            status = CONVERGED
            break
        if k_deg > 0 and qmax_bulk < deg_thresh:
            status = DEGENERATE
            break
    return status, t, steps, rate, p_drop, q_rise
