"""Independent reference computations used as test oracles.

Nothing here imports the solvers under test, apart from plain data types.
"""
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded


def half_line_logistic_slope(r=1.0, d=1.0, lo=0.0, hi=2.0, iters=60):
    """psi'(0) of the bounded increasing solution of -d psi'' = r psi (1 - psi), psi(0) = 0.

    Shooting on psi'(0): a too steep start overshoots 1, a too shallow one
    turns back before reaching 1. Bisection on that dichotomy.
    """
    k = r / d

    def rhs(_, y):
        return [y[1], -k * y[0] * (1.0 - y[0])]

    def overshoot(_, y):
        return y[0] - 1.0
    overshoot.terminal = True

    def turn(_, y):
        return y[1]
    turn.terminal = True
    turn.direction = -1

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        sol = solve_ivp(rhs, (0.0, 200.0 / math.sqrt(k)), [0.0, mid], events=(overshoot, turn),
                        rtol=1e-12, atol=1e-14)
        if sol.t_events[0].size:
            hi = mid
        elif sol.t_events[1].size:
            lo = mid
        else:
            break
    return 0.5 * (lo + hi)


def first_integral_slope(r=1.0, d=1.0):
    """Closed form from (psi')^2 = (r/d)(psi^2 - (2/3) psi^3) at psi = 1 where psi' = 0."""
    return math.sqrt(r / (3.0 * d))


def quadratic_roots(c2, c1, c0):
    """Real roots of c2 y^2 + c1 y + c0 in increasing order, or None if complex."""
    roots = np.roots([c2, c1, c0])
    if np.any(np.abs(roots.imag) > 1e-12):
        return None
    return tuple(sorted(float(x) for x in roots.real))


class SingleSpeciesFreeBoundary:
    """Scalar free-boundary logistic problem on [0, h(t)] (the competitor removed).

    Front-fixed grid y = r/h with M+1 nodes, flux-form radial differences,
    banded solves from scipy. Mirrors the discretisation of the coupled stepper
    so the two can be compared step by step.
    """

    def __init__(self, u0, h0, d, r, mu, N=1):
        self.u = np.array(u0, dtype=float)
        self.h = float(h0)
        self.d, self.r, self.mu, self.N = d, r, mu, N
        self.t = 0.0

    def step(self, dt):
        u, h = self.u, self.h
        M = len(u) - 1
        dy = 1.0 / M
        y = np.linspace(0.0, 1.0, M + 1)
        dhdt = -self.mu * (3 * u[M] - 4 * u[M - 1] + u[M - 2]) / (2 * dy * h)
        h_new = h + dt * dhdt
        D = self.d / h_new**2
        ab = np.zeros((3, M + 1))  # banded storage: upper, diag, lower
        rhs = u + dt * self.r * u * (1 - u)
        ab[1, 0] = 1 + 2 * self.N * D * dt / dy**2
        ab[0, 1] = -2 * self.N * D * dt / dy**2
        for j in range(1, M):
            # flux form of y^(1-N) (y^(N-1) u_y)_y plus the front-fixing drift
            wp = ((y[j] + dy / 2) / y[j]) ** (self.N - 1)
            wm = ((y[j] - dy / 2) / y[j]) ** (self.N - 1)
            c = y[j] * dhdt / h_new
            assert c / (2 * dy) <= D * wm / dy**2, "oracle supports centered drift only"
            ab[2, j - 1] = -dt * (D * wm / dy**2 - c / (2 * dy))
            ab[1, j] = 1 + dt * D * (wp + wm) / dy**2
            ab[0, j + 1] = -dt * (D * wp / dy**2 + c / (2 * dy))
        ab[1, M] = 1.0
        ab[2, M - 1] = 0.0
        rhs[M] = 0.0
        self.u = solve_banded((1, 1), ab, rhs)
        self.h = h_new
        self.t += dt
        return dhdt


def logistic_ode(v0, t, rate=1.0):
    """Exact solution of v' = rate v (1 - v)."""
    e = math.exp(rate * t)
    return v0 * e / (1.0 - v0 + v0 * e)
