"""Minimal wave speed s0 and free-boundary spreading speed s_mu.

s0 is located by bisection on the analytic bracket
[2 sqrt(r d (1-b)), 2 sqrt(r d)]: a speed admitting a semi-wave lies below
s0, a speed at which relaxation collapses lies at or above it.
s_mu is the root of eta(s) = mu psi_s'(0) - s on (0, s0), which is
continuous and strictly decreasing with eta(0) > 0 and eta(s0-) = -s0.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConsistencyError, DomainError, NonConverged
from .model import NO_OFFSETS, CompetitionRegime, GrowthOffsets, ModelParams, classify
from .semiwave import (
    DEFAULT_DT,
    DEFAULT_T_MAX,
    DEFAULT_TOL,
    Degenerate,
    SemiWaveProfile,
    XiGrid,
    _check_cell_peclet,
    _stable_dt,
    relax_semiwave,
    tail_exponents,
)

__all__ = [
    "s0_bounds",
    "ProfileCache",
    "S0Estimate",
    "SpeedResult",
    "TravelingWaveProfile",
    "NoWave",
    "estimate_s0",
    "eta",
    "solve_s_mu",
    "solve_traveling_wave",
]

log = logging.getLogger(__name__)

TOL_S0 = 1e-3
TOL_SMU = 1e-4
ETA_REL_TOL = 1e-4


def s0_bounds(m: ModelParams) -> tuple[float, float]:
    if classify(m) is not CompetitionRegime.SUPERIOR_U:
        raise DomainError(f"the s0 bracket needs a > 1 > b, got a={m.a}, b={m.b}")
    return 2.0 * math.sqrt(m.r * m.d * (1.0 - m.b)), 2.0 * math.sqrt(m.r * m.d)


class ProfileCache:
    """Converged semi-waves of one run, keyed by speed.

    A profile at speed s' <= s is an ordered seed for speed s (phi below,
    psi above the target), so lookups return the nearest speed from below.
    """

    def __init__(self, m: ModelParams, grid: XiGrid, off: GrowthOffsets = NO_OFFSETS):
        self.m, self.grid, self.off = m, grid, off
        self._speeds: list[float] = []
        self._profiles: dict[float, SemiWaveProfile] = {}

    def add(self, prof: SemiWaveProfile) -> None:
        if prof.s not in self._profiles:
            bisect.insort(self._speeds, prof.s)
        self._profiles[prof.s] = prof

    def seed_for(self, s: float) -> SemiWaveProfile | None:
        i = bisect.bisect_right(self._speeds, s)
        return self._profiles[self._speeds[i - 1]] if i else None

    def get(self, s: float) -> SemiWaveProfile | None:
        return self._profiles.get(s)

    def __len__(self):
        return len(self._speeds)

    def solve(self, s: float, **relax_kw):
        """relax_semiwave at s, warm-started and cached."""
        if s in self._profiles:
            return self._profiles[s]
        out = relax_semiwave(self.m, s, self.off, self.grid, seed=self.seed_for(s), **relax_kw)
        if isinstance(out, SemiWaveProfile):
            self.add(out)
        return out


@dataclass
class S0Estimate:
    value: float
    lower: float
    upper: float
    bracket: tuple[float, float]
    probes: list = field(default_factory=list)  # (s, "wave" | "degenerate" | "nonconverged")
    marginal: bool = False

    def __float__(self):
        return self.value


@dataclass
class SpeedResult:
    s0_lower: float
    s0_upper: float
    s0_est: float
    s_mu: float
    mu: float
    trace: list  # (s, eta) samples in evaluation order
    tol_s: float
    eta_residual: float
    dpsi0: float
    bracket: tuple[float, float]
    marginal: bool = False
    profile: SemiWaveProfile | None = None

    def csv_row(self, m: ModelParams) -> list[str]:
        vals = [m.a, m.b, m.d, m.r, self.mu, self.s0_lower, self.s0_upper,
                self.s0_est, self.s_mu, self.eta_residual]
        return [repr(float(v)) for v in vals]


SPEED_CSV_HEADER = ["a", "b", "d", "r", "mu", "s0_lower", "s0_upper", "s0_est", "s_mu", "eta_residual"]


def estimate_s0(m: ModelParams, grid: XiGrid | None = None, tol_s: float = TOL_S0,
                cache: ProfileCache | None = None, **relax_kw) -> S0Estimate:
    """Bisection for the existence threshold of semi-waves inside the analytic bracket.

    A probe that hits the relaxation time cap is counted on the upper side
    (existence not certified) and flags the estimate as marginal.
    """
    grid = grid or XiGrid()
    lower, upper = s0_bounds(m)
    cache = cache if cache is not None else ProfileCache(m, grid)
    lo, hi = lower, upper
    est = S0Estimate(value=math.nan, lower=lower, upper=upper, bracket=(lo, hi))
    while hi - lo > tol_s:
        mid = 0.5 * (lo + hi)
        try:
            out = cache.solve(mid, **relax_kw)
        except NonConverged as exc:
            log.info("s0 probe at s=%.6g did not settle (%s); treated as no semi-wave", mid, exc)
            est.probes.append((mid, "nonconverged"))
            est.marginal = True
            hi = mid
            continue
        if isinstance(out, Degenerate):
            est.probes.append((mid, "degenerate"))
            hi = mid
        else:
            est.probes.append((mid, "wave"))
            lo = mid
    est.bracket = (lo, hi)
    est.value = 0.5 * (lo + hi)
    return est


def eta(m: ModelParams, s: float, mu: float | None = None, cache: ProfileCache | None = None,
        grid: XiGrid | None = None, **relax_kw) -> tuple[float, float]:
    """(eta_mu(s), psi_s'(0)); a degenerate profile counts as psi'(0) = 0."""
    mu = m.mu if mu is None else mu
    cache = cache if cache is not None else ProfileCache(m, grid or XiGrid())
    out = cache.solve(s, **relax_kw)
    slope = 0.0 if isinstance(out, Degenerate) else out.dpsi0
    return mu * slope - s, slope


def solve_s_mu(m: ModelParams, mu: float | None = None, grid: XiGrid | None = None,
               tol_s: float = TOL_SMU, s0: S0Estimate | float | None = None,
               cache: ProfileCache | None = None, eta_rel_tol: float = ETA_REL_TOL,
               max_iter: int = 200, **relax_kw) -> SpeedResult:
    """Root of eta_mu on (0, s0_est).

    Bisection until the bracket is narrower than ``tol_s``, then secant
    steps inside the bracket until |eta| < eta_rel_tol * max(1, s).
    eta at the upper end is taken as -s0 (the semi-wave flattens to
    (1, 0) as s -> s0), so it is never evaluated there.
    """
    mu = m.mu if mu is None else float(mu)
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    grid = grid or XiGrid()
    cache = cache if cache is not None else ProfileCache(m, grid)
    lower, upper = s0_bounds(m)
    marginal = False
    if s0 is None:
        s0 = estimate_s0(m, grid, cache=cache, **relax_kw)
    if isinstance(s0, S0Estimate):
        marginal = s0.marginal
        s0_est = s0.value
    else:
        s0_est = float(s0)

    trace = []

    def evaluate(s):
        nonlocal marginal
        try:
            e, slope = eta(m, s, mu, cache, **relax_kw)
        except NonConverged as exc:
            # psi only falls during relaxation: a negative eta from the
            # partial state stays negative
            slope = exc.trace["dpsi0"]
            e = mu * slope - s
            if e >= 0:
                raise NonConverged(f"eta undecided at s={s}: {exc}", trace=exc.trace) from exc
            marginal = True
        trace.append((s, e))
        return e, slope

    e_lo, slope_lo = evaluate(0.0)
    if e_lo <= 0:
        raise ConsistencyError(f"eta_mu(0) = {e_lo} is not positive", trace={"dpsi0": slope_lo})
    lo, hi = 0.0, s0_est
    e_hi = -s0_est
    best = (abs(e_lo), 0.0, e_lo, slope_lo)

    def done(s, e):
        return abs(e) < eta_rel_tol * max(1.0, s) and hi - lo <= tol_s

    for _ in range(max_iter):
        if hi - lo > tol_s:
            s = 0.5 * (lo + hi)
        else:
            # secant inside the bracket, guarded towards the midpoint
            s = lo - e_lo * (hi - lo) / (e_hi - e_lo)
            if not lo < s < hi:
                s = 0.5 * (lo + hi)
        e, slope = evaluate(s)
        if abs(e) < best[0]:
            best = (abs(e), s, e, slope)
        if e > 0:
            lo, e_lo = s, e
        elif e < 0:
            hi, e_hi = s, e
        else:
            lo = hi = s
        if done(best[1], best[2]):
            break
    else:
        raise NonConverged(f"s_mu search for mu={mu} did not meet its tolerances",
                           trace={"trace": trace, "bracket": (lo, hi)})

    _, s_mu, e_mu, slope_mu = best
    prof = cache.get(s_mu)
    return SpeedResult(
        s0_lower=lower, s0_upper=upper, s0_est=s0_est, s_mu=s_mu, mu=mu, trace=trace,
        tol_s=tol_s, eta_residual=e_mu, dpsi0=slope_mu, bracket=(lo, hi), marginal=marginal,
        profile=prof,
    )


@dataclass
class TravelingWaveProfile:
    grid: XiGrid
    s: float
    Phi: np.ndarray
    Psi: np.ndarray
    interface: float  # xi where Psi crosses 1/2
    residual: float
    relax_time: float

    @property
    def xi(self):
        return self.grid.xi


@dataclass(frozen=True)
class NoWave:
    """Relaxation pinned the front against the truncation boundary."""

    s: float
    interface: float
    t: float


def _interface(xi, Psi):
    k = int(np.argmax(Psi >= 0.5))
    if Psi[k] < 0.5:
        return math.inf
    if k == 0:
        return -math.inf
    return float(xi[k - 1] + (0.5 - Psi[k - 1]) * (xi[k] - xi[k - 1]) / (Psi[k] - Psi[k - 1]))


def solve_traveling_wave(m: ModelParams, s: float, grid: XiGrid | None = None,
                         tol: float = 1e-8, t_max: float = DEFAULT_T_MAX, dt: float = DEFAULT_DT,
                         edge_margin: float = 15.0) -> TravelingWaveProfile | NoWave:
    """Full-line monotone wave (Phi, Psi)(-inf) = (1, 0), (+inf) = (0, 1) at speed s.

    The same relaxation as for semi-waves without the cut-off at xi = 0.
    Psi is seeded with a tanh front decaying at beta2, the slow rate of the
    linearisation at (1, 0), and held at the seed's value on the left end,
    which anchors the leading edge; when beta2 is complex (s below
    2 sqrt(rd(1-b))) the left value is 0. A front that ends up within
    ``edge_margin`` of either end means no wave at this speed.
    """
    grid = grid or XiGrid()
    if not s > 0:
        raise DomainError(f"speed must be positive, got {s}")
    if classify(m) is not CompetitionRegime.SUPERIOR_U:
        raise DomainError(f"waves need a > 1 > b, got a={m.a}, b={m.b}")
    _check_cell_peclet(s, 1.0, grid.h)
    _check_cell_peclet(s, m.d, grid.h)
    xi = grid.xi
    te = tail_exponents(m, s)
    # seed with the leading-edge decay of a wave at this speed and pin the
    # leading edge with the seed's value at the left end
    rate = te.beta2 if te.beta2 is not None else 1.0
    Psi = 0.5 * (1.0 + np.tanh(0.5 * rate * xi))
    Phi = 1.0 - Psi
    Phi[0], Phi[-1], Psi[-1] = 1.0, 0.0, 1.0
    q_left = Psi[0] if te.beta2 is not None else 0.0
    Psi[0] = q_left
    status, t, steps, rate, _, _ = _kernels.relax_kernel(
        Phi, Psi, 0, grid.h, float(s), m.d, m.r, m.a, m.b, 1.0, 1.0,
        math.nan, math.nan, math.nan, _stable_dt(m, NO_OFFSETS, dt), tol, t_max, 0.0, 0, q_left,
    )
    pos = _interface(xi, Psi)
    if not (-grid.L_left + edge_margin < pos < grid.L_right - edge_margin):
        return NoWave(float(s), pos, t)
    if status != _kernels.CONVERGED:
        raise NonConverged(f"wave relaxation at s={s} reached t_max={t_max} (residual {rate:.3e})",
                           trace={"s": float(s), "t": t, "residual": rate, "interface": pos})
    return TravelingWaveProfile(grid, float(s), Phi, Psi, pos, rate, t)
