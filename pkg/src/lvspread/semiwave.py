"""Semi-wave profiles of the competition system.

For a speed ``s`` the semi-wave is the pair (phi, psi) with

    s phi' -   phi'' =   phi (1 - phi - a psi),   xi in R
    s psi' - d psi'' = r psi (1 - psi - b phi),   xi > 0
    phi(-inf) = 1, phi(+inf) = 0, psi = 0 on xi <= 0, psi(+inf) = 1,

where xi > 0 is the region behind the free boundary. The profile is found
by marching the parabolic counterpart of this system to steady state from
an ordered pair of half-line logistic profiles: phi starts below and rises,
psi starts above and falls, so the iterates are monotone in relaxation
time and the limit is the maximal (in the competitive order) solution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, NonConverged, SolverError
from .model import NO_OFFSETS, CompetitionRegime, GrowthOffsets, ModelParams, classify

__all__ = [
    "XiGrid",
    "SeedPair",
    "SemiWaveProfile",
    "Degenerate",
    "TailExponents",
    "ValidationReport",
    "build_seeds",
    "relax_semiwave",
    "tail_exponents",
    "validate_profile",
    "write_profile_csv",
    "one_sided_slope",
]

DEFAULT_TOL = 1e-9
DEFAULT_DT = 0.25
DEFAULT_T_MAX = 4.0e4
DEGENERATE_Q = 1e-4


@dataclass(frozen=True)
class XiGrid:
    """Uniform grid on [-L_left, L_right] with a node at xi = 0."""

    L_left: float = 60.0
    L_right: float = 60.0
    h: float = 0.1

    def __post_init__(self):
        if not (self.L_left > 0 and self.L_right > 0 and self.h > 0):
            raise DomainError("grid lengths and spacing must be positive")
        for name in ("L_left", "L_right"):
            cells = getattr(self, name) / self.h
            if abs(cells - round(cells)) > 1e-8 * max(1.0, cells) or round(cells) < 4:
                raise DomainError(f"{name}={getattr(self, name)} is not a multiple (>= 4) of h={self.h}")

    @property
    def n_left(self) -> int:
        return int(round(self.L_left / self.h))

    @property
    def n_right(self) -> int:
        return int(round(self.L_right / self.h))

    @property
    def n(self) -> int:
        return self.n_left + self.n_right + 1

    @property
    def i0(self) -> int:
        """Index of the node at xi = 0."""
        return self.n_left

    @property
    def xi(self) -> np.ndarray:
        return self.h * (np.arange(self.n) - self.n_left)

    def refined(self, factor: int = 2) -> "XiGrid":
        return XiGrid(self.L_left, self.L_right, self.h / factor)


@dataclass
class SeedPair:
    """Lower phi seed and upper psi seed, both on the full grid.

    ``phi_lower`` solves -phi'' = phi (1+eps_v - phi) on xi < 0 with
    phi(0) = 0, extended by 0; ``psi_upper`` solves
    -d psi'' = r psi (1+eps_u - psi) on xi > 0 with psi(0) = 0, extended
    by 0.
    """

    grid: XiGrid
    phi_lower: np.ndarray
    psi_upper: np.ndarray


@dataclass
class SemiWaveProfile:
    grid: XiGrid
    s: float
    phi: np.ndarray
    psi: np.ndarray
    dpsi0: float
    residual: float
    offsets: GrowthOffsets = NO_OFFSETS
    relax_time: float = 0.0
    steps: int = 0
    max_phi_drop: float = 0.0
    max_psi_rise: float = 0.0
    far_field: str = "dirichlet"

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    def phi_at(self, xi):
        """phi at arbitrary xi, using the exact limits outside the grid."""
        return np.interp(xi, self.xi, self.phi, left=self.offsets.v_level, right=0.0)

    def psi_at(self, xi):
        return np.interp(xi, self.xi, self.psi, left=0.0, right=self.offsets.u_level)


@dataclass(frozen=True)
class Degenerate:
    """Relaxation collapsed to (1+eps_v, 0): no semi-wave at this speed."""

    s: float
    t: float
    max_q: float


@dataclass(frozen=True)
class TailExponents:
    s: float
    d: float
    r: float
    u_level: float
    gamma1: float
    gamma2: float
    lambda1: float
    lambda2: float
    beta1: float | None
    beta2: float | None

    def gfun(self, y):
        return -self.d * y * y + self.s * y + self.r * self.u_level

    @property
    def psi_tail_rate(self) -> float:
        """Decay rate of (limit - psi) at +inf: max(gamma1, lambda1)."""
        return max(self.gamma1, self.lambda1)

    @property
    def tail_case(self) -> str:
        if math.isclose(self.gamma1, self.lambda1, rel_tol=1e-12, abs_tol=1e-14):
            return "gamma1=lambda1"
        return "gamma1>lambda1" if self.gamma1 > self.lambda1 else "gamma1<lambda1"


def one_sided_slope(values: np.ndarray, i: int, h: float) -> float:
    """Second-order forward difference (-3 f0 + 4 f1 - f2) / (2h) at index i."""
    return (-3.0 * values[i] + 4.0 * values[i + 1] - values[i + 2]) / (2.0 * h)


def _half_line_logistic(n_cells, h, D, R, level, max_iter=60):
    """Positive solution of -D y'' = R y (level - y), y(0) = 0, y(n h) = level.

    Damped Newton on the standard three-point discretisation.
    """
    x = h * np.arange(n_cells + 1)
    y = level * (1.0 - np.exp(-x * math.sqrt(R * level / D)))
    y[-1] = level
    inv_h2 = 1.0 / (h * h)

    def residual(v):
        F = np.zeros_like(v)
        F[1:-1] = -D * (v[2:] - 2.0 * v[1:-1] + v[:-2]) * inv_h2 - R * v[1:-1] * (level - v[1:-1])
        return F

    F = residual(y)
    norm = np.abs(F).max()
    trace = [norm]
    lower = np.full(n_cells + 1, -D * inv_h2)
    upper = np.full(n_cells + 1, -D * inv_h2)
    out = np.empty(n_cells + 1)
    for _ in range(max_iter):
        if norm < 1e-13 * max(1.0, R * level * level):
            return y
        diag = 2.0 * D * inv_h2 - R * (level - 2.0 * y)
        diag[0] = diag[-1] = 1.0
        lo = lower.copy()
        up = upper.copy()
        up[0] = 0.0
        lo[-1] = 0.0
        _kernels.thomas(lo, diag, up, -F, out)
        step = 1.0
        while step > 1e-6:
            trial = y + step * out
            F_trial = residual(trial)
            n_trial = np.abs(F_trial).max()
            if n_trial < norm or n_trial < 1e-13:
                break
            step *= 0.5
        y, F, norm = trial, F_trial, n_trial
        trace.append(norm)
        if np.abs(step * out).max() < 1e-15:
            break
    if norm < 1e-10 * max(1.0, R * level * level):
        return y
    raise SolverError("Newton iteration for the half-line logistic profile did not converge",
                      trace={"residuals": trace})


def build_seeds(m: ModelParams, grid: XiGrid, off: GrowthOffsets = NO_OFFSETS) -> SeedPair:
    phi_half = _half_line_logistic(grid.n_left, grid.h, 1.0, 1.0, off.v_level)
    psi_half = _half_line_logistic(grid.n_right, grid.h, m.d, m.r, off.u_level)
    phi = np.zeros(grid.n)
    psi = np.zeros(grid.n)
    phi[: grid.i0 + 1] = phi_half[::-1]
    psi[grid.i0:] = psi_half
    return SeedPair(grid, phi, psi)


def tail_exponents(m: ModelParams, s: float, off: GrowthOffsets = NO_OFFSETS) -> TailExponents:
    """Characteristic exponents of the linearisations at the two far-field states.

    gamma: phi near (0, 1) at +inf; lambda: (1 - psi) near (0, 1);
    beta: psi near (1, 0) at -inf, None when s^2 < 4 r d (1 - b).
    """
    d, r, a, b = m.d, m.r, m.a, m.b
    ul, vl = off.u_level, off.v_level
    k = a * ul - vl
    disc_g = s * s + 4.0 * k
    if disc_g >= 0:
        g1 = (s - math.sqrt(disc_g)) / 2.0
        g2 = (s + math.sqrt(disc_g)) / 2.0
    else:
        g1 = g2 = math.nan
    disc_l = s * s + 4.0 * r * d * ul
    l1 = (s - math.sqrt(disc_l)) / (2.0 * d)
    l2 = (s + math.sqrt(disc_l)) / (2.0 * d)
    disc_b = s * s - 4.0 * r * d * (ul - b * vl)
    if disc_b >= 0:
        b1 = (s + math.sqrt(disc_b)) / (2.0 * d)
        b2 = (s - math.sqrt(disc_b)) / (2.0 * d)
    else:
        b1 = b2 = None
    return TailExponents(s, d, r, ul, g1, g2, l1, l2, b1, b2)


def _check_cell_peclet(s, D, h):
    if s * h / (2.0 * D) > 1.0:
        raise DomainError(
            f"grid spacing h={h} too coarse for speed s={s} with diffusion {D}: "
            f"cell Peclet number {s * h / (2 * D):.3g} > 1"
        )


def _stable_dt(m, off, dt):
    # explicit reaction keeps the step order-preserving below these bounds
    cap_p = 1.0 / (off.v_level + m.a * off.u_level)
    cap_q = 1.0 / (m.r * (off.u_level + m.b * off.v_level))
    return min(dt, 0.95 * cap_p, 0.95 * cap_q)


def relax_semiwave(
    m: ModelParams,
    s: float,
    off: GrowthOffsets = NO_OFFSETS,
    grid: XiGrid | None = None,
    tol: float = DEFAULT_TOL,
    t_max: float = DEFAULT_T_MAX,
    dt: float = DEFAULT_DT,
    seed: SeedPair | SemiWaveProfile | None = None,
    far_field: str = "dirichlet",
    degenerate_q: float = DEGENERATE_Q,
) -> SemiWaveProfile | Degenerate:
    """Semi-wave at speed ``s`` by parabolic relaxation.

    Returns the converged profile, or ``Degenerate`` once psi has fallen
    below ``degenerate_q`` on the near half [0, L_right/2] of its domain
    (psi only decreases during relaxation, so this is final). A profile
    seed must come from a speed <= s to keep the iterates monotone.

    Raises NonConverged when ``t_max`` is reached first; the trace holds
    the partial state.
    """
    grid = grid or XiGrid()
    if s < 0:
        raise DomainError(f"speed must be nonnegative, got {s}")
    if classify(m) is not CompetitionRegime.SUPERIOR_U:
        raise DomainError(f"semi-waves need a > 1 > b, got a={m.a}, b={m.b}")
    if far_field not in ("dirichlet", "robin"):
        raise DomainError(f"far_field must be 'dirichlet' or 'robin', got {far_field!r}")
    _check_cell_peclet(s, 1.0, grid.h)
    _check_cell_peclet(s, m.d, grid.h)

    if seed is None:
        seed = build_seeds(m, grid, off)
    if isinstance(seed, SemiWaveProfile):
        if seed.grid != grid:
            raise DomainError("warm-start profile lives on a different grid")
        p0, q0 = seed.phi, seed.psi
    else:
        p0, q0 = seed.phi_lower, seed.psi_upper
    p = np.array(p0, dtype=float)
    q = np.array(q0[grid.i0:], dtype=float)

    nan = math.nan
    if far_field == "robin":
        te = tail_exponents(m, s, off)
        p_rate, q_rate = te.gamma1, te.psi_tail_rate
    else:
        p_rate = q_rate = nan
    dt_eff = _stable_dt(m, off, dt)
    status, t, steps, rate, p_drop, q_rise = _kernels.relax_kernel(
        p, q, grid.i0, grid.h, float(s), m.d, m.r, m.a, m.b, off.v_level, off.u_level,
        p_rate, nan, q_rate, dt_eff, tol, t_max, degenerate_q, grid.n_right // 2,
    )
    q_bulk = float(q[: grid.n_right // 2].max())
    if status == _kernels.DEGENERATE or (status == _kernels.CONVERGED and q_bulk < degenerate_q):
        return Degenerate(float(s), t, q_bulk)

    psi = np.zeros(grid.n)
    psi[grid.i0:] = q
    prof = SemiWaveProfile(
        grid=grid, s=float(s), phi=p, psi=psi,
        dpsi0=one_sided_slope(q, 0, grid.h),
        residual=rate, offsets=off, relax_time=t, steps=steps,
        max_phi_drop=p_drop, max_psi_rise=q_rise, far_field=far_field,
    )
    if status == _kernels.TIME_CAP:
        raise NonConverged(
            f"relaxation at s={s} reached t_max={t_max} with residual {rate:.3e} > tol={tol:.1e}",
            trace={"s": float(s), "t": t, "residual": rate, "max_q_bulk": q_bulk,
                   "dpsi0": prof.dpsi0, "profile": prof},
        )
    return prof


@dataclass
class ValidationReport:
    s: float
    ode_residual_phi: float
    ode_residual_psi: float
    monotonicity_violations: int
    phi_tail_slope: float
    gamma1: float
    psi_tail_slope: float
    psi_tail_rate: float
    tail_case: str
    notes: list = field(default_factory=list)

    @property
    def phi_tail_relerr(self) -> float:
        return abs(self.phi_tail_slope - self.gamma1) / abs(self.gamma1)

    @property
    def psi_tail_relerr(self) -> float:
        return abs(self.psi_tail_slope - self.psi_tail_rate) / abs(self.psi_tail_rate)

    def to_text(self) -> str:
        lines = [
            f"s = {self.s:.10g}",
            f"ode_residual_phi = {self.ode_residual_phi:.3e}",
            f"ode_residual_psi = {self.ode_residual_psi:.3e}",
            f"monotonicity_violations = {self.monotonicity_violations}",
            f"phi_tail_slope = {self.phi_tail_slope:.6g}",
            f"gamma1 = {self.gamma1:.6g}",
            f"phi_tail_relerr = {self.phi_tail_relerr:.3e}",
            f"psi_tail_slope = {self.psi_tail_slope:.6g}",
            f"psi_tail_rate = {self.psi_tail_rate:.6g}",
            f"psi_tail_relerr = {self.psi_tail_relerr:.3e}",
            f"tail_case = {self.tail_case}",
        ]
        lines += [f"note = {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _log_slope(x, y):
    good = y > 0
    if good.sum() < 3:
        return math.nan
    return float(np.polyfit(x[good], np.log(y[good]), 1)[0])


def _decade_window(xi, values, end_index):
    """Indices of the last decade of a decaying positive tail, ending at end_index."""
    end_val = values[end_index]
    start = end_index
    while start > 0 and values[start - 1] <= 10.0 * end_val:
        start -= 1
    return slice(start, end_index + 1)


def validate_profile(prof: SemiWaveProfile, m: ModelParams, boundary_margin: float = 10.0,
                     psi_floor: float = 1e-9) -> ValidationReport:
    """ODE residuals, monotonicity and tail exponents of a converged profile.

    The phi tail is fitted on its last decade ending ``boundary_margin``
    before the right truncation point. The psi tail (limit - psi) is
    fitted on the decade just above ``psi_floor``, where it is still well
    resolved in floating point.
    """
    g = prof.grid
    h, s, i0 = g.h, prof.s, g.i0
    ul, vl = prof.offsets.u_level, prof.offsets.v_level
    phi, psi = prof.phi, prof.psi
    d2 = lambda f: (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    d1 = lambda f: (f[2:] - f[:-2]) / (2.0 * h)
    chi_psi = psi[1:-1]
    res_phi = s * d1(phi) - d2(phi) - phi[1:-1] * (vl - phi[1:-1] - m.a * chi_psi)
    res_psi = s * d1(psi) - m.d * d2(psi) - m.r * psi[1:-1] * (ul - psi[1:-1] - m.b * phi[1:-1])
    res_psi = res_psi[i0:]  # interior nodes with xi > 0

    violations = int(np.count_nonzero(np.diff(phi) > 0) + np.count_nonzero(np.diff(psi[i0:]) < 0))

    te = tail_exponents(m, s, prof.offsets)
    notes = []
    xi = g.xi
    end = g.n - 1 - int(round(boundary_margin / h))
    if end <= i0 + 2:
        notes.append("right truncation too short for a tail fit")
        phi_slope = psi_slope = math.nan
    else:
        w = _decade_window(xi, phi, end)
        phi_slope = _log_slope(xi[w], phi[w])
        gap = ul - psi
        above = np.nonzero(gap[i0 + 1: end + 1] >= psi_floor)[0]
        if above.size == 0:
            notes.append("psi tail already below floor")
            psi_slope = math.nan
        else:
            psi_end = i0 + 1 + int(above[-1])
            w = _decade_window(xi, gap, psi_end)
            psi_slope = _log_slope(xi[w], gap[w])
    return ValidationReport(
        s=s,
        ode_residual_phi=float(np.abs(res_phi).max()),
        ode_residual_psi=float(np.abs(res_psi).max()),
        monotonicity_violations=violations,
        phi_tail_slope=phi_slope,
        gamma1=te.gamma1,
        psi_tail_slope=psi_slope,
        psi_tail_rate=te.psi_tail_rate,
        tail_case=te.tail_case,
        notes=notes,
    )


def write_profile_csv(prof, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "phi", "psi"])
        for x, a, b in zip(prof.xi, prof.phi, prof.psi):
            w.writerow([f"{x:.10g}", repr(float(a)), repr(float(b))])
