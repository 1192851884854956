"""Radially symmetric free-boundary competition system.

u lives on the moving ball [0, h(t)] and is stored on the fixed unit grid
y = r / h(t) (front fixing), so the free boundary is always the last node;
v lives on a fixed grid [0, R_max] with zero flux at both ends. The front
follows the Stefan condition h' = -mu u_r(t, h). Diffusion and the
front-fixing advection are implicit, reaction and the front update are
explicit, which makes the scheme first order in time.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from ._kernels import thomas
from .errors import DomainError, DomainExhausted, InvariantViolation, StabilityError
from .model import ModelParams
from .semiwave import SemiWaveProfile

__all__ = [
    "InitialData",
    "FreeBoundaryState",
    "Trajectory",
    "Outcome",
    "front_speed",
    "step",
    "simulate",
    "classify_outcome",
    "measure_speed",
    "compare_with_semiwave",
    "write_front_csv",
    "write_snapshot_csv",
]

DEFAULT_DT = 0.01
DEFAULT_NU = 400
DEFAULT_DR = 0.1


@dataclass
class InitialData:
    """Initial front radius, u0 on the mapped grid y in [0, 1] and v0 on [0, R_max].

    ``v0_floor`` is the declared lim inf of v0 at infinity; it must be
    positive for the speed result to apply.
    """

    h0: float
    u0: np.ndarray
    v0: np.ndarray
    dr: float = DEFAULT_DR
    v0_floor: float | None = None

    @property
    def n_u(self) -> int:
        return len(self.u0)

    @property
    def R_max(self) -> float:
        return self.dr * (len(self.v0) - 1)

    def check(self, need_floor: bool = False) -> None:
        u0, v0 = np.asarray(self.u0), np.asarray(self.v0)
        if not self.h0 > 0:
            raise DomainError(f"h0 must be positive, got {self.h0}")
        if len(u0) < 4 or len(v0) < 4:
            raise DomainError("u0 and v0 need at least 4 nodes")
        if u0[-1] != 0.0:
            raise DomainError("u0 must vanish at the free boundary")
        if np.any(u0[:-1] <= 0):
            raise DomainError("u0 must be positive inside [0, h0)")
        if abs(u0[1] - u0[0]) > 1e-3 * u0.max():
            raise DomainError("u0 must be flat at r = 0 (zero derivative)")
        if np.any(v0 < 0) or not np.any(v0 > 0):
            raise DomainError("v0 must be nonnegative and not identically zero")
        if need_floor and not (self.v0_floor is not None and self.v0_floor > 0):
            raise DomainError("a positive v0_floor (lim inf of v0 at infinity) is required")

    @classmethod
    def bump(cls, h0: float, R_max: float, n_u: int = DEFAULT_NU, dr: float = DEFAULT_DR,
             amplitude: float = 1.0, v_level: float = 1.0) -> "InitialData":
        """u0 = amplitude cos(pi r / (2 h0)) on [0, h0], v0 = v_level everywhere."""
        y = np.linspace(0.0, 1.0, n_u)
        u0 = amplitude * np.cos(0.5 * math.pi * y)
        u0[-1] = 0.0
        K = int(round(R_max / dr))
        v0 = np.full(K + 1, float(v_level))
        return cls(h0=float(h0), u0=u0, v0=v0, dr=dr, v0_floor=float(v_level))


@dataclass
class FreeBoundaryState:
    t: float
    h: float
    u: np.ndarray  # on y = r/h in [0, 1]
    v: np.ndarray  # on r = k dr, k = 0..K
    dr: float
    dhdt: float = 0.0

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.u))

    @property
    def r_u(self) -> np.ndarray:
        """Physical positions of the u nodes."""
        return self.y * self.h

    @property
    def r(self) -> np.ndarray:
        return self.dr * np.arange(len(self.v))

    def u_on_r(self, r=None) -> np.ndarray:
        """u at fixed radii, extended by zero beyond the front."""
        r = self.r if r is None else r
        return np.interp(r, self.r_u, self.u, right=0.0)

    @classmethod
    def initial(cls, init: InitialData) -> "FreeBoundaryState":
        return cls(0.0, init.h0, np.array(init.u0, dtype=float), np.array(init.v0, dtype=float), init.dr)


class Outcome(enum.Enum):
    SPREADING = "Spreading"
    VANISHING = "Vanishing"
    UNDETERMINED = "Undetermined"

    def __str__(self):
        return self.value


@dataclass
class Trajectory:
    times: np.ndarray
    h: np.ndarray
    dhdt: np.ndarray
    umax: np.ndarray
    u_min_compact: np.ndarray
    v_max_compact: np.ndarray
    v_min_compact: np.ndarray
    h0: float
    compact_radius: float = 10.0
    snapshots: dict = field(default_factory=dict)
    final: FreeBoundaryState | None = None
    invariants: dict = field(default_factory=dict)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _radial_rows(x, c, D, dx, dt, N):
    """Implicit rows for dt * (D x^(1-N) (x^(N-1) f_x)_x + c f_x) at interior nodes x.

    The radial operator is written in conservative form with face weights
    ((x +- dx/2)/x)^(N-1), which reduces to the centered second difference
    for N = 1 and keeps an M-matrix for any N. The drift c >= 0 is
    centered where the cell Peclet number allows, forward-differenced
    otherwise.
    """
    k = D / (dx * dx)
    if N == 1:
        wp = wm = 1.0
    else:
        wp = ((x + 0.5 * dx) / x) ** (N - 1)
        wm = ((x - 0.5 * dx) / x) ** (N - 1)
    half = c / (2.0 * dx)
    centered = half <= k * np.minimum(wp, wm)
    lo = np.where(centered, -dt * (k * wm - half), -dt * k * wm)
    up = np.where(centered, -dt * (k * wp + half), -dt * (k * wp + c / dx))
    di = 1.0 + dt * k * (wp + wm) + np.where(centered, 0.0, dt * c / dx)
    return lo, di, up


def front_speed(state: FreeBoundaryState, m: ModelParams) -> float:
    """Stefan law -mu u_r(t, h) with a second-order one-sided difference."""
    u = state.u
    M = len(u) - 1
    u_r = (3.0 * u[M] - 4.0 * u[M - 1] + u[M - 2]) * M / (2.0 * state.h)
    return -m.mu * u_r


def step(state: FreeBoundaryState, m: ModelParams, dt: float,
         u_bound: float | None = None, v_bound: float | None = None) -> FreeBoundaryState:
    """Advance one time step of length dt.

    Front: h_new = h + dt * (-mu u_r) with a second-order one-sided u_r.
    u: implicit diffusion/advection on the mapped grid, explicit reaction
    with v interpolated onto the current u nodes. v: implicit diffusion,
    explicit reaction with u extended by zero beyond the front.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    u, v, h = state.u, state.v, state.h
    n_u = len(u)
    M = n_u - 1
    dy = 1.0 / M
    y = np.linspace(0.0, 1.0, n_u)
    N = m.N

    dhdt = front_speed(state, m)
    if dhdt < 0:
        if dhdt < -1e-12 * max(1.0, m.mu * float(np.abs(u).max()) / (dy * h)):
            raise InvariantViolation(f"front would recede at t={state.t}: h' = {dhdt:.3e}",
                                     trace={"t": state.t, "h": h, "dhdt": dhdt})
        dhdt = 0.0
    h_new = h + dt * dhdt

    # explicit reactions on the old geometry
    r_old = y * h
    r_v = state.r
    v_at_u = np.interp(r_old, r_v, v)
    u_at_v = np.interp(r_v, r_old, u, right=0.0)
    rhs_u = u + dt * m.r * u * (1.0 - u - m.b * v_at_u)
    rhs_v = v + dt * v * (1.0 - v - m.a * u_at_v)

    # u on the mapped grid
    D = m.d / (h_new * h_new)
    lo, di, up = _radial_rows(y[1:M], y[1:M] * dhdt / h_new, D, dy, dt, N)
    lower = np.concatenate(([0.0], lo, [0.0]))
    diag = np.concatenate(([1.0 + 2.0 * N * D * dt / dy**2], di, [1.0]))
    upper = np.concatenate(([-2.0 * N * D * dt / dy**2], up, [0.0]))
    rhs_u[M] = 0.0
    u_new = thomas(lower, diag, upper, rhs_u, np.empty(n_u))

    # v on the fixed grid, zero flux at both ends
    K = len(v) - 1
    dr = state.dr
    lo, di, up = _radial_rows(r_v[1:K], np.zeros(K - 1), 1.0, dr, dt, N)
    k2 = dt / dr**2
    lower = np.concatenate(([0.0], lo, [-2.0 * k2]))
    diag = np.concatenate(([1.0 + 2.0 * N * k2], di, [1.0 + 2.0 * k2]))
    upper = np.concatenate(([-2.0 * N * k2], up, [0.0]))
    v_new = thomas(lower, diag, upper, rhs_v, np.empty(K + 1))

    if u_bound is not None and v_bound is not None:
        if u_new.max() > 1.1 * u_bound or v_new.max() > 1.1 * v_bound or min(u_new.min(), v_new.min()) < -0.1:
            raise StabilityError(
                f"fields left their bounds at t={state.t + dt:.6g}; reduce dt (now {dt})",
                trace={"t": state.t + dt, "u_max": float(u_new.max()), "v_max": float(v_new.max())},
            )
    return FreeBoundaryState(state.t + dt, h_new, u_new, v_new, dr, dhdt)


def _compact_metrics(state, R_c):
    r = state.r
    mask = r <= R_c
    u_c = state.u_on_r(r[mask])
    v_c = state.v[mask]
    return float(state.u.max()), float(u_c.min()), float(v_c.max()), float(v_c.min())


def simulate(init: InitialData, m: ModelParams, t_end: float, dt: float = DEFAULT_DT,
             sample_every: float = 0.5, snapshot_times=(), compact_radius: float = 10.0,
             margin: float = 20.0, need_floor: bool = False, strict: bool = True) -> Trajectory:
    """Integrate to ``t_end`` and record the front history.

    Refuses to start unless R_max >= h0 + 2 sqrt(r d) t_end + margin, since
    the front can never outrun the single-species bound 2 sqrt(r d).
    ``strict=False`` skips the initial-data checks (degenerate test inputs).
    """
    if strict:
        init.check(need_floor=need_floor)
    if not (t_end > 0 and dt > 0):
        raise DomainError("t_end and dt must be positive")
    needed = init.h0 + 2.0 * math.sqrt(m.r * m.d) * t_end + margin
    if init.R_max < needed:
        raise DomainError(f"R_max={init.R_max:.6g} too small: need at least {needed:.6g} for t_end={t_end}")

    u_bound = max(1.0, float(np.max(init.u0)))
    v_bound = max(1.0, float(np.max(init.v0)))
    n_steps = int(round(t_end / dt))
    every = max(1, int(round(sample_every / dt)))
    snap_steps = {int(round(ts / dt)): ts for ts in snapshot_times}

    state = FreeBoundaryState.initial(init)
    state.dhdt = front_speed(state, m)
    rows = []

    def record(st):
        rows.append((st.t, st.h, st.dhdt) + _compact_metrics(st, compact_radius))

    record(state)
    snapshots = {}
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = state
    inv = {"u_min": float(state.u.min()), "u_max": float(state.u.max()),
           "v_min": float(state.v.min()), "v_max": float(state.v.max()),
           "min_dh": math.inf, "u_bound": u_bound, "v_bound": v_bound, "steps": 0}
    for k in range(1, n_steps + 1):
        new = step(state, m, dt, u_bound, v_bound)
        inv["min_dh"] = min(inv["min_dh"], new.h - state.h)
        inv["u_min"] = min(inv["u_min"], float(new.u.min()))
        inv["u_max"] = max(inv["u_max"], float(new.u.max()))
        inv["v_min"] = min(inv["v_min"], float(new.v.min()))
        inv["v_max"] = max(inv["v_max"], float(new.v.max()))
        inv["steps"] = k
        state = new
        if state.h > 0.9 * init.R_max:
            raise DomainExhausted(f"front h={state.h:.6g} reached 90% of R_max={init.R_max:.6g}",
                                  trace={"t": state.t, "h": state.h})
        # fix the clock to the step count so sample times are exact
        state = replace(state, t=k * dt)
        if k % every == 0 or k == n_steps:
            record(state)
        if k in snap_steps:
            snapshots[snap_steps[k]] = state
    cols = np.array(rows).T
    return Trajectory(
        times=cols[0], h=cols[1], dhdt=cols[2], umax=cols[3], u_min_compact=cols[4],
        v_max_compact=cols[5], v_min_compact=cols[6], h0=init.h0, compact_radius=compact_radius,
        snapshots=snapshots, final=state, invariants=inv,
    )


def classify_outcome(traj: Trajectory, theta: float = 0.1, theta_u: float = 1e-3,
                     eps_h: float = 1e-4, growth_factor: float = 2.0,
                     min_time: float = 20.0, window_fraction: float = 0.25) -> Outcome:
    """Empirical spreading/vanishing verdict from the end of a trajectory.

    Spreading: h has grown past growth_factor*h0 and beyond the compact
    [0, compact_radius], still advances at a sustained rate over the
    trailing window, and on the compact u > 1 - theta, v < theta.
    Vanishing: h advances by less than eps_h per unit time over the
    trailing window and max u < theta_u.
    """
    t = np.asarray(traj.times)
    if t[-1] - t[0] < min_time or len(t) < 8:
        return Outcome.UNDETERMINED
    t_end = t[-1]
    span = window_fraction * (t_end - t[0])
    last = t >= t_end - span
    prev = (t >= t_end - 2 * span) & ~last
    h = np.asarray(traj.h)

    def rate(mask):
        tt, hh = t[mask], h[mask]
        return (hh[-1] - hh[0]) / (tt[-1] - tt[0]) if tt[-1] > tt[0] else 0.0

    late, earlier = rate(last), rate(prev)
    if (h[-1] >= growth_factor * traj.h0 and h[-1] > traj.compact_radius
            and late > eps_h and late >= 0.5 * earlier
            and traj.u_min_compact[-1] > 1.0 - theta and traj.v_max_compact[-1] < theta):
        return Outcome.SPREADING
    if late < eps_h and traj.umax[-1] < theta_u:
        return Outcome.VANISHING
    return Outcome.UNDETERMINED


def measure_speed(traj: Trajectory, window_fraction: float = 0.5) -> tuple[float, float]:
    """Least-squares slope of h(t) over the trailing fraction of the run and its standard error."""
    t = np.asarray(traj.times)
    h = np.asarray(traj.h)
    if not 0 < window_fraction <= 1:
        raise DomainError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    mask = t >= t[-1] - window_fraction * (t[-1] - t[0])
    if mask.sum() < 3:
        raise DomainError(f"only {int(mask.sum())} samples in the fitting window")
    fit = stats.linregress(t[mask], h[mask])
    return float(fit.slope), float(fit.stderr)


def compare_with_semiwave(state: FreeBoundaryState, prof: SemiWaveProfile,
                          R_cmp: float | None = None) -> dict:
    """Sup-norm distance between the solution and the semi-wave placed at the front.

    The semi-wave is evaluated at xi = h(t) - r, so its cut-off sits on the
    free boundary. u is compared on [0, h(t)], v on [0, R_cmp].
    """
    xi_u = state.h - state.r_u
    u_err = float(np.abs(state.u - prof.psi_at(xi_u)).max())
    r = state.r
    R_cmp = min(r[-1], state.h + prof.grid.L_left) if R_cmp is None else R_cmp
    mask = r <= R_cmp
    v_err = float(np.abs(state.v[mask] - prof.phi_at(state.h - r[mask])).max())
    return {"t": state.t, "h": state.h, "u_sup": u_err, "v_sup": v_err, "R_cmp": R_cmp}


def write_front_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "h", "dhdt", "h_over_t"])
        for t, h, dh in zip(traj.times, traj.h, traj.dhdt):
            w.writerow([f"{t:.10g}", repr(float(h)), repr(float(dh)), repr(float(h / t)) if t > 0 else "nan"])


def write_snapshot_csv(state: FreeBoundaryState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "u", "v"])
        for r, u, v in zip(state.r, state.u_on_r(), state.v):
            w.writerow([f"{r:.10g}", repr(float(u)), repr(float(v))])
