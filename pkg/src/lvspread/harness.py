"""End-to-end experiments and the frozen regression store."""
from __future__ import annotations

import csv
import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fbsolver
from .config import get_float, get_floats, get_int
from .errors import ConfigError, DomainError, SolverError
from .model import CompetitionRegime, ModelParams, classify, params_from_mapping
from .semiwave import Degenerate, XiGrid, relax_semiwave, validate_profile, write_profile_csv
from .speed import SPEED_CSV_HEADER, ProfileCache, estimate_s0, solve_s_mu

log = logging.getLogger(__name__)

__all__ = [
    "Scenario",
    "ExperimentSpec",
    "ScenarioReport",
    "FrozenReference",
    "CheckEntry",
    "spec_from_config",
    "run",
    "run_batch",
    "load_store",
    "save_store",
    "check_frozen",
    "freeze",
]


class Scenario(enum.Enum):
    SEMI_WAVE_TABLE = "SemiWaveTable"
    SPEED_SELECTION = "SpeedSelection"
    SPREADING_VERIFICATION = "SpreadingVerification"
    MU_SWEEP = "MuSweep"
    CONVERGENCE_STUDY = "ConvergenceStudy"

    def __str__(self):
        return self.value


_REQUIRED = {
    Scenario.SEMI_WAVE_TABLE: ("s_values",),
    Scenario.SPEED_SELECTION: (),
    Scenario.SPREADING_VERIFICATION: ("h0", "t_end"),
    Scenario.MU_SWEEP: ("mu_list",),
    Scenario.CONVERGENCE_STUDY: (),
}


@dataclass
class ExperimentSpec:
    """A scenario, its model and numeric knobs, and where to write results.

    Knobs used (defaults in brackets): L_left, L_right, h_xi [60, 60, 0.1];
    s_values; tol_s [1e-4]; h0, t_end, dt [0.01], R_max, dr [0.1], n_u [400],
    amplitude [1], v_level [1], window_fraction [0.5], snapshot_times;
    mu_list; conv_s [0.5], conv_levels [3], conv_t_end [20].
    """

    model: ModelParams
    scenario: Scenario
    knobs: dict = field(default_factory=dict)
    out_dir: Path | None = None

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        missing = [k for k in _REQUIRED[self.scenario] if k not in self.knobs]
        if missing:
            raise ConfigError(f"{self.scenario} needs {', '.join(missing)}")
        mus = self.knobs.get("mu_list")
        if mus is not None:
            mus = list(mus)
            if not mus or any(b <= a for a, b in zip(mus, mus[1:])):
                raise ConfigError(f"mu_list must be nonempty and strictly increasing, got {mus}")

    def knob(self, key, default=None):
        return self.knobs.get(key, default)

    def grid(self) -> XiGrid:
        return XiGrid(self.knob("L_left", 60.0), self.knob("L_right", 60.0), self.knob("h_xi", 0.1))

    def fingerprint(self, quantity: str, model: ModelParams | None = None, **extra) -> str:
        m = model or self.model
        g = self.grid()
        parts = [quantity, f"a={m.a:g}", f"b={m.b:g}", f"d={m.d:g}", f"r={m.r:g}", f"mu={m.mu:g}", f"N={m.N}"]
        parts += [f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in extra.items()]
        parts.append(f"grid={g.L_left:g}/{g.L_right:g}/{g.h:g}")
        return "|".join(parts)


@dataclass
class ScenarioReport:
    scenario: Scenario
    values: dict  # ordered summary values
    files: list = field(default_factory=list)
    frozen: dict = field(default_factory=dict)  # fingerprint -> value
    tolerances: dict = field(default_factory=dict)  # fingerprint -> tolerance overriding the freeze default
    outcome: fbsolver.Outcome | None = None

    def summary_line(self) -> str:
        def fmt(v):
            if isinstance(v, float):
                return f"{v:.10g}"
            return str(v)
        body = " ".join(f"{k}={fmt(v)}" for k, v in self.values.items())
        return f"RESULT {self.scenario} {body}".rstrip()


_FLOAT_KNOBS = ("L_left", "L_right", "h_xi", "tol_s", "h0", "t_end", "dt", "R_max", "dr",
                "amplitude", "v_level", "window_fraction", "conv_s", "conv_t_end", "sample_every")
_INT_KNOBS = ("n_u", "conv_levels")
_LIST_KNOBS = ("s_values", "mu_list", "snapshot_times")


def spec_from_config(cfg: dict, scenario, out_dir=None) -> ExperimentSpec:
    """Build an ExperimentSpec from a parsed ``key = value`` mapping."""
    try:
        m, h0 = params_from_mapping(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    knobs = {}
    for k in _FLOAT_KNOBS:
        if k in cfg:
            knobs[k] = get_float(cfg, k, None)
    for k in _INT_KNOBS:
        if k in cfg:
            knobs[k] = get_int(cfg, k, None)
    for k in _LIST_KNOBS:
        if k in cfg:
            knobs[k] = get_floats(cfg, k, ())
    if h0 is not None:
        knobs["h0"] = h0
    return ExperimentSpec(m, Scenario(scenario), knobs, Path(out_dir) if out_dir else None)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _r(v):
    return repr(float(v))


def _semiwave_table(spec, out):
    m, grid = spec.model, spec.grid()
    rows, files, frozen = [], [], {}
    n_wave = 0
    for s in spec.knob("s_values"):
        res = relax_semiwave(m, s, grid=grid)
        if isinstance(res, Degenerate):
            rows.append([_r(s), "degenerate", "nan", "nan", "nan", "nan"])
            continue
        n_wave += 1
        rep = validate_profile(res, m)
        rows.append([_r(s), "wave", _r(res.dpsi0), _r(res.residual), _r(rep.phi_tail_slope), _r(rep.gamma1)])
        frozen[spec.fingerprint("dpsi0", s=float(s))] = res.dpsi0
        if out:
            p = out / f"semiwave_s{s:g}.csv"
            write_profile_csv(res, p)
            files.append(p)
    if out:
        p = out / "semiwave_table.csv"
        _write_csv(p, ["s", "status", "dpsi0", "residual", "phi_tail_slope", "gamma1"], rows)
        files.append(p)
    return ScenarioReport(spec.scenario, {"profiles": n_wave, "degenerate": len(rows) - n_wave}, files, frozen)


def _speed_selection(spec, out):
    m, grid = spec.model, spec.grid()
    cache = ProfileCache(m, grid)
    s0 = estimate_s0(m, grid, cache=cache)
    res = solve_s_mu(m, grid=grid, tol_s=spec.knob("tol_s", 1e-4), s0=s0, cache=cache)
    files = []
    if out:
        p = out / "speed.csv"
        _write_csv(p, SPEED_CSV_HEADER, [res.csv_row(m)])
        q = out / "eta_trace.csv"
        _write_csv(q, ["s", "eta"], [[_r(s), _r(e)] for s, e in res.trace])
        files += [p, q]
    vals = {"s0_lower": res.s0_lower, "s0_upper": res.s0_upper, "s0_est": res.s0_est,
            "s_mu": res.s_mu, "eta_residual": res.eta_residual, "marginal": int(res.marginal)}
    frozen = {spec.fingerprint("s0_est"): res.s0_est, spec.fingerprint("s_mu"): res.s_mu}
    return ScenarioReport(spec.scenario, vals, files, frozen)


def _bump_init(spec):
    m = spec.model
    h0, t_end = spec.knob("h0"), spec.knob("t_end")
    dr = spec.knob("dr", fbsolver.DEFAULT_DR)
    R_max = spec.knob("R_max")
    if R_max is None:
        R_max = h0 + 2.0 * math.sqrt(m.r * m.d) * t_end + 25.0
        R_max = dr * math.ceil(R_max / dr)
    return fbsolver.InitialData.bump(h0, R_max, n_u=spec.knob("n_u", fbsolver.DEFAULT_NU), dr=dr,
                                     amplitude=spec.knob("amplitude", 1.0), v_level=spec.knob("v_level", 1.0))


def _spreading_verification(spec, out):
    m = spec.model
    init = _bump_init(spec)
    traj = fbsolver.simulate(init, m, spec.knob("t_end"), dt=spec.knob("dt", fbsolver.DEFAULT_DT),
                             sample_every=spec.knob("sample_every", 0.5),
                             snapshot_times=spec.knob("snapshot_times", ()))
    outcome = fbsolver.classify_outcome(traj)
    files = []
    if out:
        p = out / "front.csv"
        fbsolver.write_front_csv(traj, p)
        files.append(p)
        for ts, st in traj.snapshots.items():
            p = out / f"snapshot_{ts:g}.csv"
            fbsolver.write_snapshot_csv(st, p)
            files.append(p)
    vals = {"outcome": outcome.value, "h_end": float(traj.h[-1]), "umax_end": float(traj.umax[-1])}
    frozen = {spec.fingerprint("h_end", t_end=spec.knob("t_end"), dt=spec.knob("dt", fbsolver.DEFAULT_DT)):
              float(traj.h[-1])}
    if outcome is fbsolver.Outcome.SPREADING and classify(m) is CompetitionRegime.SUPERIOR_U:
        slope, stderr = fbsolver.measure_speed(traj, spec.knob("window_fraction", 0.5))
        res = solve_s_mu(m, grid=spec.grid(), tol_s=spec.knob("tol_s", 1e-4))
        gap = abs(slope - res.s_mu) / res.s_mu
        vals.update(slope=slope, stderr=stderr, s_mu=res.s_mu, gap=gap)
        frozen[spec.fingerprint("gap", t_end=spec.knob("t_end"))] = gap
        if res.profile is not None:
            cmp = fbsolver.compare_with_semiwave(traj.final, res.profile)
            vals.update(u_sup=cmp["u_sup"], v_sup=cmp["v_sup"])
    return ScenarioReport(spec.scenario, vals, files, frozen, outcome=outcome)


def _mu_sweep(spec, out):
    m, grid = spec.model, spec.grid()
    cache = ProfileCache(m, grid)
    s0 = estimate_s0(m, grid, cache=cache)
    rows, results = [], []
    slopes = []
    for mu in spec.knob("mu_list"):
        res = solve_s_mu(m, mu=mu, grid=grid, tol_s=spec.knob("tol_s", 1e-4), s0=s0, cache=cache)
        results.append(res)
        row = res.csv_row(m)
        if spec.knob("t_end") is not None and spec.knob("h0") is not None:
            traj = fbsolver.simulate(_bump_init(spec), m.replace(mu=mu), spec.knob("t_end"),
                                     dt=spec.knob("dt", fbsolver.DEFAULT_DT))
            slope, _ = fbsolver.measure_speed(traj, spec.knob("window_fraction", 0.5))
            slopes.append(slope)
            row.append(_r(slope))
        rows.append(row)
    files = []
    if out:
        p = out / "sweep.csv"
        _write_csv(p, SPEED_CSV_HEADER + (["slope"] if slopes else []), rows)
        files.append(p)
    s_mus = [r.s_mu for r in results]
    increasing = all(b > a for a, b in zip(s_mus, s_mus[1:]))
    vals = {"n": len(results), "s0_est": s0.value, "monotone": int(increasing),
            "s_mu_last": s_mus[-1], "ratio_to_s0": s_mus[-1] / s0.value}
    if slopes:
        vals["slopes_monotone"] = int(all(b > a for a, b in zip(slopes, slopes[1:])))
    frozen = {spec.fingerprint("s_mu", model=m.replace(mu=r.mu)): r.s_mu for r in results}
    return ScenarioReport(spec.scenario, vals, files, frozen)


def richardson_ratio(coarse: float, mid: float, fine: float) -> float:
    """(q_h - q_{h/2}) / (q_{h/2} - q_{h/4}); about 2^p for a method of order p."""
    den = mid - fine
    return (coarse - mid) / den if den != 0 else math.inf


def _convergence_study(spec, out):
    m, grid = spec.model, spec.grid()
    s = spec.knob("conv_s", 0.5)
    levels = spec.knob("conv_levels", 3)
    if levels < 3:
        raise ConfigError("conv_levels must be at least 3")
    rows, dpsi = [], []
    g = grid
    for k in range(levels):
        res = relax_semiwave(m, s, grid=g)
        if isinstance(res, Degenerate):
            raise DomainError(f"no semi-wave at s={s}; pick conv_s below s0")
        dpsi.append(res.dpsi0)
        rows.append(["dpsi0", k, _r(g.h), _r(res.dpsi0)])
        g = g.refined(2)
    ratio_x = richardson_ratio(*dpsi[-3:])
    vals = {"s": s, "dpsi0_fine": dpsi[-1], "ratio_xi": ratio_x}
    frozen, tols = {spec.fingerprint("dpsi0_fine", s=float(s), levels=levels): dpsi[-1]}, {}
    if classify(m) is CompetitionRegime.SUPERIOR_U:
        # s_mu on three grids, extrapolated assuming second-order convergence
        s0 = estimate_s0(m, grid)
        g, s_mus = grid, []
        for k in range(3):
            res = solve_s_mu(m, grid=g, s0=s0, tol_s=1e-6, eta_rel_tol=1e-7)
            s_mus.append(res.s_mu)
            rows.append(["s_mu", k, _r(g.h), _r(res.s_mu)])
            g = g.refined(2)
        extrap = s_mus[-1] + (s_mus[-1] - s_mus[-2]) / 3.0
        vals.update(ratio_s_mu=richardson_ratio(*s_mus), s_mu_extrapolated=extrap)
        key = spec.fingerprint("s_mu_extrapolated")
        frozen[key], tols[key] = extrap, 1e-3
    if classify(m) is CompetitionRegime.SUPERIOR_U or spec.knob("h0") is not None:
        t_end = spec.knob("conv_t_end", 20.0)
        h0 = spec.knob("h0", 5.0)
        sub = ExperimentSpec(m, Scenario.SPREADING_VERIFICATION, {**spec.knobs, "h0": h0, "t_end": t_end})
        dt = spec.knob("dt", fbsolver.DEFAULT_DT) * 4
        hs = []
        for k in range(3):
            traj = fbsolver.simulate(_bump_init(sub), m, t_end, dt=dt)
            hs.append(float(traj.h[-1]))
            rows.append(["h_end", k, _r(dt), _r(hs[-1])])
            dt /= 2
        vals["ratio_dt"] = richardson_ratio(*hs)
    files = []
    if out:
        p = out / "converge.csv"
        _write_csv(p, ["quantity", "level", "step", "value"], rows)
        files.append(p)
    return ScenarioReport(spec.scenario, vals, files, frozen, tols)


_DISPATCH = {
    Scenario.SEMI_WAVE_TABLE: _semiwave_table,
    Scenario.SPEED_SELECTION: _speed_selection,
    Scenario.SPREADING_VERIFICATION: _spreading_verification,
    Scenario.MU_SWEEP: _mu_sweep,
    Scenario.CONVERGENCE_STUDY: _convergence_study,
}


def run(spec: ExperimentSpec) -> ScenarioReport:
    """Run one scenario, write its CSV files and ``summary.txt`` under ``spec.out_dir``."""
    out = spec.out_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    context = f"{spec.scenario} with {spec.model}"
    try:
        report = _DISPATCH[spec.scenario](spec, out)
    except SolverError as exc:
        exc.trace.setdefault("experiment", context)
        raise
    except DomainError as exc:
        raise type(exc)(f"{context}: {exc}") from exc
    if out is not None:
        p = out / "summary.txt"
        p.write_text(report.summary_line() + "\n")
        report.files.append(p)
    return report


def run_batch(specs, max_workers: int | None = None) -> list[ScenarioReport]:
    """Run independent scenarios in separate processes; results keep input order."""
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, specs))


# --- frozen reference store -------------------------------------------------

STORE_HEADER = ["fingerprint", "value", "tolerance", "note"]


@dataclass(frozen=True)
class FrozenReference:
    key: str
    value: float
    tolerance: float
    note: str = ""

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError(f"{self.key}: tolerance must be positive, got {self.tolerance}")


@dataclass
class CheckEntry:
    key: str
    status: str  # "pass" | "fail" | "new"
    value: float
    frozen: float | None = None
    tolerance: float | None = None

    def line(self) -> str:
        if self.status == "new":
            return f"NEW  {self.key} value={self.value!r} (not in store; run freeze to pin it)"
        word = "PASS" if self.status == "pass" else "FAIL"
        return (f"{word} {self.key} value={self.value!r} frozen={self.frozen!r} "
                f"diff={abs(self.value - self.frozen):.3e} tol={self.tolerance:g}")


def load_store(path) -> dict[str, FrozenReference]:
    path = Path(path)
    if not path.exists():
        return {}
    store = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != STORE_HEADER:
                raise ConfigError(f"{path}: bad header {header}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 4:
                    raise ConfigError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
                key = row[0]
                if key in store:
                    raise ConfigError(f"{path}:{lineno}: duplicate fingerprint {key}")
                store[key] = FrozenReference(key, float(row[1]), float(row[2]), row[3])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: corrupted store: {exc}") from exc
    return store


def save_store(store: dict[str, FrozenReference], path) -> None:
    rows = [[r.key, repr(r.value), repr(r.tolerance), r.note] for r in sorted(store.values(), key=lambda r: r.key)]
    _write_csv(path, STORE_HEADER, rows)


def check_frozen(store: dict[str, FrozenReference], results: dict[str, float]) -> list[CheckEntry]:
    """Compare results to the store; unknown fingerprints come back as ``new``, never failed."""
    entries = []
    for key, value in results.items():
        ref = store.get(key)
        if ref is None:
            log.warning("no frozen value for %s", key)
            entries.append(CheckEntry(key, "new", float(value)))
            continue
        ok = bool(np.isfinite(value)) and abs(value - ref.value) <= ref.tolerance
        entries.append(CheckEntry(key, "pass" if ok else "fail", float(value), ref.value, ref.tolerance))
    return entries


def freeze(store: dict[str, FrozenReference], results: dict[str, float], tolerance: float,
           note: str = "", tolerances: dict | None = None) -> dict[str, FrozenReference]:
    """Return a copy of the store with ``results`` pinned (existing keys overwritten).

    ``tolerances`` overrides the default tolerance per key.
    """
    tolerances = tolerances or {}
    out = dict(store)
    for key, value in results.items():
        out[key] = FrozenReference(key, float(value), tolerances.get(key, tolerance), note)
    return out


def default_store_path() -> Path:
    return Path(__file__).parent / "data" / "frozen_reference.csv"
