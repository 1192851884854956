"""Model coefficients, the physical-to-scaled change of variables and
competition-regime classification for the Lotka-Volterra free-boundary
problem

    u_t - d Lap u = r u (1 - u - b v),   0 <= r < h(t)
    v_t -   Lap v =   v (1 - v - a u),   0 <= r < inf
    h'(t) = -mu u_r(t, h(t)).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

from .errors import DomainError

__all__ = [
    "PhysicalParams",
    "ModelParams",
    "CompetitionRegime",
    "GrowthOffsets",
    "nondimensionalize",
    "classify",
    "params_from_mapping",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional coefficients of the original system.

    ``d1, d2`` diffusion rates, ``a1, a2`` intrinsic growth rates, ``b1, c2``
    intraspecific and ``c1, b2`` interspecific competition rates, ``mu_hat``
    the free-boundary coefficient and ``H0`` the initial radius.
    """

    d1: float
    d2: float
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    mu_hat: float
    H0: float = 1.0

    def check(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"physical parameter {f.name} must be positive, got {value!r}")

    @property
    def h0(self) -> float:
        """Initial radius in scaled length units, sqrt(a2/d2) * H0."""
        self.check()
        return math.sqrt(self.a2 / self.d2) * self.H0


@dataclass(frozen=True)
class ModelParams:
    d: float
    r: float
    a: float
    b: float
    mu: float
    N: int = 1

    def __post_init__(self):
        for name in ("d", "r", "a", "b", "mu"):
            value = getattr(self, name)
            # b = 0 is kept as the decoupled limit where u no longer feels v
            ok = value >= 0 if name == "b" else value > 0
            if not (ok and math.isfinite(value)):
                kind = "nonnegative" if name == "b" else "positive"
                raise DomainError(f"{name} must be {kind}, got {value!r}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    def replace(self, **changes) -> "ModelParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ModelParams(**values)


class CompetitionRegime(enum.Enum):
    SUPERIOR_U = "SuperiorU"
    INFERIOR_U = "InferiorU"
    OTHER = "Other"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class GrowthOffsets:
    """Additive shifts of the carrying levels of u and v.

    Zero offsets give the unperturbed semi-wave problem; small nonzero
    offsets give the shifted problems used to bracket the spreading speed.
    """

    eps_u: float = 0.0
    eps_v: float = 0.0

    def __post_init__(self):
        if not 1.0 + self.eps_u > 0:
            raise DomainError(f"carrying level 1 + eps_u must stay positive (eps_u={self.eps_u})")
        if not 1.0 + self.eps_v > 0:
            raise DomainError(f"carrying level 1 + eps_v must stay positive (eps_v={self.eps_v})")

    @property
    def u_level(self) -> float:
        return 1.0 + self.eps_u

    @property
    def v_level(self) -> float:
        return 1.0 + self.eps_v


NO_OFFSETS = GrowthOffsets()


def nondimensionalize(p: PhysicalParams, N: int = 1) -> ModelParams:
    """Reduce physical coefficients to the scaled ones (d, r, a, b, mu).

    The scaled initial radius is available as ``p.h0``.
    """
    p.check()
    return ModelParams(
        d=p.d1 / p.d2,
        r=p.a1 / p.a2,
        a=p.a1 * p.b2 / (p.a2 * p.b1),
        b=p.a2 * p.c1 / (p.a1 * p.c2),
        mu=p.a1 / (p.b1 * p.d2) * p.mu_hat,
        N=N,
    )


def classify(m: ModelParams) -> CompetitionRegime:
    if m.a > 1.0 > m.b:
        return CompetitionRegime.SUPERIOR_U
    if m.a < 1.0 < m.b:
        return CompetitionRegime.INFERIOR_U
    return CompetitionRegime.OTHER


_PHYSICAL_KEYS = ("d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "mu_hat")
_SCALED_KEYS = ("d", "r", "a", "b", "mu")


def params_from_mapping(cfg) -> tuple[ModelParams, float | None]:
    """Build ``ModelParams`` from a flat mapping of numbers.

    Accepts either the physical block (d1 ... c2, mu_hat, optional H0) or the
    scaled block (d, r, a, b, mu); the physical block wins when both are
    complete. Returns the parameters and the scaled initial radius (from H0
    when physical, from ``h0`` when given, else None).
    """
    N = int(cfg.get("N", 1))
    if all(k in cfg for k in _PHYSICAL_KEYS):
        phys = PhysicalParams(**{k: float(cfg[k]) for k in _PHYSICAL_KEYS}, H0=float(cfg.get("H0", 1.0)))
        h0 = phys.h0 if "H0" in cfg else (float(cfg["h0"]) if "h0" in cfg else None)
        return nondimensionalize(phys, N=N), h0
    missing = [k for k in _SCALED_KEYS if k not in cfg]
    if missing:
        raise DomainError(
            "configuration needs a complete physical block "
            f"({', '.join(_PHYSICAL_KEYS)}) or scaled block; missing {', '.join(missing)}"
        )
    m = ModelParams(**{k: float(cfg[k]) for k in _SCALED_KEYS}, N=N)
    return m, (float(cfg["h0"]) if "h0" in cfg else None)
