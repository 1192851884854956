import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lvspread.errors import DomainError
from lvspread.model import (
    CompetitionRegime,
    GrowthOffsets,
    ModelParams,
    PhysicalParams,
    classify,
    nondimensionalize,
    params_from_mapping,
)

ONES = dict(d1=1, d2=1, a1=1, a2=1, b1=1, b2=1, c1=1, c2=1)


def test_unit_coefficients_give_unit_scaled_values():
    m = nondimensionalize(PhysicalParams(**ONES, mu_hat=3))
    assert (m.d, m.r, m.a, m.b, m.mu) == (1, 1, 1, 1, 3)


def test_mixed_coefficients():
    p = PhysicalParams(d1=2, d2=1, a1=2, a2=1, b1=1, b2=1, c1=1, c2=1, mu_hat=1)
    m = nondimensionalize(p)
    assert (m.d, m.r, m.a, m.b, m.mu) == (2, 2, 2, 0.5, 2)


def test_scaled_initial_radius():
    p = PhysicalParams(**{**ONES, "a2": 4}, mu_hat=1, H0=1)
    assert p.h0 == 2


@pytest.mark.parametrize("name", ["d1", "a2", "c1", "mu_hat", "H0"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_nonpositive_physical_field_is_named(name, bad):
    kw = {**ONES, "mu_hat": 1, "H0": 1, name: bad}
    with pytest.raises(DomainError, match=name):
        nondimensionalize(PhysicalParams(**kw))


@pytest.mark.parametrize("field", ["d", "r", "a", "mu"])
def test_scaled_params_must_be_positive(field):
    kw = dict(d=1, r=1, a=2, b=0.5, mu=1)
    kw[field] = 0.0
    with pytest.raises(DomainError, match=field):
        ModelParams(**kw)


def test_b_zero_is_the_decoupled_limit_and_negative_b_fails():
    assert ModelParams(d=1, r=1, a=2, b=0.0, mu=1).b == 0.0
    with pytest.raises(DomainError, match="b"):
        ModelParams(d=1, r=1, a=2, b=-0.1, mu=1)


@pytest.mark.parametrize("N", [0, 1.5, -2])
def test_dimension_must_be_positive_integer(N):
    with pytest.raises(DomainError):
        ModelParams(d=1, r=1, a=2, b=0.5, mu=1, N=N)


@pytest.mark.parametrize("a,b,regime", [
    (2, 0.5, CompetitionRegime.SUPERIOR_U),
    (0.5, 2, CompetitionRegime.INFERIOR_U),
    (2, 2, CompetitionRegime.OTHER),
    (0.5, 0.5, CompetitionRegime.OTHER),
    (1.0, 0.5, CompetitionRegime.OTHER),
])
def test_classify(a, b, regime):
    assert classify(ModelParams(d=1, r=1, a=a, b=b, mu=1)) is regime


def test_offsets_keep_levels_positive():
    off = GrowthOffsets(eps_u=-0.1, eps_v=0.2)
    assert off.u_level == pytest.approx(0.9) and off.v_level == pytest.approx(1.2)
    with pytest.raises(DomainError):
        GrowthOffsets(eps_u=-1.0)
    with pytest.raises(DomainError):
        GrowthOffsets(eps_v=-2.0)


def test_physical_block_wins_over_scaled_block():
    cfg = {**{k: "1" for k in ONES}, "mu_hat": "3", "a": "5", "b": "0.1", "d": "1", "r": "1", "mu": "9"}
    m, h0 = params_from_mapping(cfg)
    assert (m.a, m.mu) == (1, 3) and h0 is None


def test_scaled_block_with_h0_and_dimension():
    m, h0 = params_from_mapping({"a": "2", "b": "0.5", "d": "1", "r": "1", "mu": "1", "h0": "5", "N": "3"})
    assert m.N == 3 and h0 == 5


def test_incomplete_block_lists_missing_keys():
    with pytest.raises(DomainError, match="mu"):
        params_from_mapping({"a": "2", "b": "0.5", "d": "1", "r": "1"})


positive = st.floats(min_value=1e-2, max_value=1e2, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(d1=positive, d2=positive, a1=positive, a2=positive, b1=positive, b2=positive,
       c1=positive, c2=positive, mu_hat=positive, H0=positive,
       kappa=st.floats(min_value=1e-3, max_value=1e3))
def test_time_rescaling_leaves_scaled_system_unchanged(d1, d2, a1, a2, b1, b2, c1, c2, mu_hat, H0, kappa):
    p = PhysicalParams(d1, d2, a1, a2, b1, b2, c1, c2, mu_hat, H0)
    q = PhysicalParams(*(kappa * x for x in (d1, d2, a1, a2, b1, b2, c1, c2, mu_hat)), H0)
    m, n = nondimensionalize(p), nondimensionalize(q)
    for name in ("d", "r", "a", "b", "mu"):
        assert getattr(n, name) == pytest.approx(getattr(m, name), rel=1e-12)
    assert q.h0 == pytest.approx(p.h0, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(a1=positive, a2=positive, b1=positive, b2=positive, c1=positive, c2=positive)
def test_superior_regime_matches_growth_ratio_condition(a1, a2, b1, b2, c1, c2):
    ratio = a1 / a2
    other = max(b1 / b2, c1 / c2)
    assume(abs(ratio - other) > 1e-9 * max(ratio, other))
    m = nondimensionalize(PhysicalParams(1, 1, a1, a2, b1, b2, c1, c2, 1))
    assert (classify(m) is CompetitionRegime.SUPERIOR_U) == (ratio > other)
