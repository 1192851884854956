import logging

import pytest

from lvspread import harness
from lvspread.errors import ConfigError, DomainError
from lvspread.harness import ExperimentSpec, FrozenReference, Scenario, check_frozen, freeze, run
from lvspread.model import ModelParams

REF = ModelParams(d=1, r=1, a=2, b=0.5, mu=1)


def test_required_knobs():
    with pytest.raises(ConfigError, match="t_end"):
        ExperimentSpec(REF, Scenario.SPREADING_VERIFICATION, {"h0": 5.0})
    with pytest.raises(ConfigError, match="mu_list"):
        ExperimentSpec(REF, "MuSweep", {})


def test_mu_list_must_increase():
    with pytest.raises(ConfigError, match="increasing"):
        ExperimentSpec(REF, Scenario.MU_SWEEP, {"mu_list": [1.0, 1.0, 2.0]})


def test_spec_from_config_collects_knobs(tmp_path):
    cfg = {"a": "2", "b": "0.5", "d": "1", "r": "1", "mu": "1", "h0": "5", "t_end": "50",
           "mu_list": "0.1, 1", "n_u": "200"}
    spec = harness.spec_from_config(cfg, "SpreadingVerification", tmp_path)
    assert spec.knobs["t_end"] == 50.0 and spec.knobs["mu_list"] == [0.1, 1.0] and spec.knobs["n_u"] == 200
    with pytest.raises(ConfigError):
        harness.spec_from_config({**cfg, "b": "-1"}, "SpeedSelection")


def test_mu_sweep_is_monotone(tmp_path):
    rep = run(ExperimentSpec(REF, Scenario.MU_SWEEP, {"mu_list": [0.1, 1, 10, 100]}, tmp_path))
    assert rep.values["monotone"] == 1 and rep.values["n"] == 4
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("a,b,d,r,mu,s0_lower") and len(rows) == 5
    s_mu = [float(r.split(",")[8]) for r in rows[1:]]
    assert s_mu == sorted(s_mu)
    assert (tmp_path / "summary.txt").read_text().startswith("RESULT MuSweep ")


def test_convergence_study_ratios(tmp_path):
    rep = run(ExperimentSpec(REF, Scenario.CONVERGENCE_STUDY, {}, tmp_path))
    assert 3 <= rep.values["ratio_xi"] <= 5
    assert 1.7 <= rep.values["ratio_dt"] <= 2.5
    assert 3 <= rep.values["ratio_s_mu"] <= 5
    assert (tmp_path / "converge.csv").exists()


def test_spreading_verification_gap(tmp_path):
    spec = ExperimentSpec(REF, Scenario.SPREADING_VERIFICATION,
                          {"h0": 5.0, "t_end": 200.0, "snapshot_times": [100.0]}, tmp_path)
    rep = run(spec)
    assert rep.values["outcome"] == "Spreading" and rep.values["gap"] < 0.05
    assert (tmp_path / "front.csv").exists() and (tmp_path / "snapshot_100.csv").exists()
    store = harness.load_store(harness.default_store_path())
    assert all(e.status == "pass" for e in check_frozen(store, rep.frozen))


def test_semiwave_table_is_deterministic(tmp_path):
    knobs = {"s_values": [0.0, 0.7, 1.6]}
    a = run(ExperimentSpec(REF, Scenario.SEMI_WAVE_TABLE, knobs, tmp_path / "a"))
    run(ExperimentSpec(REF, Scenario.SEMI_WAVE_TABLE, knobs, tmp_path / "b"))
    assert a.values == {"profiles": 2, "degenerate": 1}
    for f in ("semiwave_table.csv", "semiwave_s0.7.csv", "summary.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_batch_matches_serial():
    specs = [ExperimentSpec(REF.replace(mu=mu), Scenario.SPEED_SELECTION) for mu in (0.5, 2.0)]
    batch = harness.run_batch(specs, max_workers=2)
    assert [r.values["s_mu"] for r in batch] == [run(s).values["s_mu"] for s in specs]


def test_errors_carry_the_experiment():
    spec = ExperimentSpec(REF, Scenario.CONVERGENCE_STUDY, {"conv_s": 1.8})
    with pytest.raises(DomainError, match="ConvergenceStudy"):
        run(spec)


def test_check_exact_deviation_and_new(caplog):
    store = {"x": FrozenReference("x", 1.0, 1e-6, "n"), "y": FrozenReference("y", 2.0, 1e-3)}
    with caplog.at_level(logging.WARNING):
        entries = {e.key: e for e in check_frozen(store, {"x": 1.0, "y": 2.01, "z": 3.0})}
    assert entries["x"].status == "pass"
    assert entries["y"].status == "fail" and "y" in entries["y"].line()
    assert entries["z"].status == "new" and "z" in caplog.text


def test_store_round_trip(tmp_path):
    store = freeze({}, {"k|a=1": 0.25, "j": 1.5}, 1e-4, "note, with comma", tolerances={"j": 0.1})
    path = tmp_path / "s.csv"
    harness.save_store(store, path)
    back = harness.load_store(path)
    assert back == store and back["j"].tolerance == 0.1


@pytest.mark.parametrize("text", [
    "fingerprint,value\nk,1\n",
    "fingerprint,value,tolerance,note\nk,abc,1e-3,\n",
    "fingerprint,value,tolerance,note\nk,1,0,\n",
    "fingerprint,value,tolerance,note\nk,1,1e-3,\nk,2,1e-3,\n",
])
def test_corrupted_store(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ConfigError):
        harness.load_store(path)


def test_packaged_store_loads():
    store = harness.load_store(harness.default_store_path())
    assert any(k.startswith("s_mu_extrapolated|") for k in store)
    assert all(r.tolerance > 0 for r in store.values())
