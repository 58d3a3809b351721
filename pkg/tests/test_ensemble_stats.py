import numpy as np
import pytest
from pydantic import ValidationError

from curveflow.curve_geometry import circle_profile
from curveflow.ensemble_stats import EnsembleConfig, EnsembleStats, martingale_tests, run_ensemble
from curveflow.errors import InsufficientPaths
from curveflow.models import FlowConfig
from curveflow.spectral import AngleGrid


def make_config(n_paths=30, flow="srcf", t_end=0.01, checkpoints=(0.005,), base_seed=100, **flow_options):
    return EnsembleConfig(n_paths=n_paths, base_seed=base_seed, flow=flow, checkpoints=list(checkpoints),
                          flow_config=FlowConfig(t_end=t_end, **flow_options), max_workers=4)


@pytest.fixture
def small_circle():
    return circle_profile(1.0, AngleGrid(64), symmetry_order=4)


def test_config_checkpoints():
    config = make_config(checkpoints=(0.005, 0.0025))
    assert config.all_checkpoints == [0.0, 0.0025, 0.005, 0.01]
    path_config = config.path_config()
    assert path_config.record_times == [0.0025, 0.005, 0.01]
    assert path_config.record_every == 0 and not path_config.record_profiles
    with pytest.raises(ValidationError):
        make_config(checkpoints=(0.5,))


def test_circle_ensemble(small_circle):
    stats, records = run_ensemble(small_circle, make_config(), progress=False)
    assert stats.n_paths == 30 and len(records) == 30
    assert [r.seed for r in records] == list(range(100, 130))
    assert stats.checkpoints == [0.0, 0.005, 0.01]
    start = stats.entry(0.0, "inv_lambda")
    assert start.mean == pytest.approx(1.0 / np.pi, rel=1e-12)
    assert start.se == pytest.approx(0.0, abs=1e-15)
    for t in stats.checkpoints:
        assert abs(stats.entry(t, "deficit").mean) < 1e-12
        assert stats.entry(t, "h").survivors == 30
    assert stats.entry(0.01, "h").se > 0
    assert stats.stopped == {}


def test_same_base_seed_same_statistics(small_circle):
    first, _ = run_ensemble(small_circle, make_config(), progress=False)
    second, _ = run_ensemble(small_circle, make_config(), progress=False)
    other, _ = run_ensemble(small_circle, make_config(base_seed=200), progress=False)
    assert first.table == second.table
    assert first.entry(0.01, "h").mean != other.entry(0.01, "h").mean


def test_stopped_paths_carry_last_value(small_circle):
    # rho_cap knapp über 1: die meisten Pfade stoppen früh
    config = make_config(rho_cap=1.01)
    stats, records = run_ensemble(small_circle, config, progress=False)
    stopped = [r for r in records if r.stop_reason == "rho_cap"]
    assert stopped
    assert stats.stopped["rho_cap"] == len(stopped)
    record = stopped[0]
    assert not record.alive[-1]
    assert record.values["h"][-1] == pytest.approx(record.trajectory.reports[-1].h)
    assert stats.entry(0.01, "h").survivors == sum(r.alive[-1] for r in records)


def test_martingale_tests_need_enough_paths(small_circle):
    stats, records = run_ensemble(small_circle, make_config(n_paths=10), progress=False)
    with pytest.raises(InsufficientPaths):
        martingale_tests(stats, records)


def test_entropy_no_claim_below_order_three():
    circle = circle_profile(1.0, AngleGrid(64), symmetry_order=2)
    stats, records = run_ensemble(circle, make_config(), progress=False)
    report = martingale_tests(stats, records)
    assert report.verdict("entropy_supermartingale").status == "no-claim"
    assert report.verdict("inv_lambda_martingale").status in ("pass", "fail")
    assert len(report.survivor_sensitivity) == 3


def test_scf_makes_no_claims(small_circle):
    stats, records = run_ensemble(small_circle, make_config(flow="scf"), progress=False)
    report = martingale_tests(stats, records)
    assert {v.status for v in report.verdicts} == {"no-claim"}
    assert report.all_passed


def test_verdicts_from_constructed_statistics():
    def row(t, quantity, mean, se):
        return {"t": t, "quantity": quantity, "mean": mean, "std": se * np.sqrt(100), "se": se, "survivors": 100}

    table = [row(0.0, "inv_lambda", 0.3, 0.0), row(1.0, "inv_lambda", 0.31, 0.001),
             row(0.0, "h", 2.0, 0.0), row(1.0, "h", 1.9, 0.01),
             row(0.0, "entropy", 0.27, 0.0), row(1.0, "entropy", 0.28, 0.005)]
    stats = EnsembleStats(n_paths=100, base_seed=0, flow="srcf", symmetry_order=3, checkpoints=[0.0, 1.0],
                          quantities=["inv_lambda", "h", "entropy"], table=table)
    report = martingale_tests(stats)
    assert report.verdict("inv_lambda_martingale").status == "fail"
    assert report.verdict("h_supermartingale").status == "pass"
    assert report.verdict("entropy_supermartingale").status == "pass"
    assert not report.all_passed
    # ohne Überlebenden-Spalten keine Aussage
    assert {v.status for v in report.survivor_sensitivity} == {"no-claim"}


@pytest.mark.slow
def test_martingale_verdicts_for_flower(flower3):
    config = EnsembleConfig(n_paths=256, base_seed=0, flow="srcf",
                            flow_config=FlowConfig(t_end=0.25))
    stats, records = run_ensemble(flower3, config, progress=False)
    report = martingale_tests(stats, records)
    assert stats.entry(0.0, "h").mean == pytest.approx(2.0 / 0.99, rel=1e-8)
    assert report.all_passed, [(v.name, v.statistic, v.threshold) for v in report.verdicts]


def test_path_config_keeps_record_every():
    config = EnsembleConfig(n_paths=30, flow_config=FlowConfig(t_end=0.01, enforce_symmetry=True), record_every=3)
    path_config = config.path_config()
    assert path_config.record_every == 3
    assert path_config.enforce_symmetry
    assert path_config.record_times == [0.01]


def test_record_every_keeps_checkpoint_values(small_circle):
    sparse, _ = run_ensemble(small_circle, make_config(), progress=False)
    config = make_config().model_copy(update={"record_every": 2})
    dense, records = run_ensemble(small_circle, config, progress=False)
    assert len(records[0].trajectory.times) > 3
    assert dense.table == sparse.table


def test_standard_error_scales_with_paths(small_circle):
    few, _ = run_ensemble(small_circle, make_config(n_paths=30), progress=False)
    many, _ = run_ensemble(small_circle, make_config(n_paths=120), progress=False)
    for stats in (few, many):
        row = stats.entry(0.01, "inv_lambda")
        assert row.se == pytest.approx(row.std / np.sqrt(stats.n_paths), rel=1e-12)
    ratio = few.entry(0.01, "inv_lambda").se / many.entry(0.01, "inv_lambda").se
    assert 1.4 < ratio < 2.8


@pytest.mark.slow
def test_verdicts_stable_under_halved_step(flower3):
    statuses = []
    for cfl in (0.4, 0.2):
        config = EnsembleConfig(n_paths=128, base_seed=0, flow="srcf", flow_config=FlowConfig(t_end=0.1, cfl=cfl))
        stats, records = run_ensemble(flower3, config, progress=False)
        report = martingale_tests(stats, records)
        statuses.append([(v.name, v.status) for v in report.verdicts])
    assert statuses[0] == statuses[1]
    assert all(status != "fail" for _, status in statuses[0])
