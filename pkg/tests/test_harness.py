import json
import math
import statistics
from decimal import Decimal

import pytest

from edgetoll import cli, harness
from edgetoll.chainsim import ETHER
from edgetoll.harness import CSV_COLUMNS, ConfigError, ExperimentConfig


def small(**kw):
    base = dict(repetitions=3, task_counts=(1, 5, 10))
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_defaults():
    cfg = ExperimentConfig()
    assert cfg.task_counts == (1, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    assert cfg.repetitions == 100
    assert ExperimentConfig(experiment="cost_min").task_counts == (5, 10, 15, 20)


@pytest.mark.parametrize("bad", [
    {"repetitions": 0}, {"task_counts": ()}, {"edge_counts": (0,)}, {"price_scheme": (4,)},
    {"experiment": "nope"}, {"block_intervals_s": (0,)}, {"seed": -1}, {"jobs": -1},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


def test_config_file_and_unknown_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"repetitions": 7, "task_counts": [2, 4]}))
    cfg = ExperimentConfig.from_file(str(path), seed=3)
    assert (cfg.repetitions, cfg.task_counts, cfg.seed) == (7, (2, 4), 3)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_channel_benefit_rows():
    rows = harness.run_channel_benefit(small())
    assert harness.check_channel_benefit(rows) == []
    gas = {(r.mode, r.tasks, r.gas_price_gwei): Decimal(r.mean) for r in rows if r.unit == "ether"}
    assert gas[("PC", 10, 7)] == Decimal("0.001281")
    assert gas[("WPC", 10, 1)] == Decimal("0.000161")
    times = {(r.mode, r.tasks, r.interval_s): float(r.mean) for r in rows if r.unit == "s"}
    assert times[("PC", 5, 5.0)] == pytest.approx(5 * 14.9 + 10)
    assert times[("WPC", 5, 15.0)] == pytest.approx(5 * (14.9 + 15))


def test_row_means_match_samples():
    rows = harness.run_channel_benefit(small()) + harness.run_cost_min(
        ExperimentConfig(experiment="cost_min", repetitions=5, task_counts=(5,), edge_counts=(1, 5)))
    for row in rows:
        assert len(row.samples) in (3, 5)
        if row.unit == "s":
            assert float(row.mean) == math.fsum(row.samples) / len(row.samples)
            assert float(row.stddev) == pytest.approx(statistics.stdev(row.samples))
        else:
            assert Decimal(row.mean) * ETHER * len(row.samples) == sum(row.samples)


def test_measure_subsets():
    time_rows = harness.run_channel_benefit(small(experiment="channel_benefit_time"))
    gas_rows = harness.run_channel_benefit(small(experiment="channel_benefit_gas"))
    assert {r.unit for r in time_rows} == {"s"} and {r.unit for r in gas_rows} == {"ether"}


def test_unequal_grid_lengths():
    rows = harness.run_channel_benefit(small(block_intervals_s=(5.0,), gas_prices_gwei=(1, 4, 7)))
    assert {r.interval_s for r in rows if r.unit == "s"} == {5.0}
    assert {r.gas_price_gwei for r in rows if r.unit == "ether"} == {1, 4, 7}


def test_cost_min_single_edge_saves_nothing():
    cfg = ExperimentConfig(experiment="cost_min", repetitions=10, edge_counts=(1, 3))
    rows = harness.run_cost_min(cfg)
    assert harness.check_cost_min(rows) == []
    for row in rows:
        if row.mode == "saved" and row.edges == 1:
            assert row.samples == (0,) * 10


def test_cost_min_rows_consistent():
    cfg = ExperimentConfig(experiment="cost_min", repetitions=4, task_counts=(5,), edge_counts=(5,),
                           price_scheme=(3,))
    rows = {r.mode: r for r in harness.run_cost_min(cfg)}
    for cm, wcm, saved in zip(rows["CM"].samples, rows["WCM"].samples, rows["saved"].samples):
        assert wcm - cm == saved >= 0


def test_csv_layout():
    text = harness.write_csv(harness.run_channel_benefit(small(repetitions=2, task_counts=(1,))))
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 3 * 2 * 2


def test_parallel_matches_serial():
    serial = harness.write_csv(harness.run_channel_benefit(small(repetitions=4, jobs=1)))
    parallel = harness.write_csv(harness.run_channel_benefit(small(repetitions=4, jobs=2)))
    assert serial == parallel


def test_cli_usage_errors(capsys):
    assert cli.main(["channel-benefit", "--repetitions", "0"]) == cli.EXIT_USAGE
    assert cli.main(["cost-min", "--edge-counts", "0"]) == cli.EXIT_USAGE
    assert cli.main(["channel-benefit", "--config", "/nonexistent.json"]) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as err:
        cli.main(["bogus"])
    assert err.value.code == 2


def test_cli_writes_csv(tmp_path):
    out = tmp_path / "cb.csv"
    code = cli.main(["channel-benefit", "--repetitions", "2", "--task-counts", "1", "5",
                     "--gas-prices-gwei", "7", "--block-intervals-s", "5", "--out", str(out)])
    assert code == cli.EXIT_OK
    assert out.read_text().startswith("experiment,mode,tasks")


def test_cli_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"repetitions": 2, "edge_counts": [2], "task_counts": [5]}))
    out = tmp_path / "cm.csv"
    assert cli.main(["cost-min", "--config", str(cfg), "--seed", "9", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 1 + 3 * 3


def test_integration_report():
    report = harness.run_integration(ExperimentConfig(), tasks=3, n_edges=2, forge_after=1)
    assert report.ok, report.first_failure
    names = {c.name for c in report.checks}
    assert {"forged_agreement_rejected", "collateral_after_withdraw", "total_supply_conserved"} <= names


def test_integration_cli_exit_code(tmp_path):
    out = tmp_path / "int.csv"
    assert cli.main(["integration", "--tasks", "2", "--edges", "1", "--no-forgery", "--out", str(out)]) == 0
    assert cli.main(["integration", "--tasks", "0"]) == cli.EXIT_USAGE
