import json

import numpy as np
import pytest

from coinbind.harness import (
    CAPITAL_AXIS, CSV_HEADER, DEFAULTS, POISSON_SEEDS, ConfigError, ExperimentConfig, RunResult,
    cell_seeds, desk_scale_axes, emit_csv, emit_plot, expand_grid, reference_config, run_scenario,
    run_sweep,
)

SMALL = {"run.window": 900, "strategy.interval_blocks": 150}


def test_config_defaults_and_errors():
    cfg = ExperimentConfig.from_dict({})
    assert cfg["version"] == 1 and cfg["run.window"] == DEFAULTS["run.window"]
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"nope": 1, "pool.fee_rate": "x", "adversary.kind": "ninja"})
    assert len(err.value.errors) == 3
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"version": 2})
    with pytest.raises(ConfigError, match="pool.fee_rate"):
        ExperimentConfig.from_dict({"pool.fee_rate": 0.5})
    with pytest.raises(ConfigError, match="path.csv"):
        ExperimentConfig.from_dict({"path.kind": "csv"})


def test_config_load(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"version": 1, "seed": 4}))
    assert ExperimentConfig.load(f)["seed"] == 4
    f.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(f)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_hash_ignores_output_keys():
    a = ExperimentConfig.from_dict({"seed": 1})
    assert a.hash == a.with_values({"output.csv": "x.csv"}).hash
    assert a.hash != a.with_values({"seed": 2}).hash


def test_no_adversary_twin_identity():
    r = run_scenario(reference_config("none"))
    np.testing.assert_array_equal(r.coinalg_profit, r.baseline_profit)
    assert r.cost_of_transparency == 0.0
    assert np.all(r.adversary_profit == 0.0)


@pytest.mark.parametrize("kind", ["theft", "sandwich", "covert"])
def test_twin_matches_adversary_free_run(kind):
    cfg = reference_config(kind, seed=3)
    exposed = run_scenario(cfg)
    alone = run_scenario(cfg.with_values({"adversary.kind": "none"}))
    np.testing.assert_array_equal(exposed.baseline_profit, alone.coinalg_profit)


def test_constant_path_never_trades():
    r = run_scenario({**SMALL, "path.drift": 0.0, "path.volatility": 0.0, "adversary.kind": "sandwich"})
    assert not r.coinalg_traded.any()
    assert np.all(r.coinalg_profit == 0.0) and np.all(r.adversary_profit == 0.0)


def test_theft_on_rising_path():
    r = run_scenario(reference_config("theft"))
    assert r.final_adversary > 0
    assert r.final_coinalg < r.final_baseline


@pytest.mark.parametrize("kind", ["none", "theft", "sandwich", "long_range", "covert"])
def test_conservation_audit(kind):
    cfg = reference_config(kind).with_values({"strategy.schedule": "poisson",
                                              "strategy.lambda_blocks": 1800.0,
                                              "path.volatility": 2e-3})
    assert run_scenario(cfg).audit_error <= 1e-6


def test_deep_liquidity_sandwich_abstains():
    cfg = reference_config("sandwich").with_values({"pool.reserve_tok": 5e8, "pool.fee_rate": 0.003})
    r = run_scenario(cfg)
    assert r.abstentions > 0
    assert r.cost_of_transparency == 0.0


def test_jittered_wrapper_runs_deterministically(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "strategy.wrapper.jitter_blocks": 3,
                                      "adversary.kind": "sandwich"})
    a, b = run_scenario(cfg), run_scenario(cfg)
    np.testing.assert_array_equal(a.coinalg_profit, b.coinalg_profit)


def test_csv_path_scenario(tmp_path):
    f = tmp_path / "p.csv"
    rows = "\n".join(f"{h},{2000 * (1 + 1e-4) ** h:.6f}" for h in range(0, 1300, 10))
    f.write_text("block,price\n" + rows + "\n")
    r = run_scenario({**SMALL, "path.kind": "csv", "path.csv": str(f)})
    assert len(r) == 900 and r.coinalg_traded.any()


def test_sweep_two_by_two():
    cells = run_sweep(SMALL, {"seed": [0, 1], "adversary.kind": ["none", "theft"]})
    assert len(cells) == 4 and all(c.ok and len(c.results) == 1 for c in cells)


def test_sweep_poisson_cell_runs_sixteen_seeds():
    cells = run_sweep({**SMALL, "strategy.lambda_blocks": 300.0},
                      {"strategy.schedule": ["poisson"]})
    assert len(cells[0].results) == POISSON_SEEDS == 16
    assert cell_seeds(ExperimentConfig.from_dict({"seed": 5})) == [5]


def test_sweep_resume_and_failures(tmp_path):
    axes = {"seed": [0, 1], "pool.fee_rate": [0.0005, 0.5]}
    cells = run_sweep(SMALL, axes, tmp_path)
    assert sum(c.ok for c in cells) == 2
    assert all("pool.fee_rate" in c.error for c in cells if not c.ok)
    assert len(list(tmp_path.glob("*.json"))) == 2
    again = run_sweep(SMALL, axes, tmp_path)
    assert all(c.results == [] for c in again if c.ok)


def test_desk_scale_grid_sizes():
    axes = desk_scale_axes()
    assert len(expand_grid({}, axes)) == 3 * 2 * 2 * 4
    two = desk_scale_axes(capitals=((12, 8), (300, 200)))
    cells = expand_grid({}, two)
    assert len(cells) == 24
    for c in cells:
        ExperimentConfig.from_dict(c)
    assert {c["coinalg.capital_tok"] for c in cells} == {6.0, 150.0}


def test_zipped_axis_validation():
    with pytest.raises(ConfigError):
        expand_grid({}, {CAPITAL_AXIS: [[1, 2]]})
    with pytest.raises(ConfigError):
        expand_grid({}, {"seed": []})


def test_csv_emission(tmp_path):
    emit_csv(RunResult.empty(), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == CSV_HEADER + "\n"
    r = run_scenario({"run.window": 3, "strategy.interval_blocks": 1, "adversary.kind": "sandwich"})
    lines = emit_csv(r, tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 4
    assert all(len(row.split(",")) == 7 for row in lines)


def test_csv_is_byte_identical(tmp_path):
    cfg = reference_config("sandwich", seed=7)
    a = emit_csv(run_scenario(cfg), tmp_path / "a.csv").read_bytes()
    b = emit_csv(run_scenario(cfg), tmp_path / "b.csv").read_bytes()
    assert a == b


def test_banded_plot(tmp_path):
    cfg = reference_config("sandwich").with_values({"strategy.schedule": "poisson",
                                                    "strategy.lambda_blocks": 3600.0})
    runs = [run_scenario(cfg, seed=s) for s in cell_seeds(cfg)]
    out = emit_plot(runs, tmp_path / "p.svg")
    svg = out.read_text()
    assert svg.startswith("<?xml") and "<svg" in svg
    assert svg.count("<path") > 3
