import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
import yaml

from bnlab.errors import ConfigError
from bnlab.harness import (
    aggregate_runs,
    build_cells,
    final_score,
    from_mapping,
    interp_series,
    load_config,
    normalize_scores,
    parse_axis_values,
    plot_aggregates,
    read_metrics,
    run_config,
    run_filename,
    run_single,
    run_suites,
    with_updates,
    write_aggregate_csv,
)
from bnlab.harness.cli import main
from bnlab.harness.sweep import SweepCell, run_sweep


def tiny_mapping(**overrides):
    base = {
        "label": "tiny",
        "env": {"kind": "lqr", "horizon": 30},
        "agent": {"hidden": [8], "mode": "ETT/TT"},
        "train": {
            "total_steps": 120,
            "warmup_steps": 30,
            "batch_size": 16,
            "eval_every": 60,
            "eval_episodes": 1,
            "qbias_episodes": 1,
        },
        "seeds": [0],
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key].update(value)
        else:
            base[key] = value
    return base


class TestConfig:
    def test_defaults_are_materialized(self):
        cfg = from_mapping(tiny_mapping())
        assert cfg.agent["tau"] == 0.01
        assert cfg.agent["noise"]["clip_c"] == 0.3
        # resolved fields
        assert cfg.agent["discount"] == 0.99  # from the control problem spec
        assert cfg.agent["noise"]["decay_steps"] == 60  # half of total_steps
        assert cfg.train["eval_discounted"] is True
        assert cfg.env["action_limit"] == 1.0

    def test_pendulum_defaults(self):
        cfg = from_mapping(
            tiny_mapping(env={"kind": "pendulum"}, train={"eval_every": 60})
        )
        assert cfg.env["max_torque"] == 2.0
        assert cfg.train["eval_discounted"] is False
        env = cfg.build_env(np.random.default_rng(0))
        assert env.action_limit == 2.0

    def test_maze_builds(self):
        m = tiny_mapping()
        m["env"] = {"kind": "maze"}  # replace, not merge: no lqr keys
        cfg = from_mapping(m)
        env = cfg.build_env(np.random.default_rng(0))
        assert env.observation_dim == 2

    def test_env_params_do_not_cross_kinds(self):
        m = tiny_mapping()
        m["env"] = {"kind": "maze", "horizon": 30}
        with pytest.raises(ConfigError, match="env.horizon"):
            from_mapping(m)

    def test_unknown_top_level_field(self):
        with pytest.raises(ConfigError, match="banana"):
            from_mapping(tiny_mapping(banana=1))

    def test_unknown_nested_field_names_path(self):
        with pytest.raises(ConfigError, match="agent.learning_rte"):
            from_mapping(tiny_mapping(agent={"learning_rte": 1e-3}))

    def test_unknown_env_kind(self):
        with pytest.raises(ConfigError, match="env.kind"):
            from_mapping(tiny_mapping(env={"kind": "cartpole"}))

    def test_missing_total_steps(self):
        m = tiny_mapping()
        m["train"].pop("total_steps")
        with pytest.raises(ConfigError, match="total_steps"):
            from_mapping(m)

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            from_mapping(tiny_mapping(seeds=[]))

    def test_non_integer_seed_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            from_mapping(tiny_mapping(seeds=[0, "one"]))

    def test_hash_is_stable(self):
        assert (
            from_mapping(tiny_mapping()).config_hash
            == from_mapping(tiny_mapping()).config_hash
        )

    def test_hash_changes_with_any_field(self):
        base = from_mapping(tiny_mapping()).config_hash
        assert from_mapping(tiny_mapping(seeds=[1])).config_hash != base
        assert (
            from_mapping(tiny_mapping(agent={"tau": 0.02})).config_hash != base
        )
        assert (
            from_mapping(tiny_mapping(env={"horizon": 31})).config_hash != base
        )

    def test_hash_ignores_out_dir(self):
        a = from_mapping(tiny_mapping(out_dir="x"))
        b = from_mapping(tiny_mapping(out_dir="y"))
        assert a.config_hash == b.config_hash

    def test_with_updates_revalidates(self):
        cfg = from_mapping(tiny_mapping())
        new = with_updates(cfg, {"agent.learning_rate": 3e-4})
        assert new.agent["learning_rate"] == 3e-4
        assert new.config_hash != cfg.config_hash
        with pytest.raises(ConfigError, match="no such config field"):
            with_updates(cfg, {"agent.nope": 1})

    def test_mode_string_validated_at_load(self):
        with pytest.raises(ValueError):
            from_mapping(tiny_mapping(agent={"mode": "EE/XY"}))

    def test_load_config_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump(tiny_mapping()), encoding="utf-8")
        cfg = load_config(path)
        assert cfg.label == "tiny"
        assert cfg.config_hash == from_mapping(tiny_mapping()).config_hash


class TestRunner:
    def test_writes_named_csv_and_config_json(self, tmp_path):
        cfg = from_mapping(tiny_mapping())
        results = run_config(cfg, out_dir=tmp_path)
        expected = tmp_path / run_filename(cfg.config_hash, 0)
        assert results[0].csv_path == expected
        assert expected.exists()
        payload = json.loads(
            (tmp_path / f"config_{cfg.config_hash}.json").read_text()
        )
        assert payload["config_hash"] == cfg.config_hash
        assert payload["agent"]["tau"] == 0.01  # defaults materialized

    def test_zero_steps_gives_header_only_csv(self, tmp_path):
        cfg = from_mapping(tiny_mapping(train={"total_steps": 0}))
        res = run_single(cfg, 0, out_dir=tmp_path)
        lines = res.csv_path.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("step,")

    def test_rerun_overwrites_byte_identically(self, tmp_path):
        cfg = from_mapping(tiny_mapping())
        first = run_single(cfg, 0, out_dir=tmp_path).csv_path.read_bytes()
        second = run_single(cfg, 0, out_dir=tmp_path).csv_path.read_bytes()
        assert first == second

    def test_different_seeds_different_files(self, tmp_path):
        cfg = from_mapping(tiny_mapping(seeds=[0, 1]))
        results = run_config(cfg, out_dir=tmp_path)
        paths = {r.csv_path for r in results}
        assert len(paths) == 2
        a, b = sorted(paths)
        assert a.read_bytes() != b.read_bytes()

    def test_runs_do_not_disturb_other_outputs(self, tmp_path):
        cfg_a = from_mapping(tiny_mapping())
        cfg_b = from_mapping(tiny_mapping(agent={"learning_rate": 5e-4}))
        path_a = run_single(cfg_a, 0, out_dir=tmp_path).csv_path
        before = path_a.read_bytes()
        run_single(cfg_b, 0, out_dir=tmp_path)
        assert path_a.read_bytes() == before

    def test_fault_sidecar_written_and_cleared(self, tmp_path):
        bad = from_mapping(
            tiny_mapping(agent={"optimizer": "sgd", "learning_rate": 1e8})
        )
        res = run_single(bad, 0, out_dir=tmp_path)
        sidecar = res.csv_path.with_suffix(".fault")
        assert res.faulted
        assert sidecar.exists()
        assert "step" in sidecar.read_text()

    def test_out_env_var_used_as_default_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BNLAB_OUT", str(tmp_path / "envroot"))
        cfg = from_mapping(tiny_mapping(train={"total_steps": 0}))
        res = run_single(cfg, 0)
        assert res.csv_path.parent == tmp_path / "envroot"


def toy_metrics(tmp_path, name, rows):
    """Write a minimal schema-compatible CSV and return its path."""
    from bnlab.agent import METRIC_COLUMNS, RunMetrics

    m = RunMetrics()
    for row in rows:
        filled = dict.fromkeys(METRIC_COLUMNS, 0.0)
        filled.update(row)
        m.append([filled[c] for c in METRIC_COLUMNS])
    path = tmp_path / name
    m.to_csv(path)
    return path


class TestAggregate:
    def test_single_file_mean_is_data_std_zero(self, tmp_path):
        p = toy_metrics(
            tmp_path, "a.csv",
            [{"step": 1, "eval_return": 5.0}, {"step": 2, "eval_return": 7.0}],
        )
        stats = aggregate_runs([p], "eval_return")
        np.testing.assert_array_equal(stats.mean, [5.0, 7.0])
        np.testing.assert_array_equal(stats.std, [0.0, 0.0])
        np.testing.assert_array_equal(stats.count, [1, 1])

    def test_population_std_convention(self, tmp_path):
        a = toy_metrics(tmp_path, "a.csv", [{"step": 1, "eval_return": 1.0}])
        b = toy_metrics(tmp_path, "b.csv", [{"step": 1, "eval_return": 3.0}])
        stats = aggregate_runs([a, b], "eval_return")
        assert stats.mean[0] == 2.0
        assert stats.std[0] == 1.0

    def test_permutation_invariance(self, tmp_path):
        rng = np.random.default_rng(0)
        paths = [
            toy_metrics(
                tmp_path, f"r{i}.csv",
                [{"step": s, "eval_return": rng.standard_normal()}
                 for s in (1, 2, 3)],
            )
            for i in range(4)
        ]
        fwd = aggregate_runs(paths, "eval_return")
        rev = aggregate_runs(paths[::-1], "eval_return")
        np.testing.assert_array_equal(fwd.mean, rev.mean)
        np.testing.assert_array_equal(fwd.std, rev.std)

    def test_matches_independent_recomputation(self, tmp_path):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((5, 4))  # 5 runs, 4 shared steps
        paths = [
            toy_metrics(
                tmp_path, f"r{i}.csv",
                [{"step": s + 1, "eval_return": data[i, s]} for s in range(4)],
            )
            for i in range(5)
        ]
        stats = aggregate_runs(paths, "eval_return")
        np.testing.assert_allclose(stats.mean, data.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(stats.std, data.std(axis=0), atol=1e-12)
        np.testing.assert_allclose(stats.min, data.min(axis=0), atol=0)
        np.testing.assert_allclose(stats.max, data.max(axis=0), atol=0)

    def test_union_of_steps_with_partial_runs(self, tmp_path):
        a = toy_metrics(
            tmp_path, "a.csv",
            [{"step": 1, "eval_return": 1.0}, {"step": 2, "eval_return": 2.0}],
        )
        b = toy_metrics(tmp_path, "b.csv", [{"step": 2, "eval_return": 4.0}])
        stats = aggregate_runs([a, b], "eval_return")
        np.testing.assert_array_equal(stats.steps, [1, 2])
        np.testing.assert_array_equal(stats.count, [1, 2])
        np.testing.assert_array_equal(stats.mean, [1.0, 3.0])

    def test_nan_values_are_skipped_not_averaged(self, tmp_path):
        a = toy_metrics(
            tmp_path, "a.csv", [{"step": 1, "eval_return": float("nan")}]
        )
        b = toy_metrics(tmp_path, "b.csv", [{"step": 1, "eval_return": 4.0}])
        stats = aggregate_runs([a, b], "eval_return")
        assert stats.mean[0] == 4.0
        assert stats.count[0] == 1

    def test_schema_mismatch_rejected(self, tmp_path):
        good = toy_metrics(tmp_path, "a.csv", [{"step": 1}])
        bad = tmp_path / "bad.csv"
        bad.write_text("step,other\n1,2\n", encoding="utf-8")
        with pytest.raises(ValueError, match="schema"):
            aggregate_runs([good, bad], "eval_return")

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            aggregate_runs([], "eval_return")

    def test_write_aggregate_csv(self, tmp_path):
        a = toy_metrics(tmp_path, "a.csv", [{"step": 1, "eval_return": 1.5}])
        stats = aggregate_runs([a], "eval_return")
        out = tmp_path / "agg.csv"
        write_aggregate_csv(stats, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "step,mean,std,min,max,count"
        assert lines[1].startswith("1,1.5,")

    def test_interp_fills_gaps_linearly(self):
        steps = np.array([0, 10, 20])
        values = np.array([0.0, np.nan, 4.0])
        out = interp_series(steps, values, steps)
        np.testing.assert_allclose(out, [0.0, 2.0, 4.0])

    def test_final_score_last_tenth(self, tmp_path):
        rows = [{"step": i, "eval_return": float(i)} for i in range(1, 21)]
        p = toy_metrics(tmp_path, "a.csv", rows)
        # 20 rows -> last 2 -> mean(19, 20)
        assert final_score(read_metrics(p)) == pytest.approx(19.5)

    def test_final_score_of_empty_is_nan(self, tmp_path):
        p = toy_metrics(tmp_path, "a.csv", [])
        assert math.isnan(final_score(read_metrics(p)))


class TestSweep:
    def test_parse_axis_values(self):
        assert parse_axis_values("learning_rate", "1e-4, 1e-3") == [1e-4, 1e-3]
        assert parse_axis_values("mix_ratio", "none,1,2") == [None, 1, 2]
        assert parse_axis_values("mode_string", "ETT/TT,Origin") == [
            "ETT/TT", "Origin",
        ]
        with pytest.raises(ConfigError):
            parse_axis_values("widget", "1")

    def test_build_cells_cartesian(self):
        cells = build_cells(
            [("learning_rate", [1e-4, 1e-3]), ("optimizer", ["sgd", "adam"])]
        )
        assert len(cells) == 4
        assert cells[0].label == "learning_rate=0.0001|optimizer=sgd"
        assert cells[0].overrides == {
            "agent.learning_rate": 1e-4, "agent.optimizer": "sgd",
        }

    def test_duplicate_axis_rejected(self):
        with pytest.raises(ConfigError):
            build_cells([("optimizer", ["sgd"]), ("optimizer", ["adam"])])

    def test_normalization_positive_scores(self):
        cells = [
            SweepCell({}, "a", raw_score=2.0),
            SweepCell({}, "b", raw_score=1.0),
            SweepCell({}, "c", raw_score=float("nan"), faulted_seeds=1),
        ]
        normalize_scores(cells)
        assert [c.normalized for c in cells] == [1.0, 0.5, 0.0]

    def test_normalization_negative_scores_stay_in_unit_interval(self):
        # Returns are costs here: best is the least negative.
        cells = [
            SweepCell({}, "a", raw_score=-5.0),
            SweepCell({}, "b", raw_score=-50.0),
        ]
        normalize_scores(cells)
        assert cells[0].normalized == 1.0
        assert cells[1].normalized == pytest.approx(0.1)
        assert all(0 < c.normalized <= 1 for c in cells)

    def test_normalization_preserves_ordering(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            raw = rng.uniform(-100, 100, 5)
            cells = [SweepCell({}, str(i), raw_score=v) for i, v in enumerate(raw)]
            normalize_scores(cells)
            norm = np.array([c.normalized for c in cells])
            order_raw = np.argsort(raw)
            assert (np.diff(norm[order_raw]) >= -1e-12).all()

    def test_degenerate_sweep_equals_run(self, tmp_path):
        cfg = from_mapping(tiny_mapping())
        cells = run_sweep(cfg, [("learning_rate", [1e-3])], out_dir=tmp_path)
        assert len(cells) == 1
        assert cells[0].normalized == 1.0
        # the sweep cell is literally the same config (same hash, same file)
        assert cells[0].config_hash == cfg.config_hash
        direct = run_single(cfg, 0, out_dir=tmp_path)
        assert cells[0].seed_scores[0] == pytest.approx(
            final_score(direct.metrics)
        )

    def test_faulted_cell_recorded_not_dropped(self, tmp_path):
        cfg = from_mapping(tiny_mapping(agent={"optimizer": "sgd"}))
        cells = run_sweep(
            cfg, [("learning_rate", [1e-3, 1e8])], out_dir=tmp_path
        )
        assert len(cells) == 2
        faulted = [c for c in cells if c.faulted]
        assert len(faulted) == 1
        assert faulted[0].normalized == 0.0


def flat_stats(value, steps=(0, 10, 20)):
    from bnlab.harness import AggregateStats

    n = len(steps)
    return AggregateStats(
        column="eval_return",
        steps=np.array(steps),
        mean=np.full(n, float(value)),
        std=np.zeros(n),
        min=np.full(n, float(value)),
        max=np.full(n, float(value)),
        count=np.ones(n, dtype=int),
    )


class TestPlot:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        series = [("one", flat_stats(1.0)), ("two", flat_stats(3.0))]
        plot_aggregates(series, a, title="t")
        plot_aggregates(series, b, title="t")
        assert a.read_bytes() == b.read_bytes()

    def test_two_series_two_legend_entries(self, tmp_path):
        path = tmp_path / "p.svg"
        plot_aggregates([("alpha", flat_stats(1)), ("beta", flat_stats(2))], path)
        text = path.read_text()
        assert "alpha" in text and "beta" in text
        root = ET.fromstring(text)  # well-formed XML
        ns = "{http://www.w3.org/2000/svg}"
        polylines = root.findall(f"{ns}polyline")
        assert len(polylines) == 2

    def test_flat_series_band_has_zero_height(self, tmp_path):
        path = tmp_path / "flat.svg"
        plot_aggregates([("flat", flat_stats(2.0))], path)
        root = ET.fromstring(path.read_text())
        ns = "{http://www.w3.org/2000/svg}"
        polygon = root.find(f"{ns}polygon")
        ys = {pt.split(",")[1] for pt in polygon.attrib["points"].split()}
        assert len(ys) == 1  # upper edge == lower edge

    def test_empty_input_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            plot_aggregates([], tmp_path / "x.svg")

    def test_label_escaping(self, tmp_path):
        path = tmp_path / "esc.svg"
        plot_aggregates([("a<b&c", flat_stats(1))], path)
        ET.fromstring(path.read_text())


class TestVerifySuites:
    @pytest.mark.parametrize("suite", ["bn", "gradients", "theorem1", "lqr"])
    def test_suite_passes(self, suite):
        results = run_suites([suite])
        assert results, suite
        failing = [r.line() for r in results if not r.passed]
        assert not failing, failing

    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="unknown suite"):
            run_suites(["nope"])

    def test_line_format_is_machine_readable(self):
        results = run_suites(["lqr"])
        for r in results:
            assert r.line().split()[0] in ("PASS", "FAIL")
            assert "measured=" in r.line() and "limit=" in r.line()


class TestCli:
    def write_config(self, tmp_path, **overrides):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump(tiny_mapping(**overrides)), encoding="utf-8")
        return path

    def test_train_command(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        code = main(["train", str(cfg_path), "--out", str(tmp_path / "o")])
        out = capsys.readouterr().out
        assert code == 0
        assert "seed 0" in out
        assert list((tmp_path / "o").glob("run_*_seed0.csv"))

    def test_train_seed_override(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        code = main([
            "train", str(cfg_path), "--out", str(tmp_path / "o"),
            "--seed", "7",
        ])
        assert code == 0
        assert list((tmp_path / "o").glob("run_*_seed7.csv"))
        assert not list((tmp_path / "o").glob("run_*_seed0.csv"))

    def test_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("env: {kind: warp}\ntrain: {total_steps: 1}\nseeds: [0]\n")
        code = main(["train", str(path)])
        assert code == 2
        assert "env.kind" in capsys.readouterr().err

    def test_aggregate_command(self, tmp_path, capsys):
        a = toy_metrics(tmp_path, "a.csv", [{"step": 1, "eval_return": 1.0}])
        b = toy_metrics(tmp_path, "b.csv", [{"step": 1, "eval_return": 3.0}])
        code = main(["aggregate", str(a), str(b)])
        out = capsys.readouterr().out
        assert code == 0
        assert out.splitlines()[0] == "step,mean,std,min,max,count"
        assert out.splitlines()[1].startswith("1,2.0,1.0")

    def test_plot_command_groups_by_config_hash(self, tmp_path, capsys):
        cfg = from_mapping(tiny_mapping(seeds=[0, 1]))
        out_dir = tmp_path / "runs"
        run_config(cfg, out_dir=out_dir)
        files = sorted(str(p) for p in out_dir.glob("run_*.csv"))
        svg = tmp_path / "curves.svg"
        code = main(["plot", *files, "-o", str(svg)])
        assert code == 0
        root = ET.fromstring(svg.read_text())
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f"{ns}polyline")) == 1  # one config group

    def test_sweep_command(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path, train={"total_steps": 80})
        out = tmp_path / "sweepout"
        code = main([
            "sweep", str(cfg_path),
            "--axis", "optimizer", "--values", "sgd,adam",
            "--out", str(out),
        ])
        stdout = capsys.readouterr().out
        assert code == 0
        assert "optimizer=sgd" in stdout and "optimizer=adam" in stdout
        assert list(out.glob("sweep_*.csv")) and list(out.glob("sweep_*.json"))

    def test_sweep_axis_values_mismatch(self, tmp_path, capsys):
        cfg_path = self.write_config(tmp_path)
        code = main([
            "sweep", str(cfg_path),
            "--axis", "optimizer", "--axis", "learning_rate",
            "--values", "sgd",
        ])
        assert code == 2

    def test_verify_command(self, capsys):
        code = main(["verify", "lqr"])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS lqr.riccati_residual" in out
