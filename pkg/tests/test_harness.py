import csv
import subprocess
import sys

import numpy as np
import pytest

from mecsim.config import SimConfig
from mecsim.harness import (
    SLOT_COLUMNS,
    SWEEP_METRICS,
    MetricsSeries,
    SweepSpec,
    run_episode,
    sweep,
    tiny_config,
    write_metrics_csv,
)


FAST = SimConfig(num_wsps=2, mts_per_wsp=2, num_bands=3).validate()


class TestMetricsSeries:
    def test_append_and_array(self):
        s = MetricsSeries()
        s.append(**{c: 1.0 for c in SLOT_COLUMNS})
        s.append(**{c: 3.0 for c in SLOT_COLUMNS})
        assert len(s) == 2
        assert s.array("utility").tolist() == [1.0, 3.0]

    def test_moving_average(self):
        s = MetricsSeries()
        for v in (1.0, 2.0, 3.0, 4.0):
            s.append(**{c: v for c in SLOT_COLUMNS})
        ma = s.moving_average("utility", 2)
        assert ma.tolist() == [1.5, 2.5, 3.5]

    def test_moving_average_short_series(self):
        s = MetricsSeries()
        assert s.moving_average("utility", 5).size == 0

    def test_post_warmup_mean(self):
        s = MetricsSeries()
        for v in (10.0, 2.0, 4.0):
            s.append(**{c: v for c in SLOT_COLUMNS})
        assert s.post_warmup_mean("drops", 1) == pytest.approx(3.0)
        assert np.isnan(s.post_warmup_mean("drops", 10))


class TestRunEpisode:
    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="policy"):
            run_episode(FAST, "magic", seed=0, slots=1)

    @pytest.mark.parametrize("policy", ["drl", "channel", "queue"])
    def test_short_episode_produces_rows(self, policy):
        series = run_episode(FAST, policy, seed=1, slots=20)
        assert len(series) == 20
        assert (series.array("grants") <= FAST.num_bands).all()
        assert np.isfinite(series.array("utility")).all()

    def test_seeded_reruns_identical(self):
        a = run_episode(FAST, "drl", seed=3, slots=40)
        b = run_episode(FAST, "drl", seed=3, slots=40)
        for c in SLOT_COLUMNS:
            np.testing.assert_array_equal(a.array(c), b.array(c))

    def test_different_seeds_differ(self):
        a = run_episode(FAST, "queue", seed=3, slots=60)
        b = run_episode(FAST, "queue", seed=4, slots=60)
        assert not np.array_equal(a.array("queue"), b.array("queue"))


class TestSweep:
    def test_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(rates_bps=()).validate()
        with pytest.raises(ValueError):
            SweepSpec(slots=10, warmup_drl=100).validate()

    def test_shape_and_aggregation(self):
        spec = SweepSpec(
            rates_bps=(1.2e6, 1.8e6),
            slots=30,
            seeds=2,
            policies=("queue", "channel"),
            warmup_drl=0,
            warmup_baseline=10,
        )
        rows = sweep(spec, FAST)
        assert len(rows) == 4  # 2 policies x 2 rates
        for row in rows:
            assert row["seeds"] == 2
            for m in SWEEP_METRICS:
                assert np.isfinite(row[f"{m}_mean"])
                assert row[f"{m}_std"] >= 0.0

    def test_aggregation_identity(self):
        spec = SweepSpec(
            rates_bps=(1.5e6,), slots=30, seeds=2, policies=("queue",),
            warmup_drl=0, warmup_baseline=10,
        )
        rows = sweep(spec, FAST)
        from dataclasses import replace

        vals = []
        for i in range(2):
            cfg = replace(FAST, packet_rate_bps=1.5e6)
            s = run_episode(cfg, "queue", spec.base_seed + i, 30)
            vals.append(s.post_warmup_mean("utility", 10))
        assert rows[0]["utility_mean"] == pytest.approx(np.mean(vals))
        assert rows[0]["utility_std"] == pytest.approx(np.std(vals, ddof=1))


class TestCsv:
    def test_series_round_trip(self, tmp_path):
        series = run_episode(FAST, "queue", seed=0, slots=10)
        path = tmp_path / "run.csv"
        write_metrics_csv(series, str(path))
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10
        assert tuple(rows[0].keys()) == SLOT_COLUMNS
        for i, row in enumerate(rows):
            for c in SLOT_COLUMNS:
                got, want = float(row[c]), series.columns[c][i]
                assert got == want or (np.isnan(got) and np.isnan(want))

    def test_sweep_round_trip(self, tmp_path):
        spec = SweepSpec(
            rates_bps=(1.2e6,), slots=20, seeds=1, policies=("channel",),
            warmup_drl=0, warmup_baseline=5,
        )
        rows = sweep(spec, FAST)
        path = tmp_path / "sweep.csv"
        write_metrics_csv(rows, str(path))
        with open(path) as fh:
            back = list(csv.DictReader(fh))
        assert len(back) == 1
        assert float(back[0]["utility_mean"]) == rows[0]["utility_mean"]

    def test_empty_sweep_writes_nothing(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_metrics_csv([], str(path))
        assert path.read_text() == ""


class TestTinyConfig:
    def test_valid_and_single_terminal(self):
        cfg = tiny_config()
        cfg.validate()
        assert cfg.num_mts == 1
        assert cfg.poisson_mean == pytest.approx(2.0)


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "mecsim.cli", *args],
            capture_output=True, text=True,
        )

    def test_run_subcommand(self, tmp_path):
        out = tmp_path / "out"
        cfg = tmp_path / "tiny.ini"
        cfg.write_text(
            "[network]\nnum_wsps = 2\nmts_per_wsp = 2\nnum_bands = 3\n"
        )
        res = self._run(
            "run", "--config", str(cfg), "--policy", "queue",
            "--slots", "15", "--seed", "1", "--out", str(out),
        )
        assert res.returncode == 0, res.stderr
        csv_path = out / "run_queue_seed1.csv"
        with open(csv_path) as fh:
            assert len(list(csv.DictReader(fh))) == 15

    def test_oracle_subcommand(self, tmp_path):
        out = tmp_path / "oracle"
        res = self._run("oracle", "--out", str(out))
        assert res.returncode == 0, res.stderr
        with open(out / "oracle_values.csv") as fh:
            rows = list(csv.DictReader(fh))
        # 4 cells x 2 fading x 5 queue x 6 task states
        assert len(rows) == 4 * 2 * 5 * 6
        assert all(float(r["value"]) > 0 for r in rows)
