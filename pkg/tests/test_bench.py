import csv
import json
import logging
from pathlib import Path

import numpy as np
import pytest

from layercode import bench, csscode
from layercode.cli import main as cli_main


class TestBuildEnsemble:
    def test_filter_postconditions(self):
        rng = np.random.default_rng(12)
        codes = bench.build_ensemble(7, 200, 5, rng)
        assert len(codes) == 5
        dists = []
        for code in codes:
            assert code.k == 1
            dx, dz = csscode.min_distance(code)
            assert dx == dz
            dists.append(dx)
        assert dists == sorted(dists, reverse=True)

    def test_deterministic(self):
        first = bench.build_ensemble(5, 100, 4, np.random.default_rng(9))
        second = bench.build_ensemble(5, 100, 4, np.random.default_rng(9))
        assert [bench.code_hash(c) for c in first] == [
            bench.code_hash(c) for c in second
        ]

    def test_even_n_rejected(self):
        with pytest.raises(ValueError):
            bench.build_ensemble(6, 10, 2, np.random.default_rng(0))

    def test_short_ensemble_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="layercode.bench"):
            codes = bench.build_ensemble(5, 3, 50, np.random.default_rng(1))
        assert len(codes) < 50
        assert any("ensemble" in rec.message for rec in caplog.records)


class TestSpecValidation:
    def test_rejects_bad_specs(self):
        good = dict(kind="memory", n_grid=(5,), beta_grid=(3.0,))
        bench.ExperimentSpec(**good)
        for bad in (
            dict(good, kind="anneal"),
            dict(good, n_grid=()),
            dict(good, beta_grid=()),
            dict(good, trials=0),
            dict(good, decoder="bp"),
            dict(kind="threshold", n_grid=(5,), p_grid=()),
        ):
            with pytest.raises(ValueError):
                bench.ExperimentSpec(**bad)


SMALL = dict(candidates=100, keep=4, seed=3)


@pytest.fixture(scope="module")
def rows_and_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("thr") / "thr.csv"
    spec = bench.ExperimentSpec(
        kind="threshold", n_grid=(5,), p_grid=(0.0, 0.5), trials=60, **SMALL
    )
    rows = bench.threshold_experiment(spec, out)
    return rows, out


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    base = tmp_path_factory.mktemp("mem")
    spec = bench.ExperimentSpec(
        kind="memory", n_grid=(5,), beta_grid=(3.0, 4.0), trials=6, **SMALL
    )
    rows = bench.memory_experiment(spec, base / "mem.csv")
    return rows, base


class TestThresholdExperiment:
    def test_endpoints(self, rows_and_files):
        rows, _ = rows_and_files
        by_p = {p: (fails, rate) for _, p, _, fails, rate, _ in rows}
        assert by_p[0.0] == (0, 0.0)
        assert by_p[0.5][1] > 0.4

    def test_csv_schema_and_stderr(self, rows_and_files):
        rows, out = rows_and_files
        with open(out, newline="") as fh:
            parsed = list(csv.DictReader(fh))
        assert list(parsed[0]) == ["n", "p", "trials", "failures", "rate", "stderr"]
        for row in parsed:
            rate = float(row["rate"])
            want = np.sqrt(rate * (1 - rate) / int(row["trials"]))
            assert float(row["stderr"]) == pytest.approx(want)

    def test_manifest(self, rows_and_files):
        _, out = rows_and_files
        manifest = json.loads(out.with_suffix(".manifest.json").read_text())
        assert manifest["kind"] == "threshold"
        assert "workers" not in manifest
        assert len(manifest["codes"]["5"]) == 4
        assert all(len(h) == 12 for h in manifest["codes"]["5"])


class TestMemoryExperiment:
    def test_aggregate_rows(self, outputs):
        rows, _ = outputs
        assert [(n, b) for n, b, *_ in rows] == [(5, 3.0), (5, 4.0)]
        for _, _, mean, sem, trials, censored in rows:
            assert mean > 0 and sem >= 0
            assert trials == 6 and 0 <= censored <= trials

    def test_sem_recomputed_from_trial_log(self, outputs):
        rows, base = outputs
        with open(base / "mem.trials.csv", newline="") as fh:
            trial_rows = list(csv.DictReader(fh))
        assert len(trial_rows) == 12
        assert list(trial_rows[0]) == [
            "code_id", "n", "beta", "seed", "t_fail", "censored", "flips", "decodes",
        ]
        for n, beta, mean, sem, trials, _ in rows:
            times = np.array(
                [
                    float(r["t_fail"])
                    for r in trial_rows
                    if float(r["beta"]) == beta and int(r["n"]) == n
                ]
            )
            assert len(times) == trials
            assert mean == pytest.approx(times.mean())
            assert sem == pytest.approx(times.std(ddof=1) / np.sqrt(trials))

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        outs = {}
        for workers in (1, 2):
            out = tmp_path / f"w{workers}.csv"
            spec = bench.ExperimentSpec(
                kind="memory", n_grid=(5,), beta_grid=(3.0,), trials=6,
                workers=workers, **SMALL,
            )
            bench.memory_experiment(spec, out)
            outs[workers] = out
        for suffix in ("", ".trials"):
            a = outs[1].with_name(outs[1].stem + suffix + ".csv").read_bytes()
            b = outs[2].with_name(outs[2].stem + suffix + ".csv").read_bytes()
            assert a == b
        assert (
            outs[1].with_suffix(".manifest.json").read_bytes()
            == outs[2].with_suffix(".manifest.json").read_bytes()
        )


def synthetic_rows(betas, ns, mean_of):
    return [
        {"n": n, "beta": b, "mean_tfail": mean_of(n, b)} for b in betas for n in ns
    ]


class TestFitReport:
    def test_slope_law_round_trip(self):
        rows = synthetic_rows(
            [8.0, 9.0, 10.0, 11.0],
            [5, 7, 9, 11, 13],
            lambda n, b: float(np.exp((1.732 * b - 13.235) * np.log(n))),
        )
        rep = bench.fit_report(rows)
        assert rep.slope_coef[0] == pytest.approx(1.732, abs=1e-6)
        assert rep.slope_coef[1] == pytest.approx(-13.235, abs=1e-6)
        for f in rep.per_beta:
            assert f.slope == pytest.approx(1.732 * f.beta - 13.235, abs=1e-9)
            assert f.slope_stderr == pytest.approx(0.0, abs=1e-9)

    def test_quadratic_round_trip(self):
        peak = {5: 0.5, 7: 1.0, 9: 0.25}
        rows = synthetic_rows(
            [3.0, 4.0, 5.0, 6.0, 7.0],
            [5, 7, 9],
            lambda n, b: float(np.exp(0.695 * b * b - 7.11 * b + 26.1)) * peak[n],
        )
        rep = bench.fit_report(rows)
        assert np.allclose(rep.tstar_coef, (0.695, -7.11, 26.1), atol=1e-6)
        assert all(f.n_star == 7 for f in rep.per_beta)

    def test_nstar_round_trip(self):
        rows = []
        for b in [3.0, 4.0, 5.0, 6.0]:
            nstar = float(np.exp(0.448 * b - 0.562))
            rows += synthetic_rows(
                [b], [nstar / 2, nstar, nstar * 2],
                lambda n, b: 100.0 if n == nstar else 30.0,
            )
        rep = bench.fit_report(rows)
        assert rep.nstar_coef[0] == pytest.approx(0.448, abs=1e-6)
        assert rep.nstar_coef[1] == pytest.approx(-0.562, abs=1e-6)

    def test_constant_data_slope_zero(self):
        rows = synthetic_rows([1.0, 2.0, 3.0], [5, 7, 9], lambda n, b: 7.0)
        rep = bench.fit_report(rows)
        for f in rep.per_beta:
            assert f.slope == pytest.approx(0.0, abs=1e-12)
            assert f.n_star == 5  # ties go to the smaller n

    def test_needs_three_betas(self):
        rows = synthetic_rows([1.0, 2.0], [5, 7], lambda n, b: n)
        with pytest.raises(ValueError):
            bench.fit_report(rows)

    def test_reads_csv_path(self, tmp_path):
        rows = synthetic_rows([2.0, 3.0, 4.0], [5, 7], lambda n, b: n * b)
        path = tmp_path / "agg.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, ["n", "beta", "mean_tfail", "sem", "trials", "censored"]
            )
            writer.writeheader()
            for r in rows:
                writer.writerow({**r, "sem": 0.1, "trials": 6, "censored": 0})
        rep = bench.fit_report(path)
        assert len(rep.per_beta) == 3
        json.loads(rep.to_json())


class TestCli:
    def test_ensemble_command(self, tmp_path):
        out = tmp_path / "ens.json"
        cli_main(
            ["ensemble", "--n", "5", "--candidates", "50", "--keep", "3",
             "--seed", "2", "--out", str(out)]
        )
        payload = json.loads(out.read_text())
        entries = payload["codes"]["5"]
        assert len(entries) == 3
        assert all(e["k"] == 1 and e["dx"] == e["dz"] for e in entries)

    def test_memory_then_fit(self, tmp_path):
        mem = tmp_path / "mem.csv"
        cli_main(
            ["memory", "--n", "5", "7", "--beta", "3", "4", "5", "--trials", "4",
             "--candidates", "50", "--keep", "3", "--seed", "2", "--out", str(mem)]
        )
        fit = tmp_path / "fit.json"
        cli_main(["fit", str(mem), "--out", str(fit)])
        report = json.loads(fit.read_text())
        assert [f["beta"] for f in report["per_beta"]] == [3.0, 4.0, 5.0]

    def test_threshold_command(self, tmp_path):
        out = tmp_path / "thr.csv"
        cli_main(
            ["threshold", "--n", "5", "--p", "0.0", "--trials", "5",
             "--candidates", "50", "--keep", "2", "--seed", "2", "--out", str(out)]
        )
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["rate"] == "0.0"
