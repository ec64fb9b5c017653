import csv
import json

import numpy as np
import pytest

from kisa.datagen import RhoSpec
from kisa.experiment import (
    ExperimentResult,
    ExperimentSpec,
    TrialRecord,
    emit_plot_data,
    load_results,
    result_from_dir,
    run_experiment,
    run_trial,
    trial_seed,
)

SMALL = dict(M=2, d=2, rhos=(RhoSpec.uniform(), RhoSpec.exponential(1.0)), T_list=(800,),
             trials=2, seed=3)


def small(tmp_path=None, **kw):
    opts = dict(SMALL, **kw)
    if tmp_path is not None:
        opts["out"] = str(tmp_path)
    return ExperimentSpec(**opts)


class TestSpec:
    def test_round_trip_through_file(self, tmp_path):
        spec = ExperimentSpec(M=3, d=4, T_list=(1000, 2000), trials=7, seed=11,
                              fset=("cos", "tanh"), ica_tol=1e-7, swap_threshold=1e-10,
                              rhos=(RhoSpec.uniform(), RhoSpec.lognormal(0.5, 0.25),
                                    RhoSpec.exponential(2.0)))
        spec.save(tmp_path / "spec.ini")
        assert ExperimentSpec.load(tmp_path / "spec.ini") == spec

    def test_round_trip_letters(self):
        spec = ExperimentSpec(database="aomega", letters=("A", "B", "alpha"))
        assert ExperimentSpec.loads(spec.dumps()) == spec

    def test_overrides_win(self):
        spec = ExperimentSpec.loads(small().dumps(), trials=9)
        assert spec.trials == 9 and spec.M == 2

    @pytest.mark.parametrize("bad", [
        dict(database="nope"), dict(trials=0), dict(T_list=(1,)), dict(mixing="random"),
        dict(fset=("sin",)), dict(M=3),
    ])
    def test_validation(self, bad):
        with pytest.raises((ValueError, KeyError)):
            small(**bad)

    def test_letters_validated(self):
        with pytest.raises(KeyError):
            ExperimentSpec(database="aomega", letters=("A", "not-a-letter"))

    def test_hash_ignores_trials_and_sizes(self):
        a = small()
        assert a.spec_hash() == small(trials=5, T_list=(100, 200)).spec_hash()
        assert a.spec_hash() != small(seed=4).spec_hash()


def test_trial_seed_is_cellwise():
    seeds = {trial_seed(0, T, k) for T in (100, 200) for k in range(5)}
    assert len(seeds) == 10
    assert trial_seed(0, 100, 3) == trial_seed(0, 100, 3)
    assert 0 <= trial_seed(0, 100, 3) < 2**64


def test_run_trial_record():
    rec, wall = run_trial(small(), 800, 0)
    assert rec.ok and 0 <= rec.amari <= 1 and rec.sweeps >= 1 and wall > 0
    assert TrialRecord.from_json(rec.to_json()) == rec


def test_failed_trial_is_recorded():
    rec, _ = run_trial(small(), 3, 0)
    assert not rec.ok and rec.amari is None and "T" in rec.error


class TestRun:
    def test_bookkeeping(self, tmp_path):
        res = run_experiment(small(tmp_path))
        assert [(r.T, r.trial) for r in res.records] == [(800, 0), (800, 1)]
        rows = [json.loads(l) for l in (tmp_path / "results.jsonl").read_text().splitlines()]
        assert len(rows) == 2 and all(r["spec_hash"] == res.spec.spec_hash() for r in rows)
        with open(tmp_path / "summary.csv") as fh:
            summary = list(csv.DictReader(fh))
        vals = [r.amari for r in res.records]
        assert float(summary[0]["mean_r"]) == np.mean(vals)
        assert float(summary[0]["std_r"]) == np.std(vals)
        timing = (tmp_path / "timing.jsonl").read_text().splitlines()
        assert len(timing) == 2

    def test_in_memory(self):
        res = run_experiment(small())
        assert len(res.records) == 2 and not res.failed

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(small(a))
        run_experiment(small(b))
        for name in ("results.jsonl", "summary.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    @pytest.mark.slow
    def test_jobs_do_not_change_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(small(a, T_list=(600, 800)))
        run_experiment(small(b, T_list=(600, 800)), jobs=2)
        assert (a / "results.jsonl").read_bytes() == (b / "results.jsonl").read_bytes()

    def test_resume_after_interruption(self, tmp_path):
        full, cut = tmp_path / "full", tmp_path / "cut"
        spec = dict(T_list=(600, 800), trials=2)
        run_experiment(small(full, **spec))
        run_experiment(small(cut, **spec))
        lines = (cut / "results.jsonl").read_text().splitlines(keepends=True)
        # lose the last row and tear the one before it
        (cut / "results.jsonl").write_text("".join(lines[:2]) + lines[2][:17])
        assert len(load_results(cut)) == 2
        run_experiment(small(cut, **spec))
        assert (cut / "results.jsonl").read_bytes() == (full / "results.jsonl").read_bytes()
        assert (cut / "summary.csv").read_bytes() == (full / "summary.csv").read_bytes()

    def test_extending_reuses_rows(self, tmp_path, monkeypatch):
        run_experiment(small(tmp_path / "x", trials=1))
        calls = []
        import kisa.experiment as ex
        real = ex.run_trial
        monkeypatch.setattr(ex, "run_trial", lambda s, T, k: calls.append((T, k)) or real(s, T, k))
        res = run_experiment(small(tmp_path / "x", trials=2))
        assert calls == [(800, 1)]
        direct = run_experiment(small(tmp_path / "y", trials=2))
        assert ((tmp_path / "x" / "results.jsonl").read_bytes()
                == (tmp_path / "y" / "results.jsonl").read_bytes())
        assert [r.amari for r in res.records] == [r.amari for r in direct.records]

    def test_foreign_rows_ignored(self, tmp_path):
        run_experiment(small(tmp_path, seed=1))
        res = run_experiment(small(tmp_path, seed=2))
        assert {r.spec_hash for r in res.records} == {small(seed=2).spec_hash()}

    def test_result_from_dir(self, tmp_path):
        res = run_experiment(small(tmp_path))
        back = result_from_dir(tmp_path)
        assert back.spec == res.spec and back.records == res.records

    def test_letters_run(self):
        res = run_experiment(ExperimentSpec(database="aomega", letters=("A", "B", "C"),
                                            T_list=(2000,), trials=1))
        assert res.records[0].ok and res.records[0].amari < 0.2


def synthetic(T_to_r):
    spec = small(T_list=tuple(T_to_r), trials=1)
    recs = [TrialRecord(T=T, trial=0, seed=0, spec_hash="x", amari=r) for T, r in T_to_r.items()]
    return ExperimentResult(spec, recs)


class TestPlotData:
    def test_single_size_omits_fit(self, tmp_path):
        path = tmp_path / "curve.csv"
        assert emit_plot_data(synthetic({1000: 0.05}), path) is None
        lines = path.read_text().splitlines()
        assert len(lines) == 3 and lines[-1].startswith("# power_law_fit omitted")

    def test_exact_power_law(self, tmp_path):
        path = tmp_path / "curve.csv"
        fit = emit_plot_data(synthetic({T: 2.0 * T**-0.5 for T in (1000, 4000, 16000)}), path)
        assert fit.c == pytest.approx(0.5, abs=1e-12) and fit.r2 == pytest.approx(1.0)
        lines = path.read_text().splitlines()
        assert lines[0] == "T,mean_r,std_r,log10_T,log10_mean_r"
        assert lines[-1].startswith("# power_law_fit,c=")
        assert float(lines[1].split(",")[3]) == pytest.approx(3.0)

    def test_linear_mode(self, tmp_path):
        path = tmp_path / "curve.csv"
        emit_plot_data(synthetic({100: 0.1, 200: 0.07, 400: 0.05}), path, mode="linear")
        assert path.read_text().splitlines()[0] == "T,mean_r,std_r"

    def test_bad_mode(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot_data(synthetic({100: 0.1}), tmp_path / "c.csv", mode="semilog")
