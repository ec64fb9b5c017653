"""Benchmark experiments: configuration, seeded multi-trial runs, persistence.

A run directory holds

``spec.ini``
    the experiment configuration,
``results.jsonl``
    one JSON object per finished trial, ordered by ``(T, trial)``,
``timing.jsonl``
    wall-clock times per trial (kept apart so ``results.jsonl`` is
    reproducible byte for byte),
``summary.csv``
    mean and standard deviation of the Amari error per ``T``.

Existing rows of ``results.jsonl`` with a matching spec hash are reused, so an
interrupted run picks up after the last completed trial, and a run with more
trials or extra sample sizes only computes the new cells.
"""

import configparser
import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .datagen import DEFAULT_RHOS, RhoSpec, load_glyphs, make_observation
from .fcov import FunctionSet
from .metrics import amari_index, power_law_fit
from .model import BlockStructure
from .permsearch import estimate_isa

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "ExperimentResult",
    "trial_seed",
    "run_trial",
    "run_experiment",
    "load_results",
    "emit_plot_data",
    "write_summary",
    "result_from_dir",
]

logger = logging.getLogger(__name__)

DATABASES = ("dspherical", "aomega")


@dataclass(frozen=True)
class ExperimentSpec:
    database: str = "dspherical"
    M: int = 3
    d: int = 2
    rhos: Tuple[RhoSpec, ...] = DEFAULT_RHOS
    letters: Tuple[str, ...] = ()
    T_list: Tuple[int, ...] = (1000,)
    trials: int = 10
    seed: int = 0
    fset: Tuple[str, ...] = ("cos", "cos2")
    mixing: str = "orthogonal"
    ica_tol: float = 1e-6
    ica_max_iter: int = 500
    max_sweeps: int = 100
    swap_threshold: float = 1e-12
    out: Optional[str] = None

    def __post_init__(self):
        if self.database not in DATABASES:
            raise ValueError(f"database must be one of {DATABASES}, got {self.database!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.T_list or any(int(T) < 2 for T in self.T_list):
            raise ValueError(f"every T must be >= 2, got {self.T_list}")
        if self.mixing not in ("orthogonal", "identity"):
            raise ValueError(f"mixing must be 'orthogonal' or 'identity', got {self.mixing!r}")
        FunctionSet(tuple(self.fset))
        if self.database == "dspherical":
            BlockStructure(self.M, self.d)
            if len(self.rhos) != self.M:
                raise ValueError(f"need {self.M} rho distributions, got {len(self.rhos)}")
        else:
            if not self.letters:
                raise ValueError("letter database needs a nonempty letter subset")
            load_glyphs().resolve(list(self.letters))

    @property
    def blocks(self) -> BlockStructure:
        if self.database == "dspherical":
            return BlockStructure(self.M, self.d)
        return BlockStructure(len(self.letters), 2)

    @property
    def function_set(self) -> FunctionSet:
        return FunctionSet(tuple(self.fset))

    def to_config(self) -> configparser.ConfigParser:
        cfg = configparser.ConfigParser()
        cfg["experiment"] = {
            "database": self.database,
            "T": ", ".join(str(int(T)) for T in self.T_list),
            "trials": str(self.trials),
            "seed": str(self.seed),
            "fset": ", ".join(self.fset),
            "mixing": self.mixing,
        }
        if self.out is not None:
            cfg["experiment"]["out"] = self.out
        if self.database == "dspherical":
            cfg["dspherical"] = {
                "M": str(self.M),
                "d": str(self.d),
                "rho": ", ".join(str(r) for r in self.rhos),
            }
        else:
            cfg["aomega"] = {"letters": ", ".join(self.letters)}
        cfg["ica"] = {"tol": repr(self.ica_tol), "max_iter": str(self.ica_max_iter)}
        cfg["permsearch"] = {
            "max_sweeps": str(self.max_sweeps),
            "swap_threshold": repr(self.swap_threshold),
        }
        return cfg

    def dumps(self) -> str:
        buf = io.StringIO()
        self.to_config().write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_config(cls, cfg: configparser.ConfigParser, **overrides) -> "ExperimentSpec":
        def split(text):
            return tuple(t.strip() for t in text.split(",") if t.strip())

        kw = {}
        ex = cfg["experiment"] if cfg.has_section("experiment") else {}
        if "database" in ex:
            kw["database"] = ex["database"].strip()
        if "T" in ex:
            kw["T_list"] = tuple(int(t) for t in split(ex["T"]))
        for key in ("trials", "seed"):
            if key in ex:
                kw[key] = int(ex[key])
        if "fset" in ex:
            kw["fset"] = split(ex["fset"])
        if "mixing" in ex:
            kw["mixing"] = ex["mixing"].strip()
        if "out" in ex:
            kw["out"] = ex["out"].strip()
        if cfg.has_section("dspherical"):
            sec = cfg["dspherical"]
            if "M" in sec:
                kw["M"] = int(sec["M"])
            if "d" in sec:
                kw["d"] = int(sec["d"])
            if "rho" in sec:
                kw["rhos"] = tuple(RhoSpec.parse(r) for r in split(sec["rho"]))
        if cfg.has_section("aomega") and "letters" in cfg["aomega"]:
            kw["letters"] = tuple(load_glyphs().resolve(cfg["aomega"]["letters"]))
        if cfg.has_section("ica"):
            sec = cfg["ica"]
            if "tol" in sec:
                kw["ica_tol"] = float(sec["tol"])
            if "max_iter" in sec:
                kw["ica_max_iter"] = int(sec["max_iter"])
        if cfg.has_section("permsearch"):
            sec = cfg["permsearch"]
            if "max_sweeps" in sec:
                kw["max_sweeps"] = int(sec["max_sweeps"])
            if "swap_threshold" in sec:
                kw["swap_threshold"] = float(sec["swap_threshold"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    @classmethod
    def loads(cls, text: str, **overrides) -> "ExperimentSpec":
        cfg = configparser.ConfigParser()
        cfg.read_string(text)
        return cls.from_config(cfg, **overrides)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentSpec":
        return cls.loads(Path(path).read_text(), **overrides)

    def spec_hash(self) -> str:
        """Digest of the settings that shape a single trial.

        The output path, the trial count and the sample-size list are left
        out: each row carries its own ``T`` and trial index, so extending a
        run reuses the rows already computed.
        """
        canon = replace(self, out=None, trials=1, T_list=(2,))
        return hashlib.sha256(canon.dumps().encode()).hexdigest()[:16]


def trial_seed(base_seed: int, T: int, trial: int) -> int:
    """64-bit seed for one ``(T, trial)`` cell, independent of the trial count."""
    ss = np.random.SeedSequence([int(base_seed), int(T), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialRecord:
    T: int
    trial: int
    seed: int
    spec_hash: str
    amari: Optional[float] = None
    sweeps: Optional[int] = None
    accepted_swaps: Optional[List[int]] = None
    ica_iterations: Optional[int] = None
    ica_converged: Optional[bool] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        return cls(**json.loads(line))


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: List[TrialRecord]
    wall_times: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def amari_by_T(self) -> Dict[int, List[float]]:
        out: Dict[int, List[float]] = {}
        for rec in sorted(self.records, key=lambda r: (r.T, r.trial)):
            if rec.ok:
                out.setdefault(rec.T, []).append(rec.amari)
        return out

    def aggregates(self) -> List[Tuple[int, int, float, float]]:
        """``(T, n, mean, std)`` per sample size; std uses ``ddof=0``."""
        rows = []
        for T, vals in sorted(self.amari_by_T().items()):
            a = np.asarray(vals)
            rows.append((T, a.size, float(a.mean()), float(a.std())))
        return rows

    @property
    def failed(self) -> List[TrialRecord]:
        return [r for r in self.records if not r.ok]


def run_trial(spec: ExperimentSpec, T: int, trial: int) -> Tuple[TrialRecord, float]:
    """One seeded trial: generate, mix, separate, score. Errors are recorded, not raised."""
    seed = trial_seed(spec.seed, T, trial)
    base = dict(T=int(T), trial=int(trial), seed=seed, spec_hash=spec.spec_hash())
    start = time.perf_counter()
    try:
        data_seed, ica_seed = np.random.SeedSequence(seed).spawn(2)
        z, A, _ = make_observation(spec, data_seed, T=T)
        blocks = spec.blocks
        res = estimate_isa(
            z, blocks, spec.function_set, seed=ica_seed,
            ica_max_iter=spec.ica_max_iter, ica_tol=spec.ica_tol,
            max_sweeps=spec.max_sweeps, swap_threshold=spec.swap_threshold,
        )
        rec = TrialRecord(
            **base,
            amari=amari_index(res.W @ A, blocks).r,
            sweeps=res.trace.sweeps,
            accepted_swaps=list(res.trace.accepted_swaps),
            ica_iterations=res.ica.iterations,
            ica_converged=res.ica.converged,
        )
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("trial T=%d #%d failed: %s", T, trial, exc)
        rec = TrialRecord(**base, error=f"{type(exc).__name__}: {exc}")
    return rec, time.perf_counter() - start


def load_results(out_dir) -> List[TrialRecord]:
    path = Path(out_dir) / "results.jsonl"
    if not path.exists():
        return []
    records = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            records.append(TrialRecord.from_json(line))
        except (json.JSONDecodeError, TypeError):
            # a torn final line from an interrupted write
            logger.warning("ignoring unreadable line in %s", path)
    return records


def _run_cell(args):
    spec, T, trial = args
    return run_trial(spec, T, trial)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Run every ``(T, trial)`` cell of ``spec``, resuming from ``spec.out`` if present.

    New rows are appended to ``results.jsonl`` in ``(T, trial)`` order (cells
    finishing early under ``jobs > 1`` wait in memory for earlier ones), and
    the file is rewritten sorted once the run completes, so its content does
    not depend on worker scheduling or on how often the run was resumed.
    """
    cells = [(int(T), k) for T in spec.T_list for k in range(spec.trials)]
    h = spec.spec_hash()
    done: Dict[Tuple[int, int], TrialRecord] = {}
    out = Path(spec.out) if spec.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        spec.save(out / "spec.ini")
        for rec in load_results(out):
            if rec.spec_hash == h:
                done[(rec.T, rec.trial)] = rec
        _rewrite_results(out, done.values())

    todo = [c for c in cells if c not in done]
    wall: Dict[Tuple[int, int], float] = {}
    pending: Dict[Tuple[int, int], TrialRecord] = {}
    queue = list(cells)
    results_fh = open(out / "results.jsonl", "a") if out else None
    timing_fh = open(out / "timing.jsonl", "a") if out else None

    def flush():
        while queue and (queue[0] in done or queue[0] in pending):
            cell = queue.pop(0)
            if cell in pending:
                rec = pending.pop(cell)
                done[cell] = rec
                if results_fh:
                    results_fh.write(rec.to_json() + "\n")
                    results_fh.flush()
                    timing_fh.write(json.dumps({"T": cell[0], "trial": cell[1],
                                                "wall_time": wall[cell]}) + "\n")
                    timing_fh.flush()

    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {pool.submit(_run_cell, (spec, T, k)): (T, k) for T, k in todo}
                for fut in as_completed(futures):
                    cell = futures[fut]
                    pending[cell], wall[cell] = fut.result()
                    flush()
        else:
            for T, k in todo:
                pending[(T, k)], wall[(T, k)] = run_trial(spec, T, k)
                flush()
        flush()
    finally:
        if results_fh:
            results_fh.close()
            timing_fh.close()

    result = ExperimentResult(spec, [done[c] for c in cells], wall)
    if out is not None:
        _rewrite_results(out, done.values())
        write_summary(result, out / "summary.csv")
    return result


def _rewrite_results(out: Path, records) -> None:
    """Atomically replace ``results.jsonl`` with ``records`` sorted by ``(T, trial)``."""
    rows = sorted(records, key=lambda r: (r.T, r.trial))
    tmp = out / "results.jsonl.tmp"
    tmp.write_text("".join(r.to_json() + "\n" for r in rows))
    tmp.replace(out / "results.jsonl")


def write_summary(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "n", "mean_r", "std_r", "mean_percent", "std_percent", "spec_hash"])
        h = result.spec.spec_hash()
        for T, n, mean, std in result.aggregates():
            w.writerow([T, n, repr(mean), repr(std), f"{100 * mean:.4f}", f"{100 * std:.4f}", h])


def emit_plot_data(result: ExperimentResult, path, mode: str = "loglog") -> Optional[object]:
    """Write the error curve as CSV, with the power-law fit as a trailing comment.

    Returns the :class:`~kisa.metrics.PowerLawFit`, or ``None`` when fewer than
    three sample sizes are available.
    """
    if mode not in ("linear", "loglog"):
        raise ValueError(f"mode must be 'linear' or 'loglog', got {mode!r}")
    agg = result.aggregates()
    if not agg:
        raise ValueError("result has no successful trials")
    fit = None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["T", "mean_r", "std_r"]
        if mode == "loglog":
            header += ["log10_T", "log10_mean_r"]
        w.writerow(header)
        for T, _, mean, std in agg:
            row = [T, repr(mean), repr(std)]
            if mode == "loglog":
                row += [repr(float(np.log10(T))),
                        repr(float(np.log10(mean))) if mean > 0 else "nan"]
            w.writerow(row)
        if len(agg) >= 3 and sum(1 for a in agg if a[2] > 0) >= 3:
            fit = power_law_fit([(T, mean) for T, _, mean, _ in agg])
            fh.write(f"# power_law_fit,c={fit.c!r},r2={fit.r2!r},n={fit.n_points}\n")
        else:
            fh.write("# power_law_fit omitted: fewer than 3 sample sizes\n")
    return fit


def result_from_dir(out_dir) -> ExperimentResult:
    out = Path(out_dir)
    spec = ExperimentSpec.load(out / "spec.ini")
    h = spec.spec_hash()
    recs = [r for r in load_results(out) if r.spec_hash == h]
    return ExperimentResult(spec, sorted(recs, key=lambda r: (r.T, r.trial)))
