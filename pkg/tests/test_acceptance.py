"""End-to-end acceptance checks, one test per criterion.

Each test reports a PASS/FAIL line through the ``report`` fixture; the lines
are repeated in the terminal summary. The benchmark runs take a few minutes
on one core.
"""

from dataclasses import replace

import numpy as np
import pytest

from _oracles import block_diagonal_cov, exactly_white, off_block_max, perturbed_cov
from kisa.datagen import DEFAULT_RHOS, gen_d_spherical, pair_to_complex, standardize
from kisa.experiment import ExperimentSpec, run_experiment
from kisa.fcov import FunctionSet, GramCost, make_mask, q_theta_from_cov
from kisa.ica import fastica
from kisa.metrics import amari_index, power_law_fit
from kisa.model import (
    BlockStructure,
    apply_whitening,
    covariance,
    fit_whitening,
    random_orthogonal,
    random_unitary,
)
from kisa.permsearch import estimate_isa_given_w, exhaustive_permutation, greedy_permutation

pytestmark = pytest.mark.slow

FS = FunctionSet(("cos", "cos2"))
SPHERICAL = dict(database="dspherical", M=3, d=20, rhos=DEFAULT_RHOS, fset=FS.names, seed=0)
LETTERS = ("A", "B", "C", "D", "E", "F", "G", "H", "I", "J")
# the letter bound tightened from 2% after pre-build runs measured 0.69-0.75%
LETTER_BOUND = 0.01


@pytest.fixture(scope="module")
def spherical_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("dspherical")


@pytest.fixture(scope="module")
def c1(spherical_dir):
    return run_experiment(ExperimentSpec(**SPHERICAL, T_list=(30_000,), trials=5,
                                         out=str(spherical_dir)))


@pytest.fixture(scope="module")
def c2(c1, spherical_dir):
    # shares its run directory with criterion 1, so the T=30000 cells are reused
    return run_experiment(ExperimentSpec(**SPHERICAL, T_list=(2000, 5000, 10_000, 30_000),
                                         trials=3, out=str(spherical_dir)))


@pytest.fixture(scope="module")
def c3(tmp_path_factory):
    return run_experiment(ExperimentSpec(database="aomega", letters=LETTERS, fset=FS.names,
                                         T_list=(30_000,), trials=5, seed=0,
                                         out=str(tmp_path_factory.mktemp("aomega"))))


def test_criterion_1_spherical_benchmark(c1, report):
    (T, n, mean, std), = c1.aggregates()
    ok = n == 5 and mean <= 0.03
    report(1, "d-spherical M=3 d=20 T=30000, mean Amari <= 3.0%", ok,
           f"mean {100 * mean:.2f}% +/- {100 * std:.2f} over {n} trials")
    assert ok


def test_criterion_2_power_law(c2, report):
    agg = c2.aggregates()
    means = [m for _, _, m, _ in agg]
    fit = power_law_fit([(T, m) for T, _, m, _ in agg])
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    ok = len(agg) == 4 and fit.c > 0 and fit.r2 >= 0.85 and decreasing
    curve = ", ".join(f"T={T}: {100 * m:.2f}%" for T, _, m, _ in agg)
    report(2, "error decays as a power law in T", ok,
           f"c={fit.c:.3f}, r2={fit.r2:.3f}, {curve}")
    assert ok


def test_criterion_3_letters(c3, report):
    (T, n, mean, std), = c3.aggregates()
    ok = n == 5 and mean <= LETTER_BOUND
    report(3, f"10 letters T=30000, mean Amari <= {100 * LETTER_BOUND:.1f}%", ok,
           f"mean {100 * mean:.2f}% +/- {100 * std:.2f} over {n} trials")
    assert ok


def test_criterion_4_sweep_envelope(c1, c2, c3, report):
    sweeps = [r.sweeps for res in (c1, c2, c3) for r in res.records]
    ok = all(s is not None and 1 <= s <= 8 for s in sweeps)
    report(4, "greedy sweep counts within [1, 8]", ok,
           f"observed {min(sweeps)}..{max(sweeps)} over {len(sweeps)} runs")
    assert ok


def test_criterion_5_zero_cost_iff_block_uncorrelated(report):
    rng = np.random.default_rng(5)
    counterexamples, n_zero = 0, 0
    for k in range(200):
        M = int(rng.integers(2, 5))
        b = int(rng.integers(1, 12 // M + 1))
        if k % 2 == 0:
            S = block_diagonal_cov(M, b, rng)
        else:
            S = perturbed_cov(M, b, 10 ** rng.uniform(-3, 0), rng)
        small_cost = q_theta_from_cov(S, BlockStructure(M, b)) <= 1e-9
        small_cross = off_block_max(S, M) <= 1e-5 * np.linalg.norm(S)
        counterexamples += small_cost != small_cross
        n_zero += small_cross
    ok = counterexamples == 0
    report(5, "log-det cost vanishes exactly for block-uncorrelated covariances", ok,
           f"{counterexamples} counterexamples in 200 matrices, {n_zero} block diagonal")
    assert ok


def test_criterion_6_greedy_matches_exhaustive(report):
    equal = beaten = 0
    for k in range(100):
        M, d = [(2, 2), (3, 2), (2, 3), (3, 1)][k % 4]
        b = BlockStructure(M, d)
        rng = np.random.default_rng(2000 + k)
        s = standardize(gen_d_spherical(M, d, 10_000, [DEFAULT_RHOS[m % 3] for m in range(M)], rng))
        # ICA leaves an arbitrary rotation inside each subspace and scrambles the order
        R = np.zeros((b.D, b.D))
        for m in range(M):
            R[m * d:(m + 1) * d, m * d:(m + 1) * d] = random_orthogonal(d, rng)
        y = (R @ s)[rng.permutation(b.D)]
        gram = GramCost(y, FS, b)
        greedy, _ = greedy_permutation(y, b, FS)
        g, e = gram.cost(greedy.order), gram.cost(exhaustive_permutation(y, b, FS).order)
        equal += bool(np.isclose(g, e, rtol=1e-9, atol=0.0))
        beaten += g < e * (1 - 1e-12)
    ok = equal >= 95 and beaten == 0
    report(6, "greedy reaches the exhaustive optimum", ok,
           f"{equal}/100 equal, greedy below optimum {beaten} times")
    assert ok


def test_criterion_7_complex_pathway(report):
    M, d, T = 3, 2, 10_000
    b = BlockStructure(M, d)
    errors = []
    for seed in range(10):
        rng = np.random.default_rng(700 + seed)
        # a complex d-dimensional source is a real 2d-dimensional spherical vector
        s = pair_to_complex(standardize(gen_d_spherical(
            M, 2 * d, T, [DEFAULT_RHOS[m % 3] for m in range(M)], rng)))
        A = random_unitary(b.D, rng)
        W = rng.permutation(np.eye(b.D)) @ A.conj().T
        res = estimate_isa_given_w(A @ s, W, b, FS)
        errors.append(amari_index(res.W @ A, b).r)
    good = sum(e <= 0.01 for e in errors)
    ok = good >= 9
    report(7, "complex sources regrouped from a scrambled unmixing", ok,
           f"{good}/10 seeds with Amari <= 1%, worst {100 * max(errors):.3f}%")
    assert ok


def test_criterion_8_metric_units(report):
    checks = {}
    b = BlockStructure(3, 2)
    checks["amari(I) = 0"] = amari_index(np.eye(6), b).r == 0
    checks["amari(ones) = 1"] = amari_index(np.ones((6, 6)), b).r == 1
    rng = np.random.default_rng(8)
    B = rng.standard_normal((6, 6))
    r = amari_index(B, b).r
    worst = 0.0
    for _ in range(50):
        P = np.zeros((6, 6))
        for i, j in enumerate(rng.permutation(3)):
            P[2 * i:2 * i + 2, 2 * j:2 * j + 2] = rng.choice([-1.0, 1.0]) * np.eye(2)
        worst = max(worst, abs(amari_index(P @ B, b).r - r), abs(amari_index(B @ P, b).r - r))
    checks["signed block permutation invariance"] = worst <= 1e-12
    ica = fastica(exactly_white(6, 5000, 8), seed=9)
    checks["FastICA orthogonality"] = np.linalg.norm(ica.W @ ica.W.T - np.eye(6)) <= 1e-6
    z = random_orthogonal(6, 10) @ (rng.standard_normal((6, 6)) @ rng.laplace(size=(6, 4000)))
    zw = apply_whitening(fit_whitening(z), z)
    checks["whitening postcondition"] = np.linalg.norm(covariance(zw) - np.eye(6)) <= 1e-8 * 6
    complementary = True
    for M, d in [(1, 3), (2, 2), (3, 2), (4, 1)]:
        for field in ("real", "complex"):
            u = 2 if field == "complex" else 1
            mask = make_mask(BlockStructure(M, d), field)
            diag = np.kron(np.eye(M), np.ones((u * d, u * d)))
            complementary &= np.array_equal(mask + diag, np.ones_like(mask))
    checks["mask complementarity"] = bool(complementary)
    failed = [name for name, passed in checks.items() if not passed]
    ok = not failed
    report(8, "metric unit suite", ok,
           f"{len(checks) - len(failed)}/{len(checks)} checks" + (f", failed: {failed}" if failed else ""))
    assert ok


def test_criterion_9_determinism(tmp_path, report):
    specs = {
        "dspherical": ExperimentSpec(M=3, d=2, T_list=(1000, 2000), trials=2, seed=9),
        "aomega": ExperimentSpec(database="aomega", letters=("A", "B", "C"), T_list=(1500,),
                                 trials=2, seed=9),
    }
    mismatched = []
    for name, spec in specs.items():
        runs = []
        for k, jobs in enumerate((1, 1, 2)):
            out = tmp_path / f"{name}{k}"
            run_experiment(replace(spec, out=str(out)), jobs=jobs)
            runs.append(out)
        for fname in ("results.jsonl", "summary.csv"):
            blobs = {(r / fname).read_bytes() for r in runs}
            if len(blobs) != 1:
                mismatched.append(f"{name}/{fname}")
    ok = not mismatched
    report(9, "re-runs give bit-identical result files", ok,
           "2 configs x 3 runs (one with 2 workers)" + (f", differs: {mismatched}" if mismatched else ""))
    assert ok
