"""Exit criteria: one test per criterion, each reported as a PASS/FAIL line
in the pytest terminal summary."""

import io
import json
import math
import time

import numpy as np
import pytest

from mphstar import checks
from mphstar.analytics import joint_moment, joint_moment_oracle, marginal_Z1
from mphstar.cli import main
from mphstar.inversion import invert_atom_density, invert_density
from mphstar.model import block_decompose, model_to_dict
from mphstar.simulate import estimate, sample
from mphstar.transform import triple_at

from conftest import ACCEPTANCE_LINES, model_a, model_b, model_c

MC_SEED = 42
MC_SAMPLES = 10**6


def record(number, title, passed, detail):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}"


@pytest.fixture(scope="module")
def models(random_200):
    sizes = {block_decompose(m).E0_size == 0 for m in random_200}
    assert sizes == {True, False}, "random set must mix empty and nonempty E0"
    assert {m.m for m in random_200} == set(range(1, 7))
    return random_200


def test_1_normalization(models):
    t0 = time.perf_counter()
    worst = max(abs(checks.total_mass(block_decompose(m)) - 1.0) for m in models)
    elapsed = time.perf_counter() - t0
    ok = worst <= checks.NORMALIZATION_TOL and elapsed < 5.0
    record(1, "normalization", ok, f"max |mass - 1| = {worst:.2e} (tol {checks.NORMALIZATION_TOL:.0e}), {elapsed:.2f}s (< 5s)")
    assert worst <= checks.NORMALIZATION_TOL
    assert elapsed < 5.0


def test_2_lt_cross_check(models):
    t0 = time.perf_counter()
    worst = max(checks.lt_deviation(m, points=(0.0, 0.1, 1.0, 5.0)) for m in models)
    elapsed = time.perf_counter() - t0
    ok = worst <= checks.LT_TOL and elapsed < 10.0
    record(2, "joint LT routes agree", ok, f"max deviation = {worst:.2e} (tol {checks.LT_TOL:.0e}), {elapsed:.2f}s (< 10s)")
    assert worst <= checks.LT_TOL
    assert elapsed < 10.0


def test_3_moment_cross_check(models):
    t0 = time.perf_counter()
    worst = max(checks.moment_deviation(m) for m in models)
    exact = {"A": (model_a(), 4.0 / 9.0), "B": (model_b(), 0.5), "C": (model_c(), 0.25)}
    exact_gap = max(
        max(abs(joint_moment(block_decompose(m)) - want), abs(joint_moment_oracle(m) - want))
        for m, want in exact.values()
    )
    elapsed = time.perf_counter() - t0
    ok = worst <= checks.MOMENT_RTOL and exact_gap <= 1e-12 and elapsed < 5.0
    record(3, "E[Z1Z2] formula vs oracle", ok,
           f"max rel gap = {worst:.2e} (tol {checks.MOMENT_RTOL:.0e}), closed forms A/B/C gap {exact_gap:.1e} (tol 1e-12), {elapsed:.2f}s (< 5s)")
    assert worst <= checks.MOMENT_RTOL
    assert exact_gap <= 1e-12
    assert elapsed < 5.0


def test_4_marginal_identity(models):
    worst = max(checks.marginal_deviation(block_decompose(m)) for m in models)
    ph = marginal_Z1(block_decompose(model_b()))
    gap_b = max(abs(ph.beta[0] - 1.0), abs(ph.T[0, 0] + 2.0), abs(ph.defect))
    shape_ok = ph.beta.shape == (1,) and ph.T.shape == (1, 1)
    ok = worst <= checks.MARGINAL_TOL and gap_b <= 1e-14 and shape_ok
    record(4, "-T1 = eta(0), Model B marginal Exp(2)", ok,
           f"max entry gap = {worst:.2e} (tol {checks.MARGINAL_TOL:.0e}), Model B gap {gap_b:.1e} (tol 1e-14)")
    assert worst <= checks.MARGINAL_TOL
    assert shape_ok and gap_b <= 1e-14


def test_5_inversion_accuracy():
    t0 = time.perf_counter()
    bd_b = block_decompose(model_b())
    grid = np.linspace(0.1, 3.0, 30)
    worst_b = max(
        abs(invert_density(bd_b, y, x) / (2.0 * math.exp(-2.0 * y - x)) - 1.0)
        for y in grid for x in grid
    )
    bd_c = block_decompose(model_c())
    worst_c = max(abs(invert_atom_density(bd_c, x) / math.exp(-2.0 * x) - 1.0) for x in grid)
    elapsed = time.perf_counter() - t0
    ok = worst_b <= 1e-6 and worst_c <= 1e-6 and elapsed < 30.0
    record(5, "inversion accuracy", ok,
           f"Model B max rel err = {worst_b:.2e}, Model C atom max rel err = {worst_c:.2e} (tol 1e-6), {elapsed:.2f}s (< 30s)")
    assert worst_b <= 1e-6
    assert worst_c <= 1e-6
    assert elapsed < 30.0


def test_6_monte_carlo_agreement():
    t0 = time.perf_counter()
    lines = []
    worst = 0.0
    for name, model in (("A", model_a()), ("B", model_b()), ("C", model_c())):
        report = estimate(model, MC_SAMPLES, MC_SEED)
        devs = checks.mc_deviations(model, report)
        keyed = {k: devs[k] for k in ("E[Z1]", "E[Z2]", "E[Z1Z2]", "P(Z1=0)")}
        worst = max(worst, max(keyed.values()))
        lines.append(f"{name} max {max(keyed.values()):.2f} sigma")
    Z, _ = sample(model_a(), MC_SAMPLES, MC_SEED)
    pathwise = bool(np.all(Z[:, 1] == 2.0 * Z[:, 0]))
    elapsed = time.perf_counter() - t0
    ok = worst <= checks.MC_SIGMAS and pathwise and elapsed < 60.0
    record(6, "Monte Carlo agreement", ok,
           f"{', '.join(lines)} (tol {checks.MC_SIGMAS:g}), Model A Z2 = 2 Z1 pathwise: {pathwise}, {elapsed:.2f}s (< 60s)")
    assert worst <= checks.MC_SIGMAS
    assert pathwise
    assert elapsed < 60.0


def test_7_reproducibility(tmp_path):
    path = tmp_path / "modelC.json"
    path.write_text(json.dumps(model_to_dict(model_c())))

    def run(*extra):
        out = io.StringIO()
        code = main(["simulate", str(path), "--seed", "42", "--n", str(MC_SAMPLES), *extra], out=out, err=io.StringIO())
        assert code == 0
        return out.getvalue().encode()

    outputs = [run(), run(), run("--workers", "1"), run("--workers", "4"), run("--workers", "8")]
    json_outputs = [run("--format", "json", "--workers", str(w)) for w in (1, 4, 8)]
    ok = len(set(outputs)) == 1 and len(set(json_outputs)) == 1
    record(7, "simulate --seed 42 reproducible", ok, "byte-identical across 2 runs and 1/4/8 workers" if ok else "outputs differ")
    assert ok
