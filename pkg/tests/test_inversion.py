import csv
import io
import json
import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from mphstar.inversion import (
    InversionParams,
    SingularDistributionWarning,
    _euler_weights,
    clamp_negatives,
    density_grid,
    euler_invert,
    euler_nodes,
    invert_atom_density,
    invert_density,
    proportional_rewards,
)
from mphstar.model import MphStarModel, block_decompose, random_model
from mphstar.transform import density_transform


def f_b(y, x):
    return 2.0 * np.exp(-2.0 * y - x)


def test_params_validation():
    with pytest.raises(ValueError):
        InversionParams(A=0.0)
    with pytest.raises(ValueError):
        InversionParams(N=0)
    assert InversionParams().error_bound == pytest.approx(math.exp(-18.4))
    assert InversionParams().error_bound < 1.1e-8


def test_weights_reduce_to_euler_average():
    # summing the weighted terms equals the binomial average of partial sums
    params = InversionParams(N=5, M=3)
    terms = np.random.default_rng(0).normal(size=params.N + params.M + 1)
    signed = terms * np.where(np.arange(terms.size) % 2 == 0, 1.0, -1.0)
    signed[0] *= 0.5
    partial = np.cumsum(signed)
    avg = sum(math.comb(3, j) / 8.0 * partial[5 + j] for j in range(4))
    assert terms @ _euler_weights(params) == pytest.approx(avg, rel=1e-14)


def test_scalar_pairs():
    for F, f in [(lambda s: 1.0 / (s + 2.0), lambda x: math.exp(-2.0 * x)),
                 (lambda s: 1.0 / (s + 1.0) ** 2, lambda x: x * math.exp(-x)),
                 (lambda s: 1.0 / (s * s + 1.0), math.sin)]:
        for x in (0.1, 1.0, 3.0):
            assert euler_invert(F, x) == pytest.approx(f(x), abs=1e-7)


@pytest.mark.parametrize("y,x", [(1.0, 1.0), (0.5, 2.0)])
def test_model_b_points(B, y, x):
    got = invert_density(block_decompose(B), y, x)
    assert got == pytest.approx(2.0 * math.exp(-3.0), rel=1e-6)


def test_model_b_region(B):
    bd = block_decompose(B)
    grid = np.linspace(0.1, 3.0, 12)
    worst = max(abs(invert_density(bd, y, x) / f_b(y, x) - 1.0) for y in grid for x in grid)
    assert worst <= 1e-6


def test_rejects_nonpositive(B):
    bd = block_decompose(B)
    with pytest.raises(ValueError):
        invert_density(bd, 1.0, 0.0)
    with pytest.raises(ValueError):
        invert_density(bd, 0.0, 1.0)
    with pytest.raises(ValueError):
        invert_atom_density(bd, -1.0)


def test_model_a_flagged_singular(A):
    bd = block_decompose(A)
    assert proportional_rewards(bd) == 2.0
    with pytest.warns(SingularDistributionWarning):
        invert_density(bd, 1.0, 1.0)
    with pytest.warns(SingularDistributionWarning):
        grid = density_grid(bd, [0.5, 1.0], [0.5, 1.0])
    assert grid.meta["singular"] is True


def test_proportionality_detection(B, C):
    assert proportional_rewards(block_decompose(B)) is None
    assert proportional_rewards(block_decompose(C)) is None
    m = MphStarModel([0.5, 0.5], [[-2.0, 1.0], [0.5, -1.0]], [[1.0, 3.0], [0.5, 1.5]])
    assert proportional_rewards(m) == 0.5
    m = MphStarModel([0.5, 0.5], [[-2.0, 1.0], [0.5, -1.0]], [[0.0, 3.0], [0.0, 1.5]])
    assert proportional_rewards(m) == 0.5


def test_atom_model_c(C):
    bd = block_decompose(C)
    assert invert_atom_density(bd, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-6)
    for x in np.linspace(0.1, 3.0, 10):
        assert invert_atom_density(bd, x) == pytest.approx(math.exp(-2.0 * x), rel=1e-6)


def test_atom_model_c_mass(C):
    bd = block_decompose(C)
    mass, _ = quad(lambda x: invert_atom_density(bd, x), 0.0, 30.0, limit=200, points=[0.01])
    assert mass == pytest.approx(0.5, abs=1e-6)


def test_atom_zero_without_e0_atoms(A, B):
    assert invert_atom_density(block_decompose(B), 1.0) == pytest.approx(0.0, abs=1e-12)
    assert invert_atom_density(block_decompose(A), 1.0) == 0.0


def test_imaginary_residue():
    params = InversionParams()
    w = _euler_weights(params)
    for model in [random_model(np.random.default_rng(i), 4) for i in range(5)]:
        bd = block_decompose(model)
        for y, x in [(0.3, 0.5), (1.0, 2.0)]:
            nodes = euler_nodes(x, params)
            sym = np.array([(density_transform(bd, s, y) + density_transform(bd, s.conjugate(), y)) / 2 for s in nodes])
            residue = math.exp(params.A / 2.0) / x * (sym.imag @ w)
            assert abs(residue) <= 1e-9


def test_doubling_terms_self_consistent(B, C):
    base = InversionParams()
    double = InversionParams(base.A, 2 * base.N, 2 * base.M)
    for model in (B, C):
        bd = block_decompose(model)
        for y, x in [(0.2, 0.3), (1.0, 1.0), (2.5, 3.0)]:
            a = invert_density(bd, y, x, base)
            b = invert_density(bd, y, x, double)
            assert abs(a - b) <= base.error_bound * max(1.0, abs(a))


def test_grid_single_cell(B):
    grid = density_grid(block_decompose(B), [1.0], [1.0])
    assert grid.f.shape == (1, 1)
    assert grid.f[0, 0] == pytest.approx(2.0 * math.exp(-3.0), rel=1e-6)


def test_grid_matches_pointwise(C):
    bd = block_decompose(C)
    ys = np.linspace(0.05, 3.0, 25)
    xs = np.array([0.05, 0.4, 1.0, 2.5])
    grid = density_grid(bd, ys, xs)
    for i in range(0, ys.size, 4):
        for j, x in enumerate(xs):
            assert abs(grid.f[i, j] - invert_density(bd, ys[i], x)) <= 1e-12
    for j, x in enumerate(xs):
        assert abs(grid.atom[j] - invert_atom_density(bd, x)) <= 1e-12


def test_grid_model_c_integrates_to_one(C):
    bd = block_decompose(C)
    ys = xs = np.linspace(0.01, 8.0, 400)
    grid = density_grid(bd, ys, xs)
    h = ys[1] - ys[0]
    total = grid.f.sum() * h * h + grid.atom.sum() * h
    assert abs(total - 1.0) <= 2e-3
    assert grid.meta["negative_failures"] == 0


def test_grid_workers_bit_identical(C):
    bd = block_decompose(C)
    ys = np.linspace(0.1, 2.0, 15)
    xs = np.linspace(0.1, 2.0, 9)
    one = density_grid(bd, ys, xs, workers=1)
    many = density_grid(bd, ys, xs, workers=4)
    assert one.f.tobytes() == many.f.tobytes()
    assert one.atom.tobytes() == many.atom.tobytes()


def test_grid_errors(B):
    bd = block_decompose(B)
    with pytest.raises(ValueError):
        density_grid(bd, [], [1.0])
    with pytest.raises(ValueError):
        density_grid(bd, [1.0], [])
    with pytest.raises(ValueError):
        density_grid(bd, [1.0], [2.0, 1.0])


def test_clamp_negatives():
    vals = np.array([1.0, -5e-8, -2e-7, 0.3])
    out, clamped, failed = clamp_negatives(vals, 1.0)
    np.testing.assert_array_equal(out, [1.0, 0.0, -2e-7, 0.3])
    assert (clamped, failed) == (1, 1)


def test_singular_grid_reports_artefacts(A):
    bd = block_decompose(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = density_grid(bd, np.linspace(0.2, 2.0, 10), np.linspace(0.2, 2.0, 10))
    assert grid.meta["singular"] is True
    assert np.all(np.isfinite(grid.f))


def test_csv_export(C):
    grid = density_grid(block_decompose(C), [0.5, 1.0], [0.5, 1.0, 1.5])
    rows = list(csv.reader(io.StringIO(grid.to_csv())))
    assert rows[0] == ["y", "x", "f"]
    assert len(rows) == 1 + 3 + 6
    atom_rows = rows[1:4]
    assert all(float(r[0]) == 0.0 for r in atom_rows)
    assert float(atom_rows[0][2]) == grid.atom[0]
    assert float(rows[4][2]) == grid.f[0, 0]
    assert (float(rows[-1][0]), float(rows[-1][1])) == (1.0, 1.5)


def test_json_export(C):
    grid = density_grid(block_decompose(C), [0.5, 1.0], [0.5, 1.0])
    data = json.loads(grid.to_json())
    assert data["f"][1][0] == grid.f[1, 0]
    assert data["atom"] == grid.atom.tolist()
    assert data["meta"]["params"] == {"A": 18.4, "N": 15, "M": 11}
    assert len(data["meta"]["model_hash"]) == 64
