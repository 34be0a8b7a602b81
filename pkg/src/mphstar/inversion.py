"""Bivariate density ``f(y, x)`` by numerically inverting the ``Z_2`` transform.

The inverter is the Euler-summation variant of the Fourier-series method
(Abate & Whitt): the Bromwich integral is discretised with the trapezoidal
rule on the line ``Re(s) = A / (2x)``, the resulting alternating series is
truncated after ``N`` terms and accelerated by binomial averaging of the
next ``M`` partial sums.  The discretisation error is about ``exp(-A)``
times the density scale, i.e. roughly 1e-8 at the defaults.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import BlockDecomposition, model_hash
from .report import dumps
from .transform import _check_grid, _propagate, atom_transform, triple_at

__all__ = [
    "InversionParams",
    "DensityGrid",
    "SingularDistributionWarning",
    "InversionAccuracyWarning",
    "euler_nodes",
    "euler_invert",
    "invert_density",
    "invert_atom_density",
    "density_grid",
    "proportional_rewards",
    "clamp_negatives",
]

CLAMP_RTOL = 1e-7


class SingularDistributionWarning(UserWarning):
    """The pair has ``Z_2 = c Z_1`` exactly, so there is no bivariate density."""


class InversionAccuracyWarning(UserWarning):
    """Inverted values went negative beyond the clamping tolerance."""


@dataclass(frozen=True)
class InversionParams:
    A: float = 18.4
    N: int = 15
    M: int = 11

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.N < 1 or self.M < 1:
            raise ValueError(f"N and M must be >= 1, got N={self.N}, M={self.M}")

    @property
    def error_bound(self):
        return math.exp(-self.A)


def _euler_weights(params):
    N, M = params.N, params.M
    tail = np.array([math.comb(M, j) for j in range(M + 1)], dtype=float) / 2.0**M
    # weight of term k = sum of binomial weights of the partial sums containing it
    cum = np.cumsum(tail[::-1])[::-1]
    w = np.ones(N + M + 1)
    w[N + 1:] = cum[1:]
    w[0] = 0.5
    signs = np.where(np.arange(N + M + 1) % 2 == 0, 1.0, -1.0)
    return w * signs


def euler_nodes(x, params):
    """Transform arguments ``(A + 2 k pi i) / (2x)`` for ``k = 0..N+M``."""
    k = np.arange(params.N + params.M + 1)
    return (params.A + 2j * np.pi * k) / (2.0 * x)


def _combine(values, x, params):
    # values: (..., K) transform evaluations at euler_nodes(x)
    return math.exp(params.A / 2.0) / x * (values.real @ _euler_weights(params))


def euler_invert(F, x, params=None):
    """Invert a scalar Laplace transform ``F`` at ``x > 0``."""
    params = params or InversionParams()
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    vals = np.array([F(s) for s in euler_nodes(x, params)], dtype=complex)
    return float(_combine(vals, x, params))


def proportional_rewards(bd_or_model, rtol=1e-12):
    """Return ``c`` if ``r_2 = c r_1`` holds statewise, else ``None``."""
    model = getattr(bd_or_model, "model", None) or bd_or_model
    r1, r2 = model.R[0], model.R[1]
    if np.any((r1 == 0) & (r2 != 0)):
        return None
    pos = r1 > 0
    ratios = r2[pos] / r1[pos]
    c = ratios[0]
    if np.all(np.abs(ratios - c) <= rtol * abs(c)) and c > 0:
        return float(c)
    return None


def _warn_if_singular(bd):
    if bd.model is not None:
        c = proportional_rewards(bd)
        if c is not None:
            warnings.warn(
                f"Z_2 = {c:g} * Z_1 almost surely; the pair has no bivariate density "
                "and inverted values are artefacts",
                SingularDistributionWarning,
                stacklevel=3,
            )
            return True
    return False


def invert_density(bd: BlockDecomposition, y, x, params=None) -> float:
    """``f(y, x)`` with ``P(Z_1 in dy, Z_2 in dx) = f(y, x) dy dx`` for ``x, y > 0``."""
    params = params or InversionParams()
    if not (x > 0 and y > 0):
        raise ValueError(f"x and y must be positive, got y={y}, x={x}")
    _warn_if_singular(bd)
    triples = [triple_at(bd, s) for s in euler_nodes(x, params)]
    vals = _propagate(triples, np.array([float(y)]))[:, 0]
    return float(_combine(vals, x, params))


def invert_atom_density(bd: BlockDecomposition, x, params=None) -> float:
    """Density in ``x`` of the sub-probability ``P(Z_1 = 0, Z_2 in dx)``.

    Initial absorption is excluded, it sits at ``Z_2 = 0``.
    """
    params = params or InversionParams()
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if bd.E0_size == 0:
        return 0.0
    return euler_invert(lambda s: atom_transform(bd, s), x, params)


@dataclass
class DensityGrid:
    """Tabulated ``f(y, x)`` with ``f[i, j] = f(ys[i], xs[j])``.

    ``atom[j]`` is the density of ``P(Z_1 = 0, Z_2 in dx)`` at ``xs[j]``.
    """

    ys: np.ndarray
    xs: np.ndarray
    f: np.ndarray
    atom: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, fh=None):
        """Write ``y,x,f`` rows; atom rows use the sentinel ``y = 0``."""
        own = fh is None
        fh = fh or io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "x", "f"])
        for j, x in enumerate(self.xs):
            w.writerow([_fmt(0.0), _fmt(x), _fmt(self.atom[j])])
        for i, y in enumerate(self.ys):
            for j, x in enumerate(self.xs):
                w.writerow([_fmt(y), _fmt(x), _fmt(self.f[i, j])])
        return fh.getvalue() if own else None

    def to_dict(self):
        return {
            "ys": self.ys.tolist(),
            "xs": self.xs.tolist(),
            "f": self.f.tolist(),
            "atom": self.atom.tolist(),
            "meta": self.meta,
        }

    def to_json(self):
        return dumps(self.to_dict())


def _fmt(v):
    return format(float(v), ".17g")


def clamp_negatives(values, scale):
    """Zero out negatives no larger than ``CLAMP_RTOL * scale`` in magnitude.

    Returns ``(values, n_clamped, n_failed)``; larger negatives are kept and
    counted as accuracy failures.
    """
    values = np.asarray(values, dtype=float)
    small = (values < 0) & (values >= -CLAMP_RTOL * scale)
    failed = values < -CLAMP_RTOL * scale
    return np.where(small, 0.0, values), int(small.sum()), int(failed.sum())


def _column(bd, ys, x, params):
    triples = [triple_at(bd, s) for s in euler_nodes(x, params)]
    vals = _propagate(triples, ys)
    col = _combine(vals.T, x, params)
    atom = _combine(np.array([tr.atom for tr in triples]), x, params) if bd.E0_size else 0.0
    return col, atom


def density_grid(bd: BlockDecomposition, ys, xs, params=None, *, workers=1) -> DensityGrid:
    """Invert on the product grid ``ys x xs``.

    ``ys`` must be ascending and equispaced (propagated with one step
    exponential per node); ``xs`` ascending and positive.  Columns are
    independent and may be spread over ``workers`` threads without changing
    a single bit of the output.
    """
    params = params or InversionParams()
    ys = _check_grid(ys)
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("x grid must be a nonempty 1-d sequence")
    if not (xs[0] > 0 and np.all(np.diff(xs) > 0)):
        raise ValueError("x grid must be positive and ascending")
    singular = _warn_if_singular(bd)

    def run(x):
        return _column(bd, ys, x, params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(run, xs))
    else:
        cols = [run(x) for x in xs]
    f = np.column_stack([c[0] for c in cols])
    atom = np.array([c[1] for c in cols], dtype=float)

    scale = max(np.max(np.abs(f)), np.max(np.abs(atom)))
    f, clamped, n_bad = clamp_negatives(f, scale)
    atom, clamped_a, n_bad_a = clamp_negatives(atom, scale)
    n_bad += n_bad_a
    if n_bad and not singular:
        warnings.warn(
            f"{n_bad} inverted values are negative beyond the clamping tolerance",
            InversionAccuracyWarning,
            stacklevel=2,
        )
    meta = {
        "model_hash": model_hash(bd.model) if bd.model is not None else None,
        "params": {"A": params.A, "N": params.N, "M": params.M},
        "singular": singular,
        "clamped": clamped + clamped_a,
        "negative_failures": n_bad,
    }
    return DensityGrid(ys, xs, f, atom, meta)
