"""The transform density ``E[exp(-s Z_2); Z_1 in dy]`` and joint transforms.

For a bivariate model split into E0 (first reward zero) and E+ blocks, with
``M(s) = s D0 - Q00``:

    alpha(s) = alpha0 M(s)^-1 Q0+ + alpha+
    W(s)     = R+^-1 (Q++ - s D+ + Q+0 M(s)^-1 Q0+)
    eta(s)   = R+^-1 (Q+0 M(s)^-1 eta0 + eta+)

so that the atom is ``alpha0 M(s)^-1 eta0`` and, for ``y > 0``,
``E[exp(-s Z_2); Z_1 in dy] = alpha(s) exp(W(s) y) eta(s) dy``.

Every function accepts complex ``s`` with ``Re(s) >= 0``: the Laplace
inverter evaluates along a vertical line in the right half plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import BlockDecomposition, MphStarModel

__all__ = [
    "TransformTriple",
    "triple_at",
    "atom_transform",
    "density_transform",
    "density_transform_grid",
    "joint_lt_theorem",
    "joint_lt_kulkarni",
]

GRID_STEP_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransformTriple:
    s: complex
    alpha_s: np.ndarray
    W_s: np.ndarray
    eta_s: np.ndarray
    atom: complex


def _check_s(s):
    s = complex(s)
    if s.real < 0:
        raise ValueError(f"transform argument must have Re(s) >= 0, got {s}")
    return s


def triple_at(bd: BlockDecomposition, s) -> TransformTriple:
    """Evaluate ``alpha(s)``, ``W(s)``, ``eta(s)`` and the atom at ``s``.

    Results are complex arrays; with an empty E0 block this reduces to
    ``(alpha+, R+^-1 (Q++ - s D+), R+^-1 eta+)`` and a zero atom.
    """
    s = _check_s(s)
    k0 = bd.E0_size
    inv_r = 1.0 / bd.rp
    Wbase = bd.Qpp - s * np.diag(bd.dp)
    if k0 == 0:
        alpha_s = bd.alphap.astype(complex)
        W = inv_r[:, None] * Wbase
        eta_s = (inv_r * bd.etap).astype(complex)
        return TransformTriple(s, alpha_s, W, eta_s, 0j)
    M = s * np.diag(bd.d0) - bd.Q00
    # one factorisation serves Q0+ and eta0
    rhs = np.column_stack([bd.Q0p, bd.eta0])
    X = linalg.solve(M, rhs.astype(complex))
    MQ0p, Meta0 = X[:, :-1], X[:, -1]
    alpha_s = bd.alpha0 @ MQ0p + bd.alphap
    W = inv_r[:, None] * (Wbase + bd.Qp0 @ MQ0p)
    eta_s = inv_r * (bd.Qp0 @ Meta0 + bd.etap)
    atom = complex(bd.alpha0 @ Meta0)
    return TransformTriple(s, alpha_s, W, eta_s, atom)


def atom_transform(bd: BlockDecomposition, s) -> complex:
    """``E[exp(-s Z_2); Z_1 = 0]`` restricted to paths starting in E.

    Initial absorption (``alpha_abs``) is not included.
    """
    s = _check_s(s)
    if bd.E0_size == 0:
        return 0j
    M = s * np.diag(bd.d0) - bd.Q00
    return complex(bd.alpha0 @ linalg.solve(M, bd.eta0.astype(complex)))


def density_transform(bd: BlockDecomposition, s, y: float) -> complex:
    """``alpha(s) exp(W(s) y) eta(s)``: density in ``y`` of ``Z_1``, transform in ``Z_2``."""
    if not y > 0:
        raise ValueError(f"y must be positive, got {y}")
    tr = triple_at(bd, s)
    return complex(tr.alpha_s @ linalg.expm(tr.W_s * y) @ tr.eta_s)


def _check_grid(ys):
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 1 or ys.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if not ys[0] > 0:
        raise ValueError("grid points must be positive")
    if ys.size > 1:
        steps = np.diff(ys)
        h = (ys[-1] - ys[0]) / (ys.size - 1)
        if not h > 0 or np.max(np.abs(steps - h)) > GRID_STEP_RTOL * max(h, ys[-1]):
            raise ValueError("grid must be ascending and equispaced")
    return ys


def _propagate(triples, ys):
    """Rows ``alpha(s_k) exp(W(s_k) y_i) eta(s_k)`` for each triple, shape (K, len(ys)).

    One exponential per node for the first point and one for the step; the
    remaining points are reached by repeated right multiplication.
    """
    K = len(triples)
    n = triples[0].W_s.shape[0]
    out = np.empty((K, ys.size), dtype=complex)
    if n == 0:
        out[:] = 0.0
        return out
    W = np.stack([tr.W_s for tr in triples])
    eta = np.stack([tr.eta_s for tr in triples])
    v = np.stack([tr.alpha_s @ linalg.expm(tr.W_s * ys[0]) for tr in triples])
    out[:, 0] = np.einsum("ki,ki->k", v, eta)
    if ys.size > 1:
        h = (ys[-1] - ys[0]) / (ys.size - 1)
        step = np.stack([linalg.expm(w * h) for w in W])
        for i in range(1, ys.size):
            v = np.matmul(v[:, None, :], step)[:, 0, :]
            out[:, i] = np.einsum("ki,ki->k", v, eta)
    return out


def density_transform_grid(bd: BlockDecomposition, s, ys) -> np.ndarray:
    """:func:`density_transform` on an ascending equispaced ``y`` grid."""
    ys = _check_grid(ys)
    return _propagate([triple_at(bd, s)], ys)[0]


def joint_lt_theorem(bd: BlockDecomposition, s1, s2) -> complex:
    """``E[exp(-s1 Z_1 - s2 Z_2)]`` by integrating the transform density in ``y``.

    ``alpha_abs + atom(s2) + alpha(s2) (s1 I - W(s2))^-1 eta(s2)``.
    """
    s1 = _check_s(s1)
    tr = triple_at(bd, s2)
    n = tr.W_s.shape[0]
    resolvent = linalg.solve(s1 * np.eye(n) - tr.W_s, tr.eta_s)
    return bd.alpha_abs + tr.atom + complex(tr.alpha_s @ resolvent)


def joint_lt_kulkarni(model: MphStarModel, s1, s2) -> complex:
    """``E[exp(-s1 Z_1 - s2 Z_2)] = alpha_abs + alpha (Delta - Q)^-1 eta``
    with ``Delta = diag(s1 r_1 + s2 r_2)``; computed on the unpartitioned model."""
    if model.k != 2:
        raise ValueError(f"joint transform needs a bivariate model, got k = {model.k}")
    s1, s2 = _check_s(s1), _check_s(s2)
    delta = np.diag(s1 * model.R[0] + s2 * model.R[1])
    x = linalg.solve(delta - model.Q, model.eta.astype(complex))
    return model.alpha_abs + complex(model.alpha @ x)
