"""Marginal phase-type laws and the cross moment ``E[Z_1 Z_2]``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .model import BlockDecomposition, MphStarModel, block_decompose, pair_projection

__all__ = [
    "PhDistribution",
    "marginal_Z1",
    "marginal_Z2",
    "ph_cdf",
    "ph_moment",
    "joint_moment",
    "joint_moment_oracle",
    "Covariance",
    "covariance",
]


@dataclass(frozen=True, eq=False)
class PhDistribution:
    """``PH(beta, T)`` with an atom of size ``defect`` at zero."""

    beta: np.ndarray
    T: np.ndarray
    defect: float

    @property
    def order(self):
        return self.T.shape[0]

    @property
    def exit(self):
        return -self.T.sum(axis=1)


def marginal_Z1(bd: BlockDecomposition) -> PhDistribution:
    """PH representation of ``Z_1`` on the E+ states.

    ``T = W(0) = R+^-1 (Q++ - Q+0 Q00^-1 Q0+)``; the initial vector collects
    the mass entering E+ from E0 and the defect the mass absorbed from E0
    (plus initial absorption).
    """
    inv_r = 1.0 / bd.rp
    if bd.E0_size:
        X = linalg.solve(-bd.Q00, np.column_stack([bd.Q0p, bd.eta0]))
        to_plus, to_abs = X[:, :-1], X[:, -1]
        beta = bd.alphap + bd.alpha0 @ to_plus
        T = inv_r[:, None] * (bd.Qpp + bd.Qp0 @ to_plus)
        defect = bd.alpha_abs + float(bd.alpha0 @ to_abs)
    else:
        beta = bd.alphap.copy()
        T = inv_r[:, None] * bd.Qpp
        defect = bd.alpha_abs
    return PhDistribution(beta, T, defect)


def marginal_Z2(model: MphStarModel) -> PhDistribution:
    """PH representation of ``Z_2``: swap the rewards and reuse :func:`marginal_Z1`."""
    return marginal_Z1(block_decompose(pair_projection(model, 2, 1)))


def ph_cdf(ph: PhDistribution, x) -> float:
    """``P(Z <= x) = defect + beta (I - exp(T x)) 1``."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0:
        return float(ph.defect)
    tail = ph.beta @ linalg.expm(ph.T * x) @ np.ones(ph.order)
    return float(ph.defect + ph.beta.sum() - tail)


def ph_moment(ph: PhDistribution, order: int) -> float:
    """``E[Z^n] = n! beta (-T)^-n 1``."""
    v = np.ones(ph.order)
    for _ in range(order):
        v = linalg.solve(-ph.T, v)
    return math.factorial(order) * float(ph.beta @ v)


def joint_moment(bd: BlockDecomposition) -> float:
    """``E[Z_1 Z_2] = -d/ds alpha(s) W(s)^-2 eta(s)`` at ``s = 0``, by exact
    differentiation of each factor.

    With ``M = -Q00`` and ``d/ds M(s)^-1 = -M^-1 D0 M^-1``:

        alpha' = -alpha0 M^-1 D0 M^-1 Q0+
        W'     = R+^-1 (-D+ - Q+0 M^-1 D0 M^-1 Q0+)
        eta'   = -R+^-1 Q+0 M^-1 D0 M^-1 eta0
        (W^-2)' = -W^-1 W' W^-2 - W^-2 W' W^-1
    """
    inv_r = 1.0 / bd.rp
    n = bd.Eplus_size
    if bd.E0_size:
        M = -bd.Q00
        X = linalg.solve(M, np.column_stack([bd.Q0p, bd.eta0]))
        MQ0p, Meta0 = X[:, :-1], X[:, -1]
        DX = linalg.solve(M, bd.d0[:, None] * X)
        dMQ0p, dMeta0 = DX[:, :-1], DX[:, -1]
        a = bd.alpha0 @ MQ0p + bd.alphap
        W = inv_r[:, None] * (bd.Qpp + bd.Qp0 @ MQ0p)
        e = inv_r * (bd.Qp0 @ Meta0 + bd.etap)
        da = -bd.alpha0 @ dMQ0p
        dW = inv_r[:, None] * (-np.diag(bd.dp) - bd.Qp0 @ dMQ0p)
        de = -inv_r * (bd.Qp0 @ dMeta0)
    else:
        a = bd.alphap
        W = inv_r[:, None] * bd.Qpp
        e = inv_r * bd.etap
        da = np.zeros(n)
        dW = -np.diag(inv_r * bd.dp)
        de = np.zeros(n)
    # row vectors a W^-1, a W^-2 and column vectors W^-1 e, W^-2 e
    aW1 = linalg.solve_left(a, W)
    aW2 = linalg.solve_left(aW1, W)
    W1e = linalg.solve(W, e)
    W2e = linalg.solve(W, W1e)
    dA = da @ W2e
    dMid = -(aW1 @ dW @ W2e) - (aW2 @ dW @ W1e)
    dE = aW2 @ de
    return -float(dA + dMid + dE)


def joint_moment_oracle(model: MphStarModel) -> float:
    """``E[Z_1 Z_2]`` from the reward-process moment recursion on the full
    state space: ``alpha U diag(r1) U r2 + alpha U diag(r2) U r1``, ``U = (-Q)^-1``."""
    if model.k != 2:
        raise ValueError(f"joint moment needs a bivariate model, got k = {model.k}")
    r1, r2 = model.R
    negQ = -model.Q
    u1 = linalg.solve(negQ, r1)
    u2 = linalg.solve(negQ, r2)
    left = linalg.solve_left(model.alpha, negQ)
    return float(left @ (r1 * u2) + left @ (r2 * u1))


@dataclass(frozen=True)
class Covariance:
    EZ1: float
    EZ2: float
    EZ1Z2: float
    EZ1Z2_oracle: float
    var1: float
    var2: float
    cov: float
    corr: float | None


def covariance(model: MphStarModel) -> Covariance:
    """Means, cross moment, covariance and correlation of ``(Z_1, Z_2)``.

    ``corr`` is ``None`` when a marginal variance vanishes.
    """
    bd = block_decompose(model)
    r1, r2 = model.R
    left = linalg.solve_left(model.alpha, -model.Q)
    m1, m2 = float(left @ r1), float(left @ r2)
    cross = joint_moment(bd)
    p1, p2 = marginal_Z1(bd), marginal_Z2(model)
    var1 = ph_moment(p1, 2) - m1**2
    var2 = ph_moment(p2, 2) - m2**2
    cov = cross - m1 * m2
    corr = cov / math.sqrt(var1 * var2) if var1 > 0 and var2 > 0 else None
    return Covariance(m1, m2, cross, joint_moment_oracle(model), var1, var2, cov, corr)
