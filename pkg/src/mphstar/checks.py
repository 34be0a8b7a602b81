"""Consistency battery shared by ``mphstar check`` and the acceptance tests.

The tolerances below are the single source of truth for both.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import analytics, simulate, transform
from .linalg import solve
from .model import MphStarModel, block_decompose

NORMALIZATION_TOL = 1e-10
LT_TOL = 1e-10
LT_CHECK_POINTS = (0.0, 0.1, 1.0, 5.0)
MOMENT_RTOL = 1e-9
MARGINAL_TOL = 1e-12
MC_SIGMAS = 4.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    delta: float
    tol: float

    @property
    def passed(self):
        return bool(self.delta <= self.tol)


def total_mass(bd) -> float:
    """``alpha_abs + atom(0) + alpha(0) (-W(0))^-1 eta(0)``; should be 1."""
    tr = transform.triple_at(bd, 0.0)
    body = tr.alpha_s @ solve(-tr.W_s, tr.eta_s)
    return float((bd.alpha_abs + tr.atom + body).real)


def lt_deviation(model, bd=None, points=LT_CHECK_POINTS) -> float:
    """Largest ``|joint_lt_theorem - joint_lt_kulkarni|`` over ``points x points``."""
    bd = bd or block_decompose(model)
    worst = 0.0
    for s1, s2 in itertools.product(points, points):
        a = transform.joint_lt_theorem(bd, s1, s2)
        b = transform.joint_lt_kulkarni(model, s1, s2)
        worst = max(worst, abs(a - b))
    return worst


def moment_deviation(model, bd=None) -> float:
    """Relative gap between the derivative formula and the moment oracle."""
    bd = bd or block_decompose(model)
    a = analytics.joint_moment(bd)
    b = analytics.joint_moment_oracle(model)
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def marginal_deviation(bd) -> float:
    """``max |(-T 1) - eta(0)|`` for the marginal of ``Z_1``."""
    ph = analytics.marginal_Z1(bd)
    eta0 = transform.triple_at(bd, 0.0).eta_s.real
    return float(np.max(np.abs(ph.exit - eta0)))


def analytic_targets(model, bd=None) -> dict[str, float]:
    """Closed-form values of the quantities reported by :func:`simulate.estimate`."""
    bd = bd or block_decompose(model)
    cov = analytics.covariance(model)
    out = {
        "E[Z1]": cov.EZ1,
        "E[Z2]": cov.EZ2,
        "E[Z1Z2]": cov.EZ1Z2,
        "P(Z1=0)": analytics.marginal_Z1(bd).defect,
    }
    for s1, s2 in simulate.LT_GRID:
        out[f"LT({s1:g},{s2:g})"] = transform.joint_lt_kulkarni(model, s1, s2).real
    p1, p2 = analytics.marginal_Z1(bd), analytics.marginal_Z2(model)
    for x in simulate.CDF_POINTS:
        out[f"P(Z1<={x:g})"] = analytics.ph_cdf(p1, x)
    for x in simulate.CDF_POINTS:
        out[f"P(Z2<={x:g})"] = analytics.ph_cdf(p2, x)
    return out


def mc_deviations(model, report) -> dict[str, float]:
    """``|estimate - analytic| / stderr`` per reported quantity (0 when both agree exactly)."""
    targets = analytic_targets(model)
    out = {}
    for key, est in report.estimates.items():
        gap = abs(est.value - targets[key])
        if est.stderr > 0:
            out[key] = gap / est.stderr
        else:
            out[key] = 0.0 if gap <= 1e-12 else float("inf")
    return out


def run_battery(
    model: MphStarModel,
    *,
    mc_samples=0,
    seed=0,
    workers=1,
    normalization_tol=NORMALIZATION_TOL,
    lt_tol=LT_TOL,
    moment_rtol=MOMENT_RTOL,
    marginal_tol=MARGINAL_TOL,
    mc_sigmas=MC_SIGMAS,
) -> list[CheckResult]:
    bd = block_decompose(model)
    results = [
        CheckResult("normalization", abs(total_mass(bd) - 1.0), normalization_tol),
        CheckResult("joint LT routes agree", lt_deviation(model, bd), lt_tol),
        CheckResult("E[Z1Z2] formula vs oracle (relative)", moment_deviation(model, bd), moment_rtol),
        CheckResult("-T1 = eta(0)", marginal_deviation(bd), marginal_tol),
    ]
    if mc_samples:
        report = simulate.estimate(model, mc_samples, seed, workers=workers)
        for key, sig in mc_deviations(model, report).items():
            if key in ("E[Z1]", "E[Z2]", "E[Z1Z2]", "P(Z1=0)"):
                results.append(CheckResult(f"Monte Carlo {key} (sigmas)", sig, mc_sigmas))
    return results
