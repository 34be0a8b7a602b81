"""Monte Carlo simulation of the absorbing reward process.

This is the independent check on every analytic quantity: paths of the
phase process are sampled directly and ``Z_i = sum_j sojourn_j r_i(state_j)``
is accumulated along them.

Samples are organised in fixed-size chunks; chunk ``c`` always draws from
stream ``(seed, c)`` and chunk statistics are merged in chunk order, so a
report depends on ``(model, n, seed)`` only and not on the worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import MphStarModel
from .rng import Stream

__all__ = [
    "CHUNK_SIZE",
    "LT_GRID",
    "CDF_POINTS",
    "RewardPath",
    "Estimate",
    "EstimateReport",
    "simulate_one",
    "sample",
    "estimate",
    "dump_paths",
]

CHUNK_SIZE = 1 << 16
PATH_STREAM_BASE = 1 << 63
LT_GRID = ((0.1, 0.1), (0.1, 1.0), (1.0, 0.1), (1.0, 1.0))
CDF_POINTS = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class _Tables:
    m: int
    init_cum: np.ndarray
    rates: np.ndarray
    jump_cum: np.ndarray
    rewards: np.ndarray  # (m, k)
    plus: np.ndarray


def _tables(model: MphStarModel) -> _Tables:
    m = model.m
    Q = model.Q
    rates = -np.diag(Q)
    probs = np.zeros((m, m + 1))
    probs[:, :m] = Q / rates[:, None]
    probs[np.arange(m), np.arange(m)] = 0.0
    probs[:, m] = np.maximum(model.eta, 0.0) / rates
    jump_cum = np.cumsum(probs, axis=1)
    jump_cum[:, -1] = 1.0
    init_cum = np.cumsum(np.r_[model.alpha, model.alpha_abs])
    init_cum[-1] = 1.0
    return _Tables(m, init_cum, rates, jump_cum, model.R.T.copy(), model.R[0] > 0)


@dataclass
class RewardPath:
    """One sampled path; ``states`` ends with the absorbing label ``m``."""

    states: list[int]
    sojourns: list[float]
    Z: np.ndarray

    @property
    def tau(self):
        return float(sum(self.sojourns))

    def running_rewards(self, R):
        """Accumulated rewards after each sojourn, shape ``(k, len(sojourns))``.

        Row 0 is ``Y`` and row 1 ``X`` at the jump epochs.
        """
        R = np.asarray(R)
        out = np.zeros((R.shape[0], len(self.sojourns)))
        acc = np.zeros(R.shape[0])
        for j, (st, t) in enumerate(zip(self.states, self.sojourns)):
            acc = acc + t * R[:, st]
            out[:, j] = acc
        return out

    def to_dict(self):
        return {"states": self.states, "sojourns": self.sojourns, "Z": self.Z.tolist()}


def simulate_one(model: MphStarModel, stream: Stream, tables=None):
    """Sample one path; returns ``(Z, path)``.

    Draw order per path: one uniform for the initial state, then per visited
    transient state one sojourn draw followed by one jump uniform.
    """
    tb = tables or _tables(model)
    m = tb.m
    state = int(np.searchsorted(tb.init_cum, stream.uniform(), side="left"))
    Z = np.zeros(model.k)
    states, sojourns = [], []
    while state < m:
        t = float(stream.exponentials(tb.rates[state:state + 1])[0])
        Z += t * tb.rewards[state]
        states.append(state)
        sojourns.append(t)
        u = stream.uniform()
        state = int(np.count_nonzero(tb.jump_cum[state] < u))
    states.append(m)
    return Z, RewardPath(states, sojourns, Z.copy())


def _run_chunk(tb: _Tables, stream: Stream, size: int):
    """Vectorised :func:`simulate_one` over ``size`` paths (same draw order
    per path as the scalar version when ``size == 1``)."""
    m = tb.m
    state = np.searchsorted(tb.init_cum, stream.uniforms(size), side="left")
    Z = np.zeros((size, tb.rewards.shape[1]))
    entered = np.zeros(size, dtype=bool)
    active = np.flatnonzero(state < m)
    entered[active] = tb.plus[state[active]]
    while active.size:
        st = state[active]
        t = stream.exponentials(tb.rates[st])
        Z[active] += t[:, None] * tb.rewards[st]
        u = stream.uniforms(active.size)
        nxt = np.count_nonzero(tb.jump_cum[st] < u[:, None], axis=1)
        state[active] = nxt
        active = active[nxt < m]
        entered[active] |= tb.plus[state[active]]
    return Z, entered


def _chunks(n):
    return [(c, min(CHUNK_SIZE, n - c * CHUNK_SIZE)) for c in range(-(-n // CHUNK_SIZE))]


def sample(model: MphStarModel, n: int, seed: int, *, workers: int = 1):
    """Draw ``n`` reward vectors; returns ``(Z, entered_plus)``.

    ``entered_plus[i]`` is ``False`` exactly for paths that never visit a
    state with positive first reward, i.e. ``Z_1 = 0``.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    tb = _tables(model)

    def run(chunk):
        c, size = chunk
        return _run_chunk(tb, Stream(seed, c), size)

    parts = _map(run, _chunks(n), workers)
    return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _features(Z, entered):
    z1, z2 = Z[:, 0], Z[:, 1]
    cols = {
        "E[Z1]": z1,
        "E[Z2]": z2,
        "E[Z1Z2]": z1 * z2,
        "P(Z1=0)": (~entered).astype(float),
    }
    for s1, s2 in LT_GRID:
        cols[f"LT({s1:g},{s2:g})"] = np.exp(-s1 * z1 - s2 * z2)
    for x in CDF_POINTS:
        cols[f"P(Z1<={x:g})"] = (z1 <= x).astype(float)
    for x in CDF_POINTS:
        cols[f"P(Z2<={x:g})"] = (z2 <= x).astype(float)
    return cols


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass
class EstimateReport:
    seed: int
    n: int
    estimates: dict[str, Estimate] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.estimates[key]

    def to_dict(self):
        return {
            "seed": self.seed,
            "n": self.n,
            "estimates": {k: {"value": e.value, "stderr": e.stderr} for k, e in self.estimates.items()},
        }


def estimate(model: MphStarModel, n: int, seed: int, *, workers: int = 1) -> EstimateReport:
    """Monte Carlo estimates (with standard errors) of moments, the atom
    probability, the joint transform on ``LT_GRID`` and marginal CDFs at
    ``CDF_POINTS``."""
    if model.k != 2:
        raise ValueError(f"estimate needs a bivariate model, got k = {model.k}")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    tb = _tables(model)

    def run(chunk):
        c, size = chunk
        Z, entered = _run_chunk(tb, Stream(seed, c), size)
        feats = _features(Z, entered)
        return size, {k: (float(v.mean()), float(((v - v.mean()) ** 2).sum())) for k, v in feats.items()}

    parts = _map(run, _chunks(n), workers)
    # pairwise (Chan et al.) merge of chunk means and centred sums, in chunk order
    count = 0
    acc = {}
    for size, stats in parts:
        for key, (mean, m2) in stats.items():
            if key not in acc:
                acc[key] = (mean, m2)
                continue
            mean0, m20 = acc[key]
            total = count + size
            delta = mean - mean0
            acc[key] = (mean0 + delta * size / total, m20 + m2 + delta * delta * count * size / total)
        count += size
    report = EstimateReport(seed=seed, n=n)
    for key, (mean, m2) in acc.items():
        var = m2 / (n - 1) if n > 1 else 0.0
        report.estimates[key] = Estimate(mean, float(np.sqrt(max(var, 0.0) / n)))
    return report


def dump_paths(model: MphStarModel, count: int, seed: int, fh):
    """Write ``count`` sampled paths as JSON lines (``states``, ``sojourns``, ``Z``).

    Path ``i`` uses its own stream so dumps never perturb :func:`estimate`.
    """
    tb = _tables(model)
    for i in range(count):
        _, path = simulate_one(model, Stream(seed, PATH_STREAM_BASE + i), tb)
        fh.write(json.dumps(path.to_dict()) + "\n")
