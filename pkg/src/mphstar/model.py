"""MPH* models: definition, validation, pair projection and block structure.

A model is the triple ``(alpha, Q, R)`` of an absorbing Markov reward
process.  ``alpha`` lives on the transient states only and the mass
initially placed on the absorbing state is kept separately in
``alpha_abs``.  Reward ``i`` accumulates ``Z_i = int_0^tau r_i(J_t) dt``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg

__all__ = [
    "ModelStructureError",
    "InvalidModelError",
    "MphStarModel",
    "BlockDecomposition",
    "Violation",
    "ValidationReport",
    "validate",
    "pair_projection",
    "block_decompose",
    "reassemble",
    "build_from_mph",
    "random_model",
    "load_model",
    "model_to_dict",
    "model_hash",
]

MASS_TOL = 1e-12


class ModelStructureError(ValueError):
    """Arrays have inconsistent shapes; the model cannot even be checked."""


class InvalidModelError(ValueError):
    """A structurally sound model violates one or more invariants."""

    def __init__(self, report):
        super().__init__("invalid model:\n" + report.summary())
        self.report = report


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MphStarModel:
    """Initial law, sub-generator and reward matrix of an MPH* law.

    Shapes are checked on construction (``ModelStructureError``); the
    probabilistic invariants are left to :func:`validate`.
    """

    alpha: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    alpha_abs: float = 0.0

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        Q = _frozen(self.Q)
        R = _frozen(self.R)
        if alpha.ndim != 1:
            raise ModelStructureError(f"alpha must be a vector, got shape {alpha.shape}")
        m = alpha.shape[0]
        if m == 0:
            raise ModelStructureError("model needs at least one transient state")
        if Q.shape != (m, m):
            raise ModelStructureError(f"Q must be {m}x{m}, got shape {Q.shape}")
        if R.ndim != 2 or R.shape[1] != m or R.shape[0] == 0:
            raise ModelStructureError(f"R must be k x {m} with k >= 1, got shape {R.shape}")
        for name, arr in (("alpha", alpha), ("Q", Q), ("R", R)):
            if not np.all(np.isfinite(arr)):
                raise ModelStructureError(f"{name} contains non-finite entries")
        if not np.isfinite(self.alpha_abs):
            raise ModelStructureError("alpha_abs is not finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "alpha_abs", float(self.alpha_abs))

    @property
    def m(self):
        return self.Q.shape[0]

    @property
    def k(self):
        return self.R.shape[0]

    @property
    def eta(self):
        """Exit-rate vector ``-Q 1``."""
        return -self.Q.sum(axis=1)


@dataclass(frozen=True)
class Violation:
    invariant: str
    detail: str

    def __str__(self):
        return f"{self.invariant}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self):
        return not self.violations

    def summary(self):
        if self.ok:
            return "ok"
        return "\n".join(f"  - {v}" for v in self.violations)

    def raise_if_invalid(self):
        if not self.ok:
            raise InvalidModelError(self)


def validate(model: MphStarModel) -> ValidationReport:
    """Check every model invariant and list all violations found."""
    out: list[Violation] = []
    alpha, Q, R = model.alpha, model.Q, model.R

    neg = np.flatnonzero(alpha < 0)
    if neg.size:
        out.append(Violation("alpha >= 0", f"negative entries at states {neg.tolist()}"))
    if model.alpha_abs < 0:
        out.append(Violation("alpha_abs >= 0", f"alpha_abs = {model.alpha_abs!r}"))
    if not model.alpha_abs < 1:
        out.append(Violation("alpha_abs < 1", f"alpha_abs = {model.alpha_abs!r}"))
    total = float(alpha.sum()) + model.alpha_abs
    if abs(total - 1.0) > MASS_TOL:
        out.append(Violation("total mass = 1", f"sum(alpha) + alpha_abs = {total!r}"))

    diag = np.diag(Q)
    bad = np.flatnonzero(~(diag < 0))
    if bad.size:
        out.append(Violation("diagonal < 0", f"Q[i,i] >= 0 for states {bad.tolist()}"))
    off = Q - np.diag(diag)
    rows, cols = np.nonzero(off < 0)
    if rows.size:
        pairs = list(zip(rows.tolist(), cols.tolist()))
        out.append(Violation("off-diagonal >= 0", f"negative rates at {pairs}"))
    rowsum = Q.sum(axis=1)
    bad = np.flatnonzero(rowsum > 1e-12 * np.maximum(1.0, np.abs(diag)))
    if bad.size:
        out.append(Violation("row sums <= 0", f"positive row sums at states {bad.tolist()}"))

    try:
        x = linalg.solve(Q, -np.ones(model.m))
    except linalg.SingularMatrixError as exc:
        out.append(Violation("all states transient", f"Q is singular ({exc})"))
    else:
        bad = np.flatnonzero(~(np.isfinite(x) & (x > 0)))
        if bad.size:
            out.append(Violation(
                "all states transient",
                f"mean absorption times not positive for states {bad.tolist()}",
            ))

    rows, cols = np.nonzero(R < 0)
    if rows.size:
        pairs = list(zip(rows.tolist(), cols.tolist()))
        out.append(Violation("rewards >= 0", f"negative rewards at {pairs}"))
    for i in np.flatnonzero(~np.any(R > 0, axis=1)):
        out.append(Violation(
            "reward row positivity",
            f"reward row {i + 1} has no positive entry, so Z_{i + 1} = 0 almost surely",
        ))
    return ValidationReport(tuple(out))


def pair_projection(model: MphStarModel, i: int, j: int) -> MphStarModel:
    """Bivariate model of ``(Z_i, Z_j)``; indices are 1-based like ``Z_1..Z_k``."""
    k = model.k
    if i == j:
        raise ValueError("pair_projection needs two distinct rewards")
    for idx in (i, j):
        if not 1 <= idx <= k:
            raise IndexError(f"reward index {idx} out of range 1..{k}")
    return MphStarModel(model.alpha, model.Q, model.R[[i - 1, j - 1]], model.alpha_abs)


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    """States split by whether the first reward is zero (``E0``) or not (``E+``).

    ``perm`` lists the original state indices in (E0, E+) order, so
    ``Q[np.ix_(perm, perm)]`` is the reordered generator.
    """

    perm: np.ndarray
    Q00: np.ndarray
    Q0p: np.ndarray
    Qp0: np.ndarray
    Qpp: np.ndarray
    alpha0: np.ndarray
    alphap: np.ndarray
    eta0: np.ndarray
    etap: np.ndarray
    rp: np.ndarray
    dp: np.ndarray
    d0: np.ndarray
    alpha_abs: float = 0.0
    model: MphStarModel | None = field(default=None, repr=False)

    @property
    def E0_size(self):
        return self.Q00.shape[0]

    @property
    def Eplus_size(self):
        return self.Qpp.shape[0]

    @property
    def Rp(self):
        return np.diag(self.rp)

    @property
    def Dp(self):
        return np.diag(self.dp)

    @property
    def D0(self):
        return np.diag(self.d0)


def block_decompose(model: MphStarModel, *, check=True) -> BlockDecomposition:
    """Partition a bivariate model into its E0 / E+ blocks.

    ``E0`` holds the states whose first reward is exactly zero; model files
    are expected to write zero rewards as exact zeros.
    """
    if model.k != 2:
        raise ValueError(f"block decomposition needs a bivariate model, got k = {model.k}")
    if check:
        validate(model).raise_if_invalid()
    r1, r2 = model.R
    zero = np.flatnonzero(r1 == 0)
    plus = np.flatnonzero(r1 > 0)
    perm = np.concatenate([zero, plus])
    Q, alpha, eta = model.Q, model.alpha, model.eta
    return BlockDecomposition(
        perm=_frozen(perm, dtype=int),
        Q00=_frozen(Q[np.ix_(zero, zero)]),
        Q0p=_frozen(Q[np.ix_(zero, plus)]),
        Qp0=_frozen(Q[np.ix_(plus, zero)]),
        Qpp=_frozen(Q[np.ix_(plus, plus)]),
        alpha0=_frozen(alpha[zero]),
        alphap=_frozen(alpha[plus]),
        eta0=_frozen(eta[zero]),
        etap=_frozen(eta[plus]),
        rp=_frozen(r1[plus]),
        dp=_frozen(r2[plus]),
        d0=_frozen(r2[zero]),
        alpha_abs=model.alpha_abs,
        model=model,
    )


def reassemble(bd: BlockDecomposition):
    """Undo the permutation: return ``(alpha, Q, eta)`` in original order."""
    m = bd.perm.shape[0]
    k0 = bd.E0_size
    blocked = np.block([[bd.Q00, bd.Q0p], [bd.Qp0, bd.Qpp]]) if m else np.zeros((0, 0))
    Q = np.empty((m, m))
    Q[np.ix_(bd.perm, bd.perm)] = blocked
    alpha = np.empty(m)
    alpha[bd.perm] = np.concatenate([bd.alpha0, bd.alphap])
    eta = np.empty(m)
    eta[bd.perm[:k0]] = bd.eta0
    eta[bd.perm[k0:]] = bd.etap
    return alpha, Q, eta


def build_from_mph(A12, B1, B2, A1, A2, alpha, alpha_abs=0.0) -> MphStarModel:
    """Embed an Assaf-Langberg MPH pair as an MPH* model.

    State order is ``[both-running | only Z_1 running | only Z_2 running]``
    with generator blocks::

        [[A12, B1, B2],
         [0,   A1, 0 ],
         [0,   0,  A2]]

    Reward 1 is 1 on the first two groups and reward 2 is 1 on the first
    and last group, so ``Q0+ = 0``, ``R+ = I`` and ``D0 = I``.  Either of
    the ``A1`` / ``A2`` groups may be empty (pass a 0x0 array).
    """
    A12 = np.atleast_2d(np.asarray(A12, dtype=float))
    A1 = np.asarray(A1, dtype=float).reshape(_square_shape(A1, "A1"))
    A2 = np.asarray(A2, dtype=float).reshape(_square_shape(A2, "A2"))
    n12, n1, n2 = A12.shape[0], A1.shape[0], A2.shape[0]
    if A12.shape != (n12, n12) or n12 == 0:
        raise ModelStructureError(f"A12 must be square and nonempty, got shape {A12.shape}")
    B1 = np.asarray(B1, dtype=float).reshape(n12, n1)
    B2 = np.asarray(B2, dtype=float).reshape(n12, n2)
    m = n12 + n1 + n2
    Q = np.zeros((m, m))
    Q[:n12, :n12] = A12
    Q[:n12, n12:n12 + n1] = B1
    Q[:n12, n12 + n1:] = B2
    Q[n12:n12 + n1, n12:n12 + n1] = A1
    Q[n12 + n1:, n12 + n1:] = A2
    r1 = np.r_[np.ones(n12 + n1), np.zeros(n2)]
    r2 = np.r_[np.ones(n12), np.zeros(n1), np.ones(n2)]
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (m,):
        raise ModelStructureError(f"initial law must have length {m}, got shape {alpha.shape}")
    model = MphStarModel(alpha, Q, np.vstack([r1, r2]), alpha_abs)
    validate(model).raise_if_invalid()
    return model


def _square_shape(a, name):
    a = np.asarray(a)
    if a.size == 0:
        return (0, 0)
    side = int(round(np.sqrt(a.size)))
    if side * side != a.size or (a.ndim == 2 and a.shape[0] != a.shape[1]):
        raise ModelStructureError(f"{name} must be square, got shape {a.shape}")
    return (side, side)


def random_model(rng: np.random.Generator, m: int, *, p_zero_r1=0.3, p_abs=0.2):
    """Draw a valid bivariate model with ``m`` transient states.

    Off-diagonal rates and exit rates are uniform on [0, 1] (at least one
    exit rate positive); each first reward is zero with probability
    ``p_zero_r1`` so that both partition blocks get exercised.  With
    probability ``p_abs`` some initial mass is put on the absorbing state.
    """
    while True:
        off = rng.uniform(0.0, 1.0, size=(m, m))
        np.fill_diagonal(off, 0.0)
        exits = rng.uniform(0.0, 1.0, size=m)
        if not np.any(exits > 0):
            continue
        Q = off - np.diag(off.sum(axis=1) + exits)
        r1 = np.where(rng.uniform(size=m) < p_zero_r1, 0.0, rng.uniform(0.05, 1.0, size=m))
        r2 = np.where(rng.uniform(size=m) < p_zero_r1, 0.0, rng.uniform(0.05, 1.0, size=m))
        if not (np.any(r1 > 0) and np.any(r2 > 0)):
            continue
        weights = rng.uniform(size=m)
        alpha_abs = rng.uniform(0.0, 0.3) if rng.uniform() < p_abs else 0.0
        alpha = weights / weights.sum() * (1.0 - alpha_abs)
        alpha_abs = 1.0 - alpha.sum()
        model = MphStarModel(alpha, Q, np.vstack([r1, r2]), alpha_abs)
        if validate(model).ok:
            return model


def load_model(source) -> MphStarModel:
    """Read a model from a JSON file path or an already parsed mapping.

    Keys: ``alpha`` (m numbers), ``alpha_abs`` (optional, default 0), ``Q``
    (m rows of m numbers), ``R`` (k rows of m numbers).
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    if not isinstance(source, dict):
        raise ModelStructureError("model JSON must be an object")
    missing = [key for key in ("alpha", "Q", "R") if key not in source]
    if missing:
        raise ModelStructureError(f"model JSON lacks keys {missing}")
    try:
        return MphStarModel(
            alpha=np.asarray(source["alpha"], dtype=float),
            Q=np.asarray(source["Q"], dtype=float),
            R=np.asarray(source["R"], dtype=float),
            alpha_abs=float(source.get("alpha_abs", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelStructureError):
            raise
        raise ModelStructureError(f"malformed model arrays: {exc}") from None


def model_to_dict(model: MphStarModel) -> dict:
    return {
        "alpha": model.alpha.tolist(),
        "alpha_abs": model.alpha_abs,
        "Q": model.Q.tolist(),
        "R": model.R.tolist(),
    }


def model_hash(model: MphStarModel) -> str:
    """SHA-256 over the exact float values of the model."""
    h = hashlib.sha256()
    for arr in (model.alpha, model.Q, model.R, np.array([model.alpha_abs])):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h.update(repr(arr.shape).encode())
    return h.hexdigest()
