"""Core data model: auction impressions, linear reserve policies, and the
piecewise reward they induce.

Prices are assumed to live on a unit-ish scale (the data pipeline normalizes
first bids to mean one), so comparisons use absolute tolerances defaulting to
``1e-9``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

DEFAULT_TOL = 1e-9

# Reward evaluations snap to the paying side of the jump within this margin.
# Optima sit exactly on the discontinuity (reserve equal to the top bid), so
# policies recovered from linear algebra land within a few ulps of it; the
# snap reconstructs the exact-arithmetic value there.  It sits three orders
# of magnitude below every stated tolerance, so probes at 1e-9 offsets still
# see the literal branch values.
BOUNDARY_SNAP = 1e-12

__all__ = [
    "DEFAULT_TOL",
    "BOUNDARY_SNAP",
    "AuctionSample",
    "Dataset",
    "Box",
    "LinearModel",
    "reward",
    "reward_vector",
    "average_reward",
    "variable_bounds",
    "graph_membership",
    "perfect_info_upper_bound",
    "sale_rate",
]


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class AuctionSample:
    """One impression: a context vector and the top two realized bids."""

    features: np.ndarray
    b1: float
    b2: float

    def __post_init__(self):
        object.__setattr__(self, "features", _as_vector(self.features, "features"))
        object.__setattr__(self, "b1", float(self.b1))
        object.__setattr__(self, "b2", float(self.b2))
        if not (np.isfinite(self.b1) and np.isfinite(self.b2)):
            raise ValueError("bids must be finite")
        if self.b2 < 0.0:
            raise ValueError(f"bids must be nonnegative, got b2={self.b2}")
        if self.b1 < self.b2:
            raise ValueError(f"bids must satisfy b1 >= b2, got b1={self.b1}, b2={self.b2}")

    @property
    def d(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of impressions sharing one feature dimension.

    ``weights`` holds per-row multiplicities (default all ones).  They let
    instance generators store many identical impressions as a single row;
    every evaluation routine accounts for them, so callers can treat the
    dataset as if it contained ``n`` plain samples.
    """

    samples: tuple[AuctionSample, ...]
    weights: np.ndarray | None = None

    def __post_init__(self):
        samples = tuple(self.samples)
        if not samples:
            raise ValueError("dataset needs at least one sample")
        d = samples[0].d
        for i, s in enumerate(samples):
            if s.d != d:
                raise ValueError(f"sample {i} has dimension {s.d}, expected {d}")
        if self.weights is None:
            w = np.ones(len(samples))
        else:
            w = _as_vector(self.weights, "weights")
            if w.shape[0] != len(samples):
                raise ValueError("weights length must match number of samples")
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_features", np.array([s.features for s in samples]))
        object.__setattr__(self, "_b1", np.array([s.b1 for s in samples]))
        object.__setattr__(self, "_b2", np.array([s.b2 for s in samples]))

    @classmethod
    def from_arrays(cls, features, b1, b2, weights=None) -> "Dataset":
        features = np.asarray(features, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d array (rows by dimension)")
        b1 = np.asarray(b1, dtype=float)
        b2 = np.asarray(b2, dtype=float)
        samples = tuple(
            AuctionSample(features[i], b1[i], b2[i]) for i in range(features.shape[0])
        )
        return cls(samples, weights)

    @property
    def d(self) -> int:
        return self.samples[0].d

    @property
    def n(self) -> float:
        """Effective sample count (total multiplicity)."""
        return float(self.weights.sum())

    @property
    def n_rows(self) -> int:
        return len(self.samples)

    @property
    def features_matrix(self) -> np.ndarray:
        return self._features

    @property
    def b1s(self) -> np.ndarray:
        return self._b1

    @property
    def b2s(self) -> np.ndarray:
        return self._b2

    def subset(self, indices: Iterable[int]) -> "Dataset":
        idx = list(indices)
        return Dataset(
            tuple(self.samples[i] for i in idx),
            self.weights[idx],
        )


@dataclass(frozen=True, eq=False)
class Box:
    """Per-coordinate bounds for the model parameters, plus offset bounds.

    Setting ``offset_lower == offset_upper == 0`` disables the learned
    offset.  ``symmetric`` builds the usual ``[-T, T]^d`` boxes used by the
    tuning layer.
    """

    lower: np.ndarray
    upper: np.ndarray
    offset_lower: float = 0.0
    offset_upper: float = 0.0

    def __post_init__(self):
        lo = _as_vector(self.lower, "lower")
        up = _as_vector(self.upper, "upper")
        if lo.shape != up.shape:
            raise ValueError("lower and upper must have equal length")
        if np.any(lo > up):
            raise ValueError("box requires lower <= upper componentwise")
        olo = float(self.offset_lower)
        oup = float(self.offset_upper)
        if not (np.isfinite(olo) and np.isfinite(oup)):
            raise ValueError("offset bounds must be finite")
        if olo > oup:
            raise ValueError("box requires offset_lower <= offset_upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "offset_lower", olo)
        object.__setattr__(self, "offset_upper", oup)

    @classmethod
    def symmetric(cls, d: int, half_width: float, offset: bool = False) -> "Box":
        t = float(half_width)
        if t < 0:
            raise ValueError("half_width must be nonnegative")
        off = t if offset else 0.0
        return cls(np.full(d, -t), np.full(d, t), -off, off)

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    @property
    def has_offset(self) -> bool:
        return self.offset_lower != 0.0 or self.offset_upper != 0.0

    def contains(self, model: "LinearModel", tol: float = DEFAULT_TOL) -> bool:
        if model.d != self.d:
            raise ValueError(f"model dimension {model.d} does not match box dimension {self.d}")
        ok = bool(
            np.all(model.beta >= self.lower - tol) and np.all(model.beta <= self.upper + tol)
        )
        return ok and (self.offset_lower - tol <= model.beta0 <= self.offset_upper + tol)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linear reserve policy: price = features . beta + beta0."""

    beta: np.ndarray
    beta0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _as_vector(self.beta, "beta"))
        b0 = float(self.beta0)
        if not np.isfinite(b0):
            raise ValueError("beta0 must be finite")
        object.__setattr__(self, "beta0", b0)

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    def predict(self, features) -> np.ndarray | float:
        arr = np.asarray(features, dtype=float)
        return arr @ self.beta + self.beta0


def reward(v: float, b1: float, b2: float) -> float:
    """Revenue of a second-price auction with top bids ``b1 >= b2`` when the
    reserve price is ``v``.

    Returns ``b2`` for ``v <= b2`` (ordinary second-price outcome), ``v`` for
    ``b2 < v <= b1`` (the reserve binds), and ``0`` for ``v > b1`` (failed
    sale).  Both boundaries are inclusive on the revenue-bearing side.
    """
    b1 = float(b1)
    b2 = float(b2)
    if b2 < 0.0 or b1 < b2:
        raise ValueError(f"bids must satisfy b1 >= b2 >= 0, got b1={b1}, b2={b2}")
    v = float(v)
    if v <= b2:
        return b2
    if v <= b1 + BOUNDARY_SNAP:
        return min(v, b1)
    return 0.0


def reward_vector(v, b1, b2) -> np.ndarray:
    """Vectorized :func:`reward`; inputs broadcast elementwise, no validation."""
    v = np.asarray(v, dtype=float)
    return np.where(v <= b2, b2, np.where(v <= b1 + BOUNDARY_SNAP, np.minimum(v, b1), 0.0))


def _check_dims(model: LinearModel, data: Dataset) -> None:
    if model.d != data.d:
        raise ValueError(f"model dimension {model.d} does not match data dimension {data.d}")


def average_reward(model: LinearModel, data: Dataset) -> float:
    """Mean per-impression revenue of ``model`` over ``data``."""
    _check_dims(model, data)
    v = data.features_matrix @ model.beta + model.beta0
    r = reward_vector(v, data.b1s, data.b2s)
    return float(data.weights @ r / data.n)


def variable_bounds(features, box: Box) -> tuple[float, float]:
    """Closed-form range of ``features . beta + beta0`` over the box.

    Each coordinate contributes its cheapest (resp. dearest) bound depending
    on the sign of the feature entry, so the returned interval is tight:
    both endpoints are attained at box vertices.
    """
    w = _as_vector(features, "features")
    if w.shape[0] != box.d:
        raise ValueError(f"feature length {w.shape[0]} does not match box dimension {box.d}")
    lo = float(np.where(w >= 0, box.lower, box.upper) @ w) + box.offset_lower
    up = float(np.where(w >= 0, box.upper, box.lower) @ w) + box.offset_upper
    return lo, up


def graph_membership(
    v: float,
    y: float,
    sample: AuctionSample,
    l: float,
    u: float,
    tol: float = DEFAULT_TOL,
) -> bool:
    """Whether ``(v, y)`` lies within ``tol`` of the closed reward graph.

    The closure consists of three pieces on ``[l, u]``: the flat second-price
    piece at ``y = b2`` for ``v <= b2``, the diagonal ``y = v`` for
    ``b2 <= v <= b1``, and the failed-sale piece ``y = 0`` for ``v >= b1``
    (the closure keeps the point ``(b1, 0)`` at the jump).
    """
    if l > u:
        raise ValueError(f"bounds must satisfy l <= u, got l={l}, u={u}")
    b1, b2 = sample.b1, sample.b2
    pieces = (
        (l, min(b2, u), b2),
        (max(b2, l), min(b1, u), None),  # y = v on this piece
        (max(b1, l), u, 0.0),
    )
    for lo, hi, yval in pieces:
        if lo - tol <= v <= hi + tol:
            target = v if yval is None else yval
            if abs(y - target) <= tol:
                return True
    return False


def perfect_info_upper_bound(data: Dataset) -> float:
    """Mean first bid: the revenue of an omniscient reserve policy."""
    return float(data.weights @ data.b1s / data.n)


def sale_rate(model: LinearModel, data: Dataset) -> float:
    """Fraction of impressions whose reserve does not exceed the top bid."""
    _check_dims(model, data)
    v = data.features_matrix @ model.beta + model.beta0
    return float(data.weights @ (v <= data.b1s + BOUNDARY_SNAP) / data.n)
