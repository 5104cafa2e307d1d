"""Instance generation and ingestion.

Synthetic impressions follow a two-buyer log-normal model: buyer parameter
vectors are correlated Gaussian draws, per-impression bids are log-normal
around each buyer's linear score, and a dilation factor widens the gap
between the top two bids.  Two adversarial families with known structure are
also provided, along with CSV load/save for real data.

Randomness comes from numpy's Philox counter-based 64-bit generator, so a
seed fully determines the output within this implementation (bit equality
across libraries or platforms is not promised).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Box, Dataset, LinearModel

__all__ = [
    "GenParams",
    "generate_synthetic",
    "normalize_first_price",
    "generate_unbounded_family",
    "generate_lp_gap_family",
    "save_csv",
    "load_csv",
]


@dataclass(frozen=True)
class GenParams:
    """Synthetic generator knobs.

    ``sigma`` scales the log-normal noise, ``rho`` the correlation between
    the two buyers' parameter vectors, and ``alpha`` the dilation pushing the
    top two bids apart.
    """

    d: int
    n: int
    sigma: float
    rho: float
    alpha: float
    seed: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate_synthetic(params: GenParams, return_latent: bool = False):
    """Draw a dataset from the two-buyer log-normal model.

    Draw order (fixed for reproducibility): buyer basis vectors ``h1``,
    ``h2``, then the feature matrix, then one noise normal per impression and
    buyer.  Buyer scores are ``c1 = h1`` and
    ``c2 = rho * h1 + sqrt(1 - rho^2) * h2``; a bid is
    ``exp(mu + sigma * |mu| * noise)`` with ``mu`` the buyer's linear score.
    The top bid is dilated by ``1 + alpha`` and the second shrunk by
    ``1 - alpha``, then first prices are normalized to mean one.
    """
    rng = _rng(params.seed)
    d, n = params.d, params.n
    scale = 1.0 / math.sqrt(d)
    h1 = rng.standard_normal(d) * scale
    h2 = rng.standard_normal(d) * scale
    c1 = h1
    c2 = params.rho * h1 + math.sqrt(max(0.0, 1.0 - params.rho**2)) * h2
    feats = rng.standard_normal((n, d)) * scale
    noise = rng.standard_normal((n, 2))
    mu1 = feats @ c1
    mu2 = feats @ c2
    bid1 = np.exp(mu1 + params.sigma * np.abs(mu1) * noise[:, 0])
    bid2 = np.exp(mu2 + params.sigma * np.abs(mu2) * noise[:, 1])
    b1 = (1.0 + params.alpha) * np.maximum(bid1, bid2)
    b2 = (1.0 - params.alpha) * np.minimum(bid1, bid2)
    data = normalize_first_price(Dataset.from_arrays(feats, b1, b2))
    if return_latent:
        return data, {"h1": h1, "h2": h2, "c1": c1, "c2": c2, "mu1": mu1, "mu2": mu2}
    return data


def normalize_first_price(data: Dataset) -> Dataset:
    """Divide all bids by the mean first price; features are untouched."""
    mean_b1 = float(data.weights @ data.b1s / data.n)
    if not mean_b1 > 0:
        raise ValueError(f"mean first price must be positive, got {mean_b1}")
    return Dataset.from_arrays(
        data.features_matrix, data.b1s / mean_b1, data.b2s / mean_b1, data.weights
    )


def generate_unbounded_family(i: int) -> tuple[Dataset, LinearModel]:
    """Two-impression family whose optimum escapes any fixed box.

    Both unit-norm feature vectors share a shrinking second coordinate
    ``1/i``, so hitting both top bids exactly requires the second coefficient
    to grow like ``i``.  Returns the instance and its unbounded-domain
    optimum ``(0, i)``.
    """
    i = int(i)
    if i < 1:
        raise ValueError("family index must be at least 1")
    s = math.sqrt(1.0 - i ** (-2))
    feats = [[s, 1.0 / i], [-s, 1.0 / i]]
    data = Dataset.from_arrays(feats, [1.0, 1.0], [0.0, 0.0])
    return data, LinearModel(np.array([0.0, float(i)]))


def generate_lp_gap_family(T: int) -> tuple[Dataset, Box]:
    """Family of size ``n = 2T`` where the relaxation is off by a factor n.

    For each rank ``i`` a mirrored pair of impressions with top bid 1 and
    second bid 0 is created; the box pins the second coordinate to one and
    lets the first roam ``[-1, 1]``.  At most one impression can be on its
    paying piece at a time, so the true optimum is ``1 / (2T)``, while the
    relaxation keeps at least ``1/2``.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be at least 1")
    feats, b1, b2 = [], [], []
    for i in range(1, T + 1):
        feats.append([float(T), float(1 - i)])
        feats.append([float(-T), float(1 - i)])
        b1 += [1.0, 1.0]
        b2 += [0.0, 0.0]
    box = Box(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    return Dataset.from_arrays(feats, b1, b2), box


# -- CSV schema ---------------------------------------------------------------
#
# header: feature_0,...,feature_{d-1},b1,b2
# one impression per row; weighted datasets are expanded on save.


def _header(d: int) -> list[str]:
    return [f"feature_{j}" for j in range(d)] + ["b1", "b2"]


def save_csv(data: Dataset, path) -> None:
    """Write one row per impression (weighted rows are expanded).

    Values are written with shortest round-trip ``repr``, so a load of the
    file reproduces the dataset exactly.
    """
    mult = np.rint(data.weights)
    if np.any(np.abs(mult - data.weights) > 1e-9):
        raise ValueError("cannot expand non-integer sample weights to CSV rows")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(data.d))
        for i, sample in enumerate(data.samples):
            row = [repr(float(x)) for x in sample.features] + [
                repr(float(sample.b1)),
                repr(float(sample.b2)),
            ]
            for _ in range(int(mult[i])):
                writer.writerow(row)


def load_csv(path) -> Dataset:
    """Read a dataset, inferring the dimension from the header.

    Rejects malformed headers, non-numeric cells, and rows with ``b2 > b1``,
    reporting the offending data row number (1-based, excluding the header).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        d = len(header) - 2
        if d < 1 or header != _header(d):
            raise ValueError(f"{path}: malformed header {header!r}")
        feats, b1s, b2s = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != d + 2:
                raise ValueError(f"{path}: row {rownum} has {len(row)} cells, expected {d + 2}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ValueError(f"{path}: row {rownum} has a non-numeric cell") from None
            b1, b2 = values[d], values[d + 1]
            if b1 < b2:
                raise ValueError(f"{path}: row {rownum} has b1={b1} < b2={b2}")
            if b2 < 0:
                raise ValueError(f"{path}: row {rownum} has negative b2={b2}")
            feats.append(values[:d])
            b1s.append(b1)
            b2s.append(b2)
    if not feats:
        raise ValueError(f"{path}: no data rows")
    return Dataset.from_arrays(np.array(feats), np.array(b1s), np.array(b2s))
