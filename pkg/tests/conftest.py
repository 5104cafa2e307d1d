import numpy as np
import pytest

from reserveopt import AuctionSample, Box, Dataset


def random_dataset(rng, d, n, b2_scale=1.0, gap_scale=1.0):
    feats = rng.normal(size=(n, d))
    b2 = rng.uniform(0, b2_scale, n)
    b1 = b2 + rng.uniform(0, gap_scale, n)
    return Dataset.from_arrays(feats, b1, b2)


def random_block_params(rng):
    """Draw (sample, l, u) with l <= b2 <= b1 <= u and strict gaps."""
    b2 = rng.uniform(0.05, 1.0)
    b1 = b2 + rng.uniform(0.05, 1.0)
    l = b2 - rng.uniform(0.05, 2.0)
    u = b1 + rng.uniform(0.05, 2.0)
    sample = AuctionSample(np.array([1.0]), b1, b2)
    return sample, l, u


def random_dataset_in_range(rng, d, n, box):
    """Random instance whose bids fall inside every reserve range.

    Ensures max(0, l_i) <= b2_i <= b1_i <= u_i with strict margins, the
    regime where the per-impression relaxation describes the convex hull.
    """
    from reserveopt import variable_bounds

    feats = np.empty((n, d))
    b1 = np.empty(n)
    b2 = np.empty(n)
    for i in range(n):
        while True:
            w = rng.normal(size=d)
            l, u = variable_bounds(w, box)
            lo = max(0.0, l)
            if u - lo > 0.2:
                break
        feats[i] = w
        b2[i] = rng.uniform(lo, lo + 0.45 * (u - lo))
        b1[i] = rng.uniform(b2[i] + 0.05 * (u - lo), u)
    return Dataset.from_arrays(feats, b1, b2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
