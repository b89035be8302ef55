import numpy as np
import pytest

import finsler_spectra as fs


def unit_square_spec():
    return fs.shape(fs.rectangle(0.0, 0.0, 1.0, 1.0))


def lshape_spec():
    # unit square minus its top-right quarter
    return fs.shape(
        fs.rectangle(0.0, 0.0, 1.0, 1.0),
        fs.rectangle(0.5, 0.5, 1.01, 1.01, mode="subtract"),
    )


def rect21_spec():
    return fs.shape(fs.rectangle(0.0, 0.0, 2.0, 1.0))


def two_disk_spec(r1=1.0, r2=0.75, separation=3.0):
    return fs.shape(
        fs.euclidean_disk((0.0, 0.0), r1),
        fs.euclidean_disk((separation, 0.0), r2),
    )


ALL_NORMS = {
    "euclidean": fs.euclidean(),
    "weighted_quadratic": fs.weighted_quadratic(4.0, 1.0),
    "lq": fs.lq_norm(3.0),
}


@pytest.fixture(scope="session")
def square_64():
    return fs.rasterize(unit_square_spec(), 1.0 / 64)


@pytest.fixture(scope="session")
def square_128():
    return fs.rasterize(unit_square_spec(), 1.0 / 128)


@pytest.fixture(scope="session")
def disk_48():
    return fs.rasterize(fs.shape(fs.euclidean_disk((0.0, 0.0), 1.0)), 1.0 / 48)


def brute_force_two_wulff(grid, norm, dvals_grid):
    """O(N^2) maximin oracle: max over node pairs of min(d1, d2, polar_dist/2)."""
    pol = fs.polar(norm)
    nodes = np.argwhere(grid.mask)
    pts = grid.node_points(nodes)
    d = dvals_grid[grid.mask]
    best = -np.inf
    for i in range(len(pts)):
        dist = fs.eval_norm(pol, pts - pts[i])
        cand = np.minimum(np.minimum(d, d[i]), 0.5 * dist)
        cand[i] = -np.inf
        best = max(best, float(cand.max()))
    return best
