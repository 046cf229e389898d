import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macropeaks.dimension import estimate_dim_counting
from macropeaks.errors import DomainError, InvalidRange, SizeCapExceeded
from macropeaks.geometry import (
    Cube,
    block_set_points,
    exp_n,
    in_shell,
    shell_bounds,
    shell_index,
    shell_of,
    skeleton_axis,
    skeleton_count,
    skeleton_points,
    subskeleton_in_cube,
)


@pytest.mark.parametrize("x, n", [(0.5, 0), (1.5, 1), (math.e, 2), (-1.0, 0), (-1.0001, 1), (-math.e, 1)])
def test_shell_of_examples(x, n):
    assert shell_of(x) == n


def test_shell_of_uses_largest_coordinate():
    assert shell_of([0.2, 3.0]) == 2
    assert shell_of([-8.0, 0.0]) == 3


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_shells_partition_the_line(xs):
    arr = np.asarray(xs)
    idx = shell_index(arr)
    for x, n in zip(xs, idx):
        assert n == shell_of(x)
        lo, hi = shell_bounds(int(n))
        assert -hi <= x < hi
        if n > 0:
            assert not (-lo <= x < lo)
    for n in range(int(idx.max()) + 1):
        assert np.array_equal(in_shell(arr, n), idx == n)


def test_shell_boundaries_exact():
    for n in range(1, 30):
        assert shell_of(exp_n(n)) == n + 1
        assert shell_of(np.nextafter(exp_n(n), 0)) == n
        assert shell_of(-exp_n(n)) == n


def test_skeleton_examples():
    pts = skeleton_points(1, 0.5, 1)[:, 0]
    assert pts.tolist() == pytest.approx([math.e, math.e + math.exp(0.5)], rel=1e-15)
    assert skeleton_count(2, 0.5, 2) == 9
    assert skeleton_points(2, 0.5, 2).shape == (9, 2)


def test_skeleton_near_one():
    # floor(e^{n(1-θ)}) + 1 is 2 for θ close to 1, so each axis has two anchors
    for n in (1, 5, 10):
        assert skeleton_count(n, 1 - 1e-9, 1) == 2
        assert skeleton_count(n, 1 - 1e-9, 3) == 8


@given(st.integers(1, 12), st.floats(0.05, 0.95))
def test_skeleton_axis_spacing(n, theta):
    axis = skeleton_axis(n, theta)
    assert axis.size == math.floor(math.exp(n * (1 - theta))) + 1
    assert axis[0] == exp_n(n)
    assert np.allclose(np.diff(axis), math.exp(n * theta), rtol=1e-12)


def test_skeleton_cap():
    with pytest.raises(SizeCapExceeded):
        skeleton_points(12, 0.1, 3, cap=1000)


def test_skeleton_domain():
    with pytest.raises(DomainError):
        skeleton_axis(0, 0.5)
    with pytest.raises(DomainError):
        skeleton_axis(3, 1.0)


def test_cube_side_at_least_one():
    with pytest.raises(DomainError):
        Cube((0.0,), 0.5)
    cube = Cube((1.0, 2.0), 2.0)
    assert cube.contains([[1.0, 2.0], [2.9, 3.9], [3.0, 2.0]]).tolist() == [True, True, False]


def test_subskeleton_invalid_range():
    n, theta = 6, 0.5
    cube = Cube((exp_n(n),), math.exp(n * theta))
    with pytest.raises(InvalidRange):
        subskeleton_in_cube(n, 0.5, cube, theta)
    with pytest.raises(InvalidRange):
        subskeleton_in_cube(n, 0.7, cube, theta)


def _pairwise_min(points):
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    return dist.min()


@given(
    st.integers(2, 12),
    st.floats(0.3, 0.9),
    st.floats(0.1, 0.9),
    st.integers(1, 2),
    st.integers(0, 1000),
)
def test_subskeleton_separation_and_count(n, theta, frac, d, pick):
    delta = theta * frac
    if math.exp(n * d * (theta - delta)) > 5000:
        return
    axis = skeleton_axis(n, theta)
    anchor = axis[pick % axis.size]
    cube = Cube((anchor,) * d, math.exp(n * theta))
    sub = subskeleton_in_cube(n, delta, cube, theta)
    assert sub.points.shape == (sub.count, d)
    assert np.all(cube.contains(sub.points))
    if sub.count > 1:
        assert _pairwise_min(sub.points) >= math.exp(n * delta)
    # each axis holds floor or ceil of e^{n(θ-δ)} lattice points, so c ≤ 2^d suffices
    assert sub.count >= 1
    slack = 1 + 1e-12
    assert sub.target / (sub.constant * slack) <= sub.count <= sub.constant * sub.target * slack
    assert sub.constant <= 2.0**d


def test_block_set_full_compression():
    pts = block_set_points(4, 2.0, 2, 1)
    assert pts.shape[1] == 2
    assert np.all((pts > 0) & (pts <= math.exp(2.0)))


def test_block_set_containment():
    pts = block_set_points(1, 2.0, 1, 1, spacing=0.5)
    assert pts.shape[0] > 0
    assert np.all((pts[:, 0] > 0) & (pts[:, 0] <= math.exp(0.5)))
    assert np.all((pts[:, 1] > math.exp(0.5)) & (pts[:, 1] <= math.e**2))


def test_block_set_domain():
    with pytest.raises(DomainError):
        block_set_points(3, 1.0, 1, 1)
    with pytest.raises(DomainError):
        block_set_points(3, 2.0, 3, 1)


@pytest.mark.parametrize("theta", [0.3, 0.5])
def test_skeleton_union_dimension(theta):
    pts = np.concatenate([skeleton_points(n, theta, 1) for n in range(1, 13)])
    est = estimate_dim_counting(pts, (3, 12), 1)
    assert est.value == pytest.approx(1 - theta, abs=0.1)
