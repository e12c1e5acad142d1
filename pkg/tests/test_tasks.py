import numpy as np
import pytest

from cope.oracle import eval_explicit
from cope.rng import stream
from cope.tasks import (
    CondPointCloud,
    make_cond_point_cloud,
    make_downsample1d,
    make_poly_regression,
    nearest_center,
    one_hot,
)


def test_cloud_centers_on_circle():
    task = make_cond_point_cloud(4, 0.6, 0.05)
    assert task.means.shape == (4, 2)
    np.testing.assert_allclose(np.linalg.norm(task.means, axis=1), 0.6)


def test_cloud_rejects_overlapping_clusters():
    # gap 4x the max std is the floor for the nearest-center oracle
    with pytest.raises(ValueError, match="overlap"):
        make_cond_point_cloud(4, 0.05, 0.5)


def test_cloud_sampling_shape_and_locality():
    task = make_cond_point_cloud(4, 0.6, 0.05)
    pts = task.sample(stream(0, "data"), 2, 500)
    assert pts.shape == (2, 500)
    center = task.means[2]
    assert np.linalg.norm(pts.mean(axis=1) - center) < 0.02
    assert np.all(np.linalg.norm(pts - center[:, None], axis=0) < 0.5)


def test_nearest_center_on_the_centers():
    task = make_cond_point_cloud(4, 0.6, 0.05)
    got = nearest_center(task, task.means.T)
    np.testing.assert_array_equal(got, np.arange(4))


def test_nearest_center_column_convention():
    task = CondPointCloud(
        means=np.array([[0.0, 0.0], [1.0, 0.0]]),
        covs=np.tile(0.01 * np.eye(2), (2, 1, 1)),
    )
    pts = np.array([[0.1, 0.9, 0.49], [0.0, 0.1, 0.0]])
    np.testing.assert_array_equal(nearest_center(task, pts), [0, 1, 0])


def test_one_hot_columns():
    cols = one_hot(4, 1, 3)
    assert cols.shape == (4, 3)
    np.testing.assert_array_equal(cols[1], np.ones(3))
    assert cols.sum() == 3


def test_poly_regression_outputs_match_target():
    task = make_poly_regression(stream(0, "data"), 3, 2, 1, 32)
    assert task.outputs.shape == (1, 32)
    for j in range(5):
        want = eval_explicit(task.target, [z[:, j] for z in task.inputs])
        np.testing.assert_allclose(task.outputs[:, j], want, rtol=0, atol=0)


def test_poly_regression_unit_scale():
    # single output: recentering preserves the exact unit global std
    one = make_poly_regression(stream(1, "data"), 3, 2, 1, 400)
    np.testing.assert_allclose(np.std(one.outputs), 1.0, atol=1e-9)
    np.testing.assert_allclose(one.outputs.mean(), 0.0, atol=1e-10)
    # multi output: rows are centered; scale stays near 1 (recentering
    # removes the between-row mean spread from the global std)
    two = make_poly_regression(stream(1, "data"), 3, 2, 2, 400)
    np.testing.assert_allclose(two.outputs.mean(axis=1), 0.0, atol=1e-10)
    assert 0.8 < np.std(two.outputs) <= 1.0 + 1e-9


def test_downsample_shapes_and_block_means():
    task = make_downsample1d(stream(0, "data"), 32, 4, 7)
    assert task.signals.shape == (32, 7)
    assert task.coarse.shape == (8, 7)
    np.testing.assert_allclose(
        task.coarse[3, 2], task.signals[12:16, 2].mean()
    )
    assert np.max(np.abs(task.signals)) <= 0.9 + 1e-12


def test_downsample_rejects_ragged_factor():
    with pytest.raises(ValueError, match="divisible"):
        make_downsample1d(stream(0, "data"), 30, 4, 3)
