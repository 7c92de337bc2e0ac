import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracnet.model import (
    BLOCK_SIZE,
    DiffusionModel,
    ResourceError,
    TimeGrid,
    build_grid,
    grid_from_times,
    iter_path_blocks,
    map_path_blocks,
    map_w_to_y,
    sigma,
    simulate_paths,
)
from fracnet.timenet import equidistant, theta_net


def test_model_validation():
    with pytest.raises(ValueError):
        DiffusionModel.bm(0)
    with pytest.raises(ValueError):
        DiffusionModel("bm", 1.5)
    assert DiffusionModel("gbm", 2).is_gbm
    np.testing.assert_array_equal(DiffusionModel.gbm(3).y0, np.ones(3))
    np.testing.assert_array_equal(DiffusionModel.bm(2).y0, np.zeros(2))


def test_sigma_shapes_and_domain():
    bm, gbm = DiffusionModel.bm(2), DiffusionModel.gbm(2)
    y = np.array([[1.0, 2.0], [0.5, 3.0]])
    np.testing.assert_array_equal(sigma(bm, y), np.broadcast_to(np.eye(2), (2, 2, 2)))
    np.testing.assert_array_equal(sigma(gbm, y)[1], np.diag([0.5, 3.0]))
    with pytest.raises(ValueError):
        sigma(gbm, np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        sigma(bm, np.zeros(3))
    assert not gbm.in_domain(np.array([0.0, 1.0]))


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5]))
    with pytest.raises(ValueError):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    g = grid_from_times([0.25, 0.5])
    np.testing.assert_array_equal(g.knots, [0.0, 0.25, 0.5, 1.0])
    with pytest.raises(KeyError):
        g.index_of([0.3])
    assert g.snap_up(0.3) == 2


def test_build_grid_contains_net_knots_and_tags():
    nets = [equidistant(8), theta_net(16, 0.5)]
    g = build_grid(nets)
    for net in nets:
        idx = g.index_of(net.knots)
        assert np.all(g.tags[idx] & 1)
    # union substeps split every net interval into equal pieces
    g2 = build_grid([equidistant(4)], refine=0, substeps=4)
    np.testing.assert_allclose(g2.knots, np.arange(17) / 16)


def test_gbm_mapping_matches_closed_form():
    gbm = DiffusionModel.gbm(1)
    w = np.array([[0.3], [-1.0]])
    np.testing.assert_allclose(map_w_to_y(gbm, np.array([0.5, 1.0]), w)[:, 0], np.exp(w[:, 0] - [0.25, 0.5]))


def test_paths_have_exact_gaussian_increments():
    bm = DiffusionModel.bm(1)
    g = grid_from_times([0.1, 0.5])
    batch = simulate_paths(bm, g, 40_000, seed=3)
    inc = np.diff(batch.w[:, :, 0], axis=1)
    assert np.all(batch.w[:, 0, 0] == 0.0)
    # sample variances within 4 standard errors of dt
    se = g.dt * np.sqrt(2 / inc.shape[0])
    assert np.all(np.abs(inc.var(axis=0) - g.dt) < 4 * se)
    assert abs(np.corrcoef(inc[:, 0], inc[:, 1])[0, 1]) < 0.02


def test_paths_independent_of_workers_and_prefix_stable():
    bm = DiffusionModel.bm(2)
    g = build_grid([equidistant(4)], refine=2)
    a = simulate_paths(bm, g, 2 * BLOCK_SIZE + 5, seed=7)
    b = simulate_paths(bm, g, 2 * BLOCK_SIZE + 5, seed=7, workers=3)
    c = simulate_paths(bm, g, BLOCK_SIZE + 1, seed=7)
    np.testing.assert_array_equal(a.w, b.w)
    np.testing.assert_array_equal(a.w[: BLOCK_SIZE + 1], c.w)
    d = simulate_paths(bm, g, 10, seed=8)
    assert not np.array_equal(a.w[:10], d.w)


def test_block_iterators_agree_with_simulate_paths():
    bm = DiffusionModel.bm(1)
    g = build_grid([equidistant(4)], refine=1)
    ref = simulate_paths(bm, g, BLOCK_SIZE + 17, seed=2).w
    blocks = list(iter_path_blocks(bm, g, BLOCK_SIZE + 17, 2))
    np.testing.assert_array_equal(np.concatenate([w for _, w in blocks]), ref)
    sums = map_path_blocks(lambda start, w: (start, float(w.sum())), bm, g, BLOCK_SIZE + 17, 2, workers=2)
    assert [s for s, _ in sums] == [0, BLOCK_SIZE]
    assert sum(v for _, v in sums) == pytest.approx(ref.sum())


def test_resource_guard():
    g = build_grid([equidistant(4)])
    with pytest.raises(ResourceError):
        simulate_paths(DiffusionModel.bm(1), g, 1000, max_bytes=1000)
    with pytest.raises(ValueError):
        simulate_paths(DiffusionModel.bm(1), g, 0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.001, 0.999), min_size=1, max_size=8), st.integers(0, 2**31))
def test_brownian_endpoint_has_unit_variance_on_any_grid(times, seed):
    g = grid_from_times(times)
    w = simulate_paths(DiffusionModel.bm(1), g, 4000, seed).w[:, -1, 0]
    # W_1 ~ N(0, 1) regardless of the grid: 6-sigma band on the variance
    assert abs(w.var() - 1.0) < 6 * np.sqrt(2 / w.size)
