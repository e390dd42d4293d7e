import numpy as np
import pytest

from busrmt.model_line import ModelParams, PositionConfig, enumerate_position_configs, position_pmf
from busrmt.multitime import (
    ContourError,
    ContourSpec,
    TimeGrid,
    correlation_from_kernel,
    enumerate_multitime,
    extended_kernel,
    extended_kernel_matrix,
    kernel_blocks,
    kernel_consistency,
    multitime_weight,
    transition_block,
)
from busrmt.orthopoly import KrawtchoukBasis

TINY = ModelParams(3, 2, 1)


def test_transition_block_values():
    assert transition_block(0.3, 4, 2) == 0.0
    assert transition_block(0.3, 2, 2) == 1.0
    assert transition_block(0.5, 1, 3) == pytest.approx(0.125)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.5, 0.3])
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.3])
    assert np.allclose(TimeGrid([0.5, 1.0], T=2.0).fractions, [0.25, 0.5])


@pytest.mark.parametrize("params,t", [(TINY, 0.4), (ModelParams(5, 3, 2), 0.7)])
def test_single_time_reduces_to_position_law(params, t):
    rows = enumerate_multitime(params, TimeGrid([t]))
    for (config,), prob in rows:
        assert prob == pytest.approx(position_pmf(params, t, config), abs=1e-12)


def test_two_time_normalisation_and_marginals():
    grid = TimeGrid([0.3, 0.6])
    rows = enumerate_multitime(TINY, grid)
    assert sum(p for _, p in rows) == pytest.approx(1.0, abs=1e-10)
    for a, t in enumerate(grid.times):
        marg = {}
        for configs, p in rows:
            key = tuple(configs[a].positions)
            marg[key] = marg.get(key, 0.0) + p
        for c in enumerate_position_configs(TINY):
            assert marg.get(tuple(c.positions), 0.0) == pytest.approx(position_pmf(TINY, t, c), abs=1e-10)


def test_backward_move_has_zero_weight():
    grid = TimeGrid([0.3, 0.6])
    w = multitime_weight(TINY, grid, [PositionConfig([3, 1]), PositionConfig([2, 1])])
    assert w.sign == 0


def test_equal_time_kernel_matches_krawtchouk():
    grid = TimeGrid([0.4])
    K = extended_kernel_matrix(TINY, grid, 0, 0)
    kb = KrawtchoukBasis.from_params(TINY, 0.4)
    assert np.allclose(np.diag(K), kb.one_point(), atol=1e-8)
    blocks = {(0, 0): K}
    size = TINY.N + TINY.n
    for y in range(size):
        for y2 in range(y + 1, size):
            assert correlation_from_kernel(blocks, [(0, y), (0, y2)]) == pytest.approx(
                kb.correlation([y, y2]), abs=1e-8
            )


def test_kernel_is_real_and_resolution_stable():
    grid = TimeGrid([0.3, 0.6])
    for i, j in ((0, 0), (0, 1), (1, 0)):
        p = grid.fractions
        coarse, imag = extended_kernel_matrix(TINY, grid, i, j, ContourSpec.default(p[i], p[j], 256), True)
        fine = extended_kernel_matrix(TINY, grid, i, j, ContourSpec.default(p[i], p[j], 512))
        assert imag < 1e-9
        assert np.abs(coarse - fine).max() < 1e-10
    assert extended_kernel(TINY, grid, 0, 1, 2, 3) == pytest.approx(kernel_blocks(TINY, grid)[(0, 1)][2, 3])


def test_contour_validation():
    spec = ContourSpec.default(0.3, 0.6)
    spec.validate(0.3, 0.6)
    with pytest.raises(ContourError):
        ContourSpec(0.0, 0.1, 0.0, 0.25).validate(0.5, 0.5)  # misses p/(1-p) = 1
    with pytest.raises(ContourError):
        ContourSpec(0.5, 2.0, 0.0, 0.25).validate(0.5, 0.5)  # swallows -1
    with pytest.raises(ContourError):
        ContourSpec(0.5, 1.0, 0.0, 3.0).validate(0.5, 0.3)  # wrong nesting for p_i >= p_j
    with pytest.raises(ContourError):
        ContourSpec.default(0.6, 0.3).validate(0.3, 0.6)


@pytest.mark.parametrize(
    "params,times", [(TINY, [0.3, 0.6]), (ModelParams(5, 2, 2), [0.2, 0.5, 0.7]), (ModelParams(4, 3, 1), [0.5, 0.55])]
)
def test_multitime_correlations_match_enumeration(params, times):
    errors = kernel_consistency(params, TimeGrid(times))
    assert errors["one_point"] < 1e-8
    assert errors["two_point"] < 1e-8
    assert errors["resolution"] < 1e-10
