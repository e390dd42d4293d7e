import math

import numpy as np
import pytest

from busrmt.rmt_reference import poisson_spacing_cdf
from busrmt.stats import (
    InsufficientData,
    StatCurve,
    UnfoldedSequence,
    ks_distance,
    number_variance_statistic,
    spacing_statistic,
    tabulated_cdf,
    window_counts,
)


def _poisson_sequences(rng, replicates, length):
    out = []
    for r in range(replicates):
        k = rng.poisson(length)
        out.append(UnfoldedSequence(np.sort(rng.uniform(0, length, k)), r))
    return out


def test_unfolded_sequence_validation():
    with pytest.raises(ValueError):
        UnfoldedSequence([0.0, 1.0, 1.0])
    seq = UnfoldedSequence(np.arange(20.0), replicate=3, site=7)
    assert seq.bulk(0.1).tolist() == list(np.arange(2.0, 18.0))
    assert seq.mean_spacing() == pytest.approx(1.0)


def test_lattice_spacing_histogram():
    h = spacing_statistic([UnfoldedSequence([0.0, 1.0, 2.0, 3.0])], bin_width=0.1, s_max=2.0)
    assert np.allclose(h.samples, 1.0)
    assert h.count.sum() == 3
    hit = np.flatnonzero(h.count)
    assert hit.size == 1 and h.x[hit[0]] - 0.05 <= 1.0 <= h.x[hit[0]] + 0.05


def test_histogram_mass_and_errors(rng):
    seqs = _poisson_sequences(rng, 20, 200.0)
    h = spacing_statistic(seqs, bin_width=0.1)
    assert np.sum(h.value) * 0.1 == pytest.approx(1.0, abs=1e-12)
    assert np.all(h.stderr[h.count > 5] > 0)


def test_spacing_needs_data():
    with pytest.raises(InsufficientData):
        spacing_statistic([UnfoldedSequence([1.0])])


def test_poisson_control_spacing(rng):
    seqs = _poisson_sequences(rng, 50, 400.0)
    h = spacing_statistic(seqs)
    assert ks_distance(h.samples, poisson_spacing_cdf) < 0.02


def test_window_counts_half_open():
    pts = np.arange(10.0)
    c = window_counts(pts, 2.0, 0.0, 9.0)
    assert c.tolist() == [2] * 8


def test_lattice_number_variance_is_zero():
    seq = UnfoldedSequence(np.arange(200.0) + 0.5)
    nv = number_variance_statistic([seq], [1.0, 2.0, 3.0])
    assert np.allclose(nv.value, 0.0)


def test_poisson_control_number_variance(rng):
    seqs = _poisson_sequences(rng, 60, 300.0)
    s = np.array([0.5, 1.0, 2.0, 3.0, 5.0])
    nv = number_variance_statistic(seqs, s)
    assert np.all(nv.stderr > 0)
    assert np.all(np.abs(nv.value - s) < 3 * nv.stderr)


def test_number_variance_span_guard():
    seq = UnfoldedSequence(np.arange(20.0))
    with pytest.raises(InsufficientData):
        number_variance_statistic([seq], [10.0])


def test_ks_self_consistency():
    crit = 1.63 / math.sqrt(10_000) * 1.5
    rng = np.random.default_rng(99)
    hits = sum(ks_distance(rng.exponential(size=10_000), poisson_spacing_cdf) < crit for _ in range(40))
    assert hits >= 38


def test_ks_point_mass_and_shift():
    x = np.full(100, 2.0)
    assert ks_distance(x, lambda s: (np.asarray(s) >= 2.0).astype(float)) <= 1 / 100
    rng = np.random.default_rng(5)
    u = rng.uniform(0, 1, 20_000) + 0.1
    d = ks_distance(u, lambda s: np.clip(s, 0, 1))
    assert d == pytest.approx(0.1, abs=0.02)
    with pytest.raises(InsufficientData):
        ks_distance([1.0, 2.0], poisson_spacing_cdf)


def test_ks_with_tabulated_curve():
    rng = np.random.default_rng(7)
    x = rng.exponential(size=5000)
    grid = np.linspace(0, 12, 2401)
    curve = StatCurve(grid, poisson_spacing_cdf(grid), np.zeros_like(grid), np.zeros_like(grid))
    assert ks_distance(x, curve) == pytest.approx(ks_distance(x, poisson_spacing_cdf), abs=1e-5)
    fast = tabulated_cdf(poisson_spacing_cdf, 12.0)
    assert ks_distance(x, fast) == pytest.approx(ks_distance(x, poisson_spacing_cdf), abs=1e-5)
