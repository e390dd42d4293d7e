"""Spacing and number-variance estimators for unfolded point sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class InsufficientData(ValueError):
    pass


@dataclass
class UnfoldedSequence:
    """Strictly increasing points on a unit-mean-density scale."""

    points: np.ndarray
    replicate: int = 0
    site: int | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("unfolded points must be strictly increasing")

    def bulk(self, edge_fraction: float = 0.1) -> np.ndarray:
        """Points left after dropping ``edge_fraction`` of the sequence at each end."""
        n = self.points.size
        cut = int(math.floor(edge_fraction * n))
        return self.points[cut : n - cut]

    def mean_spacing(self, edge_fraction: float = 0.1) -> float:
        """Bulk mean nearest-neighbour spacing, a diagnostic that should be near 1."""
        b = self.bulk(edge_fraction)
        return float(np.mean(np.diff(b))) if b.size > 1 else math.nan


@dataclass
class StatCurve:
    """Abscissa, estimate and standard error of a statistic, plus sample counts."""

    x: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    count: np.ndarray
    name: str = ""
    samples: np.ndarray | None = field(default=None, repr=False)


def _as_sequences(sequences):
    return [s if isinstance(s, UnfoldedSequence) else UnfoldedSequence(s) for s in sequences]


def bulk_spacings(sequences, edge_fraction: float = 0.1) -> list[np.ndarray]:
    return [np.diff(s.bulk(edge_fraction)) for s in _as_sequences(sequences)]


def spacing_statistic(sequences, bin_width: float = 0.1, edge_fraction: float = 0.1, s_max: float | None = None) -> StatCurve:
    """Normalised histogram of bulk nearest-neighbour spacings.

    Spacings touching the first or last ``edge_fraction`` of a sequence are
    dropped. Standard errors come from the spread of per-replicate histograms.
    The pooled spacings are kept in ``samples`` for distribution tests.
    """
    per_rep = [sp for sp in bulk_spacings(sequences, edge_fraction) if sp.size]
    if not per_rep:
        raise InsufficientData("no bulk spacings: need at least one sequence with two bulk points")
    pooled = np.concatenate(per_rep)
    top = s_max if s_max is not None else pooled.max()
    nbins = max(1, int(math.ceil(top / bin_width)))
    edges = np.arange(nbins + 1) * bin_width
    counts, _ = np.histogram(pooled, bins=edges)
    total = pooled.size
    density = counts / (total * bin_width)
    if len(per_rep) > 1:
        reps = np.array([np.histogram(sp, bins=edges)[0] / (sp.size * bin_width) for sp in per_rep])
        stderr = reps.std(axis=0, ddof=1) / math.sqrt(len(per_rep))
    else:
        stderr = np.sqrt(counts) / (total * bin_width)
    return StatCurve(0.5 * (edges[:-1] + edges[1:]), density, stderr, counts, "spacing", pooled)


def window_counts(points: np.ndarray, s: float, lo: float, hi: float) -> np.ndarray:
    """Counts in ``[u, u + s)`` for ``u = lo, lo + s/2, ...`` with ``u + s <= hi``."""
    if hi - lo < s:
        return np.empty(0, dtype=int)
    m = int(math.floor((hi - lo - s) / (0.5 * s) + 1e-9)) + 1
    u = lo + 0.5 * s * np.arange(m)
    return np.searchsorted(points, u + s, side="left") - np.searchsorted(points, u, side="left")


def number_variance_statistic(sequences, s_grid, edge_fraction: float = 0.1, max_span_fraction: float = 0.25) -> StatCurve:
    """Variance of the number of points in windows of length ``s``.

    Windows slide with stride ``s / 2`` over the bulk of each sequence; counts
    are pooled over replicates. Standard errors are leave-one-replicate-out
    jackknife estimates (zero when only one replicate is given).
    """
    seqs = _as_sequences(sequences)
    s_grid = np.asarray(s_grid, dtype=float)
    bulks = [s.bulk(edge_fraction) for s in seqs]
    spans = [b[-1] - b[0] for b in bulks if b.size > 1]
    if not spans:
        raise InsufficientData("sequences too short for a number-variance estimate")
    span = min(spans)
    if s_grid.max() > max_span_fraction * span:
        raise InsufficientData(
            f"window length {s_grid.max()} exceeds {max_span_fraction:.0%} of the bulk span {span:.3g}"
        )
    values, errs, counts = [], [], []
    R = len(bulks)
    for s in s_grid:
        per = [window_counts(b, s, b[0], b[-1]) for b in bulks]
        n_r = np.array([c.size for c in per], dtype=float)
        s1 = np.array([c.sum() for c in per], dtype=float)
        s2 = np.array([(c.astype(float) ** 2).sum() for c in per])

        def var(n, a, b):
            mean = a / n
            return (b - n * mean * mean) / (n - 1)

        N, A, B = n_r.sum(), s1.sum(), s2.sum()
        v = var(N, A, B)
        if R > 1:
            loo = np.array([var(N - n_r[r], A - s1[r], B - s2[r]) for r in range(R)])
            se = math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2))
        else:
            se = 0.0
        values.append(v)
        errs.append(se)
        counts.append(int(N))
    return StatCurve(s_grid, np.array(values), np.array(errs), np.array(counts), "number_variance")


def ks_distance(samples, reference_cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``reference_cdf``.

    ``reference_cdf`` is a callable, or a :class:`StatCurve`/pair of arrays
    ``(x, F(x))`` that is interpolated linearly. Both one-sided limits are
    compared at every distinct sample value, so ties and step references are
    handled.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 10:
        raise InsufficientData("need at least 10 samples for a KS distance")
    if callable(reference_cdf):
        F = lambda v: np.asarray(reference_cdf(v), dtype=float)
    else:
        gx, gy = (reference_cdf.x, reference_cdf.value) if isinstance(reference_cdf, StatCurve) else reference_cdf
        F = lambda v: np.interp(v, gx, gy)
    u = np.unique(x)
    above = np.searchsorted(x, u, side="right") / n
    below = np.searchsorted(x, u, side="left") / n
    return float(max(np.max(above - F(u)), np.max(F(np.nextafter(u, -np.inf)) - below)))


def tabulated_cdf(cdf, s_max: float, step: float = 0.005):
    """Tabulate an expensive CDF once and return a fast interpolating callable."""
    grid = np.arange(0.0, s_max + step, step)
    vals = np.asarray(cdf(grid), dtype=float)
    return lambda s: np.interp(s, grid, vals, right=1.0)
