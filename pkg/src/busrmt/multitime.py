"""Joint law of the bus positions at several times and its extended kernel.

Positions are handled in the shifted coordinates ``y = x + n - 1`` on
``{0, ..., N + n - 1}``, the same ones used by the single-time Krawtchouk law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .logspace import LogValue, log_det, log_factorial, log_vandermonde
from .model_line import ModelParams, PositionConfig


class ContourError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    times: tuple
    T: float = 1.0

    def __init__(self, times, T: float = 1.0):
        ts = tuple(float(t) for t in times)
        if not ts:
            raise ValueError("need at least one time")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("times must be strictly increasing")
        if ts[0] <= 0 or ts[-1] >= T:
            raise ValueError(f"times must lie in (0, T={T})")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "T", float(T))

    @property
    def fractions(self) -> np.ndarray:
        return np.array(self.times) / self.T

    def __len__(self):
        return len(self.times)


def transition_block(p_gap: float, x: int, y: int) -> float:
    """``p^(y - x) / (y - x)!`` for ``y >= x``, else 0."""
    if y < x:
        return 0.0
    d = y - x
    return math.exp(d * math.log(p_gap) - math.lgamma(d + 1)) if d else 1.0


def _log_transition_matrix(p_gap, ys_from, ys_to):
    d = np.asarray(ys_to)[None, :] - np.asarray(ys_from)[:, None]
    dd = np.maximum(d, 0)
    vals = dd * math.log(p_gap) - log_factorial(dd)
    return np.where(d < 0, -math.inf, vals)


def multitime_weight(params: ModelParams, grid: TimeGrid, configs) -> LogValue:
    """Unnormalised joint weight of position configurations at the times of ``grid``.

    ``prod_{i<j}(y_i - y_j) prod p_1^{y_i} / y_i!`` at the first time, transition
    determinants ``det(V_{p_{j+1} - p_j})`` in between, and
    ``prod_{i<j}(y_i - y_j) prod (1 - p_k)^{K - y_i} / (K - y_i)!`` at the last,
    with ``K = N + n - 1`` and ``y`` the shifted positions.
    """
    if len(configs) != len(grid):
        raise ValueError("need one configuration per time")
    K = params.N + params.n - 1
    ys = []
    for c in configs:
        c = c if isinstance(c, PositionConfig) else PositionConfig(c)
        if len(c) != params.n:
            raise ValueError(f"expected {params.n} positions")
        y = c.shifted()
        if y.min() < 0 or y.max() > K:
            return LogValue.zero()
        ys.append(y)
    p = grid.fractions
    first, last = ys[0], ys[-1]
    head = log_vandermonde(first[::-1]) * LogValue(
        float(np.sum(first * math.log(p[0]) - log_factorial(first))), 1
    )
    tail = log_vandermonde(last[::-1]) * LogValue(
        float(np.sum((K - last) * math.log1p(-p[-1]) - log_factorial(K - last))), 1
    )
    out = head * tail
    for j in range(len(ys) - 1):
        out = out * log_det(_log_transition_matrix(p[j + 1] - p[j], ys[j], ys[j + 1]))
    return out


def enumerate_multitime(params: ModelParams, grid: TimeGrid):
    """Exhaustive normalised joint law: list of ``(configs, probability)``.

    The normalising constant is the sum of all weights; this is only meant for
    tiny instances.
    """
    K = params.N + params.n - 1
    singles = [PositionConfig.from_shifted(c, params.n) for c in combinations(range(K, -1, -1), params.n)]
    rows = []
    for combo in product(singles, repeat=len(grid)):
        w = multitime_weight(params, grid, combo).value
        if w != 0.0:
            rows.append((combo, w))
    total = sum(w for _, w in rows)
    return [(c, w / total) for c, w in rows]


@dataclass(frozen=True)
class ContourSpec:
    """Two circles ``centre + radius * exp(i theta)`` sampled at ``samples`` points each."""

    s_centre: float
    s_radius: float
    t_centre: float
    t_radius: float
    samples: int = 512

    @classmethod
    def default(cls, p_i: float, p_j: float, samples: int = 512) -> "ContourSpec":
        c = p_i / (1 - p_i)
        if p_i >= p_j:
            # s-circle must also surround the t-circle around 0
            return cls(0.5 * c, 0.5 * c + 0.5, 0.0, 0.25, samples)
        rho = 0.5 * (1 + c)
        return cls(c, rho, 0.0, c + rho + 0.5, samples)

    def validate(self, p_i: float, p_j: float) -> None:
        c = p_i / (1 - p_i)
        if abs(c - self.s_centre) >= self.s_radius:
            raise ContourError("s-contour must enclose p_i / (1 - p_i)")
        if abs(-1 - self.s_centre) <= self.s_radius:
            raise ContourError("s-contour must exclude -1")
        if abs(self.t_centre) >= self.t_radius:
            raise ContourError("t-contour must enclose 0")
        gap = abs(self.s_centre - self.t_centre)
        if p_i >= p_j:
            if gap + self.t_radius >= self.s_radius:
                raise ContourError("for p_i >= p_j the s-contour must contain the t-contour")
        elif gap + self.s_radius >= self.t_radius:
            raise ContourError("for p_i < p_j the t-contour must contain the s-contour")


def _circle(centre, radius, m):
    theta = 2 * math.pi * np.arange(m) / m
    z = centre + radius * np.exp(1j * theta)
    dz = 1j * (z - centre) * (2 * math.pi / m)
    return z, dz


def _scaled_rows(logvals):
    # factor out the largest magnitude on the contour, per row
    shift = np.max(logvals.real, axis=1, keepdims=True)
    return np.exp(logvals - shift), shift[:, 0]


def extended_kernel_matrix(
    params: ModelParams, grid: TimeGrid, i: int, j: int, contour: ContourSpec | None = None, return_imag: bool = False
):
    """``K_{t_i, t_j}(x, y)`` for all shifted positions ``x, y`` in ``{0..K}``.

    Trapezoidal rule on both circles of the double contour integral

        (2 pi i)^-2 oint oint (p_j - (1 - p_j) t)^y (1 + t)^(K - y) t^-n
                              / ((p_i - (1 - p_i) s)^(x + 1) (1 + s)^(K + 1 - x) s^-n)
                              ds dt / (t - s).
    """
    p = grid.fractions
    pi_, pj = float(p[i]), float(p[j])
    contour = contour or ContourSpec.default(pi_, pj)
    contour.validate(pi_, pj)
    n = params.n
    K = params.N + n - 1
    m = contour.samples
    s, ds = _circle(contour.s_centre, contour.s_radius, m)
    t, dt = _circle(contour.t_centre, contour.t_radius, m)
    xs = np.arange(K + 1)[:, None]
    log_f = (
        n * np.log(s)[None, :]
        - (xs + 1) * np.log(pi_ - (1 - pi_) * s)[None, :]
        - (K + 1 - xs) * np.log(1 + s)[None, :]
        + np.log(ds)[None, :]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        # the t-integrand may vanish on the circle; x^0 stays 1 there
        log_zero = np.where(xs == 0, 0.0, xs * np.log(pj - (1 - pj) * t)[None, :])
    log_g = (
        log_zero
        + (K - xs) * np.log(1 + t)[None, :]
        - n * np.log(t)[None, :]
        + np.log(dt)[None, :]
    )
    F, fshift = _scaled_rows(log_f)
    G, gshift = _scaled_rows(log_g)
    cauchy = 1.0 / (t[None, :] - s[:, None])
    raw = (F @ cauchy @ G.T) / (2j * math.pi) ** 2
    out = raw * np.exp(fshift[:, None] + gshift[None, :])
    if return_imag:
        return out.real, float(np.abs(out.imag).max())
    return out.real


def extended_kernel(params, grid, i, j, x, y, contour: ContourSpec | None = None) -> float:
    return float(extended_kernel_matrix(params, grid, i, j, contour)[x, y])


def correlation_from_kernel(blocks, points) -> float:
    """Correlation function ``det(K_{t_a, t_b}(x_a, x_b))`` for ``points = [(time index, x), ...]``.

    ``blocks[(a, b)]`` holds the kernel matrix for times ``a`` and ``b``.
    """
    r = len(points)
    mat = np.empty((r, r))
    for u, (a, xa) in enumerate(points):
        for v, (b, xb) in enumerate(points):
            mat[u, v] = blocks[(a, b)][xa, xb]
    return float(np.linalg.det(mat))


def kernel_blocks(params, grid, samples: int = 512):
    k = len(grid)
    p = grid.fractions
    return {
        (a, b): extended_kernel_matrix(params, grid, a, b, ContourSpec.default(p[a], p[b], samples))
        for a in range(k)
        for b in range(k)
    }


def enumerated_correlations(params: ModelParams, grid: TimeGrid):
    """One-point densities and two-time pair densities from exhaustive enumeration.

    Returns ``(rho1, rho2)`` with ``rho1[a][y]`` the probability that some bus
    sits at shifted position ``y`` at time ``a``, and ``rho2[(a, b)][y, y2]``
    the joint probability of occupation of ``(a, y)`` and ``(b, y2)`` (the
    same point counted once, so the diagonal of ``rho2[(a, a)]`` is zero).
    """
    size = params.N + params.n
    k = len(grid)
    rho1 = np.zeros((k, size))
    rho2 = {(a, b): np.zeros((size, size)) for a in range(k) for b in range(k)}
    for configs, prob in enumerate_multitime(params, grid):
        occ = [c.shifted() for c in configs]
        for a in range(k):
            rho1[a, occ[a]] += prob
            for b in range(k):
                rho2[(a, b)][np.ix_(occ[a], occ[b])] += prob
    for a in range(k):
        np.fill_diagonal(rho2[(a, a)], 0.0)
    return rho1, rho2


def kernel_consistency(params: ModelParams, grid: TimeGrid, samples: int = 512) -> dict:
    """Largest deviations between kernel correlations and enumeration.

    Keys: ``one_point``, ``two_point`` and ``resolution`` (change in the
    kernel when the contour sample count is doubled).
    """
    rho1, rho2 = enumerated_correlations(params, grid)
    blocks = kernel_blocks(params, grid, samples)
    fine = kernel_blocks(params, grid, 2 * samples)
    size = rho1.shape[1]
    one = max(abs(blocks[(a, a)][y, y] - rho1[a, y]) for a in range(len(grid)) for y in range(size))
    two = 0.0
    for (a, b), target in rho2.items():
        for y in range(size):
            for y2 in range(size):
                if a == b and y == y2:
                    continue
                two = max(two, abs(correlation_from_kernel(blocks, [(a, y), (b, y2)]) - target[y, y2]))
    res = max(float(np.abs(blocks[key] - fine[key]).max()) for key in blocks)
    return {"one_point": float(one), "two_point": float(two), "resolution": res}
