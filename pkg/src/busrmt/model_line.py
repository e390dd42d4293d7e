"""Exact probabilities for non-intersecting Poisson buses on a line.

Bus ``i`` (1-based) starts at level ``1 - i`` at time 0 and is conditioned to
reach level ``N + 1 - i`` at time ``T`` without ever sharing a level with
another bus. All formulas are evaluated in log space because the factorials
involved overflow double precision already for moderate ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .logspace import LogValue, log_det, log_factorial, log_vandermonde


@dataclass(frozen=True)
class ModelParams:
    """Integers ``N`` (route length), ``n`` (buses), site ``x`` and horizon ``T``."""

    N: int
    n: int
    x: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or int(self.n) != self.n or int(self.x) != self.x:
            raise ValueError("N, n and x must be integers")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")
        if not self.n < self.N:
            raise ValueError(f"need n < N, got n={self.n}, N={self.N}")
        if not 1 <= self.x <= self.N - self.n + 1:
            raise ValueError(
                f"site x={self.x} outside the window 1 <= x <= N - n + 1 = {self.N - self.n + 1}"
            )
        if not self.T > 0:
            raise ValueError(f"need T > 0, got T={self.T}")

    @property
    def alpha(self) -> int:
        """Exponent of ``(1 - y)`` in the Jacobi weight."""
        return self.N - (self.n + self.x - 1)

    @property
    def beta(self) -> int:
        """Exponent of ``(1 + y)`` in the Jacobi weight."""
        return self.x - 1

    def fraction(self, t: float) -> float:
        return t / self.T


@dataclass(frozen=True)
class ArrivalTimes:
    """Ordered arrival times ``t_1 <= ... <= t_n`` of the buses at one site.

    Ties are accepted (the densities vanish there); decreasing input is not.
    """

    times: np.ndarray

    def __init__(self, times):
        arr = np.array(times, dtype=float).ravel()
        if arr.size == 0:
            raise ValueError("need at least one arrival time")
        if np.any(np.diff(arr) < 0):
            raise ValueError("arrival times must be non-decreasing")
        arr.setflags(write=False)
        object.__setattr__(self, "times", arr)

    def __len__(self):
        return self.times.size

    def check(self, params: ModelParams) -> None:
        if len(self) != params.n:
            raise ValueError(f"expected {params.n} arrival times, got {len(self)}")
        if self.times[0] < 0 or self.times[-1] > params.T:
            raise ValueError(f"arrival times must lie in [0, T={params.T}]")


@dataclass(frozen=True)
class PositionConfig:
    """Bus positions ``x_1 > x_2 > ... > x_n`` at a fixed time."""

    positions: tuple

    def __init__(self, positions):
        pos = tuple(int(p) for p in positions)
        if any(b > a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be listed in decreasing order")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_shifted(cls, shifted, n: int) -> "PositionConfig":
        return cls([y - (n - 1) for y in shifted])

    def shifted(self) -> np.ndarray:
        """``y_j = x_j + n - 1``, the Krawtchouk coordinates on ``{0..N+n-1}``."""
        n = len(self.positions)
        return np.array(self.positions, dtype=int) + n - 1

    def __len__(self):
        return len(self.positions)


def _log_pow(base, expo):
    """Elementwise ``log(base ** expo)`` with ``0 ** 0 = 1``."""
    base = np.asarray(base, dtype=float)
    expo = np.asarray(expo, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = expo * np.log(base)
    return np.where(expo == 0, 0.0, out)


def _poisson_log_entries(times, counts):
    """Matrix of ``log(exp(-t) t^k / k!)`` with ``-inf`` where ``k < 0``."""
    t = np.broadcast_to(np.asarray(times, dtype=float), np.shape(counts))
    k = np.asarray(counts)
    kk = np.maximum(k, 0)
    out = -t + _log_pow(t, kk) - log_factorial(kk)
    return np.where(k < 0, -math.inf, out)


def km_start_log_matrix(params: ModelParams, arrivals: ArrivalTimes) -> np.ndarray:
    """Log entries of ``exp(-t_j) t_j^(x+i-2) / (x+i-2)!``, rows ``i``, columns ``j``."""
    i = np.arange(1, params.n + 1)[:, None]
    t = np.broadcast_to(arrivals.times[None, :], (params.n, params.n))
    return _poisson_log_entries(t, np.broadcast_to(params.x + i - 2, t.shape))


def km_end_log_matrix(params: ModelParams, arrivals: ArrivalTimes) -> np.ndarray:
    """Log entries of ``exp(-(T-t_j)) (T-t_j)^(N+1-i-x) / (N+1-i-x)!``."""
    i = np.arange(1, params.n + 1)[:, None]
    u = np.broadcast_to(params.T - arrivals.times[None, :], (params.n, params.n))
    return _poisson_log_entries(u, np.broadcast_to(params.N + 1 - i - params.x, u.shape))


def log_km_start_to_arrivals(
    params: ModelParams, arrivals: ArrivalTimes, method: str = "closed"
) -> LogValue:
    """Probability that bus ``i`` sits at ``x - 1`` at time ``t_i``, no intersection.

    ``method="closed"`` uses the Vandermonde reduction
    ``exp(-sum t) prod t_j^(x-1) prod_{i<j}(t_j - t_i) / prod (x+i-2)!``;
    ``method="determinant"`` factorises the ``n x n`` matrix directly.
    """
    arrivals.check(params)
    if method == "determinant":
        return log_det(km_start_log_matrix(params, arrivals))
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    t = arrivals.times
    vdm = log_vandermonde(t)
    if vdm.sign == 0:
        return LogValue.zero()
    i = np.arange(1, params.n + 1)
    logmag = -t.sum() + _log_pow(t, params.x - 1).sum() - log_factorial(params.x + i - 2).sum()
    if np.isneginf(logmag):
        return LogValue.zero()
    return LogValue(float(logmag), 1) * vdm


def log_km_arrivals_to_end(
    params: ModelParams, arrivals: ArrivalTimes, method: str = "closed"
) -> LogValue:
    """Probability that bus ``i`` goes from ``(t_i, x)`` to ``(T, N + 1 - i)``, no intersection.

    The bridge factor is the decaying ``exp(-(T - t_j))``.
    """
    arrivals.check(params)
    if method == "determinant":
        return log_det(km_end_log_matrix(params, arrivals))
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    t = arrivals.times
    vdm = log_vandermonde(t)
    if vdm.sign == 0:
        return LogValue.zero()
    u = params.T - t
    i = np.arange(1, params.n + 1)
    logmag = (
        -u.sum()
        + _log_pow(u, params.N - params.x + 1 - params.n).sum()
        - log_factorial(params.N + 1 - params.x - i).sum()
    )
    if np.isneginf(logmag):
        return LogValue.zero()
    return LogValue(float(logmag), 1) * vdm


def log_inverse_factorial_det_identity(N: int, n: int) -> float:
    """``log prod_i (N+i-1)!/(i-1)!``, the closed form of ``1/det(1/(N+i-j)!)``."""
    i = np.arange(1, n + 1)
    return float((log_factorial(N + i - 1) - log_factorial(i - 1)).sum())


def log_full_bridge_det(N: int, n: int, T: float, method: str = "closed") -> LogValue:
    """``det(exp(-T) T^(N+i-j) / (N+i-j)!)`` for any ``n, N >= 1``.

    The powers of ``T`` factor out of rows and columns, leaving
    ``exp(-nT) T^(nN) det(1/(N+i-j)!)``, and the last determinant has the
    product form of :func:`log_inverse_factorial_det_identity`. LU on the
    raw matrix (``method="determinant"``) is only trustworthy for small ``n``:
    the matrix is so ill-conditioned that at ``n=60, N=200`` the computed
    log-determinant is off by thousands.
    """
    if method == "determinant":
        i = np.arange(1, n + 1)[:, None]
        j = np.arange(1, n + 1)[None, :]
        return log_det(_poisson_log_entries(float(T), N + i - j))
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    log_t = _log_pow(np.float64(T), n * N)
    return LogValue(float(-n * T + log_t - log_inverse_factorial_det_identity(N, n)), 1)


def log_km_full_bridge(params: ModelParams, method: str = "closed") -> LogValue:
    """Probability that all buses reach their end levels without intersecting."""
    return log_full_bridge_det(params.N, params.n, params.T, method)


def log_jacobi_constant(params: ModelParams) -> float:
    """``log C_{N,n,x}``, the normaliser of the arrival density on ``[0, 1]^n``."""
    i = np.arange(1, params.n + 1)
    return float(
        log_inverse_factorial_det_identity(params.N, params.n)
        - (log_factorial(params.x + i - 2) + log_factorial(params.N - params.x + 1 - i)).sum()
    )


def _scaled(params: ModelParams, arrivals: ArrivalTimes) -> np.ndarray:
    arrivals.check(params)
    return arrivals.times / params.T


def log_arrival_density(params: ModelParams, arrivals: ArrivalTimes) -> float:
    """Log of the density in the scaled variables ``y~_j = t_j / T`` (``-inf`` on ties)."""
    y = _scaled(params, arrivals)
    vdm = log_vandermonde(y)
    if vdm.sign == 0:
        return -math.inf
    return float(
        log_jacobi_constant(params)
        + 2 * vdm.log_magnitude
        + _log_pow(y, params.x - 1).sum()
        + _log_pow(1 - y, params.N - params.x - (params.n - 1)).sum()
    )


def arrival_density(params: ModelParams, arrivals: ArrivalTimes) -> float:
    """Joint density of the ordered arrival times in ``y~ = t / T`` coordinates.

    This is ``T^n`` times the density in ``t``: the Jacobian of ``t -> t / T``
    is folded in here so that the result integrates to 1 over the ordered
    simplex of ``[0, 1]^n``.
    """
    return math.exp(log_arrival_density(params, arrivals))


def arrival_density_from_km(params: ModelParams, arrivals: ArrivalTimes, method: str = "closed") -> float:
    """Same density assembled as (start factor) x (end factor) / (full bridge) x ``T^n``."""
    num = log_km_start_to_arrivals(params, arrivals, method) * log_km_arrivals_to_end(
        params, arrivals, method
    )
    ratio = num / log_km_full_bridge(params)
    return ratio.value * params.T ** params.n


def position_log_pmf(params: ModelParams, t: float, config: PositionConfig) -> float:
    """Log of the Krawtchouk-ensemble probability of ``config`` at time ``t``."""
    if not 0 < t < params.T:
        raise ValueError(f"need 0 < t < T, got t={t}")
    if len(config) != params.n:
        raise ValueError(f"expected {params.n} positions, got {len(config)}")
    n, N = params.n, params.N
    K = N + n - 1
    y = config.shifted()
    if y.min() < 0 or y.max() > K:
        return -math.inf
    vdm = log_vandermonde(y)
    if vdm.sign == 0:
        return -math.inf
    p = params.fraction(t)
    i = np.arange(1, n + 1)
    log_binom = log_factorial(K) - log_factorial(y) - log_factorial(K - y)
    return float(
        -n * log_factorial(K)
        + (log_factorial(N + i - 1) - log_factorial(i - 1)).sum()
        - 0.5 * n * (n - 1) * math.log(p - p * p)
        + 2 * vdm.log_magnitude
        + (log_binom + y * math.log(p) + (K - y) * math.log1p(-p)).sum()
    )


def position_pmf(params: ModelParams, t: float, config: PositionConfig) -> float:
    """Probability that the buses occupy ``config`` at time ``t``."""
    return math.exp(position_log_pmf(params, t, config))


def position_pmf_ratio(params: ModelParams, t: float, config: PositionConfig) -> float:
    """The same probability as a ratio of three Karlin-McGregor determinants."""
    if len(config) != params.n:
        raise ValueError(f"expected {params.n} positions, got {len(config)}")
    n = params.n
    x = np.array(config.positions)[None, :]
    i = np.arange(1, n + 1)[:, None]
    start = log_det(_poisson_log_entries(float(t), x + i - 1))
    end = log_det(_poisson_log_entries(float(params.T - t), params.N + 1 - i - x))
    return ((start * end) / log_km_full_bridge(params)).value


def enumerate_position_configs(params: ModelParams):
    """All admissible ``PositionConfig``s (shifted coordinates in ``{0..N+n-1}``)."""
    K = params.N + params.n - 1
    for ys in combinations(range(K, -1, -1), params.n):
        yield PositionConfig.from_shifted(ys, params.n)
