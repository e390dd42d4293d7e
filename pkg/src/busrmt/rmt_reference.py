"""GUE bulk reference statistics built on the sine kernel.

The gap probability ``E(s) = det(I - K_sine)`` on an interval of length ``s``
is computed with a symmetrised Nystrom discretisation on Gauss-Legendre
nodes, which converges exponentially in the node count. The Gaudin spacing
density is its second derivative in ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.5772156649015329


class NumericalFailure(ArithmeticError):
    pass


@dataclass(frozen=True)
class NystromGrid:
    """Gauss-Legendre rule with ``m`` nodes on ``[lo, hi]``."""

    m: int = 40
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.m < 4:
            raise ValueError("need at least 4 Nystrom nodes")

    def nodes(self):
        x, w = np.polynomial.legendre.leggauss(self.m)
        half = 0.5 * (self.hi - self.lo)
        return self.lo + half * (x + 1.0), half * w

    def on(self, lo: float, hi: float) -> "NystromGrid":
        return NystromGrid(self.m, lo, hi)


@dataclass
class ReferenceCurve:
    s: np.ndarray
    values: np.ndarray
    method: str

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.s.shape != self.values.shape:
            raise ValueError("abscissa and values differ in length")
        if np.any(np.diff(self.s) <= 0):
            raise ValueError("abscissa must be strictly increasing")


def sine_kernel(xi, rho):
    """``sin(pi (xi - rho)) / (pi (xi - rho))``, equal to 1 on the diagonal."""
    return np.sinc(np.subtract(xi, rho))


def fredholm_det_sine(s: float, grid: NystromGrid | int = 40) -> float:
    """``det(I - K_sine)`` on ``L^2(-s, s)``, i.e. on an interval of length ``2 s``."""
    return gap_probability_sine(2.0 * s, grid)


def gap_probability_sine(length: float, grid: NystromGrid | int = 40) -> float:
    """Probability that a unit-density sine process has no point in an interval of ``length``."""
    if length < 0:
        raise ValueError("interval length must be non-negative")
    if length == 0:
        return 1.0
    if isinstance(grid, int):
        grid = NystromGrid(grid)
    x, w = grid.on(0.0, float(length)).nodes()
    sw = np.sqrt(w)
    mat = np.eye(x.size) - sw[:, None] * sine_kernel(x[:, None], x[None, :]) * sw[None, :]
    val = float(np.linalg.det(mat))
    if not math.isfinite(val):
        raise NumericalFailure(f"non-finite Fredholm determinant at length {length}")
    return val


def _richardson(f, s, h, order):
    if order == 2:
        d = lambda hh: (f(s + hh) - 2 * f(s) + f(s - hh)) / (hh * hh)
    else:
        d = lambda hh: (f(s + hh) - f(s - hh)) / (2 * hh)
    return (4 * d(h / 2) - d(h)) / 3


# p(s) = (pi^2/3) s^2 - (2 pi^4/45) s^4 + (pi^6/315) s^6 near s = 0
_SMALL_S = (math.pi**2 / 3, -2 * math.pi**4 / 45, math.pi**6 / 315)


def gaudin_density(s, h: float = 1e-3, m: int = 40):
    """GUE nearest-neighbour spacing density ``E''(s)``.

    Central second differences of the Nystrom determinant with one Richardson
    step. Below ``s = 2 h`` the stencil would cross ``s = 0``, so the leading
    terms of the small-``s`` expansion are used instead.
    """
    if h < 1e-5:
        raise NumericalFailure(f"step h={h} is below the roundoff floor of the determinant")
    f = lambda x: gap_probability_sine(x, m)

    def one(x):
        if x < 0:
            raise ValueError("spacing must be non-negative")
        if x < 2 * h:
            return sum(c * x ** (2 * k + 2) for k, c in enumerate(_SMALL_S))
        return _richardson(f, x, h, 2)

    arr = np.asarray(s, dtype=float)
    out = np.array([one(x) for x in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def gaudin_cdf(s, h: float = 1e-3, m: int = 40):
    """``P(spacing <= s) = 1 + E'(s)``."""

    def one(x):
        if x <= 0:
            return 0.0
        if x < 2 * h:
            return sum(c * x ** (2 * k + 3) / (2 * k + 3) for k, c in enumerate(_SMALL_S))
        return 1.0 + _richardson(lambda y: gap_probability_sine(y, m), x, h, 1)

    arr = np.asarray(s, dtype=float)
    out = np.array([one(x) for x in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def wigner_surmise(s):
    """Unitary-class surmise ``(32 / pi^2) s^2 exp(-4 s^2 / pi)``."""
    s = np.asarray(s, dtype=float)
    return 32 / math.pi**2 * s**2 * np.exp(-4 * s**2 / math.pi)


def wigner_surmise_cdf(s):
    from scipy.special import erf

    s = np.asarray(s, dtype=float)
    c = 2 / math.sqrt(math.pi)
    return erf(c * s) - (2 * c / math.sqrt(math.pi)) * s * np.exp(-(c * s) ** 2)


def gue_number_variance(s, nodes_per_unit: int = 24, min_nodes: int = 64):
    """Variance of the point count of the sine process in an interval of length ``s``.

    ``s - int int_{[0,s]^2} K(x, y)^2 dx dy``, reduced to
    ``s - 2 int_0^s (s - u) sinc(u)^2 du`` and integrated by Gauss-Legendre.
    """

    def one(x):
        if x < 0:
            raise ValueError("interval length must be non-negative")
        if x == 0:
            return 0.0
        m = max(min_nodes, int(nodes_per_unit * x) + min_nodes)
        u, w = np.polynomial.legendre.leggauss(m)
        u = 0.5 * x * (u + 1.0)
        return x - x * np.sum(w * (x - u) * np.sinc(u) ** 2)

    arr = np.asarray(s, dtype=float)
    out = np.array([one(x) for x in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def gue_number_variance_asymptote(s):
    """``(log(2 pi s) + gamma + 1) / pi^2``."""
    s = np.asarray(s, dtype=float)
    return (np.log(2 * math.pi * s) + EULER_GAMMA + 1) / math.pi**2


def poisson_spacing_cdf(s):
    return 1.0 - np.exp(-np.asarray(s, dtype=float))


def reference_curves(s_grid) -> list[ReferenceCurve]:
    """All tabulated references on a common grid (``s > 0``)."""
    s = np.asarray(s_grid, dtype=float)
    return [
        ReferenceCurve(s, gaudin_density(s), "gaudin"),
        ReferenceCurve(s, wigner_surmise(s), "surmise"),
        ReferenceCurve(s, gue_number_variance(s), "variance"),
        ReferenceCurve(s, gue_number_variance_asymptote(s), "variance-asymptotic"),
    ]
