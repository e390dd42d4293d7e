"""Equilibrium measure of the arrival-time ensemble and unfolding maps.

For ``n / N -> nu`` and ``(x - 1) / N -> eta`` the arrival points (mapped to
``[-1, 1]``) fill an interval ``[a, b]`` with density proportional to
``sqrt((y - a)(b - y)) / (1 - y^2)``. The closed-form expression

    eta * sqrt((y - a)(b - y)) / (pi * sqrt((1 + a)(1 + b)) * (1 - y^2))

carries total mass ``nu`` (it is the density per route length ``N``), so the
probability density used here divides it by ``nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .orthopoly import JacobiBasis, gauss_legendre
from .stats import UnfoldedSequence


class EquilibriumDomainError(ValueError):
    pass


def _check_nu_eta(nu, eta):
    if not (nu > 0 and eta > 0 and nu + eta < 1):
        raise EquilibriumDomainError(f"need nu, eta > 0 and nu + eta < 1, got nu={nu}, eta={eta}")


def endpoints_from_relations(nu: float, eta: float) -> tuple[float, float]:
    """Solve the two endpoint relations in closed form.

    With ``A = sqrt((1+a)(1+b))`` and ``B = sqrt((1-a)(1-b))`` the relations
    read ``eta / A = (1 - eta - nu) / B`` and ``1 + nu = eta / A + (1 - eta - nu) / B``,
    hence ``A = 2 eta / (1 + nu)`` and ``B = 2 (1 - eta - nu) / (1 + nu)``;
    ``a + b`` and ``a b`` follow.
    """
    _check_nu_eta(nu, eta)
    A = 2 * eta / (1 + nu)
    B = 2 * (1 - eta - nu) / (1 + nu)
    s = 0.5 * (A * A - B * B)
    prod = 0.5 * (A * A + B * B) - 1
    disc = s * s - 4 * prod
    if disc <= 0:
        raise EquilibriumDomainError(f"no real support for nu={nu}, eta={eta}")
    r = math.sqrt(disc)
    a, b = 0.5 * (s - r), 0.5 * (s + r)
    if not -1 < a < b < 1:
        raise EquilibriumDomainError(f"support ({a}, {b}) leaves (-1, 1)")
    return a, b


def symmetric_endpoints(nu: float) -> tuple[float, float]:
    """``b = -a = sqrt(1 - ((1 - nu) / (1 + nu))^2)``, valid when ``eta = (1 - nu) / 2``."""
    b = math.sqrt(1 - ((1 - nu) / (1 + nu)) ** 2)
    return -b, b


def _raw_density(y, nu, eta, a, b):
    y = np.asarray(y, dtype=float)
    inside = (y > a) & (y < b)
    yy = np.where(inside, y, 0.5 * (a + b))
    val = eta * np.sqrt((yy - a) * (b - yy)) / (
        math.pi * math.sqrt((1 + a) * (1 + b)) * (1 - yy * yy)
    )
    return np.where(inside, val, 0.0)


def _mass(nu, eta, a, b, m=200):
    # y = a + (b - a) sin^2(theta) removes the square-root edges
    theta, w = gauss_legendre(m, 0.0, math.pi / 2)
    y = a + (b - a) * np.sin(theta) ** 2
    jac = (b - a) * 2 * np.sin(theta) * np.cos(theta)
    return float(np.sum(w * jac * _raw_density(y, nu, eta, a, b)))


def _upper_from_lower(a, nu, eta):
    # eta^2 (1-a)(1-b) = (1-eta-nu)^2 (1+a)(1+b) is linear in b
    e2 = eta * eta * (1 - a)
    k2 = (1 - eta - nu) ** 2 * (1 + a)
    return (e2 - k2) / (e2 + k2)


def solve_endpoints(nu: float, eta: float, tol: float = 1e-15) -> tuple[float, float]:
    """Support ``(a, b)`` from the no-pole condition and unit mass.

    The no-pole condition at ``y = +-1``, ``eta * B = (1 - eta - nu) * A``,
    fixes ``b`` as a function of ``a``. The remaining condition, unit mass of
    the particle density (computed by quadrature), is solved for ``a`` by a
    bracketing search: the mass diverges as ``a -> -1`` and vanishes when the
    support collapses. The result can be checked against
    :func:`endpoints_from_relations`.
    """
    _check_nu_eta(nu, eta)
    collapse = optimize.brentq(lambda a: _upper_from_lower(a, nu, eta) - a, -1.0, 1.0, xtol=tol)

    def excess(a):
        b = _upper_from_lower(a, nu, eta)
        if b <= a:
            return -1.0
        return _mass(nu, eta, a, b) / nu - 1.0

    lo = -1.0 + 1e-14
    if excess(lo) <= 0:
        raise EquilibriumDomainError(f"no admissible support for nu={nu}, eta={eta}")
    a = optimize.brentq(excess, lo, collapse, xtol=tol, rtol=4 * np.finfo(float).eps)
    b = _upper_from_lower(a, nu, eta)
    if not -1 < a < b < 1:
        raise EquilibriumDomainError(f"support ({a}, {b}) leaves (-1, 1)")
    return float(a), float(b)


@dataclass(frozen=True)
class EquilibriumData:
    nu: float
    eta: float
    a: float
    b: float

    @classmethod
    def solve(cls, nu: float, eta: float) -> "EquilibriumData":
        a, b = solve_endpoints(nu, eta)
        return cls(nu, eta, a, b)

    @classmethod
    def from_params(cls, params) -> "EquilibriumData":
        return cls.solve(params.n / params.N, (params.x - 1) / params.N)

    def density(self, y):
        """Unit-mass equilibrium density on ``[a, b]``; zero outside."""
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(y) >= 1):
            raise ValueError("the equilibrium density is defined for |y| < 1")
        out = _raw_density(y, self.nu, self.eta, self.a, self.b) / self.nu
        return out[()] if out.ndim == 0 else out

    def route_density(self, y):
        """The unnormalised form with total mass ``nu``."""
        return self.nu * self.density(y)

    def mass(self) -> float:
        return _mass(self.nu, self.eta, self.a, self.b) / self.nu

    def cdf(self, y, m: int = 200):
        """``int_a^y density``, by Gauss-Legendre after the ``sin^2`` edge substitution."""
        y = np.clip(np.asarray(y, dtype=float), self.a, self.b)
        # theta_max solves a + (b - a) sin^2 = y
        top = np.arcsin(np.sqrt((y - self.a) / (self.b - self.a)))
        x0, w0 = np.polynomial.legendre.leggauss(m)
        theta = 0.5 * top[..., None] * (x0 + 1.0)
        yy = self.a + (self.b - self.a) * np.sin(theta) ** 2
        jac = (self.b - self.a) * 2 * np.sin(theta) * np.cos(theta)
        vals = _raw_density(yy, self.nu, self.eta, self.a, self.b) / self.nu
        return 0.5 * top * np.sum(w0 * jac * vals, axis=-1)


def density_psi(eq: EquilibriumData, y):
    return eq.density(y)


UNFOLD_MODES = ("exact", "equilibrium")


def unfold(
    points,
    mode: str = "exact",
    *,
    params=None,
    basis: JacobiBasis | None = None,
    eq: EquilibriumData | None = None,
    replicate: int = 0,
) -> UnfoldedSequence:
    """Map sorted points of ``[-1, 1]`` to a scale with unit mean spacing.

    ``exact`` integrates the finite-``n`` one-point density ``K(y, y)`` from
    -1; ``equilibrium`` uses ``n`` times the equilibrium CDF from ``a``.
    """
    site = params.x if params is not None else None
    y = np.asarray(points, dtype=float)
    if np.any(np.diff(y) < 0):
        raise ValueError("points must be sorted")
    if mode == "exact":
        if basis is None:
            if params is None:
                raise ValueError("exact unfolding needs params or a basis")
            basis = JacobiBasis.from_params(params)
        return UnfoldedSequence(basis.cumulative_count(y), replicate, site)
    if mode == "equilibrium":
        if eq is None:
            if params is None:
                raise ValueError("equilibrium unfolding needs params or EquilibriumData")
            eq = EquilibriumData.from_params(params)
        n = params.n if params is not None else (basis.n if basis is not None else None)
        if n is None:
            raise ValueError("equilibrium unfolding needs the particle count")
        return UnfoldedSequence(n * eq.cdf(y), replicate, site)
    raise ValueError(f"unknown unfolding mode {mode!r}; choose from {UNFOLD_MODES}")
