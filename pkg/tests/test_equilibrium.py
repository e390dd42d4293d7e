import math

import numpy as np
import pytest
from scipy import integrate

from busrmt.equilibrium import (
    EquilibriumData,
    EquilibriumDomainError,
    density_psi,
    endpoints_from_relations,
    solve_endpoints,
    symmetric_endpoints,
    unfold,
)
from busrmt.model_line import ModelParams
from busrmt.orthopoly import JacobiBasis

SWEEP = [(nu, eta) for nu in (0.1, 0.3, 0.5, 0.7) for eta in (0.05, 0.2, 0.4) if nu + eta < 0.95]


def test_symmetric_case_closed_form():
    a, b = solve_endpoints(1 / 3, 1 / 3)
    assert b == pytest.approx(math.sqrt(3) / 2, abs=1e-10)
    assert a == pytest.approx(-math.sqrt(3) / 2, abs=1e-10)
    for nu in (0.1, 0.4, 0.8):
        sa, sb = symmetric_endpoints(nu)
        a, b = solve_endpoints(nu, (1 - nu) / 2)
        assert (a, b) == pytest.approx((sa, sb), abs=1e-10)


@pytest.mark.parametrize("nu,eta", SWEEP)
def test_solver_agrees_with_endpoint_relations(nu, eta):
    assert solve_endpoints(nu, eta) == pytest.approx(endpoints_from_relations(nu, eta), abs=1e-10)


@pytest.mark.parametrize("nu,eta", SWEEP + [(0.5, 0.25)])
def test_unit_mass(nu, eta):
    eq = EquilibriumData.solve(nu, eta)
    assert eq.mass() == pytest.approx(1.0, abs=1e-8)
    val, _ = integrate.quad(eq.density, eq.a, eq.b, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_edges_vanish_and_nonnegative():
    eq = EquilibriumData.solve(0.5, 0.25)
    assert density_psi(eq, eq.a) == 0.0 and density_psi(eq, eq.b) == 0.0
    y = np.linspace(-0.999, 0.999, 2001)
    assert np.all(density_psi(eq, y) >= 0)
    # square-root vanishing: psi(a + d) / sqrt(d) tends to a constant
    d = np.array([1e-6, 1e-8])
    r = density_psi(eq, eq.a + d) / np.sqrt(d)
    assert r[0] == pytest.approx(r[1], rel=1e-3)


def test_symmetric_density_at_centre():
    nu = 1 / 3
    eq = EquilibriumData.solve(nu, nu)
    b = eq.b
    printed = nu * b / (math.pi * math.sqrt(1 - b * b))
    assert density_psi(eq, 0.0) == pytest.approx(printed / nu, rel=1e-12)


def test_domain_errors():
    with pytest.raises(EquilibriumDomainError):
        solve_endpoints(0.6, 0.5)
    with pytest.raises(ValueError):
        EquilibriumData.solve(0.3, 0.3).density(1.0)


def test_cdf_matches_quadrature():
    eq = EquilibriumData.solve(0.3, 0.2)
    y = eq.a + 0.37 * (eq.b - eq.a)
    val, _ = integrate.quad(eq.density, eq.a, y)
    assert eq.cdf(y) == pytest.approx(val, abs=1e-10)
    assert eq.cdf(eq.b) == pytest.approx(1.0, abs=1e-10)


def test_unfold_exact_basics():
    params = ModelParams(60, 10, 20)
    assert unfold([-1.0], params=params).points[0] == pytest.approx(0.0, abs=1e-14)
    y = np.linspace(-0.9, 0.9, 10)
    u = unfold(y, params=params)
    assert np.all(np.diff(u.points) > 0) and u.site == 20
    assert unfold([-1.0, 1.0], params=params).points[-1] == pytest.approx(10.0, abs=1e-9)


def test_unfold_equilibrium_left_edge():
    params = ModelParams(60, 10, 20)
    eq = EquilibriumData.from_params(params)
    assert unfold([eq.a], "equilibrium", params=params).points[0] == 0.0


def test_unfold_modes_agree_in_bulk():
    params = ModelParams(300, 100, 101)
    eq = EquilibriumData.from_params(params)
    basis = JacobiBasis.from_params(params)
    q = eq.a + (eq.b - eq.a) * np.array([0.25, 0.5, 0.75])
    exact = unfold(q, "exact", basis=basis).points
    approx = unfold(q, "equilibrium", params=params, eq=eq).points
    assert np.all(np.abs(exact / approx - 1) < 0.05)


def test_unknown_mode():
    with pytest.raises(ValueError):
        unfold([0.0], "nope", params=ModelParams(5, 2, 2))
