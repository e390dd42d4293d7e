"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the report lines are written
straight to the terminal even when output capture is on.
"""

import math
import time
from itertools import combinations

import numpy as np
import pytest

from busrmt.circle import CircleParams, circle_rejection_stats, no_intersection_probability, qt_table
from busrmt.cli import main as cli_main
from busrmt.equilibrium import EquilibriumData, solve_endpoints
from busrmt.experiment import make_config, run_experiment
from busrmt.logspace import log_factorial
from busrmt.model_line import (
    ArrivalTimes,
    ModelParams,
    arrival_density,
    arrival_density_from_km,
    enumerate_position_configs,
    log_km_full_bridge,
    position_pmf,
)
from busrmt.multitime import ContourSpec, TimeGrid, correlation_from_kernel, extended_kernel_matrix
from busrmt.orthopoly import JacobiBasis, KrawtchoukBasis, gauss_legendre
from busrmt.rmt_reference import (
    fredholm_det_sine,
    gaudin_density,
    gue_number_variance,
    gue_number_variance_asymptote,
    wigner_surmise,
)
from busrmt.sampler import Seed, acceptance_count, arrival_times_batch, sample_bridges, sample_krawtchouk_dpp


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_01_km_vs_monte_carlo(report):
    start = time.perf_counter()
    params = ModelParams(N=4, n=2, x=1, T=1.0)
    log_single = -1.0 - float(log_factorial(4))
    predicted = math.exp(log_km_full_bridge(params).log_magnitude - 2 * log_single)
    m = 10**6
    rate = acceptance_count(params, Seed(2024, 1), m) / m
    se = math.sqrt(predicted * (1 - predicted) / m)
    elapsed = time.perf_counter() - start
    ok = abs(rate - predicted) < 3 * se and elapsed < 120
    report(1, "KM vs Monte Carlo", ok, f"predicted={predicted:.6f} observed={rate:.6f} |z|={abs(rate - predicted) / se:.2f} time={elapsed:.1f}s")


def test_criterion_02_ratio_identity(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for n, N, x in ((1, 5, 2), (2, 6, 3), (3, 9, 4)):
        params = ModelParams(N, n, x)
        for _ in range(100):
            a = ArrivalTimes(np.sort(rng.uniform(0, 1, n)))
            closed = arrival_density(params, a)
            worst = max(worst, abs(arrival_density_from_km(params, a, "determinant") / closed - 1))
    report(2, "density equals assembled KM ratio", worst < 1e-10, f"max relative error={worst:.2e}")


def test_criterion_03_gap_probability_oracle(report):
    params = ModelParams(12, 3, 6)
    basis = JacobiBasis.from_params(params)
    jumps, _ = sample_bridges(params, Seed(2024, 3), 100_000)
    y = 2 * arrival_times_batch(jumps, params.x) / params.T - 1
    parts, ok = [], True
    for h in (0.1, 0.2):
        exact = basis.gap_probability(-h, h)
        freq = float(np.mean(~np.any((y > -h) & (y < h), axis=1)))
        se = math.sqrt(exact * (1 - exact) / y.shape[0])
        ok &= abs(freq - exact) < 3 * se
        parts.append(f"(-{h},{h}) exact={exact:.5f} empirical={freq:.5f} |z|={abs(freq - exact) / se:.2f}")
    report(3, "Gram-determinant gap probability", ok, "; ".join(parts))


def test_criterion_04_krawtchouk_exactness(report):
    worst = 0.0
    for K in range(1, 11):
        for n in range(1, K + 1):
            N = K - n + 1
            if n >= N:
                continue
            params = ModelParams(N, n, 1)
            for t in (0.2, 0.5, 0.85):
                total = sum(position_pmf(params, t, c) for c in enumerate_position_configs(params))
                worst = max(worst, abs(total - 1))
    params, t = ModelParams(5, 3, 1), 0.4
    table = {tuple(c.positions): position_pmf(params, t, c) for c in enumerate_position_configs(params)}
    counts = dict.fromkeys(table, 0)
    draws = 100_000
    for r in range(draws):
        counts[tuple(sample_krawtchouk_dpp(params, t, Seed(2024, r)).positions)] += 1
    tv = 0.5 * sum(abs(counts[k] / draws - p) for k, p in table.items())
    report(4, "Krawtchouk law and DPP sampler", worst < 1e-12 and tv < 0.02, f"max |sum-1|={worst:.1e} TV={tv:.4f}")


def test_criterion_05_fredholm_numerics(report):
    s_grid = np.arange(0.1, 3.0001, 0.1)
    drift = max(abs(fredholm_det_sine(s, 40) - fredholm_det_sine(s, 80)) for s in s_grid)
    nodes, w = gauss_legendre(80, 0.0, 6.0)
    p = gaudin_density(nodes)
    mass, mean = float(np.sum(w * p)), float(np.sum(w * nodes * p))
    ok = drift < 1e-10 and abs(mass - 1) < 1e-3 and abs(mean - 1) < 1e-3
    report(5, "Fredholm stability and Gaudin moments", ok, f"m=40 vs 80 drift={drift:.1e} mass={mass:.8f} mean={mean:.8f}")


def test_criterion_06_surmise_proximity(report):
    s = np.linspace(0.0, 3.0, 601)
    sup = float(np.max(np.abs(gaudin_density(s) - wigner_surmise(s))))
    report(6, "Gaudin vs Wigner surmise", sup <= 0.02, f"sup difference={sup:.5f}")


def test_criterion_07_number_variance_asymptote(report):
    s = np.linspace(5.0, 10.0, 51)
    gap = float(np.max(np.abs(gue_number_variance(s) - gue_number_variance_asymptote(s))))
    report(7, "number variance asymptote", gap < 0.01, f"max |H - asymptote| on [5,10]={gap:.2e}")


def test_criterion_08_central_claim(report, tmp_path):
    start = time.perf_counter()
    config = make_config({"out_dir": str(tmp_path / "reproduction")}, preset="reproduction")
    bundle = run_experiment(config)
    elapsed = time.perf_counter() - start
    ks = bundle.summary["spacing_ks_gaudin"]
    rel = bundle.summary["number_variance_max_rel_error"]
    ok = bundle.passed and ks < 0.02 and rel < 0.10 and elapsed < 600
    report(
        8,
        "simulated buses reproduce GUE statistics",
        ok,
        f"n=60 N=200 x=100 replicates={config.replicates} KS={ks:.4f} max NV rel error (s<=3)={rel:.3f} time={elapsed:.0f}s",
    )


def test_criterion_09_equilibrium_measure(report):
    a, b = solve_endpoints(1 / 3, 1 / 3)
    sym = max(abs(b - math.sqrt(3) / 2), abs(a + math.sqrt(3) / 2))
    worst = 0.0
    for nu in (0.1, 0.25, 0.4, 0.55, 0.7, 0.85):
        for eta in (0.02, 0.1, 0.2, 0.35, 0.5):
            if nu + eta < 0.98:
                worst = max(worst, abs(EquilibriumData.solve(nu, eta).mass() - 1))
    report(9, "equilibrium endpoints and mass", sym < 1e-10 and worst < 1e-8, f"symmetric error={sym:.1e} max |mass-1|={worst:.1e}")


def test_criterion_10_extended_kernel(report):
    params = ModelParams(3, 2, 1)
    size = params.N + params.n
    worst, drift = 0.0, 0.0
    for t in (0.2, 0.5, 0.8):
        grid = TimeGrid([t])
        K = extended_kernel_matrix(params, grid, 0, 0, ContourSpec.default(t, t, 512))
        K2 = extended_kernel_matrix(params, grid, 0, 0, ContourSpec.default(t, t, 1024))
        drift = max(drift, float(np.abs(K - K2).max()))
        kb = KrawtchoukBasis.from_params(params, t)
        blocks = {(0, 0): K}
        for y in range(size):
            worst = max(worst, abs(K[y, y] - kb.one_point()[y]))
        for y, y2 in combinations(range(size), 2):
            worst = max(worst, abs(correlation_from_kernel(blocks, [(0, y), (0, y2)]) - kb.correlation([y, y2])))
    ok = worst < 1e-6 and drift < 1e-10
    report(10, "extended kernel vs Krawtchouk CD kernel", ok, f"max correlation error={worst:.1e} resolution drift={drift:.1e}")


def test_criterion_11_circle(report):
    params = CircleParams(6, 2)
    m = 10**6
    accepted, _, _ = circle_rejection_stats(params, 0.5, Seed(2024, 11), m)
    exact = no_intersection_probability(params, 0.5)
    se = math.sqrt(exact * (1 - exact) / m)
    z = abs(accepted / m - exact) / se
    worst = 0.0
    for M in range(2, 9):
        for k in range(1, min(3, M - 1) + 1):
            for t in (0.1, 0.5, 0.9):
                worst = max(worst, abs(sum(q for _, q in qt_table(CircleParams(M, k), t)) - 1))
    ok = z < 3 and worst < 1e-8
    report(11, "circle determinant and Q_t", ok, f"exact={exact:.6f} observed={accepted / m:.6f} |z|={z:.2f} max |sum Q_t - 1|={worst:.1e}")


STOCHASTIC_COMMANDS = [
    ["simulate-line", "--N", "12", "--n", "3", "--x", "6", "--replicates", "20", "--dump-trajectories"],
    ["simulate-line", "--N", "200", "--n", "60", "--x", "100", "--replicates", "5"],
    ["spacing", "--N", "60", "--n", "20", "--x", "20", "--replicates", "10"],
    ["number-variance", "--N", "60", "--n", "20", "--x", "20", "--replicates", "10", "--s-grid", "0.5,1,2"],
    ["simulate-circle", "--M", "6", "--k", "2", "--t", "0.5", "--T", "1.0", "--replicates", "200"],
    ["run", "--N", "60", "--n", "20", "--x", "20", "--replicates", "10", "--s-grid", "0.5,1"],
]


def test_criterion_12_determinism(report, tmp_path, capsys):
    mismatched, compared = [], 0
    for i, argv in enumerate(STOCHASTIC_COMMANDS):
        bodies = []
        for rerun in range(2):
            out = tmp_path / f"cmd{i}_{rerun}"
            assert cli_main(argv + ["--seed", "2024", "--out-dir", str(out)]) == 0
            bodies.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        capsys.readouterr()
        compared += len(bodies[0])
        if not bodies[0] or bodies[0] != bodies[1]:
            mismatched.append(argv[0])
    report(12, "byte-identical CSV on rerun", not mismatched, f"{compared} CSV files over {len(STOCHASTIC_COMMANDS)} commands, mismatches={mismatched or 'none'}")
