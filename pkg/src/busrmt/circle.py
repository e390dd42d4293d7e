"""Buses on the discrete circle ``Z_M``.

A single bus is a rate-1 Poisson process taken mod ``M``, so its transition
probability sums the Poisson mass over all windings. ``k`` buses conditioned
never to share a site keep their cyclic order, and the probability of each
occupied set is a ``k x k`` determinant of single-bus transitions.

For even ``k`` the bare determinant counts configurations whose labels were
rotated by an odd number of places with a minus sign. Weighting the winding
number ``l`` of every path by ``(-1)^(l (k - 1))`` makes every surviving term
positive, and the determinant is then exactly the probability that the
occupied set is the target set. That weighting is the default here
(``parity="auto"``); ``parity="none"`` gives the bare determinant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .sampler import SamplingError, as_rng


@dataclass(frozen=True)
class CircleParams:
    M: int
    k: int
    T: float = 1.0
    theta0: tuple | None = None

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("need M >= 2")
        if not 1 <= self.k < self.M:
            raise ValueError(f"need 1 <= k < M, got k={self.k}, M={self.M}")
        if not self.T > 0:
            raise ValueError("need T > 0")
        theta = tuple(range(self.k)) if self.theta0 is None else tuple(int(v) for v in self.theta0)
        if len(theta) != self.k:
            raise ValueError(f"need {self.k} initial positions")
        if any(b <= a for a, b in zip(theta, theta[1:])) or theta[0] < 0 or theta[-1] >= self.M:
            raise ValueError("initial positions must be strictly increasing in 0..M-1")
        object.__setattr__(self, "theta0", theta)


@dataclass(frozen=True)
class CyclicConfig:
    """Bus ``i`` sits at ``labels[i]``; labels are a rotation of an increasing tuple."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))

    def check(self, M: int, k: int | None = None) -> None:
        lab = self.labels
        if k is not None and len(lab) != k:
            raise ValueError(f"expected {k} positions, got {len(lab)}")
        if len(set(lab)) != len(lab):
            raise ValueError("positions must be distinct")
        if any(not 0 <= v < M for v in lab):
            raise ValueError(f"positions must lie in 0..{M - 1}")
        descents = sum(1 for a, b in zip(lab, lab[1:]) if b < a)
        if descents > 1 or (descents == 1 and lab[-1] > lab[0]):
            raise ValueError(f"{lab} is not a cyclic rotation of an increasing tuple")

    def canonical(self) -> tuple:
        return tuple(sorted(self.labels))


def wrapped_poisson(t: float, theta: int, theta2: int, M: int, parity: int = 1) -> float:
    """``exp(-t) sum_l s^l t^r / r!`` over ``r = theta2 - theta + l M >= 0``.

    ``parity`` is the sign ``s`` attached to each winding (``+1`` for the plain
    transition probability). Terms are unimodal in ``l``; summation stops once
    they decrease and fall below ``1e-16`` of the running sum.
    """
    if t < 0:
        raise ValueError("need t >= 0")
    d = theta2 - theta
    l = -(d // M)  # smallest l with d + l M >= 0
    r = d + l * M
    if t == 0:
        return 1.0 if r == 0 else 0.0
    total = 0.0
    prev = -math.inf
    lt = math.log(t)
    while True:
        logterm = r * lt - math.lgamma(r + 1) - t
        term = math.exp(logterm)
        total += term * (parity**l)
        if logterm < prev and term < 1e-16 * abs(total):
            break
        if term == 0.0 and logterm < prev:
            break
        prev = logterm
        r += M
        l += 1
    return total


def _parity(k: int, parity: str) -> int:
    if parity == "auto":
        return -1 if k % 2 == 0 else 1
    if parity == "none":
        return 1
    raise ValueError(f"parity must be 'auto' or 'none', got {parity!r}")


def transition_matrix(t: float, sources, targets, M: int, sign: int = 1) -> np.ndarray:
    return np.array([[wrapped_poisson(t, a, b, M, sign) for b in targets] for a in sources])


def circle_km(params: CircleParams, target: CyclicConfig, t: float, parity: str = "auto") -> float:
    """Probability that the buses occupy the sites of ``target`` at time ``t`` without meeting.

    The target's labelling is only validated; the determinant is taken with the
    target sites in increasing order, because labels cannot be told apart by
    the formula.
    """
    target = target if isinstance(target, CyclicConfig) else CyclicConfig(target)
    target.check(params.M, params.k)
    sign = _parity(params.k, parity)
    mat = transition_matrix(t, params.theta0, target.canonical(), params.M, sign)
    return float(np.linalg.det(mat))


def enumerate_sets(M: int, k: int):
    """All ``k``-subsets of ``Z_M`` as increasing tuples (one labelling per set)."""
    return list(combinations(range(M), k))


def no_intersection_probability(params: CircleParams, t: float, parity: str = "auto") -> float:
    return sum(circle_km(params, CyclicConfig(s), t, parity) for s in enumerate_sets(params.M, params.k))


def circle_conditioned_qt(
    params: CircleParams, intermediate: CyclicConfig, t: float, T: float | None = None, parity: str = "auto"
) -> float:
    """Law at time ``t`` of buses that start at ``theta0`` and are back there at ``T``."""
    T = params.T if T is None else T
    if not 0 < t < T:
        raise ValueError(f"need 0 < t < T, got t={t}, T={T}")
    intermediate = intermediate if isinstance(intermediate, CyclicConfig) else CyclicConfig(intermediate)
    intermediate.check(params.M, params.k)
    sign = _parity(params.k, parity)
    theta = params.theta0
    mid = intermediate.canonical()
    denom = np.linalg.det(transition_matrix(T, theta, theta, params.M, sign))
    if denom <= 0:
        raise ArithmeticError(f"degenerate bridge: det p_T(theta, theta) = {denom}")
    up = np.linalg.det(transition_matrix(t, theta, mid, params.M, sign))
    down = np.linalg.det(transition_matrix(T - t, mid, theta, params.M, sign))
    return float(up * down / denom)


def qt_table(params: CircleParams, t: float, T: float | None = None, parity: str = "auto"):
    """``[(set, Q_t(set)), ...]`` over every ``k``-subset of ``Z_M``."""
    return [
        (s, circle_conditioned_qt(params, CyclicConfig(s), t, T, parity))
        for s in enumerate_sets(params.M, params.k)
    ]


def _no_catch(behind: np.ndarray, ahead: np.ndarray, gap: int) -> np.ndarray:
    """Row-wise: the bus ``gap`` sites behind never reaches the bus ahead.

    ``behind`` and ``ahead`` hold sorted jump times padded with ``inf``. The
    bus behind reaches the one ahead at its ``q``-th jump unless the bus ahead
    made its ``(q - gap + 1)``-th jump strictly earlier.
    """
    J = behind.shape[1]
    if gap > J:
        return np.ones(behind.shape[0], dtype=bool)
    tb = behind[:, gap - 1 :]
    width = tb.shape[1]
    ta = ahead[:, :width]
    viol = np.isfinite(tb) & (ta >= tb)
    return ~np.any(viol, axis=1)


def simulate_circle_batch(params: CircleParams, t: float, rng, size: int):
    """Propose ``size`` unconditioned runs on ``[0, t]``; return accepted rows.

    Returns ``(final_positions, jump_counts)`` for the runs without a meeting,
    shapes ``(m, k)`` each.
    """
    M, k = params.M, params.k
    theta = np.array(params.theta0)
    counts = rng.poisson(t, size=(size, k))
    J = max(int(counts.max()), 1)
    u = rng.random((size, k, J))
    u[np.arange(J)[None, None, :] >= counts[:, :, None]] = np.inf
    times = np.sort(u, axis=2) * t
    ok = np.ones(size, dtype=bool)
    for i in range(k):
        ahead = (i + 1) % k
        gap = (theta[ahead] - theta[i]) % M if k > 1 else M
        ok &= _no_catch(times[:, i, :], times[:, ahead, :], gap)
    final = (theta[None, :] + counts[ok]) % M
    return final, counts[ok]


def sample_circle_rejection(params: CircleParams, t: float, seed, max_attempts: int = 10**6) -> CyclicConfig:
    """One exact draw of the labelled bus positions at time ``t`` given no meeting."""
    rng = as_rng(seed)
    attempts = 0
    while attempts < max_attempts:
        size = min(1024, max_attempts - attempts)
        final, _ = simulate_circle_batch(params, t, rng, size)
        if len(final):
            return CyclicConfig(tuple(final[0]))
        attempts += size
    raise SamplingError(f"no admissible circle run in {attempts} attempts", attempts)


def circle_rejection_stats(params: CircleParams, t: float, seed, proposals: int, batch: int = 100_000):
    """Run ``proposals`` unconditioned simulations.

    Returns ``(accepted, set_counts, winding_examples)``: the number of runs
    without a meeting, a dict mapping each occupied set to its count, and, per
    set, the distinct total jump counts observed.
    """
    rng = as_rng(seed)
    done = accepted = 0
    set_counts: dict = {}
    jumps: dict = {}
    while done < proposals:
        size = min(batch, proposals - done)
        final, counts = simulate_circle_batch(params, t, rng, size)
        accepted += len(final)
        keys = [tuple(sorted(row)) for row in final.tolist()]
        totals = counts.sum(axis=1).tolist()
        for key, tot in zip(keys, totals):
            set_counts[key] = set_counts.get(key, 0) + 1
            jumps.setdefault(key, set()).add(tot)
        done += size
    return accepted, set_counts, jumps
