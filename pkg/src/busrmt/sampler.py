"""Exact samplers for the line model.

Two routes are provided. Rejection sampling simulates the buses literally:
each bus gets ``N`` jump times drawn as sorted uniforms on ``(0, T)`` (a
Poisson bridge with ``N`` jumps), and the whole proposal is discarded if two
buses ever share a level. This is exact but only feasible for a handful of
buses. Determinantal sampling draws the fixed-site arrival times or fixed-time
positions directly from their orthogonal polynomial ensembles with the
projection chain rule, which scales to the desk-scale presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model_line import ArrivalTimes, ModelParams, PositionConfig
from .orthopoly import JacobiBasis, KrawtchoukBasis


class SamplingError(RuntimeError):
    """A sampler gave up; ``attempts`` says how many proposals were spent."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class Seed:
    """Master seed plus replicate index; equal pairs give identical streams."""

    master: int
    index: int = 0

    def __post_init__(self):
        if not 0 <= self.master < 2**64:
            raise ValueError("master seed must fit in 64 bits")
        if self.index < 0:
            raise ValueError("replicate index must be >= 0")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=(self.index,))
        return np.random.Generator(np.random.PCG64(seq))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.rng()
    return Seed(int(seed)).rng()


@dataclass
class TrajectorySet:
    """Jump times of ``n`` buses; row ``i`` holds the ``N`` sorted jumps of bus ``i + 1``."""

    jumps: np.ndarray
    T: float
    attempts: int = field(default=1, compare=False)

    @property
    def n(self) -> int:
        return self.jumps.shape[0]

    @property
    def N(self) -> int:
        return self.jumps.shape[1]

    def start_levels(self) -> np.ndarray:
        return 1 - np.arange(1, self.n + 1)

    def end_levels(self) -> np.ndarray:
        return self.N + 1 - np.arange(1, self.n + 1)

    def levels(self, t: float) -> np.ndarray:
        """Bus levels at time ``t`` (jumps at exactly ``t`` already taken)."""
        counts = np.array([np.searchsorted(row, t, side="right") for row in self.jumps])
        return self.start_levels() + counts

    def is_non_intersecting(self) -> bool:
        """Sweep all jump events in time order and check strict level ordering.

        Simultaneous jumps count as an intersection.
        """
        times = self.jumps.ravel()
        buses = np.repeat(np.arange(self.n), self.N)
        order = np.argsort(times, kind="stable")
        if np.any(np.diff(times[order]) == 0):
            return False
        level = self.start_levels().copy()
        for bus in buses[order]:
            level[bus] += 1
            if bus > 0 and level[bus] >= level[bus - 1]:
                return False
        return True


def _sorted_uniforms(rng, shape, T):
    return np.sort(rng.random(shape), axis=-1) * T


def ordered_pairs_ok(ahead: np.ndarray, behind: np.ndarray) -> np.ndarray:
    """Row-wise test that the bus behind never catches the bus ahead.

    With unit jumps and a starting gap of one level, the bus behind reaches the
    level of the bus ahead exactly when its ``k``-th jump does not come
    strictly after the ``k``-th jump of the bus ahead.
    """
    return np.all(ahead < behind, axis=-1)


def propose_and_filter(params: ModelParams, rng, size: int) -> np.ndarray:
    """Draw ``size`` proposals and return the accepted ones, shape ``(m, n, N)``.

    Buses are drawn one at a time and proposals are dropped as soon as a pair
    of neighbours collides; the accepted set has the same law as full
    proposals filtered at the end.
    """
    n, N, T = params.n, params.N, params.T
    first = _sorted_uniforms(rng, (size, N), T)
    buses = [first]
    alive = np.arange(size)
    for _ in range(1, n):
        nxt = _sorted_uniforms(rng, (alive.size, N), T)
        ok = ordered_pairs_ok(buses[-1], nxt)
        alive = alive[ok]
        buses = [b[ok] for b in buses] + [nxt[ok]]
        if alive.size == 0:
            break
    if alive.size == 0:
        return np.empty((0, n, N))
    return np.stack(buses, axis=1)


def sample_bridge_rejection(
    params: ModelParams, seed, max_attempts: int = 10**7, batch: int = 4096
) -> TrajectorySet:
    """One exact draw of the conditioned bridges by rejection.

    Raises :class:`SamplingError` once ``max_attempts`` proposals have been
    rejected; that signals parameters with negligible acceptance rate.
    """
    rng = as_rng(seed)
    attempts = 0
    n, N, T = params.n, params.N, params.T
    batch = max(1, min(batch, 2**21 // (n * N)))  # cap proposal memory near 16 MB
    while attempts < max_attempts:
        size = min(batch, max_attempts - attempts)
        props = _sorted_uniforms(rng, (size, n, N), T)
        ok = np.all(props[:, :-1, :] < props[:, 1:, :], axis=(1, 2))
        hits = np.flatnonzero(ok)
        if hits.size:
            first = int(hits[0])
            return TrajectorySet(props[first], T, attempts=attempts + first + 1)
        attempts += size
    raise SamplingError(
        f"no non-intersecting proposal in {attempts} attempts for n={params.n}, N={params.N}",
        attempts,
    )


def sample_bridges(params: ModelParams, seed, accepted: int, max_attempts: int = 10**9, batch: int = 200_000):
    """Collect ``accepted`` exact draws; returns ``(jumps, attempts)``.

    ``jumps`` has shape ``(accepted, n, N)``. ``attempts`` counts the proposals
    consumed up to and including the last accepted one.
    """
    rng = as_rng(seed)
    chunks, total, attempts = [], 0, 0
    while total < accepted:
        if attempts >= max_attempts:
            raise SamplingError(f"only {total} of {accepted} accepted after {attempts} attempts", attempts)
        size = min(batch, max_attempts - attempts)
        got = propose_and_filter(params, rng, size)
        if total + len(got) >= accepted:
            # attempts are not tracked per row once filtered; charge the whole batch
            got = got[: accepted - total]
        chunks.append(got)
        total += len(got)
        attempts += size
    return np.concatenate(chunks, axis=0), attempts


def acceptance_count(params: ModelParams, seed, proposals: int, batch: int = 200_000) -> int:
    """Number of non-intersecting proposals among ``proposals`` independent ones."""
    rng = as_rng(seed)
    done = accepted = 0
    while done < proposals:
        size = min(batch, proposals - done)
        accepted += len(propose_and_filter(params, rng, size))
        done += size
    return accepted


def jump_index_at_site(x: int, bus: int) -> int:
    """Zero-based index of the jump that brings ``bus`` (1-based) to site ``x``."""
    return x + bus - 2


def arrival_times(trajs: TrajectorySet, x: int) -> ArrivalTimes:
    """Arrival time of each bus at site ``x``: bus ``i`` arrives on its ``(x + i - 1)``-th jump."""
    if not 1 <= x <= trajs.N - trajs.n + 1:
        raise ValueError(f"site x={x} outside 1..{trajs.N - trajs.n + 1}")
    idx = np.arange(1, trajs.n + 1)
    return ArrivalTimes(trajs.jumps[idx - 1, jump_index_at_site(x, idx)])


def arrival_times_batch(jumps: np.ndarray, x: int) -> np.ndarray:
    """Vectorised :func:`arrival_times` over a stack of shape ``(m, n, N)``."""
    n = jumps.shape[1]
    idx = np.arange(1, n + 1)
    return jumps[:, idx - 1, jump_index_at_site(x, idx)]


def positions_at(trajs: TrajectorySet, t: float) -> PositionConfig:
    return PositionConfig(trajs.levels(t))


def positions_batch(jumps: np.ndarray, t: float) -> np.ndarray:
    """Bus levels at time ``t`` for a stack of shape ``(m, n, N)``."""
    n = jumps.shape[1]
    return (1 - np.arange(1, n + 1)) + np.sum(jumps <= t, axis=2)


def _gram_schmidt_step(basis_vecs, v):
    for e in basis_vecs:
        v = v - (e @ v) * e
    norm = np.linalg.norm(v)
    return v, norm


def sample_projection_discrete(phi: np.ndarray, rng) -> np.ndarray:
    """Chain-rule sampler for the projection DPP with orthonormal columns ``phi``.

    Returns the sampled row indices in the order they were drawn.
    """
    m, r = phi.shape
    chosen, vecs = [], []
    resid = np.einsum("ij,ij->i", phi, phi)
    for step in range(r):
        weights = np.clip(resid, 0.0, None)
        total = weights.sum()
        if not total > 0.5:
            raise SamplingError(
                f"kernel lost rank at step {step} of {r}: residual mass {total:.3e}"
            )
        idx = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
        idx = min(idx, m - 1)
        v, norm = _gram_schmidt_step(vecs, phi[idx].copy())
        if norm < 1e-10:
            raise SamplingError(f"sampled a point already spanned at step {step}")
        e = v / norm
        vecs.append(e)
        resid = resid - (phi @ e) ** 2
        resid[idx] = 0.0
        chosen.append(idx)
    return np.array(chosen)


def sample_krawtchouk_dpp(params: ModelParams, t: float, seed) -> PositionConfig:
    """Exact draw of the bus positions at time ``t``."""
    if not 0 < t < params.T:
        raise ValueError(f"need 0 < t < T, got t={t}")
    basis = KrawtchoukBasis.from_params(params, t)
    err = basis.orthonormality_error()
    if err > 1e-8:
        raise SamplingError(f"Krawtchouk basis not orthonormal (error {err:.2e}); kernel is rank deficient")
    ys = np.sort(sample_projection_discrete(basis.functions, as_rng(seed)))[::-1]
    return PositionConfig.from_shifted(ys, params.n)


class JacobiArrivalSampler:
    """Exact sampler for the arrival times of all buses at the site ``params.x``.

    Uses the projection chain rule on ``[-1, 1]``. Each conditional density
    ``K_k(y, y) / (n - k)`` is sampled by rejection from the uniform law with
    envelope ``sup K(y, y)``, which bounds every conditional diagonal.
    """

    def __init__(self, params: ModelParams, grid: int = 20001, safety: float = 1.1):
        self.params = params
        self.basis = JacobiBasis.from_params(params)
        y = np.linspace(-1, 1, grid)
        self.bound = safety * float(self.basis.density_sum(y).max())

    def sample_y(self, rng) -> np.ndarray:
        n = self.params.n
        vecs = []
        chosen = []
        for step in range(n):
            remaining = n - step
            size = max(16, int(math.ceil(4 * self.bound / remaining)))
            while True:
                y = rng.uniform(-1.0, 1.0, size)
                phi = self.basis.functions(y, count=n)
                diag = np.sum(phi**2, axis=0)
                if vecs:
                    proj = np.array(vecs) @ phi
                    diag = diag - np.sum(proj**2, axis=0)
                if np.any(diag > self.bound):
                    raise SamplingError("rejection envelope violated; increase the safety factor")
                acc = np.flatnonzero(rng.random(size) * self.bound < diag)
                if acc.size:
                    k = int(acc[0])
                    break
            v, norm = _gram_schmidt_step(vecs, phi[:, k].copy())
            vecs.append(v / norm)
            chosen.append(y[k])
        return np.sort(np.array(chosen))

    def sample(self, seed) -> ArrivalTimes:
        y = self.sample_y(as_rng(seed))
        return ArrivalTimes(0.5 * (y + 1.0) * self.params.T)


def sample_arrivals_dpp(params: ModelParams, seed) -> ArrivalTimes:
    return JacobiArrivalSampler(params).sample(seed)
