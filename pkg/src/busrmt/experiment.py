"""Experiment pipeline: sample, unfold, measure, compare, write CSV artifacts.

Outputs are a pure function of the configuration (including the seed):
replicates draw from independent streams keyed by ``(seed, replicate)`` and
are aggregated in replicate order, whatever the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import circle as circ
from .equilibrium import EquilibriumData, unfold
from .logspace import log_factorial
from .model_line import ModelParams, log_km_full_bridge
from .orthopoly import JacobiBasis
from .rmt_reference import gaudin_cdf, gaudin_density, gue_number_variance
from .sampler import JacobiArrivalSampler, Seed, arrival_times, sample_bridge_rejection
from .stats import (
    UnfoldedSequence,
    ks_distance,
    number_variance_statistic,
    spacing_statistic,
    tabulated_cdf,
)

STATISTICS = ("spacing", "number_variance")


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "line"
    N: int = 200
    n: int = 60
    x: int = 100
    T: float = 1.0
    M: int = 6
    k: int = 2
    t: float = 0.5
    replicates: int = 500
    seed: int = 20240601
    sampler: str = "auto"
    statistics: tuple = STATISTICS
    s_grid: tuple = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    bin_width: float = 0.1
    edge_fraction: float = 0.1
    unfold: str = "exact"
    out_dir: str = "out"
    workers: int = 1
    max_attempts: int = 10**7
    ks_tolerance: float | None = None
    nv_tolerance: float | None = None

    def __post_init__(self):
        if self.model not in ("line", "circle"):
            raise ValueError(f"model must be 'line' or 'circle', got {self.model!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.sampler not in ("auto", "rejection", "dpp"):
            raise ValueError(f"sampler must be auto, rejection or dpp, got {self.sampler!r}")
        bad = set(self.statistics) - set(STATISTICS)
        if bad:
            raise ValueError(f"unknown statistics {sorted(bad)}; choose from {STATISTICS}")
        if not 0 <= self.edge_fraction < 0.5:
            raise ValueError("edge_fraction must be in [0, 0.5)")
        if self.model == "line":
            self.line_params()
        else:
            self.circle_params()

    def line_params(self) -> ModelParams:
        return ModelParams(self.N, self.n, self.x, self.T)

    def circle_params(self) -> circ.CircleParams:
        params = circ.CircleParams(self.M, self.k, self.T)
        if not 0 < self.t <= self.T:
            raise ValueError(f"circle observation time t={self.t} must lie in (0, T={self.T}]")
        return params

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(e) for e in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


PRESETS = {
    "reproduction": dict(
        model="line", N=200, n=60, x=100, T=1.0, replicates=500, seed=20240601,
        statistics=STATISTICS, s_grid=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
        ks_tolerance=0.02, nv_tolerance=0.10,
    ),
}


def _coerce(name: str, raw):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise KeyError(f"unknown config key {name!r}")
    if raw is None or isinstance(raw, (int, float, tuple)) and not isinstance(raw, bool):
        return raw
    text = str(raw).strip()
    kind = str(kinds[name])
    if name in ("statistics",):
        return tuple(s.strip().replace("-", "_") for s in text.split(",") if s.strip())
    if name == "s_grid":
        return tuple(float(s) for s in text.split(",") if s.strip())
    if text.lower() in ("none", ""):
        return None
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_flat_config(text: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def make_config(overrides: dict | None = None, preset: str | None = None, config_text: str | None = None) -> ExperimentConfig:
    """Layer preset, config file and explicit overrides (later wins)."""
    values = {}
    if preset:
        if preset not in PRESETS:
            raise KeyError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if config_text:
        values.update(parse_flat_config(config_text))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in values.items()})


def git_style_hash(data: bytes) -> str:
    """SHA-1 of ``b"blob <len>\\0" + data``, as git hashes file contents."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def format_real(v) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_real(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_manifest(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={value}\n")


def predicted_acceptance(params: ModelParams) -> float:
    """Acceptance rate of rejection sampling: non-intersection probability given endpoints."""
    log_single = -params.T + params.N * math.log(params.T) - float(log_factorial(params.N))
    return math.exp(log_km_full_bridge(params).log_magnitude - params.n * log_single)


def choose_sampler(config: ExperimentConfig) -> str:
    if config.sampler != "auto":
        return config.sampler
    return "rejection" if predicted_acceptance(config.line_params()) >= 1e-4 else "dpp"


@lru_cache(maxsize=4)
def _dpp_sampler(params: ModelParams) -> JacobiArrivalSampler:
    return JacobiArrivalSampler(params)


def _line_replicate(args):
    config, method, index = args
    params = config.line_params()
    seed = Seed(config.seed, index)
    if method == "rejection":
        trajs = sample_bridge_rejection(params, seed, config.max_attempts)
        return arrival_times(trajs, params.x).times, trajs.jumps
    return _dpp_sampler(params).sample(seed).times, None


def _circle_replicate(args):
    config, index = args
    params = config.circle_params()
    return circ.sample_circle_rejection(params, config.t, Seed(config.seed, index), config.max_attempts)


def _map_ordered(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


@dataclass
class ArtifactBundle:
    out_dir: Path
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
                raise StageError(name, exc) from exc

        return inner

    return wrap


def sample_line(config: ExperimentConfig, method: str | None = None):
    """Arrival times for all replicates, shape ``(replicates, n)``, plus raw jumps if any."""
    method = method or choose_sampler(config)
    tasks = [(config, method, r) for r in range(config.replicates)]
    results = _map_ordered(_line_replicate, tasks, config.workers)
    times = np.array([r[0] for r in results])
    jumps = [r[1] for r in results] if method == "rejection" else None
    return times, jumps, method


def unfold_line(config: ExperimentConfig, times: np.ndarray):
    """Unfolded points per replicate (rows may be shorter in equilibrium mode)."""
    params = config.line_params()
    y = 2.0 * times / params.T - 1.0
    if config.unfold == "exact":
        basis = JacobiBasis.from_params(params)
        return basis.cumulative_count(y)
    eq = EquilibriumData.from_params(params)
    # points beyond the limiting support would all collapse onto its edges
    return [unfold(row[(row > eq.a) & (row < eq.b)], "equilibrium", params=params, eq=eq).points for row in y]


def run_experiment(config: ExperimentConfig, write: bool = True, dump_trajectories: bool = False) -> ArtifactBundle:
    """Run the configured pipeline and write its CSV files and manifest."""
    started = time.perf_counter()
    out = Path(config.out_dir)
    bundle = ArtifactBundle(out)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    if config.model == "line":
        _run_line(config, bundle, write, dump_trajectories)
    else:
        _run_circle(config, bundle, write)
    if write:
        _write_outputs(config, bundle, started)
    return bundle


def _run_line(config, bundle, write, dump_trajectories):
    params = config.line_params()
    times, jumps, method = _stage("sample")(sample_line)(config)
    bundle.summary["sampler"] = method
    if write:
        rows = ((r, i + 1, float(t)) for r, row in enumerate(times) for i, t in enumerate(row))
        path = bundle.out_dir / "arrivals.csv"
        write_csv(path, ["replicate", "bus", "time"], rows)
        bundle.files["arrivals"] = path
        if dump_trajectories and jumps is not None:
            path = bundle.out_dir / "trajectories.csv"
            rows = (
                (r, b + 1, j + 1, float(tt))
                for r, J in enumerate(jumps)
                for b, row in enumerate(J)
                for j, tt in enumerate(row)
            )
            write_csv(path, ["replicate", "bus", "jump_index", "time"], rows)
            bundle.files["trajectories"] = path
    unfolded = _stage("unfold")(unfold_line)(config, times)
    seqs = _stage("unfold")(lambda: [UnfoldedSequence(u, r, params.x) for r, u in enumerate(unfolded)])()
    bundle.summary["bulk_mean_spacing"] = float(np.mean([s.mean_spacing(config.edge_fraction) for s in seqs]))
    if "spacing" in config.statistics:
        _stage("statistics")(_spacing)(config, seqs, bundle, write)
    if "number_variance" in config.statistics:
        _stage("statistics")(_number_variance)(config, seqs, bundle, write)


@lru_cache(maxsize=1)
def _gaudin_table():
    # 1 - F(6) is below double precision, so the table ends there
    return tabulated_cdf(gaudin_cdf, 6.0)


def _spacing(config, seqs, bundle, write):
    hist = spacing_statistic(seqs, config.bin_width, config.edge_fraction)
    ks = ks_distance(hist.samples, _gaudin_table())
    bundle.summary["spacing_ks_gaudin"] = ks
    bundle.summary["spacing_count"] = int(hist.samples.size)
    if config.ks_tolerance is not None:
        bundle.checks["spacing_ks_gaudin"] = ks < config.ks_tolerance
    if write:
        refd = gaudin_density(hist.x)
        path = bundle.out_dir / "spacing.csv"
        write_csv(
            path,
            ["s", "value", "stderr", "count", "reference"],
            zip(hist.x, hist.value, hist.stderr, hist.count.tolist(), refd),
        )
        bundle.files["spacing"] = path


def _number_variance(config, seqs, bundle, write):
    curve = number_variance_statistic(seqs, config.s_grid, config.edge_fraction)
    ref = gue_number_variance(curve.x)
    rel = np.abs(curve.value / ref - 1.0)
    bundle.summary["number_variance_max_rel_error"] = float(rel.max())
    if config.nv_tolerance is not None:
        bundle.checks["number_variance_rel_error"] = bool(rel.max() < config.nv_tolerance)
    if write:
        path = bundle.out_dir / "number_variance.csv"
        write_csv(
            path,
            ["s", "value", "stderr", "count", "reference"],
            zip(curve.x, curve.value, curve.stderr, curve.count.tolist(), ref),
        )
        bundle.files["number_variance"] = path


def _run_circle(config, bundle, write):
    params = config.circle_params()
    tasks = [(config, r) for r in range(config.replicates)]
    labels = _stage("sample")(_map_ordered)(_circle_replicate, tasks, config.workers)
    labels = [lab.labels for lab in labels]
    sets = circ.enumerate_sets(params.M, params.k)
    freq = dict.fromkeys(sets, 0)
    for lab in labels:
        freq[tuple(sorted(lab))] += 1
    pred = _stage("compare")(lambda: {s: circ.circle_km(params, circ.CyclicConfig(s), config.t) for s in sets})()
    z = sum(pred.values())
    tv = 0.5 * sum(abs(freq[s] / len(labels) - pred[s] / z) for s in sets)
    bundle.summary["circle_tv_distance"] = tv
    bundle.summary["no_intersection_probability"] = z
    if write:
        path = bundle.out_dir / "circle_samples.csv"
        write_csv(path, ["replicate", "bus", "position"], ((r, i + 1, p) for r, lab in enumerate(labels) for i, p in enumerate(lab)))
        bundle.files["circle_samples"] = path
        path = bundle.out_dir / "circle_distribution.csv"
        write_csv(
            path,
            ["config", "empirical", "predicted"],
            ((" ".join(map(str, s)), freq[s] / len(labels), pred[s] / z) for s in sets),
        )
        bundle.files["circle_distribution"] = path
        if config.t < params.T:
            path = bundle.out_dir / "qt.csv"
            write_qt_csv(path, circ.qt_table(params, config.t))
            bundle.files["qt"] = path


def write_qt_csv(path: Path, table) -> None:
    write_csv(path, ["config", "probability"], ((" ".join(map(str, s)), float(q)) for s, q in table))


def _write_outputs(config, bundle, started):
    text = config.to_text().encode()
    items = {"config_hash": git_style_hash(text), "seed": config.seed}
    items.update({f"config.{k}": v for k, v in (line.split("=", 1) for line in config.to_text().splitlines())})
    for name, path in sorted(bundle.files.items()):
        items[f"file.{name}"] = path.name
        items[f"file_hash.{name}"] = git_style_hash(path.read_bytes())
    for key, value in bundle.summary.items():
        items[f"summary.{key}"] = format_real(value) if isinstance(value, float) else value
    for key, ok in bundle.checks.items():
        items[f"check.{key}"] = "pass" if ok else "fail"
    items["runtime_seconds"] = f"{time.perf_counter() - started:.3f}"
    path = bundle.out_dir / "manifest.txt"
    write_manifest(path, items)
    bundle.files["manifest"] = path
