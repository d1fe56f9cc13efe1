"""Config-driven experiment runner.

A run takes an ``ExperimentConfig``, evaluates every schedule point and
writes RFC-4180 CSV tables plus a JSON manifest into the output directory.
All randomness comes from ``RngStream(seed)``; every schedule point (and
both models of a comparison) reuse that stream, and shards within a point
use its children, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .asymptotics import (AsymptoticReport, ComparisonRow, Schedule, is_admissible, m_schedule,
                          make_report, trend_stats)
from .codec import RateReport, encode_container, rate_report
from .entropy_engine import (SHARD_SIZE, Correction, Estimator, UndersamplingWarning, draw_shard,
                             entropy_from_histogram, no_jump_mass, plugin_entropy)
from .noise_models import ModelSpec, model_from_dict, model_hash, model_to_dict
from .pmf import EmpiricalPmf
from .quantization import quantize_array
from .sampling import RngStream

SEED_ENV = "LEVYQ_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    ``schedule`` is either ``{"pairs": [[n, m], ...]}``,
    ``{"generator": "auto", "n": [...], "granularity": g}`` (growth-rule
    schedule of the first model, or the elementwise max over both models)
    or ``{"generator": "power2", "n": [...]}`` with ``m = 2**n``.
    ``assertions`` is a list of ``{"kind": ..., "required": bool, ...}``.
    """

    models: tuple
    schedule: dict
    sample_count: int
    seed: Optional[int] = None
    correction: str = "miller_madow"
    estimator: str = "plain"
    output_dir: str = "out"
    name: str = "run"
    shard_size: int = SHARD_SIZE
    undersampling: str = "warn"
    allow_inadmissible: bool = False
    write_containers: bool = False
    assertions: tuple = ()

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model is required")
        if self.sample_count < 1:
            raise ConfigError("sample_count must be positive")
        if self.undersampling not in ("warn", "error"):
            raise ConfigError("undersampling must be 'warn' or 'error'")
        Correction(self.correction)
        Estimator(self.estimator)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "model" in d:
            d["models"] = [d.pop("model")]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d["models"] = tuple(d["models"])
        d["assertions"] = tuple(d.get("assertions", ()))
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        d["assertions"] = list(self.assertions)
        return d

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def model_specs(self) -> List[ModelSpec]:
        return [model_from_dict(m) for m in self.models]


def build_schedule(cfg: ExperimentConfig) -> Schedule:
    spec = cfg.schedule
    models = cfg.model_specs()
    if "pairs" in spec:
        sched = Schedule(tuple(tuple(p) for p in spec["pairs"]))
    elif spec.get("generator") == "auto":
        parts = [m_schedule(m, spec["n"], spec.get("granularity", 1)) for m in models]
        sched = Schedule(tuple((n, max(p.pairs[i][1] for p in parts)) for i, n in enumerate(spec["n"])))
    elif spec.get("generator") == "power2":
        sched = Schedule(tuple((n, 2.0**n) for n in spec["n"]))
    else:
        raise ConfigError(f"unrecognized schedule {spec!r}")
    if not cfg.allow_inadmissible:
        for m in models:
            if not is_admissible(m, sched):
                raise ConfigError(f"schedule is inadmissible for model {model_hash(m)}")
    return sched


def default_seed(env: Optional[dict] = None) -> int:
    env = os.environ if env is None else env
    return int(env[SEED_ENV]) if env.get(SEED_ENV) else 0


def resolve_seed(cli_seed: Optional[int], cfg: ExperimentConfig, env: Optional[dict] = None) -> int:
    """CLI override, then config, then the environment default, then 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if cfg.seed is not None:
        return int(cfg.seed)
    return default_seed(env)


def _shard_task(model_dict: dict, m: float, n: int, size: int, seed: int, path: tuple,
                estimator: str) -> np.ndarray:
    x = draw_shard(model_from_dict(model_dict), n, size, RngStream(seed, 0, path), Estimator(estimator))
    return quantize_array(x, m)


def _shards(sample_count: int, shard_size: int):
    k, done = 0, 0
    while done < sample_count:
        size = min(shard_size, sample_count - done)
        yield k, size
        done += size
        k += 1


class _Runner:
    """Evaluates shards serially or on a process pool."""

    def __init__(self, workers: int):
        self.pool = ProcessPoolExecutor(workers) if workers > 1 else None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.pool:
            self.pool.shutdown()

    def indices(self, model: ModelSpec, m: float, n: int, cfg: ExperimentConfig, seed: int,
                estimator: str = "plain") -> list:
        """Quantized shards in shard order."""
        md = model_to_dict(model)
        args = [(md, m, n, size, seed, (k,), estimator)
                for k, size in _shards(cfg.sample_count, cfg.shard_size)]
        if self.pool is None:
            return [_shard_task(*a) for a in args]
        return [f.result() for f in [self.pool.submit(_shard_task, *a) for a in args]]

    def estimate(self, model, m, n, cfg, seed) -> tuple:
        hist = EmpiricalPmf.empty()
        for idx in self.indices(model, m, n, cfg, seed, cfg.estimator):
            hist = hist.merge(EmpiricalPmf.from_indices(idx))
        atom = no_jump_mass(model, n) if Estimator(cfg.estimator) == Estimator.CONDITIONED else None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", UndersamplingWarning)
            est = entropy_from_histogram(hist, n, Correction(cfg.correction), atom)
        notes = [str(w.message) for w in caught if issubclass(w.category, UndersamplingWarning)]
        if notes and cfg.undersampling == "error":
            raise RuntimeError(f"undersampled at n={n}, m={m}: {notes[0]}")
        return est, notes


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, rows: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        if rows:
            writer.writerow(list(rows[0]))
            for r in rows:
                writer.writerow([_fmt(v) for v in r.values()])


def write_long_csv(path: Path, rows: List[dict], keys: tuple) -> None:
    """Tidy (long) form of ``rows`` for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(list(keys) + ["quantity", "value"])
        for r in rows:
            for q, v in r.items():
                if q not in keys:
                    writer.writerow([_fmt(r[k]) for k in keys] + [q, _fmt(v)])


@dataclass
class AssertionResult:
    kind: str
    required: bool
    passed: bool
    detail: str


@dataclass
class RunResult:
    kind: str
    rows: list
    assertions: List[AssertionResult]
    manifest: dict
    outputs: List[str] = field(default_factory=list)
    items: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions if a.required)


def _finish(kind: str, cfg: ExperimentConfig, seed: int, rows: list, items: list, checks: list,
            timings: list, out_dir: Optional[str]) -> RunResult:
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.name}_{kind}"
    table = out / f"{stem}.csv"
    write_csv(table, rows)
    long = out / f"{stem}_long.csv"
    write_long_csv(long, rows, ("model_hash", "seed", "sample_count", "n", "m"))
    manifest = {"config_hash": cfg.config_hash(), "code_version": __version__, "kind": kind,
                "seed": seed, "config": cfg.to_dict(), "points": timings,
                "assertions": [asdict(a) for a in checks],
                "outputs": [table.name, long.name],
                "passed": all(a.passed for a in checks if a.required)}
    man_path = out / f"{stem}_manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return RunResult(kind, rows, checks, manifest, [str(table), str(long), str(man_path)], items)


def _check(spec: dict, ok: bool, detail: str) -> AssertionResult:
    return AssertionResult(spec["kind"], bool(spec.get("required", True)), bool(ok), detail)


def _pick(seq, spec):
    return seq if spec.get("at", "last") == "all" else seq[-1:]


def evaluate_convergence_assertions(reports: List[AsymptoticReport], specs) -> List[AssertionResult]:
    out = []
    for spec in specs:
        kind = spec["kind"]
        if kind == "residual_abs_max":
            vals = [abs(r.residual) for r in _pick(reports, spec)]
            out.append(_check(spec, all(v < spec["value"] for v in vals), f"|residual| = {vals}"))
        elif kind == "residual_nonincreasing":
            k = spec.get("sigmas", 3.0)
            ok = all(abs(b.residual) <= abs(a.residual)
                     + k * math.hypot(a.normalized_stderr, b.normalized_stderr)
                     for a, b in zip(reports, reports[1:]))
            out.append(_check(spec, ok, f"residuals = {[r.residual for r in reports]}"))
        else:
            raise ConfigError(f"unknown convergence assertion {kind!r}")
    return out


def run_convergence(cfg: ExperimentConfig, seed: Optional[int] = None, workers: int = 1,
                    output_dir: Optional[str] = None) -> RunResult:
    """One asymptotic report per schedule point for the first model."""
    seed = resolve_seed(seed, cfg)
    model = cfg.model_specs()[0]
    sched = build_schedule(cfg)
    mh = model_hash(model)
    reports, rows, timings = [], [], []
    with _Runner(workers) as runner:
        for n, m in sched:
            t0 = time.perf_counter()
            est, notes = runner.estimate(model, m, n, cfg, seed)
            rep = make_report(model, m, n, est)
            reports.append(rep)
            rows.append({"model_hash": mh, "seed": seed, "sample_count": cfg.sample_count,
                         **rep.row(), "observed_support": est.observed_support})
            timings.append({"n": n, "m": m, "seconds": time.perf_counter() - t0, "warnings": notes})
    checks = evaluate_convergence_assertions(reports, cfg.assertions)
    return _finish("converge", cfg, seed, rows, reports, checks, timings, output_dir)


def evaluate_comparison_assertions(rows: List[ComparisonRow], specs) -> List[AssertionResult]:
    trend = trend_stats(rows)
    out = []
    for spec in specs:
        kind = spec["kind"]
        if kind == "final_ratio":
            ok = abs(trend.final_ratio - spec["target"]) <= spec["tol"]
            out.append(_check(spec, ok, f"final ratio {trend.final_ratio!r}"))
        elif kind == "ratio_decreasing":
            out.append(_check(spec, trend.ratio_decreasing, f"tail from point {trend.tail_start}"))
        elif kind == "ratios_equal":
            vals = [r.ratio for r in rows]
            out.append(_check(spec, all(v == spec.get("value", 1.0) for v in vals), f"ratios {vals}"))
        elif kind == "difference_decreasing":
            out.append(_check(spec, trend.difference_decreasing and trend.difference_negative,
                              f"differences {[r.difference for r in rows]}"))
        else:
            raise ConfigError(f"unknown comparison assertion {kind!r}")
    return out


def run_comparison(cfg: ExperimentConfig, seed: Optional[int] = None, workers: int = 1,
                   output_dir: Optional[str] = None) -> RunResult:
    """Rate ratio and difference of two models on a joint schedule."""
    seed = resolve_seed(seed, cfg)
    models = cfg.model_specs()
    if len(models) != 2:
        raise ConfigError("a comparison needs exactly two models")
    sched = build_schedule(cfg)
    hx, hy = model_hash(models[0]), model_hash(models[1])
    crow, rows, timings = [], [], []
    with _Runner(workers) as runner:
        for n, m in sched:
            t0 = time.perf_counter()
            ex, nx = runner.estimate(models[0], m, n, cfg, seed)
            ey, ny = runner.estimate(models[1], m, n, cfg, seed)
            row = ComparisonRow(n, m, ex, ey)
            crow.append(row)
            rows.append({"model_hash": f"{hx}/{hy}", "seed": seed, "sample_count": cfg.sample_count,
                         "n": n, "m": m, "H_x": ex.value, "H_y": ey.value, "ratio": row.ratio,
                         "difference": row.difference, "stderr_x": ex.std_error, "stderr_y": ey.std_error})
            timings.append({"n": n, "m": m, "seconds": time.perf_counter() - t0, "warnings": nx + ny})
    checks = evaluate_comparison_assertions(crow, cfg.assertions)
    return _finish("compare", cfg, seed, rows, crow, checks, timings, output_dir)


def evaluate_codec_assertions(reports: List[RateReport], specs) -> List[AssertionResult]:
    out = []
    for spec in specs:
        kind = spec["kind"]
        if kind == "rate_within":
            rel, bits = spec.get("rel", 0.02), spec.get("overhead_bits", 64)
            ok = all(r.within(rel, bits) for r in reports)
            out.append(_check(spec, ok, f"gaps {[r.gap for r in reports]}"))
        elif kind == "roundtrip":
            out.append(_check(spec, all(r.roundtrip_ok for r in reports), "lossless round trip"))
        else:
            raise ConfigError(f"unknown codec assertion {kind!r}")
    return out


def run_codec_check(cfg: ExperimentConfig, seed: Optional[int] = None, workers: int = 1,
                    output_dir: Optional[str] = None) -> RunResult:
    """Code each point's index stream and compare the rate with the estimated H_{m,n}."""
    seed = resolve_seed(seed, cfg)
    model = cfg.model_specs()[0]
    sched = build_schedule(cfg)
    mh = model_hash(model)
    out = Path(output_dir or cfg.output_dir)
    reports, rows, timings = [], [], []
    with _Runner(workers) as runner:
        for n, m in sched:
            t0 = time.perf_counter()
            idx = np.concatenate(runner.indices(model, m, n, cfg, seed))
            ref = plugin_entropy(EmpiricalPmf.from_indices(idx), Correction(cfg.correction)).scaled(n)
            rep = rate_report(idx, n, ref)
            reports.append(rep)
            if cfg.write_containers:
                out.mkdir(parents=True, exist_ok=True)
                (out / f"{cfg.name}_n{n}_m{m:g}.lvq").write_bytes(encode_container(idx, m, n, seed))
            rows.append({"model_hash": mh, "seed": seed, "sample_count": cfg.sample_count, "n": n,
                         "m": m, "symbols": rep.symbols, "payload_bits": rep.payload_bits,
                         "rate_nats": rep.per_unit_time_nats, "reference_nats": rep.reference_nats,
                         "gap": rep.gap, "roundtrip": rep.roundtrip_ok})
            timings.append({"n": n, "m": m, "seconds": time.perf_counter() - t0, "warnings": []})
    checks = evaluate_codec_assertions(reports, cfg.assertions)
    return _finish("codec", cfg, seed, rows, reports, checks, timings, output_dir)
