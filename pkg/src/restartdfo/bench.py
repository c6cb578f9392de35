"""Benchmarking: experiment runs, trace archives and data profiles.

A problem instance counts as solved by evaluation k when the noisy value
``f~_k <= E f~(x*) + tau_p (f~(x0) - E f~(x*))``, where ``tau_p`` is the
target accuracy floored at the noise level of that instance. Data profiles
report the fraction of instances solved within ``alpha (n_p + 1)``
evaluations.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .problems import NOISE_KINDS, NoiseModel, NoisyObjective, get_problem, noise_stats, random_start
from .solver import BudgetExhausted, SolverOptions, minimize

__all__ = [
    "TRACE_HEADER",
    "TraceFormatError",
    "TraceWarning",
    "RunTrace",
    "AccuracySpec",
    "DataProfile",
    "ExperimentConfig",
    "VARIANTS",
    "evals_to_solve",
    "floor_tau",
    "profile_from_counts",
    "data_profile",
    "alpha_grid",
    "write_trace",
    "read_trace",
    "trace_to_text",
    "trace_from_text",
    "ingest_external_trace",
    "validate_trace_file",
    "load_config",
    "run_experiment",
    "read_archive",
    "profile_archive",
    "instance_seed",
]

logger = logging.getLogger(__name__)

TRACE_HEADER = "dfo-trace v1"
ARCHIVE_DIR = "traces"
MANIFEST = "manifest.json"

VARIANTS: Dict[str, dict] = {
    "none": dict(restart_mode="none"),
    "soft-fixed": dict(restart_mode="soft", restart_radius_mode="fixed"),
    "soft-adaptive": dict(restart_mode="soft", restart_radius_mode="adaptive"),
    "hard-fixed": dict(restart_mode="hard", restart_radius_mode="fixed"),
    "hard-adaptive": dict(restart_mode="hard", restart_radius_mode="adaptive"),
}


class TraceFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


class TraceWarning(UserWarning):
    pass


# -- traces -----------------------------------------------------------------

@dataclass
class RunTrace:
    """Evaluation history of one solver run on one problem instance."""

    solver: str
    problem: str
    instance: int
    seed: int
    values: np.ndarray
    best: Optional[np.ndarray] = None
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.best is None:
            self.best = running_best(self.values)
        self.best = np.asarray(self.best, dtype=float).reshape(-1)
        if self.best.shape != self.values.shape:
            raise ValueError("best-so-far must have one entry per record")

    def __len__(self):
        return self.values.size

    @property
    def records(self):
        return [(k + 1, float(f), float(b)) for k, (f, b) in enumerate(zip(self.values, self.best))]

    @property
    def f0(self) -> float:
        if not len(self):
            raise ValueError("empty trace")
        return float(self.values[0])

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return trace_to_text(self) == trace_to_text(other)


def running_best(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v.copy()
    return np.minimum.accumulate(np.where(np.isnan(v), np.inf, v))


def _hex(x) -> str:
    return float(x).hex()


def trace_to_text(trace: RunTrace) -> str:
    meta = {"solver": trace.solver, "problem": trace.problem, "instance": str(trace.instance),
            "seed": str(trace.seed)}
    meta.update({k: str(v) for k, v in trace.metadata.items()})
    lines = [TRACE_HEADER]
    for k in sorted(meta):
        if "\n" in k or "=" in k or "\n" in meta[k]:
            raise ValueError("metadata key/value not representable: %r" % k)
        lines.append("#%s=%s" % (k, meta[k]))
    for k, (f, b) in enumerate(zip(trace.values, trace.best), start=1):
        lines.append("%d,%s,%s" % (k, _hex(f), _hex(b)))
    return "\n".join(lines) + "\n"


def _parse_float(tok, line):
    tok = tok.strip()
    if "0x" in tok.lower():
        try:
            return float.fromhex(tok)
        except (ValueError, OverflowError):
            raise TraceFormatError(line, "not a number: %r" % tok) from None
    try:
        return float(tok)
    except ValueError:
        raise TraceFormatError(line, "not a number: %r" % tok) from None


def _parse(text: str, strict_best: bool):
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceFormatError(1, "expected header %r" % TRACE_HEADER)
    meta, vals, best, issues = {}, [], [], []
    expect = 1
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep or not key:
                raise TraceFormatError(i, "metadata must look like #key=value")
            meta[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise TraceFormatError(i, "expected 3 comma-separated fields, got %d" % len(parts))
        try:
            k = int(parts[0])
        except ValueError:
            raise TraceFormatError(i, "evaluation index is not an integer: %r" % parts[0]) from None
        if k != expect:
            raise TraceFormatError(i, "evaluation index %d out of sequence (expected %d)" % (k, expect))
        f = _parse_float(parts[1], i)
        b = _parse_float(parts[2], i)
        if math.isnan(f):
            f = math.inf
        vals.append(f)
        best.append(b)
        expect += 1
    recomputed = running_best(vals)
    for k, (b, r) in enumerate(zip(best, recomputed), start=1):
        if not (b == r or (math.isnan(b) and math.isinf(r))):
            issues.append(k)
    if issues and strict_best:
        raise TraceFormatError(0, "best-so-far inconsistent at evaluations %s" % issues[:10])
    return meta, np.array(vals, float), recomputed, issues


def _trace_from_parts(meta, vals, best) -> RunTrace:
    meta = dict(meta)
    solver = meta.pop("solver", "external")
    problem = meta.pop("problem", "unknown")
    try:
        instance = int(meta.pop("instance", 0))
        seed = int(meta.pop("seed", 0))
    except ValueError as exc:
        raise TraceFormatError(0, "instance and seed metadata must be integers") from exc
    return RunTrace(solver, problem, instance, seed, vals, best, meta)


def trace_from_text(text: str) -> RunTrace:
    """Strict parse: the stored best-so-far column must be exact."""
    meta, vals, best, _ = _parse(text, strict_best=True)
    return _trace_from_parts(meta, vals, best)


def write_trace(trace: RunTrace, path) -> Path:
    path = Path(path)
    _atomic_write(path, trace_to_text(trace))
    return path


def read_trace(path) -> RunTrace:
    return trace_from_text(Path(path).read_text())


def ingest_external_trace(path) -> RunTrace:
    """Read a trace written by some other solver.

    Rows are validated; a best-so-far column that disagrees with the values
    is replaced by the recomputed one and a TraceWarning names the rows.
    """
    meta, vals, best, issues = _parse(Path(path).read_text(), strict_best=False)
    if issues:
        warnings.warn("%s: recorded best-so-far disagrees with the values at evaluations %s; recomputed"
                      % (path, issues[:10]), TraceWarning, stacklevel=2)
    trace = _trace_from_parts(meta, vals, best)
    trace.metadata["best_recomputed_rows"] = ",".join(map(str, issues)) if issues else ""
    if not issues:
        del trace.metadata["best_recomputed_rows"]
    return trace


def validate_trace_file(path) -> List[str]:
    """Problems found in a trace file: errors first, then best-so-far mismatches."""
    try:
        _, _, _, issues = _parse(Path(path).read_text(), strict_best=False)
    except TraceFormatError as exc:
        return ["error: %s" % exc]
    return ["warning: best-so-far disagrees with the values at evaluation %d" % k for k in issues]


# -- accuracy and profiles ----------------------------------------------------

def floor_tau(tau: float, sigma_star: float, gap: float, tau_max: float = 0.1) -> float:
    """Target accuracy raised to the noise floor of an instance, then capped."""
    if not gap > 0:
        raise ValueError("instance starts at or below the optimum (gap=%r)" % gap)
    if not 0 < tau:
        raise ValueError("tau must be positive")
    tau_crit = 0.0
    if sigma_star > 0:
        # tolerate roundoff so that an exact power of ten maps to itself
        tau_crit = 10.0 ** math.ceil(math.log10(sigma_star / gap) - 1e-12)
    return min(tau_max, max(tau_crit, tau))


@dataclass(frozen=True)
class AccuracySpec:
    """Per-instance solve threshold."""

    tau: float
    f_star: float
    f0: float
    sigma_star: float = 0.0
    tau_max: float = 0.1

    @property
    def gap(self) -> float:
        return self.f0 - self.f_star

    @property
    def tau_p(self) -> float:
        return floor_tau(self.tau, self.sigma_star, self.gap, self.tau_max)

    @property
    def threshold(self) -> float:
        return self.f_star + self.tau_p * self.gap

    @classmethod
    def for_trace(cls, trace: RunTrace, tau: float, tau_max: float = 0.1) -> "AccuracySpec":
        """Threshold from the trace's first value and its problem/noise metadata."""
        f_star, sigma = _instance_noise_stats(trace)
        return cls(tau, f_star, trace.f0, sigma, tau_max)


def _instance_noise_stats(trace: RunTrace):
    m = trace.metadata
    if "expected_f_star" in m:
        return _meta_float(m["expected_f_star"]), _meta_float(m.get("sigma_star", "0"))
    spec = get_problem(trace.problem, int(m["n"]) if "n" in m else None)
    noise = NoiseModel(m.get("noise", "smooth"), _meta_float(m.get("sigma", "0.01")))
    return noise_stats(spec, noise)


def _meta_float(text) -> float:
    return _parse_float(str(text), 0)


def evals_to_solve(trace: RunTrace, acc: AccuracySpec) -> float:
    """First evaluation index (1-based) meeting the threshold, or inf."""
    if not len(trace):
        raise ValueError("empty trace")
    hit = np.flatnonzero(trace.values <= acc.threshold)
    return int(hit[0]) + 1 if hit.size else math.inf


def alpha_grid(budget_multiplier: float, points: int = 512) -> np.ndarray:
    return np.geomspace(1.0, float(budget_multiplier), points)


@dataclass
class DataProfile:
    """Fraction of instances solved within alpha (n_p + 1) evaluations."""

    solver: str
    alphas: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    dims: np.ndarray

    def __call__(self, alpha) -> np.ndarray:
        return profile_from_counts(self.counts, self.dims, np.atleast_1d(alpha))

    def breakpoints(self, alpha_max: Optional[float] = None):
        """(alpha, d) where the step function jumps, plus both ends."""
        ratios = np.sort(self.counts / (self.dims + 1.0))
        ratios = ratios[np.isfinite(ratios)]
        hi = self.alphas[-1] if alpha_max is None else alpha_max
        pts = np.unique(np.concatenate([[self.alphas[0]], ratios[ratios <= hi], [hi]]))
        pts = pts[pts >= self.alphas[0]]
        return pts, self(pts)


def profile_from_counts(counts, dims, alphas) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    dims = np.asarray(dims, dtype=float)
    if counts.size == 0:
        raise ValueError("empty instance set")
    alphas = np.asarray(alphas, dtype=float)
    solved = counts[None, :] <= alphas[:, None] * (dims[None, :] + 1.0)
    return solved.mean(axis=1)


def data_profile(traces_by_solver: Mapping[str, Sequence[RunTrace]], tau: float, alphas=None,
                 budget_multiplier: Optional[float] = None, tau_max: float = 0.1) -> Dict[str, DataProfile]:
    """Profiles for each solver; every instance is a separate problem."""
    out = {}
    for solver, traces in traces_by_solver.items():
        counts, dims = [], []
        for tr in traces:
            try:
                acc = AccuracySpec.for_trace(tr, tau, tau_max)
                acc.tau_p
            except ValueError as exc:
                warnings.warn("excluding %s/%s instance %d: %s" % (solver, tr.problem, tr.instance, exc),
                              TraceWarning, stacklevel=2)
                continue
            counts.append(evals_to_solve(tr, acc))
            dims.append(int(tr.metadata.get("n", 1)))
        if alphas is None:
            mult = budget_multiplier
            if mult is None:
                mult = max(float(t.metadata.get("budget", len(t))) / (int(t.metadata.get("n", 1)) + 1)
                           for t in traces)
            grid = alpha_grid(mult)
        else:
            grid = np.asarray(alphas, dtype=float)
        counts = np.array(counts, dtype=float)
        dims = np.array(dims, dtype=float)
        out[solver] = DataProfile(solver, grid, profile_from_counts(counts, dims, grid), counts, dims)
    return out


# -- experiments --------------------------------------------------------------

@dataclass
class ExperimentConfig:
    problems: List[str]
    variants: List[str]
    instances: int = 10
    budget_multiplier: float = 1000
    noise: Dict[str, object] = field(default_factory=lambda: {"kind": "smooth", "sigma": 0.01})
    seed: int = 0
    tau_levels: List[float] = field(default_factory=lambda: [1e-2, 1e-5])
    output_dir: str = "results"
    dimensions: Dict[str, int] = field(default_factory=dict)
    time_limit: Optional[float] = None
    workers: int = 1

    def validate(self):
        for p in self.problems:
            get_problem(p, self.dimensions.get(p))
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise KeyError("unknown variant(s) %s; choose from %s" % (bad, sorted(VARIANTS)))
        if self.instances < 1:
            raise ValueError("instances must be positive")
        if not self.budget_multiplier > 0:
            raise ValueError("budget_multiplier must be positive")
        if self.noise.get("kind", "smooth") not in NOISE_KINDS:
            raise ValueError("noise kind must be one of %s" % (NOISE_KINDS,))
        if not self.tau_levels or min(self.tau_levels) <= 0:
            raise ValueError("tau_levels must be positive")
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @property
    def noise_model(self) -> NoiseModel:
        return NoiseModel(str(self.noise.get("kind", "smooth")), float(self.noise.get("sigma", 0.01)))


class ConfigError(ValueError):
    pass


def load_config(path) -> ExperimentConfig:
    """Read a JSON experiment config, reporting the offending line or key."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("%s: line %d column %d: %s" % (path, exc.lineno, exc.colno, exc.msg)) from None
    if not isinstance(raw, dict):
        raise ConfigError("%s: top level must be an object" % path)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError("%s: unknown key(s) %s" % (path, unknown))
    for key in ("problems", "variants"):
        if key not in raw:
            raise ConfigError("%s: missing required key %r" % (path, key))
        if not isinstance(raw[key], list) or not raw[key]:
            raise ConfigError("%s: key %r must be a non-empty list" % (path, key))
    try:
        return ExperimentConfig(**raw).validate()
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("%s: %s" % (path, exc.args[0] if exc.args else exc)) from None


def instance_seed(seed: int, instance: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(instance)]).generate_state(1)[0])


class _TimeLimit(BudgetExhausted):
    reason = "time_limit"


class _Deadline:
    def __init__(self, objective, seconds):
        self.objective = objective
        self.deadline = None if seconds is None else time.monotonic() + seconds

    def __call__(self, x):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _TimeLimit
        return self.objective(x)


def run_cell(problem: str, variant: str, instance: int, config: ExperimentConfig) -> RunTrace:
    spec = get_problem(problem, config.dimensions.get(problem))
    seed = instance_seed(config.seed, instance)
    x0 = random_start(spec, seed)
    noise = dataclasses.replace(config.noise_model, seed=seed)
    budget = int(config.budget_multiplier * (spec.n + 1))
    opts = SolverOptions(max_evals=budget, rng_seed=seed, noise_aware=not noise.is_smooth, **VARIANTS[variant])
    result = minimize(_Deadline(NoisyObjective(spec, noise), config.time_limit), x0, spec.bounds, opts)
    meta = {"n": spec.n, "budget": budget, "noise": noise.kind, "sigma": _hex(noise.sigma),
            "x0": ",".join(_hex(v) for v in x0), "reason": result.reason, "restarts": len(result.restarts)}
    return RunTrace(variant, problem, instance, seed, result.fs, metadata={k: str(v) for k, v in meta.items()})


def _trace_name(trace: RunTrace) -> str:
    return "%s__%s__%03d.trace" % (trace.solver, trace.problem, trace.instance)


def run_experiment(config: ExperimentConfig, output_dir=None) -> Path:
    """Run every (variant, problem, instance) cell and write the archive.

    The archive is assembled in a temporary directory and moved into place
    at the end, so readers never see a partial archive.
    """
    config.validate()
    out = Path(output_dir if output_dir is not None else config.output_dir)
    cells = [(p, v, i) for v in config.variants for p in config.problems for i in range(config.instances)]
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(config.workers) as pool:
            traces = list(pool.map(run_cell, *zip(*cells), [config] * len(cells)))
    else:
        traces = [run_cell(p, v, i, config) for p, v, i in cells]

    out.mkdir(parents=True, exist_ok=True)
    final = out / ARCHIVE_DIR
    tmp = Path(tempfile.mkdtemp(prefix=".traces-", dir=out))
    try:
        files = {}
        for tr in traces:
            text = trace_to_text(tr)
            name = _trace_name(tr)
            (tmp / name).write_text(text)
            files[name] = hashlib.sha256(text.encode()).hexdigest()
        manifest = {"format": TRACE_HEADER, "config": json.loads(config.to_json()), "traces": files}
        (tmp / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        (tmp / "config.json").write_text(config.to_json() + "\n")
        old = None
        if final.exists():
            old = out / (".old-" + tmp.name)
            os.replace(final, old)
        os.replace(tmp, final)
        if old is not None:
            shutil.rmtree(old)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    logger.info("wrote %d traces to %s", len(traces), final)
    return final


def read_archive(path) -> Dict[str, List[RunTrace]]:
    """Traces grouped by solver, in file-name order."""
    path = Path(path)
    if (path / ARCHIVE_DIR).is_dir():
        path = path / ARCHIVE_DIR
    groups: Dict[str, List[RunTrace]] = {}
    files = sorted(path.glob("*.trace"))
    if not files:
        raise FileNotFoundError("no traces under %s" % path)
    for f in files:
        tr = read_trace(f)
        groups.setdefault(tr.solver, []).append(tr)
    return groups


def profile_archive(archive, output_dir, taus: Sequence[float] = (1e-2, 1e-5), tau_max: float = 0.1,
                    budget_multiplier: Optional[float] = None) -> Dict[float, Dict[str, DataProfile]]:
    """Write one (alpha, d) CSV per solver and tau, plus a manifest."""
    groups = read_archive(archive)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result, manifest = {}, {"archive": str(Path(archive)), "tau_max": tau_max, "profiles": {}}
    for tau in taus:
        profs = data_profile(groups, tau, budget_multiplier=budget_multiplier, tau_max=tau_max)
        result[tau] = profs
        for solver, prof in sorted(profs.items()):
            name = "profile_tau%s_%s.csv" % (_tau_tag(tau), solver)
            a, d = prof.breakpoints()
            rows = ["alpha,d"] + ["%.17g,%.17g" % (x, y) for x, y in zip(a, d)]
            _atomic_write(out / name, "\n".join(rows) + "\n")
            manifest["profiles"].setdefault(_tau_tag(tau), {})[solver] = {
                "file": name, "instances": int(prof.counts.size),
                "solved": int(np.isfinite(prof.counts).sum())}
    _atomic_write(out / "profile_manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return result


def _tau_tag(tau: float) -> str:
    return "%g" % tau


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix="." + path.name, dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
