"""Batch runner: ``metricflow run <config.toml>`` and ``metricflow list-flows``.

A config file names one flow and one suite.  Every suite expands into an
ordered list of independent tasks; tasks may run on a thread pool but rows are
always written in task order, so identical configs give identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis as an
from .core import ProcessApprox, Schedule, dyadic_process
from .errors import MetricFlowError
from .flows import REGISTRY, build_case
from .flows.counterexample import k_step_defect, semigroup_defect, counterexample_f

SUITES = ("certify", "tangency", "euler-error", "dyadic", "counterexample-demo")
FORMATS = ("csv", "json")
HEADER = ("suite", "flow", "param_json", "measured", "bound", "pass", "runtime_ms", "seed")
DEFAULT_SEED = 20240101
DEFAULT_SAMPLES = 32

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --------------------------------------------------------------------------
# rows and serialization
# --------------------------------------------------------------------------

@dataclass
class ResultRow:
    suite: str
    flow: str
    params: dict
    measured: float
    bound: float
    passed: bool
    runtime_ms: float = 0.0
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "flow": self.flow,
            "param_json": json.dumps(self.params, sort_keys=True),
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
            "runtime_ms": self.runtime_ms,
            "seed": self.seed,
        }


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _csv_field(text: str) -> str:
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def format_csv(rows) -> str:
    lines = [",".join(HEADER)]
    for r in rows:
        d = r.as_dict()
        lines.append(",".join([
            _csv_field(d["suite"]), _csv_field(d["flow"]), _csv_field(d["param_json"]),
            _num(d["measured"]), _num(d["bound"]), "true" if d["pass"] else "false",
            _num(d["runtime_ms"]), str(d["seed"]),
        ]))
    return "\n".join(lines) + "\n"


def format_json(rows) -> str:
    objs = []
    for r in rows:
        d = r.as_dict()
        parts = []
        for key in HEADER:
            v = d[key]
            if isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, float):
                text = _num(v) if math.isfinite(v) else json.dumps(v)
            else:
                text = json.dumps(v)
            parts.append(f"{json.dumps(key)}: {text}")
        objs.append("  {" + ", ".join(parts) + "}")
    if not objs:
        return "[]\n"
    return "[\n" + ",\n".join(objs) + "\n]\n"


def parse_json(text: str) -> list:
    """Inverse of :func:`format_json`."""
    rows = []
    for d in json.loads(text):
        rows.append(ResultRow(d["suite"], d["flow"], json.loads(d["param_json"]), float(d["measured"]),
                              float(d["bound"]), bool(d["pass"]), float(d["runtime_ms"]), int(d["seed"])))
    return rows


def emit(rows, fmt: str, path) -> Path:
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"expected one of {FORMATS}, got {fmt!r}")
    text = format_csv(rows) if fmt == "csv" else format_json(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    suite: str
    flow: str
    flow_params: dict
    grids: dict
    seed: int
    output_path: str
    output_format: str = "csv"
    timing: bool = False
    t0: float = 0.0
    extra: dict = field(default_factory=dict)


def _float_list(grids: dict, key: str, default=None) -> Optional[list]:
    if key not in grids:
        return default
    vals = grids[key]
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"grids.{key}", "must be a non-empty list")
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"grids.{key}", "entries must be numbers") from None


def _int_list(grids: dict, key: str, default=None) -> Optional[list]:
    vals = _float_list(grids, key, default)
    if vals is None:
        return None
    if any(v != int(v) or v < 0 for v in vals):
        raise ConfigError(f"grids.{key}", "entries must be non-negative integers")
    return [int(v) for v in vals]


def load_config(path, seed_override: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}") from None
    suite = raw.get("suite")
    if suite not in SUITES:
        raise ConfigError("suite", f"expected one of {SUITES}, got {suite!r}")
    flow = raw.get("flow")
    if not isinstance(flow, dict) or flow.get("kind") not in REGISTRY:
        raise ConfigError("flow.kind", f"expected one of {sorted(REGISTRY)}")
    params = flow.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("flow.params", "must be a table")
    seed = raw.get("seed", DEFAULT_SEED)
    if seed_override not in (None, ""):
        try:
            seed = int(seed_override)
        except ValueError:
            raise ConfigError("METRICFLOW_SEED", f"not an integer: {seed_override!r}") from None
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    out = raw.get("output", {})
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"expected one of {FORMATS}, got {fmt!r}")
    stem = Path(path).stem
    out_path = out.get("path", f"results/{stem}.{fmt}")
    grids = raw.get("grids", {})
    if not isinstance(grids, dict):
        raise ConfigError("grids", "must be a table")
    t0 = float(raw.get("t0", 0.0))
    return ExperimentConfig(suite, flow["kind"], params, grids, seed, str(out_path), fmt,
                            bool(out.get("timing", False)), t0, raw.get("demo", {}))


# --------------------------------------------------------------------------
# suites
# --------------------------------------------------------------------------

Task = Callable[[], list]


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


class _Builder:
    """Shared state for turning one config into ordered tasks."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        try:
            self.case = build_case(cfg.flow, **cfg.flow_params)
        except TypeError as exc:
            raise ConfigError("flow.params", str(exc)) from None
        except ValueError as exc:
            raise ConfigError("flow.params", str(exc)) from None
        self.flow = self.case.flow
        self.base = {"flow_params": {k: _jsonable(v) for k, v in cfg.flow_params.items()}, "t0": cfg.t0}
        if not 0 <= cfg.t0 < self.flow.horizon:
            raise ConfigError("t0", f"must lie in [0, {self.flow.horizon})")

    @property
    def span(self) -> float:
        return self.flow.horizon - self.cfg.t0

    def row(self, params: dict, measured: float, bound: float, passed: Optional[bool] = None,
            runtime_ms: float = 0.0) -> ResultRow:
        if passed is None:
            passed = an.within(measured, bound)
        ms = runtime_ms if self.cfg.timing else 0.0
        return ResultRow(self.cfg.suite, self.cfg.flow, {**self.base, **params}, float(measured),
                         float(bound), bool(passed), float(ms), self.cfg.seed)

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, stream])

    def samples(self) -> int:
        n = self.cfg.grids.get("samples", DEFAULT_SAMPLES)
        if not isinstance(n, int) or n < 1:
            raise ConfigError("grids.samples", "must be a positive integer")
        return n

    def times(self) -> list:
        d = self.flow.delta
        ts = _float_list(self.cfg.grids, "t", [d, d / 2, d / 4, d / 8])
        for t in ts:
            if not 0 < t <= self.span * (1 + 1e-12):
                raise ConfigError("grids.t", f"t={t} outside (0, T - t0]")
        return ts

    def certified(self):
        if self.flow.omega is None:
            raise ConfigError("flow.kind", f"{self.cfg.flow} has no certified modulus; use suite counterexample-demo")
        return self.flow.omega, self.flow.stability


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - start) * 1e3


def _certify_tasks(b: _Builder) -> list:
    omega, L = b.certified()
    g = b.cfg.grids
    d = b.flow.delta
    k_max = int(g.get("k_max", 4))
    if k_max < 1:
        raise ConfigError("grids.k_max", "must be >= 1")
    taus = _float_list(g, "tau", list(np.geomspace(d / (k_max + 1) / 64, d / (k_max + 1), 7)))
    for tau in taus:
        if not tau > 0:
            raise ConfigError("grids.tau", f"tau={tau} must be positive")
        if (k_max + 1) * tau > d * (1 + 1e-12):
            raise ConfigError("grids.tau", f"(k_max + 1) * tau = {(k_max + 1) * tau} exceeds delta = {d}")
        if b.cfg.t0 + (k_max + 1) * tau > b.flow.horizon * (1 + 1e-12):
            raise ConfigError("grids.tau", f"tau={tau} leaves the horizon")
    eps_grid = _float_list(g, "eps", [d, d / 2, d / 4])
    for e in eps_grid:
        if not 0 < e <= d * (1 + 1e-12):
            raise ConfigError("grids.eps", f"eps={e} outside (0, delta={d}]")
    t_stab = float(g.get("stability_t", min(b.span, 1.0)))
    if not 0 < t_stab <= b.span * (1 + 1e-12):
        raise ConfigError("grids.stability_t", f"{t_stab} outside (0, T - t0]")
    alpha_tol = float(g.get("alpha_tol", 0.1))
    n = b.samples()
    sample_info = {"samples": n, "k_max": k_max}

    def omega_rows():
        states = b.case.sampler(b.rng(0), n)
        (fit, samples), ms = _timed(lambda: an.estimate_omega(b.flow, states, b.cfg.t0, taus, k_max))
        rows = []
        for tau in taus:
            worst = max(s.normalized for s in samples if s.tau == tau)
            rows.append(b.row({"check": "omega_domination", "tau": tau, **sample_info},
                              worst, float(omega(tau)), runtime_ms=ms / len(taus)))
        fitted = {"C_fit": fit.coefficient, "alpha_fit": fit.exponent,
                  "C_cert": omega.coefficient, "alpha_cert": omega.exponent, "taus": taus}
        rows.append(b.row({"check": "exponent", **fitted, **sample_info},
                          abs(fit.exponent - omega.exponent), alpha_tol))
        return rows

    def stability_rows():
        states = b.case.sampler(b.rng(1), 2 * n)
        pairs = list(zip(states[:n], states[n:]))
        ratio, ms = _timed(lambda: an.estimate_stability(b.flow, pairs, eps_grid, t_stab, b.cfg.t0))
        return [b.row({"check": "stability", "t": t_stab, "eps": eps_grid, "samples": n},
                      ratio, L, runtime_ms=ms)]

    return [omega_rows, stability_rows]


def _tangency_tasks(b: _Builder) -> list:
    omega, L = b.certified()
    level = int(b.cfg.grids.get("level", 12))
    if level < 0:
        raise ConfigError("grids.level", "must be non-negative")

    def task(t):
        def run():
            rep, ms = _timed(lambda: an.verify_tangency(b.flow, omega, L, [t], b.cfg.t0, b.case.initial, level))
            r = rep.rows[0]
            return [b.row({"check": "tangency", **r.params}, r.measured, r.bound, runtime_ms=ms)]
        return run

    return [task(t) for t in b.times()]


def _euler_tasks(b: _Builder) -> list:
    omega, L = b.certified()
    g = b.cfg.grids
    d = b.flow.delta
    T = float(g.get("t_final", min(b.span, 1.0)))
    if not 0 < T <= b.span * (1 + 1e-12):
        raise ConfigError("grids.t_final", f"{T} outside (0, T - t0]")
    level = int(g.get("level", 12))
    eps_grid = _float_list(g, "eps", [d, d / 2, d / 4, d / 8])
    for e in eps_grid:
        if not 0 < e <= d * (1 + 1e-12):
            raise ConfigError("grids.eps", f"eps={e} outside (0, delta={d}]")
    geo = _int_list(g, "geometric_n", [8, 16, 32])
    ratio = float(g.get("geometric_ratio", 0.8))
    if not 0 < ratio <= 1:
        raise ConfigError("grids.geometric_ratio", "must lie in (0, 1]")
    schedules = [("uniform", {"eps": e}, Schedule.uniform(T, e)) for e in eps_grid]
    for k in geo:
        s = Schedule.geometric(T, k, ratio)
        if s.mesh > d * (1 + 1e-12):
            raise ConfigError("grids.geometric_n", f"n={k} gives mesh {s.mesh} > delta = {d}")
        schedules.append(("geometric", {"n": k, "ratio": ratio}, s))

    def task(kind, p, sched):
        def run():
            rep, ms = _timed(lambda: an.verify_euler_error(b.flow, omega, L, [sched], b.cfg.t0,
                                                           b.case.initial, level))
            r = rep.rows[0]
            params = {"check": "euler_error", "schedule": kind, **p, "t": T, "mesh": r.params["mesh"],
                      "level": r.params["level"]}
            return [b.row(params, r.measured, r.bound, runtime_ms=ms)]
        return run

    return [task(*s) for s in schedules]


def _dyadic_tasks(b: _Builder) -> list:
    omega, L = b.certified()
    g = b.cfg.grids
    t = float(g.get("t_final", min(b.flow.delta, b.span)))
    if not 0 < t <= b.span * (1 + 1e-12):
        raise ConfigError("grids.t_final", f"{t} outside (0, T - t0]")
    pa = ProcessApprox(b.flow)
    m0 = pa.min_level(t)
    levels = _int_list(g, "m", list(range(m0, m0 + 12)))
    if min(levels) < m0:
        raise ConfigError("grids.m", f"level {min(levels)} has a step longer than delta; need m >= {m0}")
    max_gap = int(g.get("max_gap", 10))

    def run():
        rep, ms = _timed(lambda: an.verify_dyadic_pairs(b.flow, omega, L, t, b.cfg.t0, b.case.initial,
                                                        levels, max_gap))
        each = ms / max(len(rep.rows), 1)
        return [b.row({"check": "dyadic", **r.params}, r.measured, r.bound, runtime_ms=each) for r in rep.rows]

    tasks = [run]
    tol = g.get("process_tol")
    if tol is not None and b.case.reference is not None:
        tol = float(tol)

        def oracle():
            res, ms = _timed(lambda: dyadic_process(pa, t, b.cfg.t0, b.case.initial, tol))
            err = b.flow.dist(res.state, b.case.reference(t, b.case.initial))
            return [b.row({"check": "process_oracle", "t": t, "tol": tol, "level": res.level},
                          err, tol, runtime_ms=ms)]
        tasks.append(oracle)
    return tasks


def _counterexample_tasks(b: _Builder) -> list:
    if b.cfg.flow != "counterexample":
        raise ConfigError("flow.kind", "suite counterexample-demo needs flow kind 'counterexample'")
    demo = b.cfg.extra
    ccfg = b.case.config
    pairs = demo.get("pairs", [[1.0, 0.5]])
    threshold = float(demo.get("threshold", 0.01))
    k2_threshold = float(demo.get("k2_threshold", 0.05))
    base_tau = float(demo.get("base_tau", 0.5))
    depth = int(demo.get("depth", 12))
    if 3 * base_tau > ccfg.delta:
        raise ConfigError("demo.base_tau", f"3 * base_tau exceeds delta = {ccfg.delta}")
    for p in pairs:
        if not (isinstance(p, list) and len(p) == 2 and all(x > 0 for x in p)):
            raise ConfigError("demo.pairs", "entries must be [t, s] with t, s > 0")

    def semigroup_rows():
        return [b.row({"check": "semigroup_defect", "t": float(t), "s": float(s), "compare": "gt"},
                      semigroup_defect(ccfg, float(t), float(s)), threshold,
                      passed=semigroup_defect(ccfg, float(t), float(s)) > threshold) for t, s in pairs]

    def chain_rows():
        rows = []
        for j in range(depth):
            tau = base_tau * 2.0 ** -j
            one = k_step_defect(ccfg, tau, 1)
            two = k_step_defect(ccfg, tau, 2) / (2 * tau)
            # two equal steps commute exactly up to roundoff in exp
            rows.append(b.row({"check": "k1_defect", "tau": tau, "compare": "le"}, one / tau, 1e-12))
            rows.append(b.row({"check": "k2_normalized_defect", "tau": tau, "compare": "gt"},
                              two, k2_threshold, passed=two > k2_threshold))
        return rows

    def scaling_rows():
        rows = []
        for t in demo.get("scaling_t", [0.3, 0.7, 1.3]):
            t = float(t)
            worst = max(abs(counterexample_f(ccfg, 2.0 ** n * t) - counterexample_f(ccfg, t) ** (2 ** n))
                        for n in range(11))
            rows.append(b.row({"check": "doubling_law", "t": t, "n_max": 10, "compare": "le"}, worst, 1e-12))
        return rows

    return [semigroup_rows, chain_rows, scaling_rows]


SUITE_TASKS = {
    "certify": _certify_tasks,
    "tangency": _tangency_tasks,
    "euler-error": _euler_tasks,
    "dyadic": _dyadic_tasks,
    "counterexample-demo": _counterexample_tasks,
}


def execute(cfg: ExperimentConfig, jobs: int = 1) -> list:
    """Run every task of the configured suite and return rows in task order."""
    tasks = SUITE_TASKS[cfg.suite](_Builder(cfg))
    if jobs <= 1 or len(tasks) <= 1:
        chunks = [task() for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda task: task(), tasks))
    return [row for chunk in chunks for row in chunk]


def output_path(cfg: ExperimentConfig, output_dir: Optional[str]) -> Path:
    p = Path(cfg.output_path)
    return Path(output_dir) / p.name if output_dir else p


def run(config_path, output_dir: Optional[str] = None, jobs: Optional[int] = None, out=None,
        err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        cfg = load_config(config_path, os.environ.get("METRICFLOW_SEED"))
        rows = execute(cfg, jobs or os.cpu_count() or 1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except (MetricFlowError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=err)
        return EXIT_NUMERIC
    try:
        path = emit(rows, cfg.output_format, output_path(cfg, output_dir))
    except OSError as exc:
        print(f"cannot write results: {exc}", file=err)
        return EXIT_NUMERIC
    failed = sum(not r.passed for r in rows)
    print(f"{cfg.suite} {cfg.flow}: {len(rows)} rows, {len(rows) - failed} passed, {failed} failed -> {path}",
          file=out)
    return EXIT_FAIL if failed else EXIT_OK


def list_flows(out=None) -> str:
    out = out or sys.stdout
    text = "\n".join(f"{kind}: {desc}" for kind, (_, desc) in REGISTRY.items()) + "\n"
    out.write(text)
    return text


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="metricflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--jobs", type=int, default=None)
    sub.add_parser("list-flows", help="show the shipped flows and their certified constants")
    args = parser.parse_args(argv)
    if args.command == "list-flows":
        list_flows()
        return EXIT_OK
    if args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be >= 1")
    return run(args.config, args.output_dir, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
