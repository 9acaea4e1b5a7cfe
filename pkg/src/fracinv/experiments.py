"""Experiment configuration, source presets and batch tables.

A run is fully described by an :class:`ExperimentConfig`. Configurations
are read from a small INI file (one ``[experiment]`` section of
``key = value`` lines); values are resolved with the precedence

    command line > config file > source preset > built-in defaults

so that ``source = example4`` alone selects the 2D disc problem with its
own step sizes and iteration cap.

Output files are plain CSV plus a JSON sidecar per run. Floats are written
with ``repr`` so that a dumped reconstruction reproduces its metrics to
the last bit.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import logging
import math
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .fem import SolverError, build_interval_mesh, build_unit_square_mesh
from .primal_dual import (
    PDParams,
    StepConditionError,
    add_noise,
    error_metrics,
    estimate_norms,
    run_inversion,
)
from .spectral import EigenBasis, project_function, spectral_coefficients, spectral_final_state
from .subdiffusion import SubdiffusionOperator, TimeGrid

log = logging.getLogger(__name__)

TABLE_COLUMNS = ["alpha", "delta_rel", "beta", "gamma", "seed", "n", "e_r", "res",
                 "stop_reason", "wall_ms"]

# ---------------------------------------------------------------------------
# time profiles and sources


def _mu_sin(t):
    return np.sin(2.0 * np.pi * t)


def _mu_cos(t):
    return np.cos(2.0 * np.pi * t)


def _mu_one(t):
    return np.ones_like(np.asarray(t, dtype=float))


MU_PRESETS = {"sin": _mu_sin, "cos": _mu_cos, "one": _mu_one}

# names visible to ``expr:`` time profiles
_EXPR_NAMES = {name: getattr(np, name) for name in
               ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "sinh", "cosh", "where")}
_EXPR_NAMES["pi"] = np.pi


def mu_function(spec: str):
    """Time profile from a preset name or ``expr:<numpy expression in t>``."""
    if spec in MU_PRESETS:
        return MU_PRESETS[spec]
    if spec.startswith("expr:"):
        source = spec[5:].strip()
        code = compile(source, "<mu>", "eval")
        bad = [n for n in code.co_names if n not in _EXPR_NAMES and n != "t"]
        if bad:
            raise ValueError(f"unknown names in mu expression: {bad}")

        def mu(t):
            return np.asarray(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "t": t}), dtype=float)

        mu(0.5)  # fail early on malformed expressions
        return mu
    raise ValueError(f"unknown mu {spec!r}; use one of {sorted(MU_PRESETS)} or 'expr:...'")


def _example1(x):
    return np.exp(-x[:, 0]) * np.sin(2.0 * np.pi * x[:, 0])


def _example2(x):
    s = x[:, 0]
    return np.where(s <= 0.5, 2.0 * s, 2.0 - 2.0 * s)


def _example3(x):
    s = x[:, 0]
    return np.where((s >= 0.25) & (s <= 0.75), 0.25, 0.0)


def _example4(x):
    r2 = (x[:, 0] - 0.5) ** 2 + (x[:, 1] - 0.5) ** 2
    return np.where(r2 <= 0.25**2, 0.25, 0.0)


def _sine(x):
    return np.prod(np.sin(np.pi * x), axis=1)


# name -> (function of points (n, d), dimension or None for any)
SOURCES = {
    "example1": (_example1, 1),
    "example2": (_example2, 1),
    "example3": (_example3, 1),
    "example4": (_example4, 2),
    "sine": (_sine, None),
    "zero": (lambda x: np.zeros(x.shape[0]), None),
}


def source_function(name: str, dim: int):
    if name not in SOURCES:
        raise ValueError(f"unknown source preset {name!r}")
    func, d = SOURCES[name]
    if d is not None and d != dim:
        raise ValueError(f"source {name!r} is defined in {d}D, mesh is {dim}D")
    return func


def source_preset(name: str, mesh) -> np.ndarray:
    """Nodal interpolant of a named source on ``mesh``."""
    return np.asarray(source_function(name, mesh.dim)(mesh.nodes), dtype=float)


def read_nodal_csv(path, column="f") -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or column not in rows[0]:
        raise ValueError(f"{path}: no column {column!r}")
    return np.array([float(r[column]) for r in rows])


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float = 0.9
    domain: str = "interval"
    n: int = 40
    K: int = 50
    T: float = 1.0
    mu: str = "cos"
    source: str = "example1"
    delta_rel: float = 0.005
    beta: float = 1e-8
    gamma: float = 1e-8
    sigma0: float = 300.0
    upsilon0: float = 1e-4
    n_max: int = 5000
    tol_rel: float = 1e-4
    discrepancy_factor: float = 1.2
    seed: int = 0
    out: str = "results"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.domain not in ("interval", "square"):
            raise ValueError(f"domain must be 'interval' or 'square', got {self.domain!r}")
        if self.n < 2 or self.K < 1 or self.T <= 0:
            raise ValueError("need n >= 2, K >= 1 and T > 0")
        if self.delta_rel < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("delta_rel, beta and gamma must be non-negative")
        if self.sigma0 <= 0 or self.upsilon0 <= 0:
            raise ValueError("sigma0 and upsilon0 must be positive")
        if self.n_max < 0 or self.tol_rel < 0 or self.discrepancy_factor <= 0:
            raise ValueError("invalid stopping parameters")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        mu_function(self.mu)
        if not self.source.startswith("file:"):
            source_function(self.source, self.dim)

    @property
    def dim(self) -> int:
        return 1 if self.domain == "interval" else 2

    @property
    def stem(self) -> str:
        return (f"{self.source.replace('file:', 'file-').replace('/', '_')}_a{self.alpha:g}"
                f"_d{self.delta_rel:g}_b{self.beta:g}_g{self.gamma:g}_s{self.seed}")

    def mesh(self):
        return build_interval_mesh(self.n) if self.dim == 1 else build_unit_square_mesh(self.n)

    def operator(self, mesh=None, K=None) -> SubdiffusionOperator:
        mesh = self.mesh() if mesh is None else mesh
        return SubdiffusionOperator(mesh, TimeGrid(self.T, self.K if K is None else K),
                                    self.alpha, mu_function(self.mu))

    def source_field(self, mesh) -> np.ndarray:
        if self.source.startswith("file:"):
            f = read_nodal_csv(self.source[5:])
            if f.shape != (mesh.n_nodes,):
                raise ValueError(f"source file has {f.size} values, mesh has {mesh.n_nodes} nodes")
            return f
        return source_preset(self.source, mesh)

    def pd_params(self, delta=None) -> PDParams:
        return PDParams(self.beta, self.gamma, sigma0=self.sigma0, upsilon0=self.upsilon0,
                        n_max=self.n_max, tol_rel=self.tol_rel,
                        discrepancy_factor=self.discrepancy_factor, delta=delta)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser["experiment"] = {f.name: _format_value(getattr(self, f.name)) for f in fields(self)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


# Settings that belong with each source. The 1D examples use cos(2 pi t):
# the published tables are only consistent with that profile (see README).
PRESETS = {
    "example1": dict(domain="interval", mu="cos", delta_rel=0.005, beta=1e-8, gamma=1e-8),
    "example2": dict(domain="interval", mu="cos", delta_rel=0.01, beta=1e-7, gamma=1e-7),
    "example3": dict(domain="interval", mu="cos", delta_rel=0.005, beta=5e-9, gamma=5e-9),
    "example4": dict(domain="square", mu="one", delta_rel=0.001, beta=1e-10, gamma=1e-9,
                     sigma0=500.0, n_max=1000),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _format_value(v):
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name, value):
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown configuration key {name!r}")
    kind = _FIELD_TYPES[name]
    if not isinstance(value, str):
        return value
    try:
        if kind == "int":
            as_float = float(value)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if kind == "float":
            return float(value)
    except ValueError:
        raise ValueError(f"{name}: cannot parse {value!r} as {kind}") from None
    return value.strip()


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    if not parser.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    return {k: _coerce(k, v) for k, v in parser["experiment"].items()}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in parser["experiment"].items()})


def resolve_config(path=None, overrides=None) -> ExperimentConfig:
    """Merge defaults, the source preset, a config file and explicit overrides."""
    file_values = read_config_file(path) if path else {}
    cli_values = {k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None}
    source = cli_values.get("source", file_values.get("source", ExperimentConfig.source))
    merged = dict(PRESETS.get(source, {}))
    merged.update(file_values)
    merged.update(cli_values)
    return ExperimentConfig(**merged)


# ---------------------------------------------------------------------------
# results


@dataclass
class ResultRow:
    config: ExperimentConfig
    n: int | None
    e_r: float | None
    res: float | None
    stop_reason: str
    wall_ms: float | None = None
    ok: bool = True

    def csv_fields(self, timing=False) -> list:
        c = self.config
        return [_format_value(float(c.alpha)), _format_value(float(c.delta_rel)),
                _format_value(float(c.beta)), _format_value(float(c.gamma)), str(c.seed),
                "" if self.n is None else str(self.n), _fmt_opt(self.e_r), _fmt_opt(self.res),
                self.stop_reason, "" if not timing or self.wall_ms is None else f"{self.wall_ms:.1f}"]

    @property
    def sort_key(self):
        c = self.config
        return (c.alpha, -c.delta_rel, c.beta, c.gamma, c.seed)


def _fmt_opt(v):
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_nodal(path, mesh, columns: dict):
    coords = ["x", "y"][: mesh.dim]
    header = coords + list(columns)
    rows = []
    for i in range(mesh.n_nodes):
        rows.append([repr(float(v)) for v in mesh.nodes[i]]
                    + [repr(float(col[i])) for col in columns.values()])
    _write_csv(path, header, rows)


def _sidecar(path, payload):
    payload = {"version": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
               "python": platform.python_version(), **payload}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# direct problem


def direct_error(config: ExperimentConfig, K=None, J=None) -> float:
    """Relative L2 gap between the discrete final state and the eigen-expansion."""
    mesh = config.mesh()
    op = config.operator(mesh, K)
    f = config.source_field(mesh)
    u = op.forward_final(f)
    basis = EigenBasis(config.domain, J or (4 * config.n if config.dim == 1 else 16 * config.n))
    mu = mu_function(config.mu)
    mu_arg = 1.0 if config.mu == "one" else mu
    if config.source.startswith("file:"):
        coef = spectral_coefficients(f, mesh, basis)
    else:
        coef = project_function(source_function(config.source, config.dim), basis)
    ref = spectral_final_state(basis, config.alpha, config.T, mu_arg, coef, mesh.nodes)
    scale = op.norm(ref)
    return op.norm(u - ref) / (scale if scale > 0 else 1.0)


def run_direct(config: ExperimentConfig, out_dir=None, refine=False) -> dict:
    """Solve the direct problem and write the final state.

    With ``refine`` the error against the eigen-expansion is computed for
    ``K`` and ``2K`` time steps and their ratio is reported.
    """
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    mesh = config.mesh()
    op = config.operator(mesh)
    f = config.source_field(mesh)
    u = op.forward_final(f)
    stem = f"direct_{config.stem}"
    _write_nodal(out / f"{stem}.csv", mesh, {"f": f, "u": u})
    info = {"config": dataclasses.asdict(config), "norm_u": op.norm(u), "norm_f": op.norm(f),
            "wall_ms": 1e3 * (time.perf_counter() - t0)}
    if refine:
        e1 = direct_error(config, config.K)
        e2 = direct_error(config, 2 * config.K)
        info.update(error_K=e1, error_2K=e2, ratio=e1 / e2 if e2 > 0 else math.inf)
    _sidecar(out / f"{stem}.json", info)
    return info


# ---------------------------------------------------------------------------
# inversion


def invert(config: ExperimentConfig, force=False, norms=None):
    """Noise, inversion and metrics for one configuration.

    Returns ``(row, result, extras)``; ``extras`` holds the mesh, exact
    source and noisy data for dumping.
    """
    t0 = time.perf_counter()
    mesh = config.mesh()
    op = config.operator(mesh)
    f_true = config.source_field(mesh)
    g = op.forward_final(f_true)
    g_delta, delta = add_noise(g, config.delta_rel, config.seed, op)
    params = config.pd_params(delta if config.delta_rel > 0 else None)
    result = run_inversion(g_delta, params, op, f_true=f_true, norms=norms, force=force)
    wall = 1e3 * (time.perf_counter() - t0)
    row = ResultRow(config, result.n, result.metrics.final_e_r, result.metrics.final_res,
                    result.reason.value, wall, ok=result.converged)
    return row, result, {"mesh": mesh, "op": op, "f_true": f_true, "g_delta": g_delta, "delta": delta}


def run_invert(config: ExperimentConfig, out_dir=None, force=False) -> ResultRow:
    """One inversion with reconstruction, history and sidecar written to ``out_dir``."""
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    row, result, ex = invert(config, force=force)
    stem = config.stem
    _write_nodal(out / f"{stem}_reconstruction.csv", ex["mesh"],
                 {"f": result.f, "f_true": ex["f_true"], "g_delta": ex["g_delta"]})
    m = result.metrics
    _write_csv(out / f"{stem}_history.csv", ["n", "e_r", "res", "step"],
               [[str(i), _fmt_opt(e), _fmt_opt(r), _fmt_opt(s)]
                for i, (e, r, s) in enumerate(zip(m.e_r, m.res, m.step))])
    _sidecar(out / f"{stem}.json", {
        "config": dataclasses.asdict(config), "delta": ex["delta"], "n": row.n, "e_r": row.e_r,
        "res": row.res, "stop_reason": row.stop_reason, "wall_ms": row.wall_ms})
    return row


def recompute_metrics(reconstruction_csv, config: ExperimentConfig):
    """``(e_r, res)`` recomputed from a dumped reconstruction."""
    mesh = config.mesh()
    op = config.operator(mesh)
    f = read_nodal_csv(reconstruction_csv, "f")
    f_true = read_nodal_csv(reconstruction_csv, "f_true")
    g_delta = read_nodal_csv(reconstruction_csv, "g_delta")
    return error_metrics(f, f_true, g_delta, op)


# ---------------------------------------------------------------------------
# tables

_T1 = [(0.02, 5e-8, 5e-8), (0.02, 5e-8, 1e-7), (0.02, 1e-7, 5e-8), (0.02, 1e-7, 1e-7),
       (0.01, 2e-8, 2e-8), (0.01, 2e-8, 5e-8), (0.01, 5e-8, 2e-8), (0.01, 5e-8, 5e-8),
       (0.005, 1e-8, 1e-8), (0.005, 1e-8, 5e-8), (0.005, 5e-8, 1e-8), (0.005, 5e-8, 5e-8)]
_T2 = [(0.02, 1e-7, 1e-7), (0.02, 1e-7, 2e-7), (0.02, 2e-7, 1e-7), (0.02, 2e-7, 2e-7),
       (0.01, 1e-7, 1e-7), (0.01, 1e-7, 2e-7), (0.01, 2e-7, 1e-7), (0.01, 2e-7, 2e-7),
       (0.005, 1e-8, 1e-8), (0.005, 1e-8, 5e-8), (0.005, 5e-8, 1e-8), (0.005, 5e-8, 5e-8)]
_T3 = [(0.01, 5e-8, 5e-8), (0.01, 5e-8, 1e-7), (0.01, 1e-7, 5e-8), (0.01, 1e-7, 1e-7),
       (0.005, 5e-9, 5e-9), (0.005, 5e-9, 5e-8), (0.005, 5e-8, 5e-9), (0.005, 5e-8, 5e-8),
       (0.001, 1e-9, 1e-9), (0.001, 1e-9, 1e-8), (0.001, 1e-8, 1e-9), (0.001, 1e-8, 1e-8)]

TABLES = {
    "1": ("example1", _T1, (0.3, 0.9)),
    "2": ("example2", _T2, (0.3, 0.9)),
    "3": ("example3", _T3, (0.3, 0.9)),
    "2d": ("example4", [(0.001, 1e-10, 1e-9)], (0.9,)),
}


def table_configs(table_id: str, seeds, base: dict | None = None) -> list:
    """Every (alpha, delta_rel, beta, gamma, seed) configuration of a table."""
    if table_id not in TABLES:
        raise ValueError(f"unknown table {table_id!r}; choose from {sorted(TABLES)}")
    source, rows, alphas = TABLES[table_id]
    base = {k: v for k, v in (base or {}).items() if v is not None}
    out = []
    for alpha in alphas:
        for delta_rel, beta, gamma in rows:
            for seed in seeds:
                values = dict(PRESETS[source])
                values.update(base)
                values.update(source=source, alpha=alpha, delta_rel=delta_rel, beta=beta,
                              gamma=gamma, seed=int(seed))
                out.append(ExperimentConfig(**values))
    return out


def _table_worker(args):
    config, force = args
    try:
        row, _, _ = invert(config, force=force)
    except StepConditionError as exc:
        log.error("%s: %s", config.stem, exc)
        return ResultRow(config, None, None, None, "step-condition", ok=False)
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s: %s", config.stem, exc)
        return ResultRow(config, None, None, None, "solver-error", ok=False)
    return row


def run_configs(configs, force=False, workers=1) -> list:
    jobs = [(c, force) for c in configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_table_worker, jobs))
    else:
        rows = [_table_worker(j) for j in jobs]
    return sorted(rows, key=lambda r: r.sort_key)


def median_rows(rows, timing=False) -> list:
    """One row per configuration with medians over seeds; ``seed`` reads ``median``."""
    groups = {}
    for r in rows:
        c = r.config
        groups.setdefault((c.alpha, -c.delta_rel, c.beta, c.gamma), []).append(r)
    out = []
    for key in sorted(groups):
        grp = groups[key]
        c = grp[0].config

        def med(attr):
            vals = [getattr(r, attr) for r in grp if getattr(r, attr) is not None]
            vals = [v for v in vals if math.isfinite(v)]
            return statistics.median(vals) if vals else None

        n = med("n")
        reasons = "|".join(sorted({r.stop_reason for r in grp}))
        walls = [r.wall_ms for r in grp if r.wall_ms is not None]
        out.append([_format_value(float(c.alpha)), _format_value(float(c.delta_rel)),
                    _format_value(float(c.beta)), _format_value(float(c.gamma)), "median",
                    "" if n is None else _format_value(float(n)), _fmt_opt(med("e_r")),
                    _fmt_opt(med("res")), reasons,
                    f"{statistics.median(walls):.1f}" if walls and timing else ""])
    return out


def run_table(table_id: str, seeds, out_dir, force=False, workers=1, timing=False,
              base: dict | None = None) -> list:
    """Run a table and write ``table<id>.csv``, ``table<id>_median.csv`` and a sidecar.

    ``wall_ms`` is left empty unless ``timing`` is set, so that repeated
    runs with the same seeds give identical bytes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = run_configs(table_configs(table_id, seeds, base), force=force, workers=workers)
    _write_csv(out / f"table{table_id}.csv", TABLE_COLUMNS, [r.csv_fields(timing) for r in rows])
    _write_csv(out / f"table{table_id}_median.csv", TABLE_COLUMNS, median_rows(rows, timing))
    _sidecar(out / f"table{table_id}.json", {
        "table": table_id, "seeds": list(seeds), "force": force, "workers": workers,
        "configs": [dataclasses.asdict(r.config) for r in rows],
        "failed": [r.config.stem for r in rows if not r.ok],
        "wall_ms": 1e3 * (time.perf_counter() - t0)})
    return rows


def norms_report(config: ExperimentConfig) -> dict:
    """Operator and gradient norm estimates with the step-condition verdict."""
    from .primal_dual import check_step_condition

    op = config.operator()
    est = estimate_norms(op)
    params = config.pd_params()
    return {"c": est.c, "grad_norm": est.grad_norm, "converged": est.converged,
            "sigma0": config.sigma0, "upsilon0": config.upsilon0,
            "sigma0_bound": 1.0 / (3.0 * est.c**2),
            "step_condition": check_step_condition(params, est.c, est.grad_norm)}


__all__ = [
    "ExperimentConfig", "ResultRow", "PRESETS", "TABLES", "TABLE_COLUMNS", "MU_PRESETS",
    "SOURCES", "mu_function", "source_preset", "source_function", "resolve_config",
    "parse_config", "read_config_file", "run_direct", "run_invert", "invert", "run_table",
    "table_configs", "run_configs", "median_rows", "recompute_metrics", "direct_error",
    "norms_report", "read_nodal_csv",
]
