"""Experiment grid runner.

A config is one JSON document with top-level keys ``target``, ``grid``,
``sampling``, ``metrics`` and ``output``. Parsing validates every field, fills
defaults and produces a canonical form; ``config_hash`` is the SHA-256 of the
canonical JSON of everything except ``output``.

Each grid cell is ``(schedule, sampler, guidance, seed)``. The random stream of
a cell is ``RngStream(master_seed, seed)``: cells sharing a seed start from the
same noise, so sampler and guidance comparisons are paired.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import itertools
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .guidance import GuidanceAttachment
from .metrics import GaussianStats, fit_gaussian, frechet_gaussian, surrogate_score
from .rng import RngStream
from .samplers import (
    ChurnParams,
    CHURN_PRESETS,
    sample_ancestral,
    sample_ddim,
    sample_euler_maruyama,
    sample_langevin_annealed,
    sample_ode,
    sample_stochastic_churn,
)
from .schedules import (
    make_continuous,
    make_cosine,
    make_geometric_sigmas,
    make_linear,
    make_sigmoid,
)
from .targets import CLEAN, GaussianMixture, benchmark_mixture, class_posterior, standard_normal, standardize

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "schedule", "sampler", "guidance", "label", "scale", "seed",
    "n_samples", "metric", "value", "nfe", "wall_clock_ms", "config_hash",
]
TIMING_COLUMNS = ("wall_clock_ms",)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------
# config schema: kind -> defaults (types follow the defaults)
# ---------------------------------------------------------------------

SCHEDULE_KINDS = {
    "linear": {"factor": 1.0, "T": 1000},
    "cosine": {"T": 1000, "s_offset": 0.008},
    "sigmoid": {"T": 1000, "gamma_min": -6.0, "gamma_max": 6.0},
    "geometric": {"sigma_1": 10.0, "sigma_L": 0.01, "L": 10},
    "vp": {"beta_min": 0.1, "beta_d": 19.9, "eps_s": 1e-3},
    "ve": {"sigma_min": 0.01, "sigma_max": 50.0},
    "karras": {"sigma_min": 0.002, "sigma_max": 80.0, "rho": 7.0},
}
DISCRETE = {"linear", "cosine", "sigmoid"}
LADDER = {"geometric"}
CONTINUOUS = {"vp", "ve", "karras"}

SAMPLER_KINDS = {
    "ancestral": {"variance": "beta"},
    "ddim": {"stride": 1},
    "langevin": {"eps_scale": 5e-5, "inner_T": 200},
    "euler_maruyama": {"steps": 1000},
    "ode_euler": {"steps": 256},
    "ode_heun": {"steps": 128},
    "churn": {"steps": 128, "s_churn": 0.0, "s_tmin": 0.0, "s_tmax": 1e30, "s_noise": 1.0},
}
SAMPLER_SCHEDULES = {
    "ancestral": DISCRETE,
    "ddim": DISCRETE,
    "langevin": LADDER,
    "euler_maruyama": CONTINUOUS,
    "ode_euler": CONTINUOUS,
    "ode_heun": CONTINUOUS,
    "churn": CONTINUOUS,
}
GUIDED_SAMPLERS = {"ancestral", "ddim"}

GUIDANCE_KINDS = {
    "none": {},
    "null": {},
    "exact": {"label": 0, "scale": 1.0},
    "untrained": {"label": 0, "scale": 1.0, "seed": 0},
}

METRICS = ("surrogate_score", "frechet", "label_fraction", "mean_error", "var_rel_error", "finite_fraction")
DEFAULT_METRICS = ["surrogate_score", "frechet"]

SAMPLING_DEFAULTS = {"n_samples": 10000, "seeds": [0, 1, 2], "master_seed": 0}
OUTPUT_DEFAULTS = {"dir": "runs", "emit_trajectories": False}

# Settings at which every sampler reproduces the benchmark mixture's moments.
REFERENCE = {
    "ancestral": ({"kind": "linear"}, {"kind": "ancestral"}),
    "ddim": ({"kind": "linear"}, {"kind": "ddim"}),
    "langevin": ({"kind": "geometric"}, {"kind": "langevin"}),
    "euler_maruyama": ({"kind": "vp"}, {"kind": "euler_maruyama"}),
    "ode_euler": ({"kind": "vp"}, {"kind": "ode_euler"}),
    "ode_heun": ({"kind": "karras"}, {"kind": "ode_heun"}),
    "churn": ({"kind": "karras"}, {"kind": "churn", "preset": "cifar10_vp"}),
}


def _coerce(where, key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}.{key}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
            raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(float(value)):
            raise ConfigError(f"{where}.{key}: expected a finite number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}.{key}: expected a string")
        return value
    return value


def _check_keys(where, block, allowed):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(repr(k) for k in unknown)}")


def _auto_name(kind, params, defaults):
    changed = [f"{k}={_fmt(params[k])}" for k in sorted(params) if params[k] != defaults.get(k)]
    return f"{kind}({','.join(changed)})" if changed else kind


def _fmt(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def _normalize_item(where, item, kinds, extra_keys=()):
    if not isinstance(item, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = item.get("kind", item.get("classifier"))
    if kind not in kinds:
        raise ConfigError(f"{where}.kind: unknown kind {kind!r}; expected one of {sorted(kinds)}")
    defaults = kinds[kind]
    tag = "classifier" if "classifier" in item else "kind"
    _check_keys(where, item, {tag, "name", *defaults, *extra_keys})
    params = {k: _coerce(where, k, item.get(k, d), d) for k, d in defaults.items()}
    return kind, params


def _normalize_schedule(i, item):
    where = f"grid.schedules[{i}]"
    kind, p = _normalize_item(where, item, SCHEDULE_KINDS)
    try:
        build_schedule({"kind": kind, **p})
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    name = item.get("name") or _auto_name(kind, p, SCHEDULE_KINDS[kind])
    return {"name": name, "kind": kind, **p}


def _normalize_sampler(i, item):
    where = f"grid.samplers[{i}]"
    item = dict(item)
    preset = item.pop("preset", None)
    if preset is not None:
        if item.get("kind") != "churn":
            raise ConfigError(f"{where}.preset: only churn samplers take a preset")
        if preset not in CHURN_PRESETS:
            raise ConfigError(f"{where}.preset: unknown preset {preset!r}; expected one of {sorted(CHURN_PRESETS)}")
        cp = CHURN_PRESETS[preset]
        for k in ("s_churn", "s_tmin", "s_tmax", "s_noise"):
            item.setdefault(k, getattr(cp, k))
    kind, p = _normalize_item(where, item, SAMPLER_KINDS)
    if kind == "ancestral" and p["variance"] not in ("beta", "posterior"):
        raise ConfigError(f"{where}.variance: must be 'beta' or 'posterior'")
    if "steps" in p and p["steps"] < (2 if kind != "euler_maruyama" else 1):
        raise ConfigError(f"{where}.steps: too few steps")
    if kind == "ddim" and p["stride"] < 1:
        raise ConfigError(f"{where}.stride: must be >= 1")
    if kind == "langevin" and (p["eps_scale"] <= 0 or p["inner_T"] < 1):
        raise ConfigError(f"{where}: need eps_scale > 0 and inner_T >= 1")
    if kind == "churn":
        try:
            ChurnParams(p["s_churn"], p["s_tmin"], p["s_tmax"], p["s_noise"])
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if item.get("name"):
        name = item["name"]
    elif preset is not None:
        name = f"churn[{preset}]" if p["steps"] == SAMPLER_KINDS["churn"]["steps"] else f"churn[{preset}](steps={p['steps']})"
    else:
        name = _auto_name(kind, p, SAMPLER_KINDS[kind])
    return {"name": name, "kind": kind, **p}


def _normalize_guidance(i, item):
    where = f"grid.guidance[{i}]"
    if "classifier" not in item:
        raise ConfigError(f"{where}.classifier: required")
    kind, p = _normalize_item(where, item, GUIDANCE_KINDS)
    if "scale" in p and p["scale"] < 0:
        raise ConfigError(f"{where}.scale: must be >= 0")
    if "label" in p and p["label"] < 0:
        raise ConfigError(f"{where}.label: must be >= 0")
    name = item.get("name") or _auto_name(kind, p, GUIDANCE_KINDS[kind])
    return {"name": name, "classifier": kind, **p}


def _normalize_target(block):
    _check_keys("target", block, {"weights", "means", "variances", "preset", "dim", "offset", "standardize"})
    preset = block.get("preset")
    if preset is not None:
        if {"weights", "means", "variances"} & set(block):
            raise ConfigError("target: give either a preset or explicit weights/means/variances")
        dim = _coerce("target", "dim", block.get("dim", 2), 2)
        if preset == "benchmark":
            gmm = benchmark_mixture(dim, _coerce("target", "offset", block.get("offset", 2.0), 2.0))
        elif preset == "standard_normal":
            gmm = standard_normal(dim)
        else:
            raise ConfigError(f"target.preset: unknown preset {preset!r}")
    else:
        missing = [k for k in ("weights", "means", "variances") if k not in block]
        if missing:
            raise ConfigError(f"target: missing {', '.join(missing)}")
        try:
            gmm = GaussianMixture(block["weights"], block["means"], block["variances"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"target.{exc}") from None
    if block.get("standardize", False):
        gmm = standardize(gmm)
    return gmm.to_dict()


def parse_config(text: str | dict) -> dict:
    """Validate a config document and return its canonical form with defaults filled."""
    if isinstance(text, dict):
        doc = copy.deepcopy(text)
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    _check_keys("config", doc, {"target", "grid", "sampling", "metrics", "output"})
    for key in ("target", "grid"):
        if key not in doc:
            raise ConfigError(f"config: missing required key {key!r}")
    target = _normalize_target(doc["target"])

    grid = doc["grid"]
    _check_keys("grid", grid, {"schedules", "samplers", "guidance"})
    for key in ("schedules", "samplers"):
        if not isinstance(grid.get(key), list) or not grid[key]:
            raise ConfigError(f"grid.{key}: must be a non-empty list")
    guidance = grid.get("guidance", [{"classifier": "none"}])
    if not isinstance(guidance, list) or not guidance:
        raise ConfigError("grid.guidance: must be a non-empty list")
    out_grid = {
        "schedules": [_normalize_schedule(i, s) for i, s in enumerate(grid["schedules"])],
        "samplers": [_normalize_sampler(i, s) for i, s in enumerate(grid["samplers"])],
        "guidance": [_normalize_guidance(i, g) for i, g in enumerate(guidance)],
    }
    K = len(target["weights"])
    for i, g in enumerate(out_grid["guidance"]):
        if g.get("label", 0) >= K:
            raise ConfigError(f"grid.guidance[{i}].label: {g['label']} out of range for K={K}")
    for axis, items in out_grid.items():
        names = [it["name"] for it in items]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ConfigError(f"grid.{axis}: duplicate name(s) {', '.join(dup)}; set 'name' explicitly")

    sampling_in = doc.get("sampling", {})
    _check_keys("sampling", sampling_in, SAMPLING_DEFAULTS)
    n = _coerce("sampling", "n_samples", sampling_in.get("n_samples", SAMPLING_DEFAULTS["n_samples"]), 0)
    if n < 2:
        raise ConfigError("sampling.n_samples: must be >= 2")
    seeds = sampling_in.get("seeds", SAMPLING_DEFAULTS["seeds"])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("sampling.seeds: need at least one seed")
    seeds = [_coerce("sampling", "seeds", s, 0) for s in seeds]
    if any(s < 0 for s in seeds) or len(set(seeds)) != len(seeds):
        raise ConfigError("sampling.seeds: seeds must be distinct non-negative integers")
    master = _coerce("sampling", "master_seed", sampling_in.get("master_seed", 0), 0)
    if master < 0:
        raise ConfigError("sampling.master_seed: must be >= 0")

    metrics = doc.get("metrics", DEFAULT_METRICS)
    if not isinstance(metrics, list) or not metrics:
        raise ConfigError("metrics: must be a non-empty list")
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise ConfigError(f"metrics: unknown metric(s) {', '.join(map(str, bad))}; expected from {list(METRICS)}")
    metrics = [m for m in METRICS if m in metrics]

    output_in = doc.get("output", {})
    _check_keys("output", output_in, OUTPUT_DEFAULTS)
    output = {k: _coerce("output", k, output_in.get(k, d), d) for k, d in OUTPUT_DEFAULTS.items()}

    return {
        "target": target,
        "grid": out_grid,
        "sampling": {"n_samples": n, "seeds": seeds, "master_seed": master},
        "metrics": metrics,
        "output": output,
    }


def serialize_config(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2)


def config_hash(cfg: dict) -> str:
    semantic = {k: v for k, v in cfg.items() if k != "output"}
    canon = json.dumps(semantic, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------
# building objects from normalized specs
# ---------------------------------------------------------------------


def build_schedule(item: dict):
    kind = item["kind"]
    p = {k: v for k, v in item.items() if k not in ("kind", "name")}
    if kind == "linear":
        return make_linear(p["factor"], p["T"])
    if kind == "cosine":
        return make_cosine(p["T"], p["s_offset"])
    if kind == "sigmoid":
        return make_sigmoid(p["T"], p["gamma_min"], p["gamma_max"])
    if kind == "geometric":
        return make_geometric_sigmas(p["sigma_1"], p["sigma_L"], p["L"])
    return make_continuous(kind, **p)


def build_guidance(item: dict, gmm: GaussianMixture):
    c = item["classifier"]
    if c == "none":
        return None
    if c == "null":
        return GuidanceAttachment.null()
    if c == "exact":
        return GuidanceAttachment.exact(item["label"], item["scale"])
    return GuidanceAttachment.untrained(gmm, item["label"], item["scale"], item["seed"])


def compatible(schedule: dict, sampler: dict, guidance: dict) -> str | None:
    """Reason the combination cannot run, or ``None``."""
    if schedule["kind"] not in SAMPLER_SCHEDULES[sampler["kind"]]:
        return f"sampler {sampler['kind']} cannot use a {schedule['kind']} schedule"
    if guidance["classifier"] != "none" and sampler["kind"] not in GUIDED_SAMPLERS:
        return f"guidance is only defined for {sorted(GUIDED_SAMPLERS)} samplers"
    return None


def run_sampler(gmm, schedule_item, sampler_item, guidance, n, rng, callback=None):
    """Dispatch one sampler call; returns a Trajectory."""
    sched = build_schedule(schedule_item)
    kind = sampler_item["kind"]
    p = sampler_item
    if kind == "ancestral":
        return sample_ancestral(gmm, sched, n, rng, guidance=guidance, variance=p["variance"], callback=callback)
    if kind == "ddim":
        return sample_ddim(gmm, sched, n, rng, guidance=guidance, stride=p["stride"], callback=callback)
    if kind == "langevin":
        return sample_langevin_annealed(gmm, sched, p["eps_scale"], p["inner_T"], n, rng, callback=callback)
    if kind == "euler_maruyama":
        return sample_euler_maruyama(gmm, sched, p["steps"], n, rng, callback=callback)
    grid = sched.time_steps(p["steps"])
    if kind in ("ode_euler", "ode_heun"):
        return sample_ode(gmm, sched, grid, kind[4:], n, rng, callback=callback)
    cp = ChurnParams(p["s_churn"], p["s_tmin"], p["s_tmax"], p["s_noise"])
    return sample_stochastic_churn(gmm, sched, grid, cp, n, rng, callback=callback)


def reference_specs(sampler: str, **overrides) -> tuple[dict, dict]:
    """Normalized (schedule, sampler) specs of a sampler's reference setting."""
    sch, smp = REFERENCE[sampler]
    smp = {**smp, **overrides}
    return _normalize_schedule(0, sch), _normalize_sampler(0, smp)


def compute_metrics(names, gmm: GaussianMixture, x: np.ndarray, label: int | None) -> dict:
    finite = np.all(np.isfinite(x), axis=1)
    xf = x[finite]
    out = {}
    post = class_posterior(gmm, CLEAN, xf) if xf.shape[0] else None
    for name in names:
        if name == "finite_fraction":
            out[name] = float(finite.mean())
        elif xf.shape[0] < 2:
            out[name] = math.nan
        elif name == "surrogate_score":
            out[name] = surrogate_score(post)
        elif name == "frechet":
            out[name] = frechet_gaussian(fit_gaussian(xf), GaussianStats.of_mixture(gmm))
        elif name == "label_fraction":
            out[name] = float(np.mean(post.argmax(axis=1) == (label or 0)))
        elif name == "mean_error":
            out[name] = float(np.max(np.abs(xf.mean(axis=0) - gmm.mean())))
        elif name == "var_rel_error":
            out[name] = float(np.max(np.abs(xf.var(axis=0, ddof=1) / gmm.marginal_variance() - 1.0)))
    return out


# ---------------------------------------------------------------------
# running
# ---------------------------------------------------------------------


@dataclass
class RunRecord:
    schedule: str
    sampler: str
    guidance: str
    label: int | None
    scale: float | None
    seed: int
    n_samples: int
    metrics: dict
    nfe: int
    wall_clock_ms: float
    config_hash: str
    tool_version: str = __version__
    cell_index: int = 0

    def rows(self):
        for name, value in self.metrics.items():
            yield {
                "schedule": self.schedule,
                "sampler": self.sampler,
                "guidance": self.guidance,
                "label": "" if self.label is None else self.label,
                "scale": "" if self.scale is None else repr(float(self.scale)),
                "seed": self.seed,
                "n_samples": self.n_samples,
                "metric": name,
                "value": repr(float(value)),
                "nfe": self.nfe,
                "wall_clock_ms": f"{self.wall_clock_ms:.3f}",
                "config_hash": self.config_hash,
            }


@dataclass
class Cell:
    index: int
    schedule: dict
    sampler: dict
    guidance: dict
    seed: int
    skip: str | None = None


@dataclass
class GridResult:
    records: list
    skipped: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    config: dict | None = None
    config_hash: str = ""


def grid_cells(cfg: dict) -> list[Cell]:
    g = cfg["grid"]
    cells = []
    for i, (sch, smp, gd, seed) in enumerate(
        itertools.product(g["schedules"], g["samplers"], g["guidance"], cfg["sampling"]["seeds"])
    ):
        cells.append(Cell(i, sch, smp, gd, seed, compatible(sch, smp, gd)))
    return cells


def run_cell(cfg: dict, cell: Cell, chash: str, traj_dir: str | None = None) -> RunRecord:
    gmm = GaussianMixture(**cfg["target"])
    guidance = build_guidance(cell.guidance, gmm)
    n = cfg["sampling"]["n_samples"]
    rng = RngStream(cfg["sampling"]["master_seed"], cell.seed)
    rows = [] if traj_dir else None
    cb = None
    if rows is not None:
        def cb(step, sigma, x):
            rows.append((step, sigma, x[0].copy()))
    t0 = time.perf_counter_ns()
    traj = run_sampler(gmm, cell.schedule, cell.sampler, guidance, n, rng, callback=cb)
    ms = (time.perf_counter_ns() - t0) / 1e6
    if rows is not None:
        write_trajectory_csv(os.path.join(traj_dir, f"cell{cell.index:05d}.csv"), rows)
    label = cell.guidance.get("label")
    metrics = compute_metrics(cfg["metrics"], gmm, traj.final, label)
    return RunRecord(
        schedule=cell.schedule["name"],
        sampler=cell.sampler["name"],
        guidance=cell.guidance["name"],
        label=label,
        scale=cell.guidance.get("scale"),
        seed=cell.seed,
        n_samples=n,
        metrics=metrics,
        nfe=traj.nfe,
        wall_clock_ms=ms,
        config_hash=chash,
        cell_index=cell.index,
    )


def run_grid(cfg: dict, threads: int = 1, write: bool = True, out_dir: str | None = None) -> GridResult:
    """Run every compatible cell; optionally write ``results.csv`` and ``summary.json``."""
    chash = config_hash(cfg)
    out_dir = out_dir or cfg["output"]["dir"]
    traj_dir = None
    if write:
        try:
            os.makedirs(out_dir, exist_ok=True)
            if cfg["output"]["emit_trajectories"]:
                traj_dir = os.path.join(out_dir, "trajectories")
                os.makedirs(traj_dir, exist_ok=True)
        except OSError as exc:
            raise OSError(f"output directory {out_dir!r} is not writable: {exc}") from exc
    cells = grid_cells(cfg)
    runnable = [c for c in cells if c.skip is None]
    result = GridResult([], config=cfg, config_hash=chash)
    result.skipped = [_cell_id(c) | {"reason": c.skip} for c in cells if c.skip is not None]

    def job(cell):
        try:
            return run_cell(cfg, cell, chash, traj_dir)
        except Exception as exc:  # a failing cell must not stop the grid
            log.exception("cell %d failed", cell.index)
            return _cell_id(cell) | {"error": f"{type(exc).__name__}: {exc}"}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(job, runnable))
    else:
        outcomes = [job(c) for c in runnable]
    for out in outcomes:
        (result.records if isinstance(out, RunRecord) else result.errors).append(out)
    if write:
        write_results_csv(os.path.join(out_dir, "results.csv"), result.records)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result


def _cell_id(c: Cell) -> dict:
    return {
        "cell": c.index,
        "schedule": c.schedule["name"],
        "sampler": c.sampler["name"],
        "guidance": c.guidance["name"],
        "seed": c.seed,
    }


def results_csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rec in sorted(records, key=lambda r: r.cell_index):
        for row in rec.rows():
            w.writerow(row)
    return buf.getvalue()


def write_results_csv(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(results_csv_text(records))


def write_trajectory_csv(path, rows):
    d = rows[0][2].shape[0] if rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "sigma"] + [f"x{j}" for j in range(d)])
        for step, sigma, x in rows:
            w.writerow([step, repr(float(sigma))] + [repr(float(v)) for v in x])


def aggregate(records) -> list[dict]:
    """Mean, std and 95% normal CI half-width across seeds per (schedule, sampler, guidance, metric)."""
    groups: dict = {}
    for rec in sorted(records, key=lambda r: r.cell_index):
        for name, value in rec.metrics.items():
            groups.setdefault((rec.schedule, rec.sampler, rec.guidance, name), []).append(value)
    out = []
    for (sch, smp, gd, name), vals in groups.items():
        v = np.asarray(vals, dtype=np.float64)
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append({
            "schedule": sch, "sampler": smp, "guidance": gd, "metric": name,
            "mean": float(v.mean()), "std": std, "n_seeds": int(v.size),
            "ci95": 1.96 * std / math.sqrt(v.size),
        })
    return out


def summary(result: GridResult) -> dict:
    return {
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "host": platform.node(),
        "config": result.config,
        "config_hash": result.config_hash,
        "n_records": len(result.records),
        "skipped": result.skipped,
        "errors": result.errors,
        "aggregates": aggregate(result.records),
    }


def bench_table(records) -> tuple[str, str]:
    """Per-sampler median wall-clock and NFE, fastest first; returns ``(csv_text, aligned_text)``."""
    if not records:
        raise ValueError("bench_table needs at least one record")
    by: dict = {}
    for r in records:
        by.setdefault(r.sampler, []).append(r)
    rows = []
    for name, rs in by.items():
        rows.append((
            name,
            len(rs),
            float(np.median([r.wall_clock_ms for r in rs])),
            float(np.median([r.nfe for r in rs])),
        ))
    rows.sort(key=lambda r: (r[2], r[0]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sampler", "runs", "median_wall_clock_ms", "median_nfe"])
    for name, runs, ms, nfe in rows:
        w.writerow([name, runs, f"{ms:.3f}", f"{nfe:g}"])
    width = max(len("sampler"), *(len(r[0]) for r in rows))
    lines = [f"{'sampler':<{width}}  {'runs':>5}  {'median ms':>12}  {'median NFE':>10}"]
    lines.append("-" * len(lines[0]))
    for name, runs, ms, nfe in rows:
        lines.append(f"{name:<{width}}  {runs:>5d}  {ms:>12.3f}  {nfe:>10g}")
    return buf.getvalue(), "\n".join(lines)


def bench(cfg: dict, repeats: int = 5, threads: int = 1) -> list:
    records = []
    for _ in range(repeats):
        records.extend(run_grid(cfg, threads=threads, write=False).records)
    return records
