"""Configuration-driven experiment runner.

Subcommands
-----------
run         execute one scheduling method (uniform | stable | optimize |
            compare | sheets, from the config's ``method`` field)
sheets      sample Riemann sheets over a grid and export them as CSV
compare     run all three scheduling methods and emit a comparison report
locate-eps  find exceptional points in a rectangular region

Configuration is a JSON object with the keys of :class:`RunConfig`
(snake_case); unknown keys are rejected with their field path. Command-line
flags override file values. Every run writes its effective (post-default)
config, a manifest with content hashes of all artifacts, and a standalone
matplotlib plot script per run so the core stays free of plotting
dependencies. Reruns with an identical config and seed are byte-identical.

Exit codes: 0 success, 2 infeasible optimization, 1 any error.
The environment variable EPSTEER_THREADS (0 = auto) caps kernel threading.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from ._backend import BACKEND, apply_thread_cap
from .errors import ConfigError, EpsteerError
from .evolution import LoopEigensystems, mode_index, run_trace
from .hamiltonian import locate_eps, sheet_sample, table_family, two_level_family
from .optimizer import (
    ConstraintSet,
    GaConfig,
    OptimizationProblem,
    chiral_targets,
    nonchiral_targets,
    optimize,
)
from .path import CCW, CW, LoopSpec, ParameterPoint, build_loop, orient
from .scheduler import Schedule, stable_schedule, uniform_schedule

__all__ = ["RunConfig", "parse_config", "run", "main"]

_METHODS = ("uniform", "stable", "optimize", "compare", "sheets", "locate_eps")

_DEFAULTS = {
    "family": "builtin",
    "loop": {
        "kind": "circle",
        "center": [0.0, 1.0],
        "radii": [1.0, 1.0],
        "start_angle": -math.pi / 2,
        "n_intervals": 100,
        "points": None,
    },
    "method": "stable",
    "directions": ["ccw"],
    "modes": ["A"],
    "p0": 0.9,
    "purity": 0.9,
    "targets": "chiral",
    "total_time": None,
    "ga": {
        "population": 64,
        "generations": 200,
        "crossover": 0.9,
        "mutation": 0.15,
        "sparsity_weight": 1e-3,
        "seed": 0,
    },
    "sheet_grid": {"x": [-2.0, 2.0, 80], "y": [-2.0, 2.0, 80]},
    "region": [-2.0, 2.0, -2.0, 2.0],
    "out_dir": "epsteer_out",
}


def _reject_unknown(d: dict, allowed, path: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}{key}: unknown key")


def _expect(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _as_float(v, path: str) -> float:
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool), path, "expected a number")
    out = float(v)
    _expect(math.isfinite(out), path, "must be finite")
    return out


def _as_int(v, path: str) -> int:
    _expect(isinstance(v, int) and not isinstance(v, bool), path, "expected an integer")
    return int(v)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run configuration with all defaults applied."""

    family: object
    loop: dict
    method: str
    directions: tuple
    modes: tuple
    p0: float
    purity: float
    targets: object
    total_time: object
    ga: dict
    sheet_grid: dict
    region: tuple
    out_dir: str

    def effective_dict(self) -> dict:
        return {
            "family": self.family,
            "loop": dict(self.loop),
            "method": self.method,
            "directions": list(self.directions),
            "modes": list(self.modes),
            "p0": self.p0,
            "purity": self.purity,
            "targets": self.targets,
            "total_time": self.total_time,
            "ga": dict(self.ga),
            "sheet_grid": {k: list(v) for k, v in self.sheet_grid.items()},
            "region": list(self.region),
            "out_dir": self.out_dir,
        }

    def build_family(self):
        if self.family == "builtin":
            return two_level_family()
        fam = self.family
        return table_family(
            fam["points"],
            [_parse_matrix(m) for m in fam["matrices"]],
            tol=fam.get("tol", 1e-9),
        )

    def build_loop_spec(self) -> LoopSpec:
        lp = self.loop
        if lp["kind"] == "polyline":
            return LoopSpec(
                kind="polyline",
                polyline=tuple(ParameterPoint(p[0], p[1]) for p in lp["points"]),
            )
        return LoopSpec(
            kind=lp["kind"],
            center=ParameterPoint(lp["center"][0], lp["center"][1]),
            radii=(lp["radii"][0], lp["radii"][1]),
            start_angle=lp["start_angle"],
            n_intervals=lp["n_intervals"],
        )

    def build_ga_config(self) -> GaConfig:
        g = self.ga
        return GaConfig(
            population=g["population"],
            generations=g["generations"],
            crossover=g["crossover"],
            mutation=g["mutation"],
            sparsity_weight=g["sparsity_weight"],
            seed=g["seed"],
        )

    def target_map(self) -> dict:
        if self.targets == "chiral":
            return chiral_targets(self.purity)
        if self.targets == "nonchiral":
            return nonchiral_targets(self.purity)
        out = {}
        for label, (end_mode, purity) in self.targets.items():
            direction, mode = label.split("_", 1)
            out[(direction, mode)] = (end_mode, purity)
        return out


def _parse_matrix(rows):
    return np.array(
        [[complex(entry[0], entry[1]) for entry in row] for row in rows],
        dtype=complex,
    )


def _validate_family(value, path: str):
    if value == "builtin":
        return "builtin"
    _expect(isinstance(value, dict), path, "expected 'builtin' or a table object")
    _reject_unknown(value, {"kind", "points", "matrices", "tol"}, path + ".")
    _expect(value.get("kind") == "table", path + ".kind", "only 'table' is supported")
    _expect(isinstance(value.get("points"), list), path + ".points", "expected a list")
    _expect(isinstance(value.get("matrices"), list), path + ".matrices", "expected a list")
    out = {"kind": "table", "points": value["points"], "matrices": value["matrices"]}
    if "tol" in value:
        out["tol"] = _as_float(value["tol"], path + ".tol")
    return out


def _validate_loop(value, path: str) -> dict:
    _expect(isinstance(value, dict), path, "expected an object")
    allowed = {"kind", "center", "radii", "radius", "start_angle", "n_intervals", "points"}
    _reject_unknown(value, allowed, path + ".")
    out = dict(_DEFAULTS["loop"])
    if "kind" in value:
        _expect(
            value["kind"] in ("circle", "ellipse", "polyline"),
            path + ".kind",
            "must be circle|ellipse|polyline",
        )
        out["kind"] = value["kind"]
    if "center" in value:
        c = value["center"]
        _expect(isinstance(c, list) and len(c) == 2, path + ".center", "expected [x, y]")
        out["center"] = [_as_float(c[0], path + ".center[0]"), _as_float(c[1], path + ".center[1]")]
    _expect(
        not ("radius" in value and "radii" in value),
        path,
        "give either radius or radii, not both",
    )
    if "radius" in value:
        r = _as_float(value["radius"], path + ".radius")
        out["radii"] = [r, r]
    if "radii" in value:
        r = value["radii"]
        _expect(isinstance(r, list) and len(r) == 2, path + ".radii", "expected [a, b]")
        out["radii"] = [_as_float(r[0], path + ".radii[0]"), _as_float(r[1], path + ".radii[1]")]
    if "start_angle" in value:
        out["start_angle"] = _as_float(value["start_angle"], path + ".start_angle")
    if "n_intervals" in value:
        n = _as_int(value["n_intervals"], path + ".n_intervals")
        _expect(n >= 2, path + ".n_intervals", "must be >= 2")
        out["n_intervals"] = n
    if "points" in value and value["points"] is not None:
        pts = value["points"]
        _expect(isinstance(pts, list), path + ".points", "expected a list of [x, y]")
        out["points"] = [
            [_as_float(p[0], f"{path}.points[{i}][0]"), _as_float(p[1], f"{path}.points[{i}][1]")]
            for i, p in enumerate(pts)
        ]
    if out["kind"] == "polyline":
        _expect(out["points"] is not None, path + ".points", "polyline loops need points")
    return out


def _validate_direction(v, path: str) -> str:
    _expect(isinstance(v, str) and v.lower() in (CCW, CW), path, "must be ccw or cw")
    return v.lower()


def _validate_mode(v, path: str) -> str:
    _expect(isinstance(v, str) and v.upper() in ("A", "B"), path, "must be A or B")
    return v.upper()


def _validate_targets(value, path: str):
    if isinstance(value, str):
        _expect(
            value in ("chiral", "nonchiral"),
            path,
            "must be 'chiral', 'nonchiral', or a {direction_mode: [end_mode, purity]} map",
        )
        return value
    _expect(isinstance(value, dict), path, "expected a preset name or an object")
    out = {}
    for label, entry in value.items():
        p = f"{path}.{label}"
        parts = label.split("_", 1)
        _expect(len(parts) == 2, p, "label must look like ccw_A")
        _validate_direction(parts[0], p)
        _validate_mode(parts[1], p)
        _expect(
            isinstance(entry, list) and len(entry) == 2,
            p,
            "expected [end_mode, purity]",
        )
        end_mode = _validate_mode(entry[0], p + "[0]")
        purity = _as_float(entry[1], p + "[1]")
        _expect(0.0 < purity < 1.0, p + "[1]", "purity must be in (0, 1)")
        out[f"{parts[0].lower()}_{parts[1].upper()}"] = [end_mode, purity]
    return out


def _validate_ga(value, path: str) -> dict:
    _expect(isinstance(value, dict), path, "expected an object")
    allowed = {"population", "generations", "crossover", "mutation", "sparsity_weight", "seed"}
    _reject_unknown(value, allowed, path + ".")
    out = dict(_DEFAULTS["ga"])
    for key in ("population", "generations", "seed"):
        if key in value:
            out[key] = _as_int(value[key], f"{path}.{key}")
    for key in ("crossover", "mutation"):
        if key in value:
            v = _as_float(value[key], f"{path}.{key}")
            _expect(0.0 <= v <= 1.0, f"{path}.{key}", "rate must be in [0, 1]")
            out[key] = v
    if "sparsity_weight" in value:
        out["sparsity_weight"] = _as_float(value["sparsity_weight"], f"{path}.sparsity_weight")
    _expect(out["population"] >= 2, f"{path}.population", "must be >= 2")
    _expect(out["generations"] >= 0, f"{path}.generations", "must be >= 0")
    return out


def _validate_sheet_grid(value, path: str) -> dict:
    _expect(isinstance(value, dict), path, "expected an object")
    _reject_unknown(value, {"x", "y"}, path + ".")
    out = {k: list(v) for k, v in _DEFAULTS["sheet_grid"].items()}
    for axis in ("x", "y"):
        if axis in value:
            v = value[axis]
            p = f"{path}.{axis}"
            _expect(isinstance(v, list) and len(v) == 3, p, "expected [min, max, count]")
            lo = _as_float(v[0], p + "[0]")
            hi = _as_float(v[1], p + "[1]")
            n = _as_int(v[2], p + "[2]")
            _expect(hi > lo, p, "max must exceed min")
            _expect(n >= 2, p + "[2]", "count must be >= 2")
            out[axis] = [lo, hi, n]
    return out


def parse_config(path=None, overrides=None) -> RunConfig:
    """Load, default, and validate a run configuration.

    ``path`` may be None (all defaults), a file path, or a ready dict.
    ``overrides`` (flag values) take precedence over file values.
    """
    if path is None:
        raw = {}
    elif isinstance(path, dict):
        raw = dict(path)
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config: no such file: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: malformed JSON: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")

    _reject_unknown(raw, set(_DEFAULTS), "")
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            merged.setdefault("ga", {})
            merged["ga"] = dict(merged["ga"])
            merged["ga"]["seed"] = value
        elif key == "direction":
            merged["directions"] = [value]
        elif key == "mode":
            merged["modes"] = [value]
        elif key == "out":
            merged["out_dir"] = value
        else:
            merged[key] = value

    family = _validate_family(merged.get("family", _DEFAULTS["family"]), "family")
    loop = _validate_loop(merged.get("loop", {}), "loop")
    method = merged.get("method", _DEFAULTS["method"])
    _expect(method in _METHODS, "method", f"must be one of {_METHODS}")
    dirs = merged.get("directions", _DEFAULTS["directions"])
    _expect(isinstance(dirs, list) and dirs, "directions", "expected a non-empty list")
    directions = tuple(
        _validate_direction(d, f"directions[{i}]") for i, d in enumerate(dirs)
    )
    _expect(len(set(directions)) == len(directions), "directions", "duplicate entries")
    mds = merged.get("modes", _DEFAULTS["modes"])
    _expect(isinstance(mds, list) and mds, "modes", "expected a non-empty list")
    modes = tuple(_validate_mode(m, f"modes[{i}]") for i, m in enumerate(mds))
    _expect(len(set(modes)) == len(modes), "modes", "duplicate entries")

    p0 = _as_float(merged.get("p0", _DEFAULTS["p0"]), "p0")
    _expect(0.0 < p0 < 1.0, "p0", "P₀ must be less than 1 and greater than 0")
    purity = _as_float(merged.get("purity", _DEFAULTS["purity"]), "purity")
    _expect(0.0 < purity < 1.0, "purity", "must be in (0, 1)")

    targets = _validate_targets(merged.get("targets", _DEFAULTS["targets"]), "targets")
    total_time = merged.get("total_time", _DEFAULTS["total_time"])
    if total_time is not None:
        total_time = _as_float(total_time, "total_time")
        _expect(total_time > 0.0, "total_time", "must be positive")
    ga = _validate_ga(merged.get("ga", {}), "ga")
    sheet_grid = _validate_sheet_grid(merged.get("sheet_grid", {}), "sheet_grid")

    region_raw = merged.get("region", _DEFAULTS["region"])
    _expect(
        isinstance(region_raw, list) and len(region_raw) == 4,
        "region",
        "expected [xmin, xmax, ymin, ymax]",
    )
    region = tuple(_as_float(v, f"region[{i}]") for i, v in enumerate(region_raw))
    _expect(region[1] > region[0] and region[3] > region[2], "region", "must be non-empty")

    out_dir = merged.get("out_dir", _DEFAULTS["out_dir"])
    _expect(isinstance(out_dir, str) and out_dir, "out_dir", "expected a non-empty string")

    return RunConfig(
        family=family,
        loop=loop,
        method=method,
        directions=directions,
        modes=modes,
        p0=p0,
        purity=purity,
        targets=targets,
        total_time=total_time,
        ga=ga,
        sheet_grid=sheet_grid,
        region=region,
        out_dir=out_dir,
    )


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _trace_rows(trace):
    for s in trace.samples:
        yield (
            s.j,
            s.point.x,
            s.point.y,
            s.dt,
            s.t_cum,
            float(s.proportions[0]),
            float(s.proportions[1]),
            s.omega_bar.real,
            s.omega_bar.imag,
            s.zeta_a,
            s.zeta_b,
            s.speed,
        )


TRACE_HEADER = "j,x,y,dt,t_cum,P1,P2,re_omega_bar,im_omega_bar,zeta_A,zeta_B,speed"
LOOP_HEADER = "j,x,y,C_j"
SCHEDULE_HEADER = "j,dt"
COMPARE_HEADER = "method,input_mode,direction,zeta_A_end,zeta_B_end,total_time,CI"
EPS_HEADER = "x,y"


def _sheet_header(n: int) -> str:
    cols = ["x", "y"]
    for k in range(1, n + 1):
        cols += [f"re_omega_{k}", f"im_omega_{k}"]
    return ",".join(cols)


def _write_manifest(out: Path, files) -> None:
    manifest = {}
    for f in sorted(files):
        digest = hashlib.sha256((out / f).read_bytes()).hexdigest()
        manifest[f] = digest
    _write_json(out / "manifest.json", {"files": manifest})


_PLOT_TRACES = """\
#!/usr/bin/env python3
\"\"\"Plot evolution traces produced by an epsteer run (standalone).\"\"\"
import glob
import os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
files = sorted(glob.glob(os.path.join(here, "trace_*.csv")))
fig, axes = plt.subplots(len(files), 2, figsize=(9, 3 * max(len(files), 1)), squeeze=False)
for ax_row, path in zip(axes, files):
    rows = [line.split(",") for line in open(path).read().splitlines()[1:]]
    j = [int(r[0]) for r in rows]
    p1 = [float(r[5]) for r in rows]
    za = [float(r[9]) for r in rows]
    zb = [float(r[10]) for r in rows]
    t = [float(r[4]) for r in rows]
    name = os.path.basename(path)[6:-4]
    ax_row[0].plot(j, p1, label="P1")
    ax_row[0].set(xlabel="point", ylabel="P1", title=name)
    ax_row[1].plot(t, za, label="zeta_A")
    ax_row[1].plot(t, zb, label="zeta_B")
    ax_row[1].set(xlabel="t", ylabel="mode fraction", title=name)
    ax_row[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "traces.png"), dpi=150)
print("wrote traces.png")
"""

_PLOT_SHEETS = """\
#!/usr/bin/env python3
\"\"\"Plot Riemann sheets from sheets.csv (standalone).\"\"\"
import os
import numpy as np
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = [line.split(",") for line in open(os.path.join(here, "sheets.csv")).read().splitlines()[1:]]
data = np.array([[float(v) for v in r] for r in rows])
xs = np.unique(data[:, 0])
ys = np.unique(data[:, 1])
im1 = data[:, 3].reshape(ys.size, xs.size)
im2 = data[:, 5].reshape(ys.size, xs.size)
fig = plt.figure(figsize=(8, 4))
for k, sheet in enumerate((im1, im2), start=1):
    ax = fig.add_subplot(1, 2, k, projection="3d")
    X, Y = np.meshgrid(xs, ys)
    ax.plot_surface(X, Y, sheet, cmap="viridis")
    ax.set(xlabel="x", ylabel="y", title=f"Im(omega_{k})")
fig.tight_layout()
fig.savefig(os.path.join(here, "sheets.png"), dpi=150)
print("wrote sheets.png")
"""

_PLOT_COMPARE = """\
#!/usr/bin/env python3
\"\"\"Bar chart of the method comparison (standalone).\"\"\"
import os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = [line.split(",") for line in open(os.path.join(here, "comparison.csv")).read().splitlines()[1:]]
labels = [f"{r[0]}\\n{r[1]} {r[2]}" for r in rows]
ci = [float(r[6]) for r in rows]
plt.figure(figsize=(1.2 * len(rows) + 2, 4))
plt.bar(range(len(rows)), ci)
plt.xticks(range(len(rows)), labels, fontsize=7)
plt.ylabel("chiral index")
plt.ylim(0.0, 1.05)
plt.tight_layout()
plt.savefig(os.path.join(here, "comparison.png"), dpi=150)
print("wrote comparison.png")
"""


# ---------------------------------------------------------------------------
# runners


def _scenario_traces(caches, schedule, directions, modes):
    traces = {}
    for direction in directions:
        sched = schedule.reversed() if direction == CW else schedule
        for mode in modes:
            traces[(direction, mode)] = run_trace(caches[direction], None, sched, mode)
    return traces


def _summary_line(method, total_time, traces, ci_by_mode) -> str:
    ends = " ".join(
        f"{d}_{m}:zeta=({t.zeta_end[0]:.4f},{t.zeta_end[1]:.4f})"
        for (d, m), t in sorted(traces.items())
    )
    ci = (
        " ".join(f"CI_{m}={v:.4f}" for m, v in sorted(ci_by_mode.items()))
        if ci_by_mode
        else "CI=n/a"
    )
    return f"{method}: total_time={total_time:.6f} {ends} {ci}"


def run(config: RunConfig) -> int:
    """Execute a configured run and write its artifacts. Returns exit code."""
    apply_thread_cap()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    family = config.build_family()

    if config.method == "sheets":
        xs = np.linspace(*config.sheet_grid["x"][:2], int(config.sheet_grid["x"][2]))
        ys = np.linspace(*config.sheet_grid["y"][:2], int(config.sheet_grid["y"][2]))
        sheets = sheet_sample(family, (xs, ys))
        rows = []
        for i, yv in enumerate(ys):
            for j, xv in enumerate(xs):
                row = [float(xv), float(yv)]
                for k in range(sheets.shape[2]):
                    row += [sheets[i, j, k].real, sheets[i, j, k].imag]
                rows.append(row)
        _write_csv(out / "sheets.csv", _sheet_header(sheets.shape[2]), rows)
        written.append("sheets.csv")
        (out / "plot_sheets.py").write_text(_PLOT_SHEETS)
        written.append("plot_sheets.py")
        print(f"sheets: {xs.size}x{ys.size} grid -> sheets.csv")
        _finalize(out, config, written)
        return 0

    if config.method == "locate_eps":
        eps = locate_eps(family, config.region)
        _write_csv(out / "eps.csv", EPS_HEADER, [(p.x, p.y) for p in eps])
        written.append("eps.csv")
        pts = " ".join(f"({p.x:.9g},{p.y:.9g})" for p in eps) or "none"
        print(f"locate-eps: {len(eps)} found: {pts}")
        _finalize(out, config, written)
        return 0

    loop = build_loop(config.build_loop_spec())
    caches = {
        d: LoopEigensystems.build(orient(loop, d), family) for d in (CCW, CW)
    }
    _write_csv(
        out / "loop.csv",
        LOOP_HEADER,
        [
            (j, float(loop.points[j, 0]), float(loop.points[j, 1]), float(loop.arc_coords[j]))
            for j in range(loop.n_intervals + 1)
        ],
    )
    written.append("loop.csv")

    exit_code = 0
    report_obj = None

    if config.method == "uniform":
        if config.total_time is not None:
            total = config.total_time
        else:
            runner = metrics_mod.uniform_time_runner(
                caches[config.directions[0]],
                mode=config.modes[0],
                target_mode="B" if config.modes[0] == "A" else "A",
            )
            total = runner(config.purity)
        schedule = uniform_schedule(loop.n_intervals, total)
        traces = _scenario_traces(caches, schedule, config.directions, config.modes)
    elif config.method == "stable":
        schedule, _trace = stable_schedule(
            caches[CCW], None, config.modes[0], p0=config.p0
        )
        traces = _scenario_traces(caches, schedule, config.directions, config.modes)
    elif config.method == "optimize":
        constraints = ConstraintSet(loop=loop, targets=config.target_map())
        problem = OptimizationProblem(family, constraints, caches=caches)
        result = optimize(problem, config.build_ga_config())
        schedule = result.schedule
        directions = constraints.directions
        modes = constraints.input_modes
        traces = _scenario_traces(caches, schedule, directions, modes)
        report_obj = result.report_dict()
        _write_json(out / "report.json", report_obj)
        written.append("report.json")
        if not result.feasible:
            exit_code = 2
    elif config.method == "compare":
        constraints = ConstraintSet(loop=loop, targets=config.target_map())
        problem = OptimizationProblem(family, constraints, caches=caches)
        reports = metrics_mod.compare_methods(
            problem, ga_config=config.build_ga_config(), p0=config.p0
        )
        rows = []
        for rep in reports:
            for label, (za, zb) in sorted(rep.purities.items()):
                direction, mode = label.split("_", 1)
                rows.append(
                    (
                        rep.method,
                        mode,
                        direction,
                        za,
                        zb,
                        rep.total_time,
                        rep.ci.get(mode, float("nan")),
                    )
                )
        _write_csv(out / "comparison.csv", COMPARE_HEADER, rows)
        _write_json(out / "comparison.json", [rep.to_dict() for rep in reports])
        written += ["comparison.csv", "comparison.json"]
        (out / "plot_compare.py").write_text(_PLOT_COMPARE)
        written.append("plot_compare.py")
        for rep in reports:
            ci = " ".join(f"CI_{m}={v:.4f}" for m, v in sorted(rep.ci.items()))
            print(f"{rep.method}: total_time={rep.total_time:.6f} {ci}")
        _finalize(out, config, written)
        return 0
    else:  # pragma: no cover - parse_config forbids other values
        raise ConfigError(f"method: unsupported method {config.method!r}")

    for (direction, mode), trace in sorted(traces.items()):
        name = f"trace_{direction}_{mode}.csv"
        _write_csv(out / name, TRACE_HEADER, _trace_rows(trace))
        written.append(name)
    _write_json(out / "schedule.json", schedule.to_dict())
    written.append("schedule.json")
    _write_csv(
        out / "schedule.csv",
        SCHEDULE_HEADER,
        [(j, float(dt)) for j, dt in enumerate(schedule.dwells)],
    )
    written.append("schedule.csv")
    (out / "plot_run.py").write_text(_PLOT_TRACES)
    written.append("plot_run.py")

    ci_by_mode = {}
    for mode in config.modes:
        if (CCW, mode) in traces and (CW, mode) in traces:
            ci_by_mode[mode] = metrics_mod.chiral_index(
                traces[(CCW, mode)], traces[(CW, mode)]
            )
    print(_summary_line(config.method, schedule.total_time, traces, ci_by_mode))

    _finalize(out, config, written)
    return exit_code


def _finalize(out: Path, config: RunConfig, written: list) -> None:
    _write_json(out / "effective_config.json", config.effective_dict())
    written.append("effective_config.json")
    _write_manifest(out, written)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epsteer",
        description="Dwell-time scheduling near exceptional points",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sheets", "compare", "locate-eps"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--method", default=None, choices=_METHODS)
        p.add_argument("--direction", default=None, choices=[CCW, CW])
        p.add_argument("--mode", default=None, choices=["A", "B"])
        p.add_argument("--p0", default=None, type=float)
        p.add_argument("--purity", default=None, type=float)
        p.add_argument("--seed", default=None, type=int)
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {
        "method": args.method,
        "direction": args.direction,
        "mode": args.mode,
        "p0": args.p0,
        "purity": args.purity,
        "seed": args.seed,
        "out": args.out,
    }
    try:
        config = parse_config(args.config, overrides)
        if args.command == "sheets":
            config = _force_method(config, "sheets")
        elif args.command == "compare":
            config = _force_method(config, "compare")
        elif args.command == "locate-eps":
            config = _force_method(config, "locate_eps")
        return run(config)
    except EpsteerError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _force_method(config: RunConfig, method: str) -> RunConfig:
    d = config.effective_dict()
    d["method"] = method
    return RunConfig(
        family=d["family"],
        loop=d["loop"],
        method=method,
        directions=tuple(d["directions"]),
        modes=tuple(d["modes"]),
        p0=d["p0"],
        purity=d["purity"],
        targets=d["targets"],
        total_time=d["total_time"],
        ga=d["ga"],
        sheet_grid=d["sheet_grid"],
        region=tuple(d["region"]),
        out_dir=d["out_dir"],
    )


if __name__ == "__main__":
    sys.exit(main())
