"""Batch front end: scene ingestion, field/cut-locus/verify commands.

A scene is a single JSON document:

    {
      "gauge":  {"family": "euclidean"}
               | {"family": "ellipsoidal", "Q": [[4,0],[0,1]]}
               | {"family": "custom", "name": "offset_ellipsoidal", ...params},
      "curve":  {"family": "circle", "R": 1.0}
               | {"family": "ellipse", "a": 2.0, "b": 1.0}
               | {"family": "superellipse", "a": 1, "b": 1, "p": 4}
               | {"family": "fourier", "r0": 1.0, "cos": [...], "sin": [...]},
      "source": {"family": "constant", "c": 1.0}
               | {"family": "gaussian", "center": [0,0], "width": 0.5,
                  "amplitude": 1.0}
               | {"family": "polynomial", "coeffs": [[...], ...]},
      "grid":   {"nx": 128, "ny": 128, "bbox": [xmin, xmax, ymin, ymax]},
      "tolerances": {"projection_cluster": 1e-7, "cut_bisection": 1e-6,
                     "quadrature": 1e-9},
      "seed": 20260809,
      "cutlocus": {"n_theta": 512}
    }

grid.bbox is optional (default: curve bounding box inflated by 2%), as are
tolerances (defaults above) and the per-command sections.  CSV exports use
17 significant digits; identical config and seed reproduce them and the
verification report byte for byte.  Exit codes: 0 success, 1 verification
failure, 2 configuration error, 3 numeric/geometry failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import boundary, gauge as gauge_mod, render, solver as solver_mod, verify
from .errors import ConfigError, GeometryError, MinkrayError, NumericError
from .transport import RayGeometry

_TOL_RANGES = {
    "projection_cluster": (1e-12, 1e-4),
    "cut_bisection": (1e-10, 1e-4),
    "quadrature": (1e-12, 1e-6),
}
_TOL_DEFAULTS = {
    "projection_cluster": 1e-7,
    "cut_bisection": 1e-6,
    "quadrature": 1e-9,
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def build_gauge(spec):
    _require(isinstance(spec, dict), "gauge: must be an object")
    family = spec.get("family")
    try:
        if family == "euclidean":
            return gauge_mod.EuclideanGauge(int(spec.get("dim", 2)))
        if family == "ellipsoidal":
            _require("Q" in spec, "gauge.Q: required for the ellipsoidal family")
            return gauge_mod.EllipsoidalGauge(np.asarray(spec["Q"], dtype=float))
        if family == "custom":
            _require("name" in spec, "gauge.name: required for the custom family")
            factory = gauge_mod.custom_family(str(spec["name"]))
            return factory(spec)
    except ConfigError:
        raise
    except (MinkrayError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"gauge ({family}): {exc}") from exc
    raise ConfigError(f"gauge.family: unknown family {family!r}")


def build_curve(spec):
    _require(isinstance(spec, dict), "curve: must be an object")
    family = spec.get("family")
    try:
        if family == "circle":
            _require("R" in spec, "curve.R: required for the circle family")
            return boundary.Circle(float(spec["R"]))
        if family == "ellipse":
            _require("a" in spec and "b" in spec,
                     "curve.a, curve.b: required for the ellipse family")
            return boundary.Ellipse(float(spec["a"]), float(spec["b"]))
        if family == "superellipse":
            _require(all(k in spec for k in ("a", "b", "p")),
                     "curve.a, curve.b, curve.p: required for the superellipse")
            return boundary.Superellipse(float(spec["a"]), float(spec["b"]),
                                         int(spec["p"]))
        if family == "fourier":
            _require("r0" in spec, "curve.r0: required for the fourier family")
            return boundary.FourierCircle(float(spec["r0"]),
                                          spec.get("cos", ()),
                                          spec.get("sin", ()))
    except ConfigError:
        raise
    except (MinkrayError, TypeError, ValueError) as exc:
        raise ConfigError(f"curve ({family}): {exc}") from exc
    raise ConfigError(f"curve.family: unknown family {family!r}")


def build_source(spec):
    if spec is None:
        return solver_mod.ConstantSource(1.0)
    _require(isinstance(spec, dict), "source: must be an object")
    family = spec.get("family")
    try:
        if family == "constant":
            return solver_mod.ConstantSource(float(spec.get("c", 1.0)))
        if family == "gaussian":
            _require(all(k in spec for k in ("center", "width", "amplitude")),
                     "source.center, source.width, source.amplitude: required")
            return solver_mod.GaussianSource(spec["center"], float(spec["width"]),
                                             float(spec["amplitude"]))
        if family == "polynomial":
            _require("coeffs" in spec, "source.coeffs: required")
            return solver_mod.PolynomialSource(spec["coeffs"])
    except ConfigError:
        raise
    except (MinkrayError, TypeError, ValueError) as exc:
        raise ConfigError(f"source ({family}): {exc}") from exc
    raise ConfigError(f"source.family: unknown family {family!r}")


def build_tolerances(spec):
    tol = dict(_TOL_DEFAULTS)
    if spec is not None:
        _require(isinstance(spec, dict), "tolerances: must be an object")
        for key, val in spec.items():
            _require(key in _TOL_RANGES, f"tolerances.{key}: unknown tolerance")
            lo, hi = _TOL_RANGES[key]
            val = float(val)
            _require(lo <= val <= hi,
                     f"tolerances.{key}: {val} outside admissible [{lo}, {hi}]")
            tol[key] = val
    return tol


class Scene:
    """Validated scene configuration plus lazily shared numeric contexts."""

    def __init__(self, config: dict):
        _require(isinstance(config, dict), "config: top level must be an object")
        _require("gauge" in config, "gauge: section is required")
        _require("curve" in config, "curve: section is required")
        self.config = config
        self.gauge = build_gauge(config["gauge"])
        _require(self.gauge.dim == 2, "gauge.dim: scene gauges must be planar")
        self.curve = build_curve(config["curve"])
        self.source = build_source(config.get("source"))
        self.tolerances = build_tolerances(config.get("tolerances"))
        grid = config.get("grid") or {}
        _require(isinstance(grid, dict), "grid: must be an object")
        self.nx = int(grid.get("nx", 128))
        self.ny = int(grid.get("ny", 128))
        _require(self.nx >= 16 and self.ny >= 16,
                 "grid.nx, grid.ny: must be at least 16")
        self.bbox = tuple(float(b) for b in grid["bbox"]) if "bbox" in grid else None
        if self.bbox is not None:
            _require(len(self.bbox) == 4 and self.bbox[0] < self.bbox[1]
                     and self.bbox[2] < self.bbox[3],
                     "grid.bbox: expected [xmin, xmax, ymin, ymax]")
        self.seed = int(config.get("seed", 20260809))
        self.n_theta = int((config.get("cutlocus") or {}).get("n_theta", 512))
        _require(self.n_theta >= 16, "cutlocus.n_theta: must be at least 16")
        self._solver = None

    @property
    def solver(self) -> solver_mod.TransportSolver:
        if self._solver is None:
            from .distance import Projector
            projector = Projector(
                self.gauge, self.curve,
                cluster_tol=self.tolerances["projection_cluster"])
            self._solver = solver_mod.TransportSolver(
                self.gauge, self.curve, self.source,
                quad_abs=self.tolerances["quadrature"],
                cut_tol=self.tolerances["cut_bisection"],
                projector=projector,
                geometry=RayGeometry(self.gauge, self.curve,
                                     projector=projector))
        return self._solver

    def grid_bbox(self):
        return self.bbox if self.bbox is not None else solver_mod.auto_bbox(self.curve)


def load_scene(path) -> Scene:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return Scene(doc)


# -- output helpers ----------------------------------------------------------------


def _write_field_csv(path, grids, names):
    ref = grids[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", *names, "singular"])
        for iy, y in enumerate(ref.ys):
            for ix, x in enumerate(ref.xs):
                if not ref.inside_mask[iy, ix]:
                    continue
                row = [_fmt(x), _fmt(y)]
                row += [_fmt(g.values[iy, ix]) for g in grids]
                row.append("1" if ref.singular_mask[iy, ix] else "0")
                writer.writerow(row)


def _write_cutlocus_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "cut_x", "cut_y", "tau", "kappa_tilde"])
        for theta, cut, tau, kt in rows:
            writer.writerow([_fmt(theta), _fmt(cut[0]), _fmt(cut[1]),
                             _fmt(tau), _fmt(kt)])


def _manifest(scene: Scene, command, outputs, stats, wall_time_s):
    return {
        "command": command,
        "config": scene.config,
        "tolerances": scene.tolerances,
        "grid": {"nx": scene.nx, "ny": scene.ny, "bbox": list(scene.grid_bbox())},
        "seed": scene.seed,
        "outputs": sorted(outputs),
        "stats": stats,
        # wall time is the one non-reproducible field in any output
        "wall_time_s": round(wall_time_s, 3),
    }


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------------


def cmd_distance(scene: Scene, out: Path, svg: bool):
    t0 = time.perf_counter()
    d_grid = scene.solver.distance_grid(scene.nx, scene.ny, bbox=scene.grid_bbox())
    outputs = ["distance.csv"]
    _write_field_csv(out / "distance.csv", [d_grid], ["d"])
    if svg:
        render.save_heatmap(d_grid, out / "distance.svg", title="boundary distance")
        outputs.append("distance.svg")
    stats = {
        "inside_cells": int(d_grid.inside_mask.sum()),
        "singular_cells": int(d_grid.singular_mask.sum()),
    }
    _write_json(out / "manifest.json",
                _manifest(scene, "distance", outputs, stats,
                          time.perf_counter() - t0))
    return 0


def cmd_cutlocus(scene: Scene, out: Path, svg: bool):
    t0 = time.perf_counter()
    rows = scene.solver.geometry.cut_locus(
        scene.n_theta, tol=scene.tolerances["cut_bisection"])
    outputs = ["cutlocus.csv"]
    _write_cutlocus_csv(out / "cutlocus.csv", rows)
    if svg:
        render.save_cutlocus(scene.curve, rows, out / "cutlocus.svg")
        outputs.append("cutlocus.svg")
    taus = [r[2] for r in rows]
    stats = {"n_theta": scene.n_theta, "tau_min": min(taus), "tau_max": max(taus)}
    _write_json(out / "manifest.json",
                _manifest(scene, "cutlocus", outputs, stats,
                          time.perf_counter() - t0))
    return 0


def cmd_solve(scene: Scene, out: Path, svg: bool):
    t0 = time.perf_counter()
    d_grid, v_grid = scene.solver.solve_grid(scene.nx, scene.ny,
                                             bbox=scene.grid_bbox())
    outputs = ["solution.csv"]
    _write_field_csv(out / "solution.csv", [d_grid, v_grid], ["d", "v"])
    if svg:
        render.save_heatmap(d_grid, out / "d_field.svg", title="boundary distance")
        render.save_heatmap(v_grid, out / "v_field.svg", title="transport density")
        outputs += ["d_field.svg", "v_field.svg"]
    stats = {
        "inside_cells": int(v_grid.inside_mask.sum()),
        "singular_cells": int(v_grid.singular_mask.sum()),
        "v_max": float(np.nanmax(v_grid.values)) if v_grid.inside_mask.any() else 0.0,
        "tau_table": scene.solver.tau_table.stats(),
    }
    _write_json(out / "manifest.json",
                _manifest(scene, "solve", outputs, stats,
                          time.perf_counter() - t0))
    return 0


_VERIFY_KNOBS = ("n_bumps", "quad_cells", "n_saddle", "n_eikonal", "n_repr",
                 "n_ode", "n_backward", "n_lip", "n_mbound")


def cmd_verify(scene: Scene, out: Path, svg: bool, perturb_v: float):
    knobs = {}
    section = scene.config.get("verify") or {}
    _require(isinstance(section, dict), "verify: must be an object")
    for key, val in section.items():
        _require(key in _VERIFY_KNOBS, f"verify.{key}: unknown option")
        knobs[key] = int(val)
    report = verify.run_verification(scene.solver, seed=scene.seed,
                                     perturb_v=perturb_v, **knobs)
    (out / "report.json").write_text(report.to_json() + "\n")
    for entry in report.entries:
        status = "pass" if entry.passed else "FAIL"
        print(f"{entry.name:16s} {status}  max_error={entry.max_error:.3e} "
              f"tol={entry.tolerance:.1e} n={entry.samples}")
    return 0 if report.passed else 1


def cmd_constants(scene: Scene, out: Path, svg: bool):
    consts = scene.gauge.constants(512).as_dict()
    _write_json(out / "constants.json", consts)
    print(json.dumps(consts, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="minkray",
        description="Minkowski distance, cut loci and transport densities")
    parser.add_argument("command",
                        choices=["distance", "cutlocus", "solve", "verify",
                                 "constants"])
    parser.add_argument("--config", required=True, help="scene JSON document")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--nx", type=int, help="override grid.nx")
    parser.add_argument("--ny", type=int, help="override grid.ny")
    parser.add_argument("--seed", type=int, help="override the scene seed")
    parser.add_argument("--perturb-v", type=float, default=1.0,
                        help="scale the density in the weak-form check")
    svg_group = parser.add_mutually_exclusive_group()
    svg_group.add_argument("--svg", dest="svg", action="store_true",
                           default=True)
    svg_group.add_argument("--no-svg", dest="svg", action="store_false")
    args = parser.parse_args(argv)

    try:
        scene = load_scene(args.config)
        if args.nx is not None:
            scene.nx = args.nx
        if args.ny is not None:
            scene.ny = args.ny
        if args.seed is not None:
            scene.seed = args.seed
        if scene.nx < 16 or scene.ny < 16:
            raise ConfigError("grid.nx, grid.ny: must be at least 16")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {
            "distance": cmd_distance,
            "cutlocus": cmd_cutlocus,
            "solve": cmd_solve,
            "constants": cmd_constants,
        }
        if args.command == "verify":
            return cmd_verify(scene, out, args.svg, args.perturb_v)
        return handler[args.command](scene, out, args.svg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, GeometryError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
