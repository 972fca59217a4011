"""Command-line driver.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides, validates every field before doing any work, runs one pipeline
and writes its data files plus ``run_report.json`` into the output
directory (``--output-dir``, else ``$RESTPROJ_OUTPUT_DIR``, else
``./restproj-out``).

Exit codes: 0 success, 1 acceptance check failed (``calibrate``,
``mmp-run``), 2 invalid configuration, 3 resource failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import analysis, construct, io, projection
from .plots import emit_plots

OUTPUT_ENV = "RESTPROJ_OUTPUT_DIR"
KINDS = ("gen-set", "gen-family", "tube-profile", "smallness", "worst-case",
         "project", "mmp-run", "calibrate")


class ConfigError(ValueError):
    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.field = name


def _dyadic(a: int, b: int, base: float = 2.0) -> List[float]:
    return [base ** -k for k in range(a, b + 1)]


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    workers: int = 1
    output_dir: Optional[str] = None
    plots: bool = False
    # planar or spatial grid set
    set_kind: str = "percolation"
    set_file: Optional[str] = None
    d: int = 2
    M: int = 4
    N: int = 8
    depth: int = 4
    pattern: Optional[List[int]] = None
    axis: int = 2
    alpha: Optional[float] = None
    # tube profile
    widths: List[float] = field(default_factory=lambda: _dyadic(1, 5, 4.0))
    grid_density: float = 1.0
    num_random_tubes: int = 0
    # projection family
    family_kind: str = "percolation"
    family_file: Optional[str] = None
    family_M: int = 4
    family_N: int = 8
    family_depth: int = 4
    family_size: int = 500
    family_normal: List[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])
    # smallness
    xi: List[float] = field(default_factory=lambda: [1.0, 0.0, 0.0])
    rhos: List[float] = field(default_factory=lambda: _dyadic(2, 6))
    xi_grid_size: int = 500
    refine_steps: int = 2
    # projections and experiments
    direction: List[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])
    delta: Optional[float] = None
    deltas: List[float] = field(default_factory=lambda: list(projection.MEASURE_DELTAS))
    scales: Optional[List[float]] = None
    mode: str = "dimension"
    num_dirs: int = 200
    tolerance: Optional[float] = None
    pass_threshold: float = projection.PASS_THRESHOLD

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        if "kind" not in data:
            raise ConfigError("kind", "missing")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or "restproj-out")

    def validate(self) -> None:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(name, msg)

        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_num(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)

        def num_list(name, positive=True, decreasing=True, length=None):
            v = getattr(self, name)
            need(isinstance(v, list) and all(is_num(x) for x in v), name, "must be a list of numbers")
            if length is not None:
                need(len(v) == length, name, f"must have {length} entries")
            if positive:
                need(all(x > 0 for x in v), name, "entries must be positive")
            if decreasing:
                need(all(a > b for a, b in zip(v, v[1:])), name, "must be strictly decreasing")

        need(self.kind in KINDS, "kind", f"must be one of {', '.join(KINDS)}")
        need(is_int(self.seed) and 0 <= self.seed < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
        need(is_int(self.workers) and self.workers >= 1, "workers", "must be an integer >= 1")
        need(isinstance(self.plots, bool), "plots", "must be true or false")
        need(self.set_kind in ("percolation", "cantor", "segment", "point"), "set_kind",
             "must be percolation, cantor, segment or point")
        need(is_int(self.d) and self.d in (1, 2, 3), "d", "must be 1, 2 or 3")
        need(is_int(self.M) and self.M >= 2, "M", "must be an integer >= 2")
        need(is_int(self.depth) and self.depth >= 1, "depth", "must be an integer >= 1")
        if self.set_kind == "percolation":
            need(is_int(self.N) and 1 <= self.N <= self.M ** self.d, "N",
                 "must satisfy 1 <= N <= M^d")
        if self.set_kind == "cantor":
            need(isinstance(self.pattern, list) and self.pattern
                 and all(is_int(x) and 0 <= x < self.M for x in self.pattern),
                 "pattern", "cantor sets need a nonempty list of digits in [0, M)")
        if self.set_kind == "segment":
            need(is_int(self.axis) and 0 <= self.axis < self.d, "axis", "must lie in [0, d)")
        if self.alpha is not None:
            need(is_num(self.alpha) and 0 < self.alpha <= self.d, "alpha", "must lie in (0, d]")
        # resolution checks need the depth, unknown until a set file is read
        cell = self.M ** -self.depth if self.set_file is None else 0.0
        num_list("widths")
        if self.kind == "tube-profile":
            need(all(1 > w > cell for w in self.widths), "widths",
                 "must lie in (M^-depth, 1)")
        need(is_num(self.grid_density) and self.grid_density > 0, "grid_density", "must be positive")
        need(is_int(self.num_random_tubes) and self.num_random_tubes >= 0, "num_random_tubes",
             "must be a nonnegative integer")
        need(self.family_kind in ("percolation", "uniform", "great-circle", "file"), "family_kind",
             "must be percolation, uniform, great-circle or file")
        if self.family_kind == "file":
            need(isinstance(self.family_file, str), "family_file", "required for family_kind=file")
        need(is_int(self.family_M) and self.family_M >= 2, "family_M", "must be an integer >= 2")
        need(is_int(self.family_N) and 1 <= self.family_N <= self.family_M ** 2, "family_N",
             "must satisfy 1 <= family_N <= family_M^2")
        need(is_int(self.family_depth) and self.family_depth >= 1, "family_depth", "must be >= 1")
        need(is_int(self.family_size) and self.family_size >= 1, "family_size", "must be >= 1")
        for name in ("family_normal", "xi", "direction"):
            num_list(name, positive=False, decreasing=False, length=3)
            need(abs(np.linalg.norm(getattr(self, name)) - 1) <= 1e-9, name, "must be a unit vector")
        num_list("rhos")
        need(is_int(self.xi_grid_size) and self.xi_grid_size >= 100, "xi_grid_size", "must be >= 100")
        need(is_int(self.refine_steps) and self.refine_steps >= 0, "refine_steps", "must be >= 0")
        if self.delta is not None:
            need(is_num(self.delta) and self.delta >= cell, "delta",
                 "must be >= the cell size M^-depth")
        num_list("deltas")
        uses_deltas = self.kind == "project" or (self.kind == "mmp-run" and self.mode == "measure")
        need(self.deltas[-1] >= cell or not uses_deltas, "deltas",
             "must be >= the cell size M^-depth")
        if self.scales is not None:
            num_list("scales")
            need(len(self.scales) >= 2, "scales", "need at least two scales")
        need(self.mode in ("dimension", "measure"), "mode", "must be dimension or measure")
        need(is_int(self.num_dirs) and self.num_dirs >= 1, "num_dirs", "must be >= 1")
        if self.tolerance is not None:
            need(is_num(self.tolerance) and self.tolerance > 0, "tolerance", "must be positive")
        need(is_num(self.pass_threshold) and 0 <= self.pass_threshold <= 1, "pass_threshold",
             "must lie in [0, 1]")
        if self.kind in ("project", "mmp-run"):
            need(self.d == 3, "d", f"{self.kind} projects 3-dimensional sets")
        if self.kind == "tube-profile":
            need(self.d == 2, "d", "tube profiles need a planar set")


@dataclass
class RunReport:
    config: dict
    input_hash: str
    timings: dict
    manifest: List[dict]
    exit_code: int = 0


class _Run:
    """Collects emitted files and per-phase timings."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = cfg.resolved_output_dir()
        self.files: List[Path] = []
        self.timings = {}
        self.profiles: List[Path] = []

    def phase(self, name):
        run = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.timings[name] = round(time.perf_counter() - self.t, 6)

        return _Timer()

    def emit(self, *paths):
        for p in paths:
            self.files.append(Path(p))

    def profile(self, prof, stem, **extra):
        path = io.write_profile(prof, self.out / stem, **extra)
        self.emit(path, path.with_suffix(".json"))
        self.profiles.append(path)
        return path


def input_hash(cfg: ExperimentConfig) -> str:
    """Content hash of everything that determines the data outputs."""
    doc = cfg.to_dict()
    for key in ("output_dir", "workers", "plots"):
        doc.pop(key)
    h = hashlib.sha256(io.dumps_json(doc).encode())
    for key in ("set_file", "family_file"):
        if doc.get(key):
            h.update(io.sha256_file(doc[key]).encode())
    return h.hexdigest()


def build_set(cfg: ExperimentConfig) -> construct.GridSet:
    if cfg.set_file:
        path = Path(cfg.set_file)
        if path.suffix == ".bin":
            return io.read_gridset_binary(path)
        return io.read_gridset_text(path)
    if cfg.set_kind == "percolation":
        return construct.generate_percolation_set(cfg.d, cfg.M, cfg.N, cfg.depth, cfg.seed,
                                                  workers=cfg.workers)
    if cfg.set_kind == "cantor":
        return construct.generate_cantor_product(cfg.d, cfg.M, cfg.pattern, cfg.depth)
    if cfg.set_kind == "segment":
        return construct.segment_set(cfg.d, cfg.M, cfg.depth, cfg.axis)
    n = cfg.M ** cfg.depth // 2
    return construct.GridSet(cfg.d, cfg.M, cfg.depth, [[n] * cfg.d], reference_dim=0.0)


def build_family(cfg: ExperimentConfig) -> construct.ProjectionFamily:
    if cfg.family_kind == "percolation":
        P = construct.generate_percolation_set(2, cfg.family_M, cfg.family_N, cfg.family_depth,
                                               cfg.seed, workers=cfg.workers)
        return construct.map_family_to_sphere(P, P.reference_dim)
    if cfg.family_kind == "uniform":
        return construct.uniform_family(cfg.family_size)
    if cfg.family_kind == "great-circle":
        return construct.great_circle_family(cfg.family_normal, cfg.family_size)
    return io.read_family_csv(cfg.family_file)


def _alpha(cfg, E):
    if cfg.alpha is not None:
        return cfg.alpha
    if E.reference_dim is None or E.reference_dim <= 0:
        raise ConfigError("alpha", "required when the set has no positive reference dimension")
    return E.reference_dim


def _pipeline(run: _Run) -> int:
    cfg, out = run.cfg, run.out
    kind = cfg.kind
    if kind == "gen-set":
        with run.phase("generate"):
            E = build_set(cfg)
        with run.phase("write"):
            run.emit(io.write_gridset_text(E, out / "gridset.txt"),
                     io.write_gridset_binary(E, out / "gridset.bin"))
        return 0
    if kind == "gen-family":
        with run.phase("generate"):
            G = build_family(cfg)
        with run.phase("write"):
            run.emit(io.write_family_csv(G, out / "family.csv"))
        return 0
    if kind == "tube-profile":
        with run.phase("generate"):
            E = build_set(cfg)
            mu = construct.natural_measure(E, _alpha(cfg, E))
        with run.phase("profile"):
            prof = analysis.tube_exponent_profile(mu, cfg.widths, cfg.grid_density,
                                                  cfg.num_random_tubes, cfg.seed, cfg.workers)
        run.profile(prof, "tube_profile")
        return 0
    if kind == "smallness":
        with run.phase("generate"):
            G = build_family(cfg)
        with run.phase("profile"):
            prof = analysis.smallness_profile(G, cfg.xi, cfg.rhos)
        run.profile(prof, "smallness_profile")
        return 0
    if kind == "worst-case":
        with run.phase("generate"):
            G = build_family(cfg)
        with run.phase("search"):
            xi, prof = analysis.worst_case_smallness(G, cfg.rhos, cfg.xi_grid_size,
                                                     cfg.refine_steps, workers=cfg.workers)
        run.profile(prof, "worst_case_profile", worst_xi=xi.tolist())
        return 0
    if kind == "project":
        with run.phase("generate"):
            E = build_set(cfg)
            alpha = cfg.alpha or E.reference_dim or float(E.dim)
            mu = construct.natural_measure(E, alpha)
        with run.phase("project"):
            delta = cfg.delta or max(cfg.deltas[-1], E.side)
            pm = projection.project_measure(mu, cfg.direction, delta)
            ps = projection.project_set(E, cfg.direction)
            prof = projection.projected_length_profile(ps, cfg.deltas)
            try:
                extra = {"box_dimension": io.dimension_summary(
                    analysis.box_dimension(ps, cfg.scales))}
            except ValueError:
                extra = {}
        path = out / "projected_measure.csv"
        with open(path, "w") as f:
            f.write("bin_left,mass\n")
            for c, m in zip(pm.coordinates, pm.masses):
                f.write(f"{float(c - delta / 2)!r},{float(m)!r}\n")
        run.emit(path)
        run.profile(prof, "length_profile", **extra)
        return 0
    if kind == "mmp-run":
        with run.phase("generate"):
            G = build_family(cfg)
            E = build_set(cfg)
        if cfg.num_dirs > len(G):
            raise ConfigError("num_dirs", f"exceeds the family size {len(G)}")
        with run.phase("experiment"):
            report = projection.mmp_experiment(
                G, E, cfg.mode, cfg.num_dirs, cfg.seed, tolerance=cfg.tolerance,
                scales=cfg.scales, delta_list=cfg.deltas,
                pass_threshold=cfg.pass_threshold, workers=cfg.workers)
        run.emit(*io.write_mmp_report(report, out / "mmp_report"))
        return 0 if report.passed else 1
    if kind == "calibrate":
        with run.phase("calibrate"):
            rows = calibration_table()
        path = out / "calibration.csv"
        with open(path, "w") as f:
            f.write("check,value,target,tolerance,passed\n")
            for r in rows:
                tol = "" if r["tolerance"] is None else repr(r["tolerance"])
                f.write(f"{r['check']},{r['value']!r},{r['target']!r},{tol},{int(r['passed'])}\n")
        run.emit(path)
        (out / "calibration.json").write_text(io.dumps_json(rows))
        run.emit(out / "calibration.json")
        return 0 if all(r["passed"] for r in rows) else 1
    raise ConfigError("kind", f"unsupported kind {kind}")


def calibration_table() -> List[dict]:
    """Estimator checks on fixtures with analytically known answers."""
    rows = []

    def check(name, value, target, tol=None):
        # tol=None means a one-sided check value >= target
        ok = value >= target if tol is None else abs(value - target) <= tol
        rows.append(dict(check=name, value=float(value), target=float(target),
                         tolerance=tol, passed=bool(ok)))

    square = construct.generate_cantor_product(2, 2, [0, 1], 8)
    check("box_dim_full_square", analysis.box_dimension(square, _dyadic(2, 7)).slope, 2.0, 0.05)
    cantor = construct.generate_cantor_product(1, 3, [0, 2], 8)
    log23 = math.log(2) / math.log(3)
    check("box_dim_ternary_cantor", analysis.box_dimension(cantor).slope, log23, 0.05)
    m6 = construct.natural_measure(construct.generate_cantor_product(1, 3, [0, 2], 6), log23)
    m8 = construct.natural_measure(cantor, log23)
    for s, stable in ((0.5, True), (0.8, False)):
        r = analysis.riesz_energy(m8, s) / analysis.riesz_energy(m6, s)
        f = (analysis.energy_fourier_side(m8, s, FOURIER_CUTOFFS[1])
             / analysis.energy_fourier_side(m8, s, FOURIER_CUTOFFS[0]))
        if stable:
            check(f"riesz_change_s{s}", abs(r - 1), 0.0, 0.10)
            check(f"fourier_change_s{s}", abs(f - 1), 0.0, 0.15)
        else:
            check(f"riesz_growth_s{s}", r, 1.5)
            check(f"fourier_growth_s{s}", f, 1.5)
    return rows


# The Fourier counterpart of refining depth 6 -> 8 in base 3: cutoff x 9.
FOURIER_CUTOFFS = (3.0 ** 4, 3.0 ** 6)


def run(cfg: ExperimentConfig) -> RunReport:
    """Execute one pipeline and write its outputs plus ``run_report.json``."""
    cfg.validate()
    r = _Run(cfg)
    r.out.mkdir(parents=True, exist_ok=True)
    code = _pipeline(r)
    if cfg.plots and r.profiles:
        with r.phase("plots"):
            r.emit(*emit_plots(r.profiles))
    manifest = [{"path": p.name, "sha256": io.sha256_file(p), "bytes": p.stat().st_size}
                for p in r.files]
    report = RunReport(cfg.to_dict(), input_hash(cfg), r.timings, manifest, code)
    (r.out / "run_report.json").write_text(io.dumps_json(dataclasses.asdict(report)))
    return report


# --- argument parsing ----------------------------------------------------------

def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    S = argparse.SUPPRESS
    for f in fields(ExperimentConfig):
        if f.name == "kind":
            continue
        kw = dict(dest=f.name, default=S)
        if f.name == "plots":
            p.add_argument(_flag(f.name), action="store_true", **kw)
        elif f.name in ("pattern",):
            p.add_argument(_flag(f.name), type=int, nargs="+", **kw)
        elif f.type in ("List[float]", "Optional[List[float]]"):
            p.add_argument(_flag(f.name), type=float, nargs="+", **kw)
        elif f.type in ("int",):
            p.add_argument(_flag(f.name), type=int, **kw)
        elif f.type in ("float", "Optional[float]"):
            p.add_argument(_flag(f.name), type=float, **kw)
        else:
            p.add_argument(_flag(f.name), **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restproj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        _add_config_flags(sub.add_parser(kind))
    ep = sub.add_parser("emit-plots", help="SVG log-log plots for profile CSV files")
    ep.add_argument("profiles", nargs="+")
    ep.add_argument("--output-dir", dest="output_dir", default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        if data.get("kind", args.command) != args.command:
            raise ConfigError("kind", f"config says {data['kind']!r}, command is {args.command!r}")
    data["kind"] = args.command
    for key, value in vars(args).items():
        if key not in ("command", "config"):
            data[key] = value
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "emit-plots":
            for p in emit_plots(args.profiles, args.output_dir):
                print(p)
            return 0
        cfg = config_from_args(args)
        report = run(cfg)
    except ConfigError as exc:
        print(f"restproj: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (io.FormatError, ValueError) as exc:
        print(f"restproj: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"restproj: missing input: {exc}", file=sys.stderr)
        return 2
    except (OSError, MemoryError) as exc:
        print(f"restproj: resource failure: {exc}", file=sys.stderr)
        return 3
    print(f"restproj: {cfg.kind} wrote {len(report.manifest)} files to "
          f"{cfg.resolved_output_dir()}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
