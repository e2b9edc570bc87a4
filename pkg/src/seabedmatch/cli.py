"""
Command-line interface.

Exit status: 0 success, 1 usage or configuration error, 2 missing or
malformed data, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .core import GeoParams, MaterialType, SeafloorParams, measurement_grid
from .experiments import (MODELS, OBJECT_WIDTHS, Fidelity, TrialReport, add_noise, evaluate,
                          simulate_seabed)
from .library import LibraryError, build_library, load_library
from .matcher import classify
from .microlocal import (DEFAULT_EPSILON, DEFAULT_R0, BackscatterSignal, aligned_offset,
                         backscatter_direction, decompose, receiver_positions, sample_circle,
                         truncation_order)
from .solver import SolverError, solve_template, write_field

logger = logging.getLogger("seabedmatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class DataError(ValueError):
    """Missing or malformed input file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# file helpers

def _fmt(v: float) -> str:
    return repr(float(v))


def _write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _json_dump(path: str | Path, data) -> None:
    _write_text(path, json.dumps(data, indent=1, sort_keys=True) + "\n")


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_signal_csv(path: str | Path, signal: BackscatterSignal) -> None:
    """Signal as ``x,value`` rows."""
    _write_text(path, _csv_text(("x", "value"), zip(signal.x_coords, signal.values)))


def read_signal_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read signal {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise DataError(f"{path}: expected header 'x,value'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    if data.size == 0 or not np.all(np.isfinite(data)):
        raise DataError(f"{path}: empty or non-finite signal")
    return data[:, 0], data[:, 1]


def _load_library(path: Optional[str]):
    if not path:
        raise ConfigError("a library path is required (--library or paths.library)")
    if not Path(path).exists():
        raise DataError(f"library file {path} does not exist")
    return load_library(path)


def _config(args) -> RunConfig:
    extra = {"preset": args.preset} if getattr(args, "preset", None) else None
    if getattr(args, "config", None):
        return RunConfig.from_file(args.config, extra)
    return RunConfig.from_dict(extra)


# ---------------------------------------------------------------------------
# commands

def cmd_build_library(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.paths.get("library")
    if not out:
        raise ConfigError("an output path is required (--out or paths.library)")
    jobs = args.jobs or cfg.jobs
    n_geo = len(cfg.grid.geometries()) * len(cfg.grid.alphas)
    n_solves = n_geo * (len(cfg.grid.materials) + len(cfg.grid.transitions))
    print(f"grid: {len(cfg.grid.alphas)} angles x {n_geo // len(cfg.grid.alphas)} geometries, "
          f"{len(cfg.grid.materials)} materials, {len(cfg.grid.transitions)} transitions "
          f"-> {n_solves} solves")
    t0 = time.perf_counter()

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total}", end="", file=sys.stderr, flush=True)

    lib = build_library(cfg.grid, cfg.experiment, cfg.domain, cfg.solve, path=out,
                        resume=args.resume, jobs=jobs, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    print(f"{len(lib)} templates written to {out} in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def _model(name: str, width: float):
    m = MODELS[name]()
    return m.with_object(width) if width > 0 else m


def cmd_simulate(args) -> int:
    cfg = _config(args)
    fidelity = Fidelity(args.fidelity) if args.fidelity else cfg.fidelity
    seed = cfg.seed if args.seed is None else args.seed
    model = _model(args.model, args.object_width)
    signal = simulate_seabed(model, cfg.experiment, cfg.domain, cfg.solve, fidelity)
    signal = add_noise(signal, args.noise, seed)
    out = args.out or cfg.paths.get("signal")
    if not out:
        raise ConfigError("an output path is required (--out or paths.signal)")
    write_signal_csv(out, signal)
    if args.truth:
        _json_dump(args.truth, {"model": model.name, "object_width": args.object_width,
                                "segments": [p.to_dict() for p in model.truth()]})
    print(f"{len(signal)} samples ({model.n_segments} segments) written to {out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    lib = _load_library(args.library or cfg.paths.get("library"))
    x, values = read_signal_csv(args.signal)
    n = lib.samples_per_segment
    if values.size % n:
        raise DataError(f"signal length {values.size} is not a multiple of {n}")
    angle = args.angle if args.angle is not None else lib.experiment.incident_angle
    res = classify(values, lib, cfg.match, angle=angle)
    out = args.out or cfg.paths.get("result")
    data = {"angle": angle, **res.to_dict()}
    if out:
        _json_dump(out, data)
    print(" ".join(m.value for m in res.material_map))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    lib = _load_library(args.library or cfg.paths.get("library"))
    if args.pure_only:
        lib = lib.pure()
    seed = cfg.seed if args.seed is None else args.seed
    widths = args.widths if args.widths is not None else [0.0]
    for w in widths:
        if w not in OBJECT_WIDTHS:
            raise ConfigError(f"object width {w} not in {OBJECT_WIDTHS}")
    model = MODELS[args.model]()
    fidelity = Fidelity(args.fidelity) if args.fidelity else cfg.fidelity
    rep = evaluate(args.trials, model, widths, lib, cfg.match, seed, noise=args.noise,
                   fidelity=fidelity)
    out = args.report or cfg.paths.get("report")
    if not out:
        raise ConfigError("a report path is required (--report or paths.report)")
    data = rep.to_dict()
    data["library"] = {"templates": len(lib), "pure_only": bool(args.pure_only)}
    _json_dump(out, data)
    acc = ", ".join(f"{w:g}: {a:.3f}" for w, a in sorted(rep.material_accuracy.items()))
    print(f"material accuracy by object width: {acc}")
    for k, v in sorted(rep.false_alarm_rates.items()):
        print(f"false alarm {k}: {v:.3f}")
    for w, v in sorted(rep.detection_rates.items()):
        print(f"detection width {w:g}: {v:.3f}")
    return EXIT_OK


def _polar_rows(exp, d, s, params: SeafloorParams, r0: float = DEFAULT_R0,
                eps: float = DEFAULT_EPSILON, f=None):
    """Plane-wave amplitudes around the centre receiver of a template solve."""
    if f is None:
        f = solve_template(params, exp, d, s)
    src = f.scattered if f.scattered is not None else f
    n_dirs = truncation_order(r0)
    offset = aligned_offset(backscatter_direction(exp.incident_angle), n_dirs)
    x = float(receiver_positions(1.5 * d.segment_width, exp, d))
    smp = sample_circle(src, (x, d.receiver_line_height), exp.wavenumber, r0, n_dirs, offset)
    dec = decompose(smp, r0, eps, offset)
    order = np.argsort(dec.angles)
    return [(float(dec.angles[i]), float(dec.amplitudes[i])) for i in order]


def cmd_report(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "seabedmatch"
    import matplotlib.pyplot as plt

    try:
        data = json.loads(Path(args.report).read_text())
    except OSError as exc:
        raise DataError(f"cannot read report {args.report}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed report {args.report}: {exc}") from exc
    try:
        rep = TrialReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report {args.report}: {exc}") from exc
    if not rep.trials:
        raise DataError("report holds no trials")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lib = _load_library(args.library) if args.library else None
    svg_meta = {"Date": None, "Creator": f"seabedmatch {__version__}"}

    rows = [("false_alarm", k, v) for k, v in sorted(rep.false_alarm_rates.items())]
    rows += [("detection", _fmt(w), v) for w, v in sorted(rep.detection_rates.items())]
    rows += [("accuracy", _fmt(w), v) for w, v in sorted(rep.material_accuracy.items())]
    rows += [("geometry_error", k, v) for k, v in sorted(rep.geometry_errors.items())]
    _write_text(out / "summary.csv", _csv_text(("metric", "key", "value"), rows))

    err_rows = []
    for t, tr in enumerate(rep.trials):
        truth = rep.truth[tr.object_width]
        for j, (m, g) in enumerate(zip(tr.materials, tr.geometry)):
            tg = truth[j].geometry.as_array()
            err_rows.append((t, _fmt(tr.object_width), j, truth[j].material.value, m,
                             g[0] - tg[0], g[1] - tg[1], g[2] - tg[2]))
    _write_text(out / "errors.csv", _csv_text(
        ("trial", "object_width", "segment", "truth_material", "estimated_material",
         "d_mg1", "d_mg2", "d_mg3"), err_rows))

    errs = np.array([r[5:] for r in err_rows], dtype=float)
    fig, axes = plt.subplots(1, 3, figsize=(10, 3))
    for k, ax in enumerate(axes):
        ax.hist(errs[:, k], bins=21)
        ax.set_xlabel(f"mg{k + 1} error")
    fig.tight_layout()
    fig.savefig(out / "errors.svg", metadata=svg_meta)
    plt.close(fig)

    n_overlay = 0
    if lib is not None:
        ids = {r.id: r for r in lib.records}
        for t, tr in enumerate(rep.trials[:args.max_overlays]):
            if not tr.template_ids or tr.object_width not in rep.signals:
                continue
            try:
                pred = np.concatenate([ids[i].backscatter for i in tr.template_ids])
            except KeyError as exc:
                raise DataError(f"template {exc} not in the library") from exc
            truth = np.asarray(rep.signals[tr.object_width])
            x = measurement_grid(lib.domain, len(tr.template_ids))
            fig, ax = plt.subplots(figsize=(10, 3))
            ax.plot(x, truth, lw=0.8, label="noiseless data")
            ax.plot(x, pred, lw=0.8, label="prediction")
            ax.set_xlabel("x (m)")
            ax.set_ylabel("backscatter")
            ax.legend(loc="upper right")
            fig.tight_layout()
            fig.savefig(out / f"overlay_{t:03d}.svg", metadata=svg_meta)
            plt.close(fig)
            n_overlay += 1
        first = rep.truth[rep.trials[0].object_width][0]
        rows = _polar_rows(lib.experiment, lib.domain, lib.solve, first,
                           lib.metadata.get("r0", DEFAULT_R0),
                           lib.metadata.get("epsilon_reg", DEFAULT_EPSILON))
        _write_text(out / "polar.csv", _csv_text(("angle", "amplitude"), rows))
    print(f"report written to {out} ({n_overlay} overlays)")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    exp = cfg.experiment if args.angle is None else cfg.experiment.with_angle(args.angle)
    g = GeoParams(*args.mg) if not args.flat else GeoParams.flat()
    mat = MaterialType.parse(args.material)
    params = SeafloorParams.metal(g) if mat is MaterialType.METAL else SeafloorParams(mat, g)
    t0 = time.perf_counter()
    f = solve_template(params, exp, cfg.domain, cfg.solve)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "field.bin", f)
    rows = _polar_rows(exp, cfg.domain, cfg.solve, params, f=f)
    _write_text(out / "polar.csv", _csv_text(("angle", "amplitude"), rows))
    print(f"{f.info.get('unknowns')} unknowns solved in {time.perf_counter() - t0:.1f} s; "
          f"field and polar data in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seabedmatch", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--preset", choices=("paper", "desk", "desk-2k"),
                        help="settings preset when no config is given (default desk)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-library", parents=[common], help="solve the template grid")
    b.add_argument("--out", help="library file to write")
    b.add_argument("--resume", action="store_true", help="continue an interrupted build")
    b.add_argument("--jobs", type=int, help="worker processes (default SEABEDMATCH_JOBS or 1)")
    b.add_argument("--quiet", action="store_true", help="no progress output")
    b.set_defaults(func=cmd_build_library)

    s = sub.add_parser("simulate", parents=[common], help="synthesize a seabed signal")
    s.add_argument("--model", choices=sorted(MODELS), default="a")
    s.add_argument("--object-width", type=float, default=0.0, choices=OBJECT_WIDTHS,
                   help="buried object width in segments")
    s.add_argument("--noise", type=float, default=0.0, help="noise level relative to RMS")
    s.add_argument("--seed", type=int, help="noise seed (default from config)")
    s.add_argument("--fidelity", choices=[f.value for f in Fidelity])
    s.add_argument("--out", help="signal CSV to write")
    s.add_argument("--truth", help="optional JSON with the true segment parameters")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("classify", parents=[common], help="invert a signal")
    c.add_argument("--library", help="library file")
    c.add_argument("--signal", required=True, help="signal CSV")
    c.add_argument("--angle", type=float, help="grazing angle (default: library's)")
    c.add_argument("--out", help="result JSON to write")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("evaluate", parents=[common], help="Monte Carlo trials")
    e.add_argument("--library", help="library file")
    e.add_argument("--model", choices=sorted(MODELS), default="a")
    e.add_argument("--trials", type=int, default=100)
    e.add_argument("--widths", type=float, nargs="*", help="object widths in segments")
    e.add_argument("--noise", type=float, default=0.05)
    e.add_argument("--seed", type=int)
    e.add_argument("--fidelity", choices=[f.value for f in Fidelity])
    e.add_argument("--pure-only", action="store_true", help="drop transition templates")
    e.add_argument("--report", help="report JSON to write")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="plots and tables from a report")
    r.add_argument("--report", required=True, help="report JSON")
    r.add_argument("--library", help="library used for the report (enables overlays)")
    r.add_argument("--out-dir", required=True)
    r.add_argument("--max-overlays", type=int, default=5)
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("solve", parents=[common], help="one template solve with field dump")
    v.add_argument("--material", default="sand", choices=[m.value for m in MaterialType])
    v.add_argument("--mg", type=float, nargs=3, default=(15.0, 1.0, 26.0),
                   metavar=("MG1", "MG2", "MG3"))
    v.add_argument("--flat", action="store_true", help="flat interface")
    v.add_argument("--angle", type=float, help="grazing angle in radians")
    v.add_argument("--out-dir", required=True)
    v.set_defaults(func=cmd_solve)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "trials", 1) is not None and getattr(args, "trials", 1) < 1:
        parser.error("--trials must be at least 1")
    if getattr(args, "noise", 0.0) < 0:
        parser.error("--noise must be non-negative")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"seabedmatch: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, LibraryError) as exc:
        print(f"seabedmatch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"seabedmatch: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"seabedmatch: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
