"""Command line front end: ``heattube {synth,invert,validate,gradcheck}``.

Files
-----
``neumann.csv`` / ``dirichlet.csv``
    Exterior data, header ``t,phi,value``, time-major (all angles of the
    first level, then the next level).
``data_meta.json``
    Grid sizes of the data and of the synthesis mesh, seed, noise level.
``history.csv``
    ``iteration,J,grad_inf,step,l2_err`` with one row per iterate.
``*_shape.txt``
    Shape coefficients as ``key = value`` lines: ``n_legendre``,
    ``n_fourier``, ``T`` and ``alpha_<k>_<l>`` / ``beta_<k>_<l>``; omitted
    coefficients are zero.  ``radius = r`` adds ``r`` to the static mean
    radius.
``tube_<name>.vtk`` / ``tube_<name>.csv``
    The void boundary in space-time: one closed polyline per time level
    with ``z = t``.  The CSV has columns ``t,phi,x,y``.

Exit codes: 0 success, 2 usage or missing/invalid input, 3 line-search
failure (partial outputs are written), 4 failed validation threshold.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy.signal import resample

from .config import ConfigError, RunConfig
from .conventions import default_conventions, load_conventions
from .geometry import GeometryError, ShapeCoefficients, build_mesh, radius
from .inverse import run_inversion
from .solver import add_noise, synth_forward
from . import validation

__all__ = [
    "main",
    "cmd_synth",
    "cmd_invert",
    "cmd_validate",
    "cmd_gradcheck",
    "default_truth",
    "read_shape",
    "write_shape",
    "write_tube_vtk",
    "write_tube_csv",
    "read_data",
    "resample_data",
]

log = logging.getLogger("heattube")

EXIT_OK, EXIT_USAGE, EXIT_LINESEARCH, EXIT_VALIDATION = 0, 2, 3, 4

META_FILE = "data_meta.json"


class InputError(Exception):
    """Missing or malformed input file; maps to exit code 2."""


# --------------------------------------------------------------------------
# shape files


def default_truth(n_legendre: int, n_fourier: int, T: float = 1.0) -> ShapeCoefficients:
    """Slowly growing, mildly elongated void used when no truth is given."""
    c = ShapeCoefficients(max(n_legendre, 1), max(n_fourier, 3), T=T)
    c.set_alpha(0, 0, 0.45 * math.sqrt(T))
    c.set_alpha(0, 1, 0.04)
    c.set_alpha(2, 0, 0.05)
    c.set_beta(1, 1, 0.03)
    return c


def write_shape(coeffs: ShapeCoefficients, path) -> None:
    a, b = coeffs.angular()
    lines = [f"n_legendre = {coeffs.n_legendre}", f"n_fourier = {coeffs.n_fourier}", f"T = {coeffs.T!r}"]
    for l in range(coeffs.n_legendre + 1):
        for k in range(coeffs.n_fourier + 1):
            lines.append(f"alpha_{k}_{l} = {float(a[l, k])!r}")
        for k in range(1, coeffs.n_fourier):
            lines.append(f"beta_{k}_{l} = {float(b[l, k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_shape(path, n_legendre: int | None = None, n_fourier: int | None = None, T: float = 1.0):
    """Parse a shape file; the basis sizes default to the file's own."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read shape file {path}: {exc}") from exc
    head, terms = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        try:
            if not sep:
                raise ValueError("expected 'key = value'")
            if key in ("n_legendre", "n_fourier"):
                head[key] = int(val)
            elif key in ("T", "radius"):
                head[key] = float(val)
            else:
                kind, k, l = key.split("_")
                if kind not in ("alpha", "beta"):
                    raise ValueError(f"unknown key {key!r}")
                terms.append((kind, int(k), int(l), float(val)))
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
    T = head.get("T", T)
    nl = head.get("n_legendre", max([l for _, _, l, _ in terms], default=0))
    nk = head.get("n_fourier", max([k + (kind == "beta") for kind, k, _, _ in terms], default=1))
    try:
        c = ShapeCoefficients(nl, max(nk, 1), T=T)
        for kind, k, l, v in terms:
            (c.set_alpha if kind == "alpha" else c.set_beta)(k, l, v)
        if "radius" in head:
            c.coeffs[0, c.alpha_column(0)] += head["radius"] * math.sqrt(T)
        if n_legendre is not None:
            c = c.resized(n_legendre, n_fourier)
    except (ValueError, IndexError) as exc:
        raise InputError(f"invalid shape in {path}: {exc}") from exc
    return c


# --------------------------------------------------------------------------
# tube export


def _rings(coeffs: ShapeCoefficients, n_time: int, n_space: int):
    t = np.linspace(0.0, coeffs.T, n_time + 1)
    phi = 2 * np.pi * np.arange(n_space) / n_space
    w, _, _ = radius(coeffs, t[:, None], phi[None, :])
    return t, phi, w * np.cos(phi), w * np.sin(phi)


def write_tube_vtk(coeffs: ShapeCoefficients, path, n_time: int, n_space: int, title: str = "void") -> None:
    """Legacy-VTK polydata: one closed ring per time level, ``z = t``."""
    t, phi, x, y = _rings(coeffs, n_time, n_space)
    n_pts = (n_time + 1) * n_space
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA", f"POINTS {n_pts} double"]
    for n in range(n_time + 1):
        out.extend(f"{float(x[n, i])!r} {float(y[n, i])!r} {float(t[n])!r}" for i in range(n_space))
    out.append(f"LINES {n_time + 1} {(n_time + 1) * (n_space + 2)}")
    for n in range(n_time + 1):
        idx = [n * n_space + i for i in range(n_space)] + [n * n_space]
        out.append(" ".join(map(str, [n_space + 1] + idx)))
    Path(path).write_text("\n".join(out) + "\n")


def write_tube_csv(coeffs: ShapeCoefficients, path, n_time: int, n_space: int) -> None:
    t, phi, x, y = _rings(coeffs, n_time, n_space)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "phi", "x", "y"])
        for n in range(n_time + 1):
            for i in range(n_space):
                w.writerow([repr(float(v)) for v in (t[n], phi[i], x[n, i], y[n, i])])


# --------------------------------------------------------------------------
# data files


def _write_field(path, t, phi, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "phi", "value"])
        for n in range(len(t)):
            for i in range(len(phi)):
                w.writerow([repr(float(t[n])), repr(float(phi[i])), repr(float(values[n, i]))])


def _read_field(path, n_time: int, n_space: int) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != ["t", "phi", "value"]:
        raise InputError(f"{path}: expected header t,phi,value")
    if len(rows) - 1 != (n_time + 1) * n_space:
        raise InputError(f"{path}: {len(rows) - 1} rows, expected {(n_time + 1) * n_space}")
    try:
        return np.array([float(r[2]) for r in rows[1:]]).reshape(n_time + 1, n_space)
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed row") from exc


def read_data(path):
    """Load ``(f, g, meta)`` from a data directory or its metadata file."""
    p = Path(path)
    meta_path = p / META_FILE if p.is_dir() else p
    try:
        meta = json.loads(meta_path.read_text())
        nt, nx = int(meta["n_time"]), int(meta["n_space"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read data metadata {meta_path}: {exc}") from exc
    base = meta_path.parent
    f = _read_field(base / meta.get("dirichlet_file", "dirichlet.csv"), nt, nx)
    g = _read_field(base / meta.get("neumann_file", "neumann.csv"), nt, nx)
    return f, g, meta


def resample_data(values, n_time: int, n_space: int) -> np.ndarray:
    """Periodic FFT resampling in angle, linear interpolation in time."""
    values = np.asarray(values, dtype=float)
    nt0, nx0 = values.shape[0] - 1, values.shape[1]
    if nx0 != n_space:
        values = resample(values, n_space, axis=1)
    if nt0 != n_time:
        s0 = np.linspace(0.0, 1.0, nt0 + 1)
        s1 = np.linspace(0.0, 1.0, n_time + 1)
        values = np.stack([np.interp(s1, s0, values[:, i]) for i in range(n_space)], axis=1)
    return values


# --------------------------------------------------------------------------
# commands


def cmd_synth(config: RunConfig, out_dir, truth: ShapeCoefficients | None = None) -> dict:
    """Synthesize exterior Neumann data for ``f = t`` and write the data files.

    The forward solve runs on the synthesis grid; the data are resampled to
    the inversion grid of `config`, noise is added there.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if truth is None:
        truth = default_truth(config.n_legendre, config.n_fourier, config.T)
    nts, nxs = config.synth_grid
    try:
        mesh = build_mesh(truth, config.exterior_radius, nts, nxs)
    except GeometryError as exc:
        raise InputError(f"invalid truth shape: {exc}") from exc
    f_s = np.broadcast_to(mesh.times[:, None], (nts + 1, nxs)).copy()
    g_s = synth_forward(mesh, f_s)
    g = resample_data(g_s, config.n_time, config.n_space)
    g[0] = 0.0
    g = add_noise(g, config.noise_level, config.seed)
    t = config.T * np.arange(config.n_time + 1) / config.n_time
    phi = 2 * np.pi * np.arange(config.n_space) / config.n_space
    f = np.broadcast_to(t[:, None], g.shape)
    _write_field(out / "neumann.csv", t, phi, g)
    _write_field(out / "dirichlet.csv", t, phi, f)
    write_shape(truth, out / "truth_shape.txt")
    meta = {
        "n_time": config.n_time,
        "n_space": config.n_space,
        "T": config.T,
        "exterior_radius": config.exterior_radius,
        "synth_n_time": nts,
        "synth_n_space": nxs,
        "seed": config.seed,
        "noise_level": config.noise_level,
        "dirichlet_file": "dirichlet.csv",
        "neumann_file": "neumann.csv",
        "truth_file": "truth_shape.txt",
    }
    (out / META_FILE).write_text(json.dumps(meta, indent=2) + "\n")
    return meta


def cmd_invert(config: RunConfig, data_path, out_dir, truth: ShapeCoefficients | None = None) -> int:
    """Run the reconstruction and write history, final shape and tube files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f, g, meta = read_data(data_path)
    if not math.isclose(float(meta.get("T", config.T)), config.T):
        raise InputError("data time horizon does not match the configuration")
    f = resample_data(f, config.n_time, config.n_space)
    g = resample_data(g, config.n_time, config.n_space)
    f[0] = g[0] = 0.0
    if truth is not None:
        truth = truth.resized(config.n_legendre, config.n_fourier)
    try:
        x, history = run_inversion(config, f, g, truth=truth)
    except GeometryError as exc:
        raise InputError(str(exc)) from exc
    history.write_csv(out / "history.csv")
    write_shape(x, out / "final_shape.txt")
    shapes = {"reconstruction": x} if truth is None else {"reconstruction": x, "truth": truth}
    for name, c in shapes.items():
        write_tube_vtk(c, out / f"tube_{name}.vtk", config.n_time, config.n_space, title=name)
        write_tube_csv(c, out / f"tube_{name}.csv", config.n_time, config.n_space)
    (out / "status.txt").write_text(history.status + "\n")
    if history.status.startswith("line search failure"):
        return EXIT_LINESEARCH
    return EXIT_OK


def _random_directions(n_param: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(n_param) for _ in range(count)]


def cmd_gradcheck(config: RunConfig, out_dir, n_directions: int = 5, conventions=None) -> int:
    """Adjoint gradient against central differences on the reference problem."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dirs = _random_directions(config.n_parameters, n_directions, config.seed)
    rows = validation.fd_gradient_check(config, dirs, conventions=conventions)
    with open(out / "gradcheck.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["direction", "eps", "analytic", "finite_difference", "rel_error"])
        for r in rows:
            w.writerow([r.direction, repr(r.eps), repr(r.analytic), repr(r.finite_difference), repr(r.rel_error)])
    worst = max(r.rel_error for r in rows if r.eps == 1e-4)
    print(f"gradcheck: worst relative error at eps=1e-4: {worst:.3e} (tolerance {config.fd_tol:.1e})")
    return EXIT_OK if worst < config.fd_tol else EXIT_VALIDATION


def cmd_validate(config: RunConfig, out_dir, levels=validation.DEFAULT_LEVELS, conventions=None) -> int:
    """Rerun the convention studies and check every validation threshold."""
    levels = list(levels)
    if len(levels) < 3:
        raise InputError("validation needs at least three refinement levels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    conv = conventions or default_conventions()
    coarse = RunConfig(n_time=24, n_space=32, n_fourier=4, n_legendre=2, seed=config.seed,
                       initial_radius=config.initial_radius)

    found, summary = validation.determine_conventions(levels, gradient_config=coarse, seed=config.seed)
    validation.write_convention_report(found, summary, out)

    checks = []
    for fam in ("static", "moving"):
        res = validation.convergence_study(fam, levels, conv)
        checks.append((f"order_{fam}", res.order, res.order >= config.order_min, config.order_min))
    dirs = _random_directions(coarse.n_parameters, 5, config.seed)
    rows = validation.fd_gradient_check(coarse, dirs, conventions=conv)
    worst = max(r.rel_error for r in rows if r.eps == 1e-4)
    checks.append(("fd_gradient", worst, worst < config.fd_tol, config.fd_tol))
    z = np.zeros(coarse.n_parameters)
    z[coarse.n_fourier] = 1.0              # cos(phi), constant in time
    disc = []
    for k in (1, 2):
        cfg = coarse.replace(n_time=24 * k, n_space=32 * k)
        disc.append(validation.local_shape_derivative_check(cfg, z, conventions=conv).discrepancy)
    checks.append(("local_shape_derivative", disc[0], disc[0] < config.local_tol and disc[1] < disc[0],
                   config.local_tol))
    checks.append(("conventions_reproduced", 0.0, found == conv, 0.0))

    lines = []
    for name, value, ok, tol in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name} value={value:.6g} threshold={tol:g}")
    text = "\n".join(lines) + "\n"
    (out / "validation_summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK if all(ok for _, _, ok, _ in checks) else EXIT_VALIDATION


# --------------------------------------------------------------------------
# argument handling


def _parse_levels(text: str):
    levels = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        nt, _, nx = part.partition("x")
        try:
            levels.append((int(nt), int(nx or nt)))
        except ValueError as exc:
            raise InputError(f"bad level {part!r}") from exc
    return levels


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heattube", description=__doc__.split("\n", 1)[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("synth", "invert", "validate", "gradcheck"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="key = value configuration file")
        s.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        s.add_argument("--seed", type=int, help="random seed (overrides seed)")
        s.add_argument("--truth", type=Path, help="shape file of the true void")
        s.add_argument("--data", type=Path, help="data directory or its metadata file")
        if name == "validate":
            s.add_argument("--levels", default="20x20,40x40,80x80",
                           help="comma separated refinement levels NTxNX")
            s.add_argument("--conventions", type=Path, help="conventions file to validate")
            s.add_argument("--curvature-factor", type=float, help=argparse.SUPPRESS)
        if name == "gradcheck":
            s.add_argument("--directions", type=int, default=5)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = RunConfig.load(args.config) if args.config else RunConfig()
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["output_dir"] = str(args.out)
        config = config.replace(**over)
        out = Path(config.output_dir)
        truth = None
        if args.truth is not None:
            truth = read_shape(args.truth, T=config.T)

        if args.command == "synth":
            meta = cmd_synth(config, out, truth)
            print(f"wrote {meta['n_time'] + 1}x{meta['n_space']} data to {out}")
            return EXIT_OK
        if args.command == "invert":
            if args.data is None:
                raise InputError("invert needs --data")
            return cmd_invert(config, args.data, out, truth)
        if args.command == "gradcheck":
            return cmd_gradcheck(config, out, args.directions)
        conv = load_conventions(args.conventions) if args.conventions else default_conventions()
        if args.curvature_factor is not None:
            conv = conv.with_(curvature_factor=args.curvature_factor)
        return cmd_validate(config, out, _parse_levels(args.levels), conv)
    except (InputError, ConfigError) as exc:
        print(f"heattube: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
