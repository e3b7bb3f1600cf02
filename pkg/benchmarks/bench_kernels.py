"""Compare the numba and numpy kernel backends.

Times one dense history application and a full forward solve on a few
grids, checks that both backends agree, and prints a table.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--grids 30x40,60x64,90x80]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from heattube import kernels
from heattube.geometry import ShapeCoefficients, build_mesh
from heattube.solver import exterior_data, solve_dirichlet


def _shape():
    c = ShapeCoefficients(2, 4)
    c.set_alpha(0, 0, 0.45)
    c.set_alpha(2, 0, 0.04)
    c.set_alpha(0, 1, 0.03)
    return c


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_grid(nt, nx, repeat):
    mesh = build_mesh(_shape(), 1.0, nt, nx)
    rng = np.random.default_rng(0)
    n = nt
    psi = rng.standard_normal((n, mesh.n_nodes))
    phi = rng.standard_normal((n, mesh.n_nodes))
    dts = mesh.h * (n - np.arange(n))
    w = rng.random(n)
    args = (mesh.x[n], mesh.y[n], mesh.x[:n], mesh.y[:n], mesh.nx[:n], mesh.ny[:n],
            mesh.vn[:n], mesh.weight[:n], psi, phi, dts, w, w)
    data = exterior_data(mesh, np.broadcast_to(mesh.times[:, None], (nt + 1, nx)))

    rows = {}
    for name in ("numpy", "numba"):
        if name == "numba" and not kernels.HAVE_NUMBA:
            continue
        prev = kernels.use_backend(name)
        try:
            kernels.history_vk(*args)  # compile / warm up
            t_hist, hist = _best(lambda: kernels.history_vk(*args), repeat)
            t_solve, sol = _best(lambda: solve_dirichlet(mesh, data).values, repeat)
        finally:
            kernels.use_backend(prev)
        rows[name] = (t_hist, t_solve, hist, sol)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--grids", default="30x40,60x64,90x80")
    args = p.parse_args(argv)
    grids = [tuple(int(v) for v in g.split("x")) for g in args.grids.split(",")]
    print(f"{'grid':>8} {'backend':>7} {'history [ms]':>13} {'solve [s]':>10} {'speedup':>8}")
    for nt, nx in grids:
        rows = bench_grid(nt, nx, args.repeat)
        base = rows["numpy"][1]
        for name, (th, ts, _, _) in rows.items():
            print(f"{nt:>4}x{nx:<3} {name:>7} {1e3 * th:13.2f} {ts:10.3f} {base / ts:8.2f}")
        if "numba" in rows:
            dv = max(np.abs(a - b).max() for a, b in zip(rows["numpy"][2], rows["numba"][2]))
            ds = np.abs(rows["numpy"][3] - rows["numba"][3]).max()
            print(f"{'':>8} max backend difference: history {dv:.2e}, solve {ds:.2e}")


if __name__ == "__main__":
    main()
