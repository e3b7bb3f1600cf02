"""Dense history sums of the thermal layer kernels.

Two interchangeable implementations: numba-compiled loops and a pure
numpy path.  The backend is picked once at import from the environment
variable ``HEATTUBE_BACKEND`` (``numba`` or ``numpy``); the default is
numba when it imports, numpy otherwise.  :func:`use_backend` switches at
runtime (tests, benchmarks).

All routines share one layout.  Source arrays have shape ``(J, M)`` (J
source time levels, M nodes per level), target arrays shape ``(Mt,)``;
``dts[j] > 0`` is the target-minus-source time and ``w*[j]`` the time
quadrature weight of source level j.  `sw` carries the spatial quadrature
weight of each source node.  The kernel is

    G = (4 pi s)^(-1/2) exp(-|x - y|^2 / (4 s))

with s = dts[j]; the double layer multiplies by
``<x - y, n_y> / (2 s) - vn_y / 2`` and its adjoint by
``-<x - y, n_x> / (2 s) + vn_x / 2``.
"""
from __future__ import annotations

import os
import math

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

__all__ = ["history_vk", "history_adjoint", "backend", "use_backend", "HAVE_NUMBA"]

HAVE_NUMBA = numba is not None
_FOUR_PI = 4.0 * math.pi


# ---------------------------------------------------------------- numpy path

def _np_history_vk(tx, ty, sx, sy, snx, sny, svn, sw, psi, phi, dts, wv, wk):
    v = np.zeros(tx.shape[0])
    k = np.zeros(tx.shape[0])
    for j in range(dts.shape[0]):
        if wv[j] == 0.0 and wk[j] == 0.0:
            continue
        s = dts[j]
        dx = tx[:, None] - sx[j][None, :]
        dy = ty[:, None] - sy[j][None, :]
        g = np.exp(-(dx * dx + dy * dy) / (4.0 * s)) * (sw[j] / math.sqrt(_FOUR_PI * s))
        if wv[j] != 0.0:
            v += wv[j] * (g @ psi[j])
        if wk[j] != 0.0:
            kern = ((dx * snx[j] + dy * sny[j]) / (2.0 * s) - 0.5 * svn[j]) * g
            k += wk[j] * (kern @ phi[j])
    return v, k


def _np_history_adjoint(tx, ty, tnx, tny, tvn, sx, sy, sw, dens, dts, tw):
    out = np.zeros(tx.shape[0])
    for j in range(dts.shape[0]):
        if tw[j] == 0.0:
            continue
        s = dts[j]
        dx = tx[:, None] - sx[j][None, :]
        dy = ty[:, None] - sy[j][None, :]
        g = np.exp(-(dx * dx + dy * dy) / (4.0 * s)) * (sw[j] / math.sqrt(_FOUR_PI * s))
        kern = (-(dx * tnx[:, None] + dy * tny[:, None]) / (2.0 * s) + 0.5 * tvn[:, None]) * g
        out += tw[j] * (kern @ dens[j])
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _nb_history_vk(tx, ty, sx, sy, snx, sny, svn, sw, psi, phi, dts, wv, wk):
        nt = tx.shape[0]
        ns = sx.shape[1]
        v = np.zeros(nt)
        k = np.zeros(nt)
        for j in range(dts.shape[0]):
            a = wv[j]
            b = wk[j]
            if a == 0.0 and b == 0.0:
                continue
            s = dts[j]
            inv4s = 1.0 / (4.0 * s)
            inv2s = 1.0 / (2.0 * s)
            c = 1.0 / math.sqrt(_FOUR_PI * s)
            for i in range(nt):
                accv = 0.0
                acck = 0.0
                for m in range(ns):
                    dx = tx[i] - sx[j, m]
                    dy = ty[i] - sy[j, m]
                    g = c * math.exp(-(dx * dx + dy * dy) * inv4s) * sw[j, m]
                    accv += g * psi[j, m]
                    acck += ((dx * snx[j, m] + dy * sny[j, m]) * inv2s - 0.5 * svn[j, m]) * g * phi[j, m]
                v[i] += a * accv
                k[i] += b * acck
        return v, k

    @numba.njit(cache=True)
    def _nb_history_adjoint(tx, ty, tnx, tny, tvn, sx, sy, sw, dens, dts, tw):
        nt = tx.shape[0]
        ns = sx.shape[1]
        out = np.zeros(nt)
        for j in range(dts.shape[0]):
            a = tw[j]
            if a == 0.0:
                continue
            s = dts[j]
            inv4s = 1.0 / (4.0 * s)
            inv2s = 1.0 / (2.0 * s)
            c = 1.0 / math.sqrt(_FOUR_PI * s)
            for i in range(nt):
                acc = 0.0
                for m in range(ns):
                    dx = tx[i] - sx[j, m]
                    dy = ty[i] - sy[j, m]
                    g = c * math.exp(-(dx * dx + dy * dy) * inv4s) * sw[j, m]
                    acc += (-(dx * tnx[i] + dy * tny[i]) * inv2s + 0.5 * tvn[i]) * g * dens[j, m]
                out[i] += a * acc
        return out


_IMPLS = {"numpy": (_np_history_vk, _np_history_adjoint)}
if HAVE_NUMBA:
    _IMPLS["numba"] = (_nb_history_vk, _nb_history_adjoint)

_active = "numba" if HAVE_NUMBA else "numpy"


def use_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previously active name."""
    global _active
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_IMPLS)}")
    prev, _active = _active, name
    return prev


def backend() -> str:
    return _active


_env = os.environ.get("HEATTUBE_BACKEND", "").strip().lower()
if _env:
    use_backend(_env)


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def history_vk(tx, ty, sx, sy, snx, sny, svn, sw, psi, phi, dts, wv, wk):
    """Weighted sums of single-layer (on `psi`) and double-layer (on `phi`) kernels.

    Returns ``(v, k)`` with ``v[i] = sum_j wv[j] sum_m G psi[j, m] sw[j, m]`` and
    ``k`` the analogous double-layer sum.  The exponential is shared.
    """
    fn = _IMPLS[_active][0]
    return fn(*(_f(a) for a in (tx, ty, sx, sy, snx, sny, svn, sw, psi, phi, dts, wv, wk)))


def history_adjoint(tx, ty, tnx, tny, tvn, sx, sy, sw, dens, dts, tw):
    """Weighted sums of the adjoint double-layer kernel (normal at the target)."""
    fn = _IMPLS[_active][1]
    return fn(*(_f(a) for a in (tx, ty, tnx, tny, tvn, sx, sy, sw, dens, dts, tw)))
