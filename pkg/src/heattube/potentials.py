"""Poisson-Weierstrass surface integrals and singular time quadrature.

The thermal single and double layer operators are split as

    (V q)(t, x) = (4 pi)^(-1/2) int_0^t (t - tau)^(-1/2) V(t, tau) q(tau) dtau

where ``V(t, tau)`` is a Gaussian surface integral over the boundary at
time ``tau``.  These surface integrals are smooth up to ``tau = t``, where
``V -> identity`` and ``K -> curvature_factor * kappa``; the time factor is
handled by the corrected trapezoidal rules of :func:`corrected_rule`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .conventions import Conventions, default_conventions
from .geometry import SpaceTimeMesh

__all__ = [
    "BoundaryField",
    "CorrectedTimeRule",
    "heat_kernel",
    "poisson_single",
    "poisson_double",
    "poisson_adjoint_double",
    "corrected_rule",
    "RIGHT",
    "BOTH",
]

RIGHT = "right"
BOTH = "both"
_VARIANTS = {
    "right": RIGHT,
    "right-endpoint": RIGHT,
    "right-endpoint-corrected": RIGHT,
    "both": BOTH,
    "both-endpoints": BOTH,
    "both-endpoints-corrected": BOTH,
}


@dataclass
class BoundaryField:
    """Samples on the space-time node grid.

    With ``singularity_exponent == -0.5`` the stored `values` are the smooth
    cofactor ``chi`` of a field ``chi / sqrt(d)``, ``d`` being the distance in
    time to the singular end (``"start"`` is t = 0, ``"end"`` is t = T).
    """

    values: np.ndarray
    singularity_exponent: float = 0.0
    singular_end: str = "start"

    def __post_init__(self):
        if self.singularity_exponent not in (0.0, -0.5):
            raise ValueError("singularity_exponent must be 0 or -1/2")
        if self.singular_end not in ("start", "end"):
            raise ValueError("singular_end must be 'start' or 'end'")

    def check_mesh(self, mesh: SpaceTimeMesh) -> None:
        if self.values.shape != (mesh.n_time + 1, mesh.n_nodes):
            raise ValueError(f"field shape {self.values.shape} does not match mesh")

    def trace(self, T: float = 1.0) -> np.ndarray:
        """Field values; the singular end level is ``inf`` unless its cofactor is 0."""
        if self.singularity_exponent == 0.0:
            return self.values
        n = self.values.shape[0] - 1
        d = T * np.arange(n + 1) / n
        if self.singular_end == "end":
            d = d[::-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.values / np.sqrt(d)[:, None]
        out[d == 0] = np.where(self.values[d == 0] == 0, 0.0, np.inf)
        return out


def heat_kernel(d: int, dt: float, r2):
    """Inner kernel ``(4 pi dt)^(-(d-1)/2) exp(-r2 / (4 dt))``.

    Multiplied by ``(4 pi dt)^(-1/2)`` this is the heat kernel in `d`
    dimensions.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (4 * math.pi * dt) ** (-(d - 1) / 2) * np.exp(-np.asarray(r2) / (4 * dt))


def _check_levels(source_level: int, target_level: int):
    if source_level > target_level:
        raise ValueError(f"source level {source_level} after target level {target_level}")


def _pair(mesh, source_level, target_level):
    s = slice(source_level, source_level + 1)
    dts = np.array([mesh.h * (target_level - source_level)])
    return s, dts


def poisson_single(mesh: SpaceTimeMesh, source_level: int, target_level: int, density) -> np.ndarray:
    """Gaussian surface integral of `density` from one level onto another.

    Equal levels return `density` itself (the coincidence limit).
    """
    _check_levels(source_level, target_level)
    density = np.asarray(density, dtype=float)
    if source_level == target_level:
        return density.copy()
    s, dts = _pair(mesh, source_level, target_level)
    n = target_level
    v, _ = kernels.history_vk(
        mesh.x[n], mesh.y[n], mesh.x[s], mesh.y[s], mesh.nx[s], mesh.ny[s], mesh.vn[s],
        mesh.weight[s], density[None, :], np.zeros((1, mesh.n_nodes)), dts, np.ones(1), np.zeros(1),
    )
    return v


def poisson_double(
    mesh: SpaceTimeMesh, source_level: int, target_level: int, density, conventions: Conventions | None = None
) -> np.ndarray:
    """Double-layer Gaussian surface integral with the moving-boundary trace.

    Equal levels return ``curvature_factor * kappa * density``.
    """
    _check_levels(source_level, target_level)
    conv = conventions or default_conventions()
    density = np.asarray(density, dtype=float)
    if source_level == target_level:
        return conv.curvature_factor * mesh.curv[target_level] * density
    s, dts = _pair(mesh, source_level, target_level)
    n = target_level
    _, k = kernels.history_vk(
        mesh.x[n], mesh.y[n], mesh.x[s], mesh.y[s], mesh.nx[s], mesh.ny[s], mesh.vn[s],
        mesh.weight[s], np.zeros((1, mesh.n_nodes)), density[None, :], dts, np.zeros(1), np.ones(1),
    )
    return k


def poisson_adjoint_double(
    mesh: SpaceTimeMesh, source_level: int, target_level: int, density, conventions: Conventions | None = None
) -> np.ndarray:
    """Adjoint double layer: normal derivative and velocity taken at the target."""
    _check_levels(source_level, target_level)
    conv = conventions or default_conventions()
    density = np.asarray(density, dtype=float)
    if source_level == target_level:
        return conv.curvature_factor * mesh.curv[target_level] * density
    s, dts = _pair(mesh, source_level, target_level)
    n = target_level
    return kernels.history_adjoint(
        mesh.x[n], mesh.y[n], mesh.nx[n], mesh.ny[n], mesh.vn[n],
        mesh.x[s], mesh.y[s], mesh.weight[s], density[None, :], dts, np.ones(1),
    )


@dataclass(frozen=True)
class CorrectedTimeRule:
    """Lower-triangular weights for the weakly singular time integrals.

    ``right``: ``int_0^{t_n} f(tau) / sqrt(t_n - tau) dtau ~ sum_j weights[n, j] f(t_j)``.

    ``both``: ``int_0^{t_n} g(tau) / sqrt(tau (t_n - tau)) dtau ~ sum_j weights[n, j] g(t_j)``.
    """

    h: float
    weights: np.ndarray
    variant: str

    @property
    def n_time(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def mu(self) -> np.ndarray:
        """Endpoint correction ``mu_n`` including the ``(4 pi)^(-1/2)`` prefactor."""
        return np.diag(self.weights) / math.sqrt(4 * math.pi)

    def apply(self, f) -> np.ndarray:
        """Rule applied to samples ``f[j]`` for every row ``n``."""
        return self.weights @ np.asarray(f, dtype=float)


def _right_weights(n_time: int, h: float) -> np.ndarray:
    W = np.zeros((n_time + 1, n_time + 1))
    for n in range(1, n_time + 1):
        j = np.arange(n)
        row = h / np.sqrt(h * (n - j))
        row[0] *= 0.5
        W[n, :n] = row
        # exact for constants: int_0^t dtau / sqrt(t - tau) = 2 sqrt(t)
        W[n, n] = 2.0 * math.sqrt(n * h) - row.sum()
    return W


def _both_weights(n_time: int, h: float, interp: str) -> np.ndarray:
    # Product integration against 1 / sqrt(tau (t - tau)) with closed-form
    # moments of 1, sqrt(tau) and tau on every panel.
    W = np.zeros((n_time + 1, n_time + 1))
    for n in range(1, n_time + 1):
        t = n * h
        tau = h * np.arange(n + 1)
        rem = h * (n - np.arange(n + 1))
        sq, sr = np.sqrt(tau), np.sqrt(rem)
        theta = np.arctan2(sq, sr)
        m0 = 2.0 * np.diff(theta)                   # int 1 / sqrt(tau (t - tau))
        m1 = -2.0 * np.diff(sr)                     # int sqrt(tau) / ...
        m2 = t * np.diff(theta) - np.diff(sq * sr)  # int tau / ...
        if interp == "linear":
            a, b = tau[:-1], tau[1:]
            W[n, :n] += (b * m0 - m2) / h
            W[n, 1 : n + 1] += (m2 - a * m0) / h
        else:
            a, b = sq[:-1], sq[1:]
            W[n, :n] += (b * m0 - m1) / (b - a)
            W[n, 1 : n + 1] += (m1 - a * m0) / (b - a)
    return W


def corrected_rule(n_time: int, h: float, variant: str = RIGHT, interp: str = "sqrt") -> CorrectedTimeRule:
    """Singularity-corrected trapezoidal weights on ``t_j = j h``.

    Parameters
    ----------
    variant : {"right", "both"}
        ``right`` is the trapezoidal rule whose endpoint weight at
        ``tau = t_n`` is chosen to integrate constants exactly.  ``both`` is
        product integration against ``1 / sqrt(tau (t_n - tau))`` for
        densities carrying an inverse square root at ``tau = 0``.
    interp : {"sqrt", "linear"}
        For ``both``: interpolant of the cofactor on each panel, linear in
        ``sqrt(tau)`` (default) or linear in ``tau``.  Cofactors of
        incompatible Dirichlet problems carry a ``sqrt(tau)`` term that the
        ``tau``-linear interpolant resolves only to first order.  Quadratic
        interpolants in ``sqrt(tau)`` make the adjoint marching unstable
        (the diagonal weight drops below its neighbour) and are not offered.
    """
    if n_time < 1 or not h > 0:
        raise ValueError("need n_time >= 1 and h > 0")
    key = _VARIANTS.get(variant)
    if key is None:
        raise ValueError(f"unknown rule variant {variant!r}")
    if key == RIGHT:
        return CorrectedTimeRule(h, _right_weights(n_time, h), RIGHT)
    if interp not in ("sqrt", "linear"):
        raise ValueError(f"unknown interpolation {interp!r}")
    return CorrectedTimeRule(h, _both_weights(n_time, h, interp), BOTH)
