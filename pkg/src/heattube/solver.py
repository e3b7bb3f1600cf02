"""Time-marching Nystrom solvers for Dirichlet problems of the heat equation.

Green's integral equation on ``Gamma_t u Gamma^f``

    phi / 2 = V psi - K phi,     psi = dphi/dn + vn * phi / 2,

is discretized with the corrected trapezoidal rule in time and the
periodic trapezoidal rule in space.  The coincidence blocks are diagonal
(``mu_n`` for V, ``mu_n * H`` for K), so each time step is an explicit
update of the unknown trace; no linear system is solved.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .conventions import Conventions, default_conventions
from .geometry import SpaceTimeMesh
from .potentials import BoundaryField, corrected_rule

__all__ = [
    "solve_dirichlet",
    "solve_adjoint",
    "synth_forward",
    "single_layer_neumann",
    "add_noise",
    "exterior_data",
]

_C = 1.0 / math.sqrt(4.0 * math.pi)


def exterior_data(mesh: SpaceTimeMesh, values, interior=0.0) -> np.ndarray:
    """Full node array with `values` on the exterior circle and `interior` on the void."""
    out = np.empty((mesh.n_time + 1, mesh.n_nodes))
    out[:, : mesh.n_space] = interior
    out[:, mesh.n_space :] = values
    return out


def _levels(mesh, n, vn):
    return (mesh.x[:n], mesh.y[:n], mesh.nx[:n], mesh.ny[:n], vn[:n], mesh.weight[:n])


def solve_dirichlet(
    mesh: SpaceTimeMesh,
    dirichlet,
    conventions: Conventions | None = None,
    velocity: bool = True,
) -> BoundaryField:
    """Neumann trace ``gamma_1^- v`` of the heat solution with Dirichlet data.

    Parameters
    ----------
    mesh : SpaceTimeMesh
    dirichlet : array, shape (n_time + 1, n_nodes)
        Boundary values on both components; level 0 must vanish.
    velocity : bool
        Drop the normal-velocity terms when False (diagnostics only).

    Returns
    -------
    BoundaryField
        ``dv/dn + vn v / 2`` at every node; on nodes where ``v = 0`` this is
        the plain normal derivative.
    """
    conv = conventions or default_conventions()
    phi = np.asarray(dirichlet, dtype=float)
    if phi.shape != (mesh.n_time + 1, mesh.n_nodes):
        raise ValueError(f"dirichlet data shape {phi.shape} does not match mesh")
    if np.any(phi[0] != 0.0):
        raise ValueError("dirichlet data must vanish at t = 0")
    N, h = mesh.n_time, mesh.h
    rule = corrected_rule(N, h).weights
    vn = mesh.vn if velocity else np.zeros_like(mesh.vn)
    psi = np.zeros_like(phi)
    for n in range(1, N + 1):
        w = _C * rule[n, :n]
        v, k = kernels.history_vk(
            mesh.x[n], mesh.y[n], *_levels(mesh, n, vn), psi[:n], phi[:n], h * (n - np.arange(n)), w, w
        )
        mu = _C * rule[n, n]
        assert mu > 0
        H = conv.curvature_factor * mesh.curv[n]
        psi[n] = (0.5 * phi[n] + k + mu * H * phi[n] - v) / mu
    return BoundaryField(psi)


def solve_adjoint(
    mesh: SpaceTimeMesh,
    mismatch,
    conventions: Conventions | None = None,
    interp: str = "sqrt",
) -> BoundaryField:
    """Normal derivative of the backward-in-time adjoint state.

    The adjoint ``-p_t = Lap p``, ``p = 0`` on the void, ``p = mismatch`` on
    the exterior circle, ``p(T) = 0`` is solved forward in ``T - t`` on the
    time-reversed mesh.  Its trace is written ``chi / sqrt(T - t)`` to absorb
    the incompatibility of ``mismatch(T)`` with the terminal condition.

    Parameters
    ----------
    mismatch : array, shape (n_time + 1, n_space)
        Exterior data in original time order.

    Returns
    -------
    BoundaryField
        Cofactor ``chi`` in original time order, ``singularity_exponent =
        -1/2`` at the end ``t = T``.  ``dp/dn = chi / sqrt(T - t)``.
        When ``mismatch(T) = 0`` the trace is computed by the same marching as
        :func:`solve_dirichlet` on the reversed mesh and only rescaled.
    """
    conv = conventions or default_conventions()
    mismatch = np.asarray(mismatch, dtype=float)
    if mismatch.shape != (mesh.n_time + 1, mesh.n_space):
        raise ValueError(f"mismatch shape {mismatch.shape} does not match mesh exterior")
    rev = mesh.time_reversed()
    phi = exterior_data(rev, mismatch[::-1])
    if np.all(phi[0] == 0.0):
        # compatible data: the plain marching applies and the trace is regular
        psi = solve_dirichlet(rev, phi, conv).values
        chi = np.sqrt(rev.times)[:, None] * psi
    else:
        chi = _march_incompatible(rev, phi, conv, interp)
    return BoundaryField(chi[::-1].copy(), singularity_exponent=-0.5, singular_end="end")


def _march_incompatible(mesh, phi, conv, interp="sqrt"):
    """Trace cofactor ``chi = sqrt(t) psi`` for data not vanishing at t = 0."""
    N, h = mesh.n_time, mesh.h
    right = corrected_rule(N, h).weights
    both = corrected_rule(N, h, "both", interp=interp).weights
    chi = np.zeros_like(phi)
    # initial layer: psi ~ phi(0) / sqrt(pi t)
    chi[0] = phi[0] / math.sqrt(math.pi)
    for n in range(1, N + 1):
        v, k = kernels.history_vk(
            mesh.x[n], mesh.y[n], *_levels(mesh, n, mesh.vn), chi[:n], phi[:n],
            h * (n - np.arange(n)), _C * both[n, :n], _C * right[n, :n],
        )
        H = conv.curvature_factor * mesh.curv[n]
        chi[n] = (0.5 * phi[n] + k + _C * right[n, n] * H * phi[n] - v) / (_C * both[n, n])
    return chi


def synth_forward(
    mesh: SpaceTimeMesh,
    f,
    conventions: Conventions | None = None,
    return_density: bool = False,
):
    """Exterior Neumann data from an indirect single-layer formulation.

    Solves ``V q = v`` (``v = f`` on the exterior, 0 on the void) by the
    same explicit marching, then takes the interior-side normal derivative
    of the single layer on the exterior circle,
    ``g = jump_sign * q / 2 + K' q``.

    Parameters
    ----------
    f : array, shape (n_time + 1, n_space)
        Exterior Dirichlet data.

    Returns
    -------
    g : array, shape (n_time + 1, n_space)
        (and the density ``q`` on all nodes when `return_density`).
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_time + 1, mesh.n_space):
        raise ValueError(f"exterior data shape {f.shape} does not match mesh")
    g, q = single_layer_neumann(mesh, exterior_data(mesh, f), conventions)
    g = g[:, mesh.component(1)]
    return (g, q) if return_density else g


def single_layer_neumann(mesh: SpaceTimeMesh, dirichlet, conventions: Conventions | None = None):
    """Indirect solve on both components: density ``q`` with ``V q = dirichlet``
    and the Neumann trace ``jump_sign * q / 2 + K' q`` at every node.

    The trace is ``dv/dn + vn v / 2``, the same quantity
    :func:`solve_dirichlet` returns.  Returns ``(neumann, q)``.
    """
    conv = conventions or default_conventions()
    data = np.asarray(dirichlet, dtype=float)
    if data.shape != (mesh.n_time + 1, mesh.n_nodes):
        raise ValueError(f"dirichlet data shape {data.shape} does not match mesh")
    if np.any(data[0] != 0.0):
        raise ValueError("dirichlet data must vanish at t = 0")
    N, h, M = mesh.n_time, mesh.h, mesh.n_nodes
    rule = corrected_rule(N, h).weights
    q = np.zeros_like(data)
    zero = np.zeros((N + 1, M))
    for n in range(1, N + 1):
        dts = h * (n - np.arange(n))
        v, _ = kernels.history_vk(
            mesh.x[n], mesh.y[n], *_levels(mesh, n, mesh.vn), q[:n], zero[:n], dts,
            _C * rule[n, :n], np.zeros(n),
        )
        q[n] = (data[n] - v) / (_C * rule[n, n])

    g = np.zeros_like(data)
    for n in range(1, N + 1):
        dts = h * (n - np.arange(n))
        kq = kernels.history_adjoint(
            mesh.x[n], mesh.y[n], mesh.nx[n], mesh.ny[n], mesh.vn[n],
            mesh.x[:n], mesh.y[:n], mesh.weight[:n], q[:n], dts, _C * rule[n, :n],
        )
        H = conv.curvature_factor * mesh.curv[n]
        g[n] = conv.jump_sign * 0.5 * q[n] + kq + _C * rule[n, n] * H * q[n]
    return g, q


def add_noise(g, level: float, seed: int = 0) -> np.ndarray:
    """Add Gaussian noise of standard deviation ``level * max|g|``."""
    if level < 0:
        raise ValueError("noise level must be non-negative")
    g = np.asarray(g, dtype=float)
    if level == 0:
        return g.copy()
    rng = np.random.default_rng(seed)
    return g + level * np.max(np.abs(g)) * rng.standard_normal(g.shape)
