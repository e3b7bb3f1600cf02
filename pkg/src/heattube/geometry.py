"""Star-shaped moving void, fixed exterior circle and the space-time node mesh.

The void boundary is the polar graph ``r = w(t, phi)`` with

    w(t, phi) = sum_l L_l(t) * omega_l(phi)

where ``L_l`` are Legendre polynomials shifted to ``[0, T]`` and normalized
to unit L2 norm, and ``omega_l`` is a real trigonometric polynomial of degree
``N_K`` (cosines up to ``N_K``, sines up to ``N_K - 1``).

Normals point out of the heat-conducting region: into the void on the
interior curve and away from the origin on the exterior circle.  Signed
curvature is positive when the normal points toward the centre of
curvature, so a circular void of radius r has curvature ``+1/r`` and the
exterior circle of radius R has ``-1/R``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "ShapeCoefficients",
    "BoundarySample",
    "SpaceTimeMesh",
    "legendre_basis",
    "legendre_basis_derivative",
    "radius",
    "boundary_sample",
    "build_mesh",
    "INTERIOR",
    "EXTERIOR",
]

INTERIOR = 0
EXTERIOR = 1


class GeometryError(ValueError):
    """Raised when a shape leaves the admissible set ``0 < w < R``."""


def _shifted_legendre(t, n_legendre: int, T: float):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-14 * T) or np.any(t > T * (1 + 1e-14)):
        raise ValueError(f"time {t} outside [0, {T}]")
    s = 2.0 * t / T - 1.0
    P = np.empty((n_legendre + 1,) + s.shape)
    dP = np.empty_like(P)
    P[0] = 1.0
    dP[0] = 0.0
    if n_legendre >= 1:
        P[1] = s
        dP[1] = 1.0
    for n in range(2, n_legendre + 1):
        P[n] = ((2 * n - 1) * s * P[n - 1] - (n - 1) * P[n - 2]) / n
        dP[n] = dP[n - 2] + (2 * n - 1) * P[n - 1]
    scale = np.sqrt((2 * np.arange(n_legendre + 1) + 1) / T)
    scale = scale.reshape((-1,) + (1,) * s.ndim)
    return scale * P, scale * dP * (2.0 / T)


def legendre_basis(t, n_legendre: int, T: float = 1.0) -> np.ndarray:
    """Orthonormal Legendre polynomials on ``[0, T]`` evaluated at `t`.

    Computed with the three-term recurrence, then scaled to unit
    ``L2(0, T)`` norm.  Returns an array of shape ``(n_legendre + 1,) +
    np.shape(t)``.
    """
    if n_legendre < 0:
        raise ValueError("n_legendre must be >= 0")
    return _shifted_legendre(t, n_legendre, T)[0]


def legendre_basis_derivative(t, n_legendre: int, T: float = 1.0) -> np.ndarray:
    """Time derivatives of :func:`legendre_basis`."""
    return _shifted_legendre(t, n_legendre, T)[1]


@dataclass
class ShapeCoefficients:
    """Fourier x Legendre coefficients of the void radius.

    Row ``l`` of `coeffs` holds
    ``[beta_{NK-1,l}, ..., beta_{1,l}, alpha_{0,l}, alpha_{1,l}, ..., alpha_{NK,l}]``,
    giving ``(n_legendre + 1) x 2 n_fourier`` parameters.
    """

    n_legendre: int
    n_fourier: int
    coeffs: np.ndarray = None
    T: float = 1.0

    def __post_init__(self):
        shape = (self.n_legendre + 1, 2 * self.n_fourier)
        if self.n_fourier < 1 or self.n_legendre < 0:
            raise ValueError("need n_fourier >= 1 and n_legendre >= 0")
        if self.coeffs is None:
            self.coeffs = np.zeros(shape)
        self.coeffs = np.array(self.coeffs, dtype=float)
        if self.coeffs.shape != shape:
            raise ValueError(f"coeffs has shape {self.coeffs.shape}, expected {shape}")

    @classmethod
    def circle(cls, r: float, n_legendre: int, n_fourier: int, T: float = 1.0):
        """Static circle of radius `r`."""
        c = cls(n_legendre, n_fourier, T=T)
        c.set_alpha(0, 0, r * np.sqrt(T))
        return c

    @classmethod
    def from_vector(cls, vec, n_legendre: int, n_fourier: int, T: float = 1.0):
        vec = np.asarray(vec, dtype=float)
        return cls(n_legendre, n_fourier, vec.reshape(n_legendre + 1, 2 * n_fourier).copy(), T)

    @property
    def size(self) -> int:
        return self.coeffs.size

    def to_vector(self) -> np.ndarray:
        return self.coeffs.ravel().copy()

    def copy(self) -> "ShapeCoefficients":
        return ShapeCoefficients(self.n_legendre, self.n_fourier, self.coeffs.copy(), self.T)

    def resized(self, n_legendre: int, n_fourier: int) -> "ShapeCoefficients":
        """Same shape in a larger or smaller basis; dropped modes must be zero."""
        out = ShapeCoefficients(n_legendre, n_fourier, T=self.T)
        a, b = self.angular()
        for l in range(self.n_legendre + 1):
            for k in range(self.n_fourier + 1):
                for kind, val in (("cos", a[l, k]), ("sin", b[l, k])):
                    if val == 0.0 or (kind == "sin" and not 1 <= k < self.n_fourier):
                        continue
                    fits = l <= n_legendre and (k <= n_fourier if kind == "cos" else k < n_fourier)
                    if not fits:
                        raise ValueError(f"nonzero {kind} mode k={k}, l={l} does not fit the new basis")
                    (out.set_alpha if kind == "cos" else out.set_beta)(k, l, val)
        return out

    def alpha_column(self, k: int) -> int:
        if not 0 <= k <= self.n_fourier:
            raise IndexError(k)
        return self.n_fourier - 1 + k

    def beta_column(self, k: int) -> int:
        if not 1 <= k <= self.n_fourier - 1:
            raise IndexError(k)
        return self.n_fourier - 1 - k

    def set_alpha(self, k: int, l: int, value: float) -> None:
        self.coeffs[l, self.alpha_column(k)] = value

    def set_beta(self, k: int, l: int, value: float) -> None:
        self.coeffs[l, self.beta_column(k)] = value

    def column_modes(self):
        """``(kind, k)`` per column, kind being ``"sin"`` or ``"cos"``."""
        nk = self.n_fourier
        return [("sin", nk - 1 - c) for c in range(nk - 1)] + [("cos", k) for k in range(nk + 1)]

    def trig_stack(self, phi) -> np.ndarray:
        """Angular basis functions per column, shape ``(2 N_K,) + shape(phi)``."""
        phi = np.asarray(phi, dtype=float)
        rows = [np.sin(k * phi) if kind == "sin" else np.cos(k * phi) for kind, k in self.column_modes()]
        return np.array(rows)

    def angular(self):
        """Per Legendre row, the cosine and sine amplitudes ``(a[l, k], b[l, k])``."""
        nk = self.n_fourier
        a = self.coeffs[:, nk - 1:]                      # k = 0..NK
        b = np.zeros_like(a)
        b[:, 1:nk] = self.coeffs[:, nk - 2::-1] if nk > 1 else 0.0
        return a, b


def _angular_values(a, b, n_space: int, use_fft: bool = True):
    """omega, omega', omega'' at ``phi_i = 2 pi i / n_space`` for each row."""
    nk = a.shape[1] - 1
    k = np.arange(nk + 1)
    if use_fft and nk < n_space / 2:
        hat = np.zeros((a.shape[0], n_space // 2 + 1), dtype=complex)
        hat[:, : nk + 1] = 0.5 * n_space * (a - 1j * b)
        hat[:, 0] = n_space * a[:, 0]
        out = []
        for mult in (1.0, 1j * k, -(k ** 2.0)):
            s = hat.copy()
            s[:, : nk + 1] *= mult
            out.append(np.fft.irfft(s, n=n_space, axis=1))
        return tuple(out)
    phi = 2 * np.pi * np.arange(n_space) / n_space
    c = np.cos(np.outer(k, phi))
    s = np.sin(np.outer(k, phi))
    om = a @ c + b @ s
    dom = (b * k) @ c - (a * k) @ s
    ddom = -(a * k ** 2) @ c - (b * k ** 2) @ s
    return om, dom, ddom


def radius(coeffs: ShapeCoefficients, t, phi):
    """Radius and its first derivatives ``(w, dw/dphi, dw/dt)`` at ``(t, phi)``.

    `t` and `phi` broadcast against each other.
    """
    om, dom, _ = _angular_at(coeffs, phi)
    L = np.moveaxis(legendre_basis(t, coeffs.n_legendre, coeffs.T), 0, -1)
    dL = np.moveaxis(legendre_basis_derivative(t, coeffs.n_legendre, coeffs.T), 0, -1)
    return (om * L).sum(-1), (dom * L).sum(-1), (om * dL).sum(-1)


def _angular_at(coeffs: ShapeCoefficients, phi):
    a, b = coeffs.angular()
    k = np.arange(coeffs.n_fourier + 1)
    kp = np.multiply.outer(np.asarray(phi, dtype=float), k)
    c, s = np.cos(kp), np.sin(kp)
    om = c @ a.T + s @ b.T
    dom = c @ (b * k).T - s @ (a * k).T
    ddom = -(c @ (a * k ** 2).T) - s @ (b * k ** 2).T
    return om, dom, ddom


@dataclass(frozen=True)
class BoundarySample:
    point: np.ndarray
    unit_normal: np.ndarray
    arc_element: float
    normal_velocity: float
    curvature: float


def _samples_from_radius(phi, w, dw, ddw, dwt):
    c, s = np.cos(phi), np.sin(phi)
    arc = np.sqrt(w * w + dw * dw)
    nx = -(w * c + dw * s) / arc
    ny = -(w * s - dw * c) / arc
    vn = -w * dwt / arc
    curv = (w * w + 2 * dw * dw - w * ddw) / arc ** 3
    return w * c, w * s, nx, ny, arc, vn, curv


def boundary_sample(coeffs: ShapeCoefficients, t: float, phi: float) -> BoundarySample:
    """Position, normal, arc element, normal velocity and curvature at one node."""
    w, dw, dwt = radius(coeffs, t, phi)
    ddw = (_angular_at(coeffs, phi)[2] * legendre_basis(t, coeffs.n_legendre, coeffs.T)).sum()
    if not w > 0:
        raise GeometryError(f"non-positive radius {w:g} at t={t:g}, phi={phi:g}")
    x, y, nx, ny, arc, vn, curv = _samples_from_radius(phi, float(w), float(dw), ddw, float(dwt))
    return BoundarySample(np.array([x, y]), np.array([nx, ny]), float(arc), float(vn), float(curv))


@dataclass
class SpaceTimeMesh:
    """Node data on ``Gamma_t u Gamma^f`` for ``t_n = n h``, ``n = 0..n_time``.

    Every per-node array has shape ``(n_time + 1, 2 * n_space)``; columns
    ``[:n_space]`` are the void boundary and ``[n_space:]`` the exterior
    circle, both at angles ``phi_i = 2 pi i / n_space``.  `weight` is the
    spatial trapezoidal weight ``arc_element * 2 pi / n_space``.
    """

    T: float
    n_time: int
    n_space: int
    exterior_radius: float
    x: np.ndarray
    y: np.ndarray
    nx: np.ndarray
    ny: np.ndarray
    arc: np.ndarray
    vn: np.ndarray
    curv: np.ndarray
    radius: np.ndarray = field(repr=False)
    reversed_time: bool = False

    @property
    def h(self) -> float:
        return self.T / self.n_time

    @property
    def times(self) -> np.ndarray:
        return self.h * np.arange(self.n_time + 1)

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_space) / self.n_space

    @property
    def n_nodes(self) -> int:
        return 2 * self.n_space

    @property
    def weight(self) -> np.ndarray:
        return self.arc * (2 * np.pi / self.n_space)

    def component(self, comp: int) -> slice:
        return slice(0, self.n_space) if comp == INTERIOR else slice(self.n_space, 2 * self.n_space)

    def sample(self, level: int, comp: int, i: int) -> BoundarySample:
        j = i + (self.n_space if comp == EXTERIOR else 0)
        return BoundarySample(
            np.array([self.x[level, j], self.y[level, j]]),
            np.array([self.nx[level, j], self.ny[level, j]]),
            float(self.arc[level, j]),
            float(self.vn[level, j]),
            float(self.curv[level, j]),
        )

    def time_reversed(self) -> "SpaceTimeMesh":
        """Mesh of ``t -> T - t``: levels flipped, normal velocities negated."""
        flip = lambda a: a[::-1].copy()  # noqa: E731
        return SpaceTimeMesh(
            self.T, self.n_time, self.n_space, self.exterior_radius,
            flip(self.x), flip(self.y), flip(self.nx), flip(self.ny), flip(self.arc),
            -flip(self.vn), flip(self.curv), flip(self.radius), not self.reversed_time,
        )


def build_mesh(
    coeffs: ShapeCoefficients,
    exterior_radius: float,
    n_time: int,
    n_space: int,
    use_fft: bool = True,
) -> SpaceTimeMesh:
    """Sample the void and exterior circle on the ``(n_time + 1) x n_space`` grid.

    Raises
    ------
    GeometryError
        If ``0 < w < exterior_radius`` fails at any node.
    """
    if n_time < 1 or n_space < 3:
        raise ValueError("need n_time >= 1 and n_space >= 3")
    T = coeffs.T
    t = T * np.arange(n_time + 1) / n_time
    L = legendre_basis(t, coeffs.n_legendre, T)            # (NL+1, Nt+1)
    dL = legendre_basis_derivative(t, coeffs.n_legendre, T)
    a, b = coeffs.angular()
    om, dom, ddom = _angular_values(a, b, n_space, use_fft)  # (NL+1, Nx)
    w = L.T @ om
    dw = L.T @ dom
    ddw = L.T @ ddom
    dwt = dL.T @ om
    if not np.all(w > 0):
        raise GeometryError(f"radius min {w.min():.4g} is not positive")
    if not np.all(w < exterior_radius):
        raise GeometryError(f"radius max {w.max():.4g} reaches the exterior circle {exterior_radius:g}")

    phi = 2 * np.pi * np.arange(n_space) / n_space
    x, y, nx, ny, arc, vn, curv = _samples_from_radius(phi[None, :], w, dw, ddw, dwt)

    R = float(exterior_radius)
    shape = (n_time + 1, n_space)
    ex = np.broadcast_to(R * np.cos(phi), shape)
    ey = np.broadcast_to(R * np.sin(phi), shape)
    cat = lambda u, v: np.ascontiguousarray(np.concatenate([u, np.broadcast_to(v, shape)], axis=1))  # noqa: E731
    return SpaceTimeMesh(
        T=T,
        n_time=n_time,
        n_space=n_space,
        exterior_radius=R,
        x=cat(x, ex),
        y=cat(y, ey),
        nx=cat(nx, np.cos(phi)),
        ny=cat(ny, np.sin(phi)),
        arc=cat(arc, R),
        vn=cat(vn, 0.0),
        curv=cat(curv, -1.0 / R),
        radius=w,
    )
