"""Independent oracles for the solvers and the shape gradient.

* :class:`ManufacturedSolution` is a single layer on a small circle inside
  the void.  Its density is polynomial in time, so the time integral has a
  closed form in generalized exponential integrals and the oracle is exact
  up to the (spectrally accurate) angular sum.
* :func:`convergence_study` measures the Nystrom error against it.
* :func:`fd_gradient_check` and :func:`local_shape_derivative_check` test
  the adjoint gradient against finite differences and against the
  linearized state.
* :func:`determine_conventions` reruns the three studies that fix the
  entries of :class:`~heattube.conventions.Conventions`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import expn

from .config import RunConfig
from .conventions import Conventions, default_conventions, save_conventions
from .geometry import ShapeCoefficients, SpaceTimeMesh, build_mesh, legendre_basis
from .inverse import evaluate_objective, objective_and_gradient, trapezoid_weights
from .solver import exterior_data, single_layer_neumann, solve_dirichlet, synth_forward

__all__ = [
    "ManufacturedSolution",
    "ConvergenceResult",
    "convergence_study",
    "family_shape",
    "GradientCheckRow",
    "reference_problem",
    "fd_gradient_check",
    "gradient_sign_from_rows",
    "LocalCheckResult",
    "local_shape_derivative_check",
    "jump_sign_study",
    "determine_conventions",
    "heat_residual",
]

DEFAULT_LEVELS = ((20, 20), (40, 40), (80, 80))


# --------------------------------------------------------------------------
# manufactured solution


@dataclass
class ManufacturedSolution:
    """Single-layer heat potential of a smooth density on an auxiliary circle.

    ``v(t, x) = int_0^t int_C G(x - y, t - tau) q(tau, theta) ds_y dtau``
    with ``G`` the 2D heat kernel and
    ``q = amplitude * (tau a(theta) + tau^2 b(theta))``,
    ``a = 1 + cos(theta)/2 + 0.3 sin(2 theta)``, ``b = cos(3 theta)``.
    ``v`` solves the heat equation away from ``C`` with zero initial data.
    """

    center: tuple = (0.0, 0.0)
    radius: float = 0.12
    amplitude: float = 1.0
    n_angle: int = 128
    _theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius <= 0 or self.n_angle < 8:
            raise ValueError("need a positive radius and at least 8 angles")
        self._theta = 2 * np.pi * np.arange(self.n_angle) / self.n_angle

    @property
    def source_points(self):
        return (self.center[0] + self.radius * np.cos(self._theta),
                self.center[1] + self.radius * np.sin(self._theta))

    def _profiles(self):
        th = self._theta
        a = self.amplitude * (1 + 0.5 * np.cos(th) + 0.3 * np.sin(2 * th))
        b = self.amplitude * np.cos(3 * th)
        return a, b

    def density(self, tau, theta):
        a = 1 + 0.5 * np.cos(theta) + 0.3 * np.sin(2 * theta)
        return self.amplitude * (tau * a + tau**2 * np.cos(3 * theta))

    def evaluate(self, t, x, y):
        """``(v, dv/dx, dv/dy)`` at points ``(t, x, y)`` (broadcast together)."""
        t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, y)))
        shape = t.shape
        t, x, y = (a.ravel()[:, None] for a in (t, x, y))
        yx, yy = self.source_points
        dx, dy = x - yx, y - yy
        A = 0.25 * (dx * dx + dy * dy)
        pos = np.broadcast_to(t > 0, A.shape)
        tt = np.where(pos, np.broadcast_to(t, A.shape), 1.0)
        X = np.where(pos, A / tt, np.inf)

        # int_0^t s^p exp(-A/s) ds = t^(p+1) E_(p+2)(A/t)
        def E(p):
            with np.errstate(over="ignore", invalid="ignore"):
                return np.where(pos, tt ** (p + 1) * expn(p + 2, X), 0.0)

        Em2, Em1, E0, E1 = E(-2), E(-1), E(0), E(1)
        a, b = self._profiles()
        # density tau^k with tau = t - s
        val = a * (tt * Em1 - E0) + b * (tt * tt * Em1 - 2 * tt * E0 + E1)
        grad = a * (tt * Em2 - Em1) + b * (tt * tt * Em2 - 2 * tt * Em1 + E0)
        c = self.radius * (2 * np.pi / self.n_angle) / (4 * np.pi)
        v = c * val.sum(1)
        gx = c * (-0.5 * dx * grad).sum(1)
        gy = c * (-0.5 * dy * grad).sum(1)
        return v.reshape(shape), gx.reshape(shape), gy.reshape(shape)

    def evaluate_adaptive(self, t: float, x, y, tol: float = 1e-10):
        """Same quantities by adaptive quadrature in time (for cross-checks)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        yx, yy = self.source_points
        dx, dy = x[:, None] - yx, y[:, None] - yy
        r2 = dx * dx + dy * dy
        ds = self.radius * 2 * np.pi / self.n_angle
        n = x.size

        def integrand(tau):
            s = t - tau
            if s <= 0:
                return np.zeros(3 * n)
            g = np.exp(-r2 / (4 * s)) / (4 * np.pi * s) * self.density(tau, self._theta) * ds
            return np.concatenate([g.sum(1), (-dx / (2 * s) * g).sum(1), (-dy / (2 * s) * g).sum(1)])

        if t <= 0:
            return np.zeros(n), np.zeros(n), np.zeros(n)
        val, _ = quad_vec(integrand, 0.0, t, epsabs=tol, epsrel=0.0, limit=4000)
        return val[:n], val[n : 2 * n], val[2 * n :]

    def clearance(self, mesh: SpaceTimeMesh) -> float:
        """Smallest distance from the auxiliary circle to the void boundary."""
        inner = mesh.component(0)
        d = np.hypot(mesh.x[:, inner] - self.center[0], mesh.y[:, inner] - self.center[1])
        return float(d.min() - self.radius)

    def traces(self, mesh: SpaceTimeMesh):
        """Dirichlet data and the exact trace ``dv/dn + vn v / 2`` on every node."""
        if self.clearance(mesh) <= 0:
            raise ValueError("auxiliary circle is not inside the void")
        t = np.broadcast_to(mesh.times[:, None], mesh.x.shape)
        v, gx, gy = self.evaluate(t, mesh.x, mesh.y)
        v[0] = 0.0
        gx[0] = gy[0] = 0.0
        return v, gx * mesh.nx + gy * mesh.ny + 0.5 * mesh.vn * v


def heat_residual(sol: ManufacturedSolution, t: float, x: float, y: float, h: float = 2e-3) -> float:
    """``v_t - Lap v`` by fourth-order central differences."""
    def v(tt, xx, yy):
        return float(sol.evaluate(tt, xx, yy)[0])

    c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    k = np.arange(-2, 3)
    vt = sum(ci * v(t + ki * h, x, y) for ci, ki in zip(c, k)) / h
    vxx = sum(ci * v(t, x + ki * h, y) for ci, ki in zip(c2, k)) / h**2
    vyy = sum(ci * v(t, x, y + ki * h) for ci, ki in zip(c2, k)) / h**2
    return vt - vxx - vyy


# --------------------------------------------------------------------------
# convergence study


def family_shape(family: str) -> ShapeCoefficients:
    """Void shapes of the refinement studies.

    ``static``: circle of radius 0.3.  ``moving``: circle expanding as
    ``0.3 + 0.15 t``.
    """
    if family == "static":
        return ShapeCoefficients.circle(0.3, 0, 1)
    if family == "moving":
        c = ShapeCoefficients(1, 1)
        # w = a00 L0 + a01 L1 with L1 = sqrt(3) (2t - 1)
        c.set_alpha(0, 0, 0.375)
        c.set_alpha(0, 1, 0.15 / (2 * math.sqrt(3)))
        return c
    raise ValueError(f"unknown problem family {family!r}")


@dataclass
class ConvergenceResult:
    family: str
    levels: list
    errors: list
    order: float
    monotone: bool

    @property
    def h(self):
        return [1.0 / nt for nt, _ in self.levels]


def _fitted_order(h, errors) -> float:
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0) or len(e) < 2:
        return math.nan
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def convergence_study(
    family="static",
    levels=DEFAULT_LEVELS,
    conventions: Conventions | None = None,
    solution: ManufacturedSolution | None = None,
    exterior_radius: float = 1.0,
) -> ConvergenceResult:
    """Max-node error of :func:`solve_dirichlet` against the manufactured trace.

    Parameters
    ----------
    family : str or ShapeCoefficients
        ``"static"``, ``"moving"`` or an explicit void shape.
    levels : sequence of (n_time, n_space)
        At least three refinement levels on ``[0, 1]``.

    A non-monotone error sequence is reported through ``monotone`` only.
    """
    levels = [tuple(int(v) for v in lv) for lv in levels]
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least three levels")
    shape = family_shape(family) if isinstance(family, str) else family
    name = family if isinstance(family, str) else "custom"
    sol = solution or ManufacturedSolution()
    errors = []
    for nt, nx in levels:
        mesh = build_mesh(shape, exterior_radius, nt, nx)
        data, exact = sol.traces(mesh)
        psi = solve_dirichlet(mesh, data, conventions).values
        errors.append(float(np.abs(psi - exact).max()))
    h = [1.0 / nt for nt, _ in levels]
    monotone = all(b <= a for a, b in zip(errors, errors[1:]))
    return ConvergenceResult(name, levels, errors, _fitted_order(h, errors), monotone)


# --------------------------------------------------------------------------
# gradient checks


def reference_problem(config: RunConfig, truth_radius: float = 0.5):
    """Data and a perturbed circular iterate for the gradient checks.

    The data ``g`` belong to a static circle of radius `truth_radius`
    synthesized on the config grid with ``f = t``; the iterate is a circle
    of radius ``config.initial_radius`` with three small mode perturbations.

    Returns ``(coeffs, f, g)``.
    """
    nl, nk = config.n_legendre, config.n_fourier
    truth = ShapeCoefficients.circle(truth_radius, nl, nk, config.T)
    mesh = build_mesh(truth, config.exterior_radius, config.n_time, config.n_space)
    f = np.broadcast_to(mesh.times[:, None], (config.n_time + 1, config.n_space)).copy()
    g = synth_forward(mesh, f)
    x = ShapeCoefficients.circle(config.initial_radius, nl, nk, config.T)
    r0 = config.initial_radius
    x.set_alpha(1, 0, 0.06 * r0)
    if nl >= 1:
        x.set_alpha(0, 1, 0.1 * r0)
    if nk >= 3 and nl >= 1:
        x.set_beta(2, 1, 0.03 * r0)
    return x, f, g


@dataclass
class GradientCheckRow:
    direction: int
    eps: float
    analytic: float
    finite_difference: float

    @property
    def rel_error(self) -> float:
        a, fd = self.analytic, self.finite_difference
        if a == fd:
            return 0.0
        return abs(a - fd) / max(abs(fd), abs(a))


def fd_gradient_check(
    config: RunConfig,
    directions,
    coeffs: ShapeCoefficients | None = None,
    f=None,
    g=None,
    eps_schedule=(1e-3, 1e-4, 1e-5),
    conventions: Conventions | None = None,
) -> list[GradientCheckRow]:
    """Central differences of the misfit versus ``<grad J, e>``.

    Without explicit ``coeffs, f, g`` the :func:`reference_problem` of
    `config` is used.  One row per direction and step size.
    """
    if coeffs is None:
        coeffs, f, g = reference_problem(config)
    rep = objective_and_gradient(coeffs, f, g, config, conventions)
    if not rep.feasible:
        raise ValueError("reference shape is not admissible")
    x0 = coeffs.to_vector()
    nl, nk, T = coeffs.n_legendre, coeffs.n_fourier, coeffs.T
    rows = []
    for i, e in enumerate(directions):
        e = np.asarray(e, dtype=float)
        if e.shape != x0.shape:
            raise ValueError(f"direction {i} has shape {e.shape}, expected {x0.shape}")
        ana = float(rep.gradient @ e)
        for eps in eps_schedule:
            if not np.any(e):
                rows.append(GradientCheckRow(i, eps, ana, 0.0))
                continue
            jp = evaluate_objective(ShapeCoefficients.from_vector(x0 + eps * e, nl, nk, T), f, g, config, conventions)
            jm = evaluate_objective(ShapeCoefficients.from_vector(x0 - eps * e, nl, nk, T), f, g, config, conventions)
            rows.append(GradientCheckRow(i, eps, ana, (jp.value - jm.value) / (2 * eps)))
    return rows


def gradient_sign_from_rows(rows) -> int:
    """+1 when analytic and finite-difference slopes agree in sign for most rows."""
    votes = [np.sign(r.analytic * r.finite_difference) for r in rows if r.analytic and r.finite_difference]
    if not votes:
        raise ValueError("no nonzero rows to decide the sign")
    return 1 if sum(votes) >= 0 else -1


@dataclass
class LocalCheckResult:
    linearized: float
    gradient: float

    @property
    def discrepancy(self) -> float:
        a, b = self.linearized, self.gradient
        if a == b:
            return 0.0
        return abs(a - b) / max(abs(a), abs(b))


def local_shape_derivative_check(
    config: RunConfig,
    direction,
    coeffs: ShapeCoefficients | None = None,
    f=None,
    g=None,
    conventions: Conventions | None = None,
) -> LocalCheckResult:
    """Compare the misfit derivative through the linearized state with the adjoint gradient.

    The local derivative ``dv`` solves the heat equation with
    ``dv = -<Z, n> dv/dn`` on the void boundary and ``dv = 0`` on the
    exterior circle, where ``Z`` is the radial field of the coefficient
    perturbation `direction`.  Then
    ``int int (d dv/dn) (dv/dn - g)`` over the exterior circle must equal
    ``<grad J, direction>``.
    """
    if coeffs is None:
        coeffs, f, g = reference_problem(config)
    e = np.asarray(direction, dtype=float)
    rep = objective_and_gradient(coeffs, f, g, config, conventions)
    if not rep.feasible:
        raise ValueError("reference shape is not admissible")
    mesh = rep.mesh
    inner, ext = mesh.component(0), mesh.component(1)
    pert = ShapeCoefficients.from_vector(e, coeffs.n_legendre, coeffs.n_fourier, coeffs.T)
    L = legendre_basis(mesh.times, coeffs.n_legendre, coeffs.T)
    dw = L.T @ pert.coeffs @ coeffs.trig_stack(mesh.angles)          # (Nt+1, Nx)
    # Z = dw * (cos phi, sin phi)
    zn = dw * (np.cos(mesh.angles) * mesh.nx[:, inner] + np.sin(mesh.angles) * mesh.ny[:, inner])
    data = np.zeros((mesh.n_time + 1, mesh.n_nodes))
    data[:, inner] = -zn * rep.neumann_state.values[:, inner]
    data[0] = 0.0
    dpsi = solve_dirichlet(mesh, data, conventions).values[:, ext]
    diff = rep.neumann_state.values[:, ext] - g
    wt = trapezoid_weights(mesh.n_time, mesh.h)
    lin = float(wt @ ((dpsi * diff) @ mesh.weight[0, ext]))
    return LocalCheckResult(lin, float(rep.gradient @ e))


# --------------------------------------------------------------------------
# convention studies


def jump_sign_study(level=(40, 40), family="static", conventions: Conventions | None = None) -> dict:
    """Relative trace error of the single-layer recovery for both jump signs."""
    conv = conventions or default_conventions()
    shape = family_shape(family)
    mesh = build_mesh(shape, 1.0, *level)
    sol = ManufacturedSolution()
    data, exact = sol.traces(mesh)
    out = {}
    for sign in (1, -1):
        g, _ = single_layer_neumann(mesh, data, conv.with_(jump_sign=sign))
        out[sign] = float(np.abs(g - exact).max() / np.abs(exact).max())
    return out


def _coarse_config() -> RunConfig:
    return RunConfig(n_time=24, n_space=32, n_fourier=4, n_legendre=2)


def determine_conventions(
    levels=DEFAULT_LEVELS,
    curvature_factors=(0.5, 1.0),
    gradient_config: RunConfig | None = None,
    n_directions: int = 5,
    seed: int = 0,
):
    """Rerun the studies that fix each convention.

    * curvature factor: manufactured refinement study on the static circle
      for every candidate; the smallest finest-level error wins.
    * jump sign: single-layer recovery of the manufactured trace.
    * gradient sign: sign agreement with central differences.

    Returns ``(Conventions, summary dict)``.
    """
    base = Conventions()
    studies = {}
    for cf in curvature_factors:
        res = convergence_study("static", levels, base.with_(curvature_factor=cf))
        studies[cf] = res
    best_cf = min(studies, key=lambda c: studies[c].errors[-1])
    conv = base.with_(curvature_factor=float(best_cf))

    jumps = jump_sign_study(conventions=conv)
    conv = conv.with_(jump_sign=min(jumps, key=jumps.get))

    cfg = gradient_config or _coarse_config()
    rng = np.random.default_rng(seed)
    dirs = [rng.standard_normal(cfg.n_parameters) for _ in range(n_directions)]
    rows = fd_gradient_check(cfg, dirs, eps_schedule=(1e-4,), conventions=conv.with_(gradient_sign=1))
    conv = conv.with_(gradient_sign=gradient_sign_from_rows(rows))

    summary = {
        "curvature_factor": {
            str(cf): {"errors": r.errors, "order": r.order} for cf, r in studies.items()
        },
        "jump_sign": {str(k): v for k, v in jumps.items()},
        "gradient_sign": [[r.analytic, r.finite_difference] for r in rows],
        "levels": [list(lv) for lv in levels],
    }
    return conv, summary


def write_convention_report(conv: Conventions, summary: dict, out_dir) -> tuple[Path, Path]:
    """Write ``conventions.json`` and a plain-text ``conventions_report.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath = out / "conventions.json"
    save_conventions(conv, jpath)
    lines = ["Convention studies", "==================", ""]
    lines.append(f"curvature_factor = {conv.curvature_factor}")
    lines.append(f"  manufactured refinement, static circle, levels {summary['levels']}")
    for cf, r in summary["curvature_factor"].items():
        errs = ", ".join(f"{e:.3e}" for e in r["errors"])
        lines.append(f"  factor {cf}: max errors {errs}; fitted order {r['order']:.3f}")
    lines.append("")
    lines.append(f"jump_sign = {conv.jump_sign}")
    for s, e in summary["jump_sign"].items():
        lines.append(f"  sign {s}: relative trace error {e:.3e}")
    lines.append("")
    lines.append(f"gradient_sign = {conv.gradient_sign}")
    for a, fd in summary["gradient_sign"]:
        lines.append(f"  analytic {a: .6e}   central difference {fd: .6e}")
    rpath = out / "conventions_report.txt"
    rpath.write_text("\n".join(lines) + "\n")
    (out / "convention_studies.json").write_text(json.dumps(summary, indent=2) + "\n")
    return jpath, rpath
