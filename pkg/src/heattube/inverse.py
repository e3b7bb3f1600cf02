"""Tracking functional, adjoint shape gradient and the quasi-Newton loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .conventions import Conventions, default_conventions
from .geometry import GeometryError, ShapeCoefficients, SpaceTimeMesh, build_mesh, legendre_basis
from .potentials import BoundaryField, corrected_rule
from .solver import exterior_data, solve_adjoint, solve_dirichlet

__all__ = [
    "ObjectiveReport",
    "InversionHistory",
    "LineSearchError",
    "evaluate_objective",
    "objective_from_trace",
    "shape_gradient",
    "objective_and_gradient",
    "lbfgs_direction",
    "line_search",
    "run_inversion",
    "coefficient_error",
    "trapezoid_weights",
]

log = logging.getLogger(__name__)


class LineSearchError(RuntimeError):
    """No step satisfying the sufficient-decrease condition was found."""


@dataclass
class ObjectiveReport:
    value: float
    neumann_state: BoundaryField | None = None
    gradient: np.ndarray | None = None
    mesh: SpaceTimeMesh | None = None
    adjoint: BoundaryField | None = None

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)


def trapezoid_weights(n_time: int, h: float) -> np.ndarray:
    w = np.full(n_time + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _check_data(config, f, g):
    shape = (config.n_time + 1, config.n_space)
    for name, arr in (("f", f), ("g", g)):
        if np.shape(arr) != shape:
            raise ValueError(f"{name} has shape {np.shape(arr)}, expected {shape}")


def objective_from_trace(mesh: SpaceTimeMesh, neumann, g) -> float:
    """``1/2 int int (dv/dn - g)^2`` on the exterior circle."""
    ext = mesh.component(1)
    diff = np.asarray(neumann)[:, ext] - g
    wt = trapezoid_weights(mesh.n_time, mesh.h)
    return 0.5 * float(wt @ ((diff * diff) @ mesh.weight[0, ext]))


def evaluate_objective(
    coeffs: ShapeCoefficients, f, g, config, conventions: Conventions | None = None
) -> ObjectiveReport:
    """Solve the state on the shape given by `coeffs` and evaluate the misfit.

    A shape outside ``0 < w < R`` gives ``value = inf``.
    """
    _check_data(config, f, g)
    try:
        mesh = build_mesh(coeffs, config.exterior_radius, config.n_time, config.n_space)
    except GeometryError as exc:
        log.debug("geometry fault: %s", exc)
        return ObjectiveReport(math.inf)
    state = solve_dirichlet(mesh, exterior_data(mesh, f), conventions)
    return ObjectiveReport(objective_from_trace(mesh, state.values, g), state, mesh=mesh)


def shape_gradient(
    coeffs: ShapeCoefficients,
    mesh: SpaceTimeMesh,
    neumann_state: BoundaryField,
    adjoint: BoundaryField,
    conventions: Conventions | None = None,
) -> np.ndarray:
    """Gradient of the misfit with respect to the flattened coefficients.

    Component (l, col) is ``int_0^T int_0^2pi dp/dn dv/dn L_l(t) b_col(phi)
    w(t, phi) dphi dt`` on the void, times the convention sign.  The time
    integral carries ``(T - t)^(-1/2)`` from the adjoint cofactor and uses
    the endpoint-corrected rule.
    """
    conv = conventions or default_conventions()
    if adjoint.singularity_exponent != -0.5 or adjoint.singular_end != "end":
        raise ValueError("adjoint trace must be the cofactor singular at t = T")
    neumann_state.check_mesh(mesh)
    adjoint.check_mesh(mesh)
    inner = mesh.component(0)
    N = mesh.n_time
    wt = corrected_rule(N, mesh.h).weights[N]
    F = adjoint.values[:, inner] * neumann_state.values[:, inner] * mesh.radius
    F *= wt[:, None] * (2 * np.pi / mesh.n_space)
    L = legendre_basis(mesh.times, coeffs.n_legendre, coeffs.T)      # (NL+1, Nt+1)
    B = coeffs.trig_stack(mesh.angles)                               # (2NK, Nx)
    return conv.gradient_sign * (L @ F @ B.T).ravel()


def objective_and_gradient(coeffs, f, g, config, conventions=None) -> ObjectiveReport:
    rep = evaluate_objective(coeffs, f, g, config, conventions)
    if rep.feasible:
        _attach_gradient(rep, coeffs, g, conventions)
    return rep


def _attach_gradient(rep, coeffs, g, conventions):
    ext = rep.mesh.component(1)
    adj = solve_adjoint(rep.mesh, rep.neumann_state.values[:, ext] - g, conventions)
    rep.adjoint = adj
    rep.gradient = shape_gradient(coeffs, rep.mesh, rep.neumann_state, adj, conventions)
    return rep


def lbfgs_direction(pairs, gradient) -> np.ndarray:
    """Two-loop recursion for ``-H grad`` from stored ``(s, y)`` pairs, oldest first.

    Pairs with ``<s, y> <= 0`` are skipped; the initial inverse Hessian is
    ``<s, y> / <y, y>`` of the newest kept pair.
    """
    q = np.array(gradient, dtype=float)
    kept = [(s, y, 1.0 / float(s @ y)) for s, y in pairs if float(s @ y) > 0]
    alphas = []
    for s, y, rho in reversed(kept):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if kept:
        s, y, _ = kept[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(kept, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


@dataclass
class LineSearchResult:
    step: float
    value: float
    evaluations: int
    payload: object = None


def line_search(phi, phi0: float, dphi0: float, alpha0: float = 1.0, c1: float = 1e-4, max_trials: int = 20):
    """Backtracking search with quadratic interpolation.

    `phi(alpha)` returns either a float or ``(value, payload)``.  The trial
    step is replaced by the minimizer of the quadratic through ``phi(0)``,
    ``phi'(0)`` and the last trial, kept within ``[0.1, 0.5]`` of the trial
    while the Armijo condition fails.  An accepted first trial is
    refined once if the model minimizer is markedly different and better.
    Infinite values (geometry faults) halve the step.
    """
    if not dphi0 < 0:
        raise ValueError("not a descent direction")

    def ev(a):
        out = phi(a)
        return out if isinstance(out, tuple) else (out, None)

    def model_min(a, fa):
        curv = fa - phi0 - dphi0 * a
        if not math.isfinite(fa) or curv <= 0:
            return None
        return -dphi0 * a * a / (2.0 * curv)

    alpha = alpha0
    fa, pay = ev(alpha)
    evals = 1
    for trial in range(max_trials):
        aq = model_min(alpha, fa)
        if math.isfinite(fa) and fa <= phi0 + c1 * alpha * dphi0:
            if trial == 0 and aq is not None and abs(aq - alpha) > 0.25 * alpha and evals < max_trials:
                fq, payq = ev(aq)
                evals += 1
                if math.isfinite(fq) and fq < fa and fq <= phi0 + c1 * aq * dphi0:
                    return LineSearchResult(aq, fq, evals, payq)
            return LineSearchResult(alpha, fa, evals, pay)
        if evals >= max_trials:
            break
        alpha = 0.5 * alpha if aq is None else min(max(aq, 0.1 * alpha), 0.5 * alpha)
        fa, pay = ev(alpha)
        evals += 1
    raise LineSearchError(f"no acceptable step after {evals} trials")


def coefficient_error(a: ShapeCoefficients, b: ShapeCoefficients) -> float:
    """Euclidean norm of the coefficient difference."""
    if a.coeffs.shape != b.coeffs.shape:
        raise ValueError("coefficient dimensions differ")
    return float(np.linalg.norm(a.coeffs - b.coeffs))


@dataclass
class IterationRecord:
    iteration: int
    J: float
    grad_inf: float
    step: float
    l2_err: float


@dataclass
class InversionHistory:
    records: list = field(default_factory=list)
    status: str = "running"

    HEADER = ("iteration", "J", "grad_inf", "step", "l2_err")

    def append(self, rec: IterationRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            for r in self.records:
                w.writerow([r.iteration, repr(r.J), repr(r.grad_inf), repr(r.step), repr(r.l2_err)])


def run_inversion(
    config,
    f,
    g_measured,
    truth: ShapeCoefficients | None = None,
    start: ShapeCoefficients | None = None,
    conventions: Conventions | None = None,
    callback=None,
):
    """Minimize the misfit over the shape coefficients with L-BFGS.

    `config` supplies the grid (``n_time``, ``n_space``, ``exterior_radius``,
    ``T``, ``n_fourier``, ``n_legendre``), the start radius
    ``initial_radius`` and the controls ``max_iterations``,
    ``lbfgs_memory`` (0 keeps every pair), ``grad_tol``, ``misfit_tol``,
    ``stagnation_tol``,
    ``armijo_c1``, ``max_line_search``, ``initial_step`` and ``first_step``
    (largest radius change of the first, unscaled steepest-descent step).

    Returns
    -------
    (ShapeCoefficients, InversionHistory)
        History row k describes iterate k; row 0 is the start.
    """
    _check_data(config, f, g_measured)
    nl, nk, T = config.n_legendre, config.n_fourier, config.T
    x = start.copy() if start is not None else ShapeCoefficients.circle(config.initial_radius, nl, nk, T)
    history = InversionHistory()
    rep = objective_and_gradient(x, f, g_measured, config, conventions)
    if not rep.feasible:
        raise GeometryError("initial shape is not admissible")
    err = coefficient_error(x, truth) if truth is not None else math.nan
    memory = config.lbfgs_memory if config.lbfgs_memory > 0 else config.max_iterations + 1
    pairs = []
    step = 0.0
    history.append(IterationRecord(0, rep.value, float(np.abs(rep.gradient).max()), step, err))
    it = 0
    while True:
        grad = rep.gradient
        ginf = float(np.abs(grad).max())
        if callback is not None:
            callback(it, x, rep)
        if ginf < config.grad_tol:
            history.status = "gradient tolerance"
            break
        if rep.value <= config.misfit_tol:
            history.status = "misfit tolerance"
            break
        if it >= config.max_iterations:
            history.status = "max iterations"
            break
        d = lbfgs_direction(pairs, grad)
        slope = float(d @ grad)
        if not slope < 0:
            pairs.clear()
            d = -grad
            slope = float(d @ grad)
        alpha0 = config.initial_step
        if not pairs:
            alpha0 = min(alpha0, config.first_step / float(np.abs(d).max()))
        x0 = x.to_vector()

        def phi(a):
            trial = ShapeCoefficients.from_vector(x0 + a * d, nl, nk, T)
            r = evaluate_objective(trial, f, g_measured, config, conventions)
            return r.value, (trial, r)

        try:
            ls = line_search(phi, rep.value, slope, alpha0, config.armijo_c1, config.max_line_search)
        except LineSearchError as exc:
            history.status = f"line search failure: {exc}"
            log.warning("iteration %d: %s", it + 1, exc)
            break
        x_new, rep_new = ls.payload
        _attach_gradient(rep_new, x_new, g_measured, conventions)
        s = x_new.to_vector() - x0
        y = rep_new.gradient - grad
        if float(s @ y) > 0:
            pairs.append((s, y))
            if len(pairs) > memory:
                pairs.pop(0)
        stalled = rep.value - rep_new.value <= config.stagnation_tol * abs(rep.value)
        x, rep, step = x_new, rep_new, ls.step
        it += 1
        err = coefficient_error(x, truth) if truth is not None else math.nan
        history.append(IterationRecord(it, rep.value, float(np.abs(rep.gradient).max()), step, err))
        log.info("iter %3d  J=%.6e  |g|=%.3e  step=%.3e  err=%.3e", it, rep.value, history.records[-1].grad_inf, step, err)
        if stalled:
            history.status = "stagnation"
            if callback is not None:
                callback(it, x, rep)
            break
    return x, history
