"""Damped Newton solver for the regularized quasilinear Neumann problem.

The discrete residual is

    R(u) = lam * u - div( a(w_face) Du_face ) + (w_cell)^(gamma/2) - f,

with ``w = |Du|^2 + eps`` evaluated from the centered cell gradient and
averaged arithmetically onto faces.  Boundary faces carry zero flux, so the
divergence is exactly conservative.  The Jacobian is assembled in sparse form
from the same operators, which keeps Jacobian-vector products consistent with
directional finite differences of the residual.

Supernatural gradient growth shrinks Newton basins badly, so the solve walks
a continuation path: first the regularization eps is lowered geometrically
from order one, then gamma is raised linearly to its target.  Every stage
restarts Newton from the previous stage's solution.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import (
    ContractError,
    NonconvergenceError,
    ParameterError,
    UnsupportedRegimeError,
)
from .grid import (
    Grid,
    ScalarField,
    centered_gradient_matrix,
    divergence_flux,
    face_average,
    face_average_matrix,
    face_difference_matrix,
    face_normal_differences,
    gradient,
)
from .model.families import PowerHamiltonian
from .model.problem import ProblemSpec
from .model.sources import Tabulated, sample_source


@dataclass
class SolverOptions:
    tol: float = 1e-10  # residual tolerance in the discrete L2 norm
    max_iter: int = 50  # Newton iterations per continuation stage
    damping_factor: float = 0.5
    armijo: float = 1e-4
    eps_ratio: float = 0.1  # geometric eps continuation ratio
    gamma_stages: int = 4  # linear gamma continuation stages
    min_step: float = 2.0**-30


@dataclass
class StageReport:
    eps: float
    gamma: float
    iterations: int
    residual_norm: float
    damping_events: int
    residual_history: list = field(default_factory=list)


@dataclass
class SolveReport:
    stages: list
    converged: bool
    residual_norm: float
    wall_time: float = 0.0

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.stages)


def _discrete_l2(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values**2) * grid.cell_volume))


def _residual_values(grid, coeff, ham, lam, f_values, u_values):
    u = ScalarField(grid, u_values)
    du = gradient(u).components
    w = ham.eps + np.sum(du**2, axis=0)
    faces = face_normal_differences(u)
    coeffs = [coeff.a(face_average(w, grid, d)) for d in range(grid.ndim)]
    div = divergence_flux(grid, coeffs, faces).values
    return lam * u_values - div + ham.h_of_w(w) - f_values


_OP_CACHE: dict = {}


def _operators(grid: Grid):
    key = (grid.cells, grid.domain.extents)
    ops = _OP_CACHE.get(key)
    if ops is None:
        ops = {
            "C": [centered_gradient_matrix(grid, d) for d in range(grid.ndim)],
            "G": [face_difference_matrix(grid, d) for d in range(grid.ndim)],
            "A": [face_average_matrix(grid, d) for d in range(grid.ndim)],
        }
        _OP_CACHE[key] = ops
    return ops


def _jacobian_matrix(grid, coeff, ham, lam, u_values) -> sp.csr_matrix:
    ops = _operators(grid)
    uflat = u_values.ravel()
    n = uflat.size
    du = [C @ uflat for C in ops["C"]]
    w = ham.eps + sum(d * d for d in du)
    w_jac = sum(sp.diags(2.0 * du[d]) @ ops["C"][d] for d in range(grid.ndim))
    J = lam * sp.identity(n, format="csr")
    for d in range(grid.ndim):
        gu = ops["G"][d] @ uflat
        wf = ops["A"][d] @ w
        af = np.asarray(coeff.a(wf), dtype=float)
        apf = np.asarray(coeff.a_prime(wf), dtype=float)
        flux_jac = sp.diags(af) @ ops["G"][d] + sp.diags(apf * gu) @ (
            ops["A"][d] @ w_jac
        )
        # divergence is minus the transpose of the face difference
        J = J + ops["G"][d].T @ flux_jac
    J = J + sp.diags(ham.h_prime_of_w(w)) @ w_jac
    return J.tocsr()


def residual(problem: ProblemSpec, u: ScalarField, f: ScalarField | None = None) -> ScalarField:
    """Discrete residual of ``u`` against the problem's sampled source."""
    if u.grid.domain != problem.domain:
        raise ContractError("field domain does not match the problem domain")
    f_values = (f.values if f is not None else sample_source(problem.source, u.grid).values)
    vals = _residual_values(
        u.grid, problem.coefficient, problem.hamiltonian, problem.lam, f_values, u.values
    )
    return ScalarField(u.grid, vals)


def jacobian(problem: ProblemSpec, u: ScalarField) -> sp.csr_matrix:
    """Sparse Jacobian of the residual at ``u`` (C-order flattening)."""
    return _jacobian_matrix(
        u.grid, problem.coefficient, problem.hamiltonian, problem.lam, u.values
    )


def _continuation_schedule(eps_target: float, gamma_target: float, options: SolverOptions):
    eps_stages = []
    e = max(eps_target, 1.0)
    while e > eps_target * (1.0 + 1e-12):
        eps_stages.append(e)
        e *= options.eps_ratio
    eps_stages.append(eps_target)
    gamma0 = min(gamma_target, 2.0)
    stages = [(e, gamma0) for e in eps_stages]
    if gamma_target > 2.0:
        gammas = np.linspace(2.0, gamma_target, max(2, options.gamma_stages))
        stages.extend((eps_target, float(g)) for g in gammas[1:])
    return stages


def _newton_stage(grid, coeff, ham, lam, f_values, u_values, options):
    history = []
    damping_events = 0
    u = u_values
    for it in range(options.max_iter + 1):
        r = _residual_values(grid, coeff, ham, lam, f_values, u)
        rn = _discrete_l2(grid, r)
        history.append(rn)
        if rn <= options.tol:
            return u, history, damping_events, True
        if it == options.max_iter:
            break
        J = _jacobian_matrix(grid, coeff, ham, lam, u)
        delta = spsolve(J.tocsc(), -r.ravel()).reshape(grid.shape)
        merit = 0.5 * rn * rn
        alpha = 1.0
        while True:
            trial = u + alpha * delta
            rt = _residual_values(grid, coeff, ham, lam, f_values, trial)
            merit_trial = 0.5 * _discrete_l2(grid, rt) ** 2
            if merit_trial <= merit * (1.0 - 2.0 * options.armijo * alpha):
                break
            alpha *= options.damping_factor
            if alpha < options.min_step:
                return u, history, damping_events, False
        if alpha < 1.0:
            damping_events += 1
        u = trial
    return u, history, damping_events, False


def solve(
    problem: ProblemSpec,
    grid: Grid,
    options: SolverOptions | None = None,
    initial: ScalarField | None = None,
    continuation: bool = True,
) -> tuple[ScalarField, SolveReport]:
    """Solve the discrete problem on ``grid``.

    Raises :class:`NonconvergenceError` with the best iterate attached if any
    continuation stage stalls.  A vanishing zero-order coefficient has no
    direct solve; probe ``lam -> 0`` through the sweep axis instead.
    """
    if problem.lam == 0:
        raise UnsupportedRegimeError(
            "direct solves need lam > 0; probe lam -> 0 via the lambda sweep axis"
        )
    if grid.domain != problem.domain:
        raise ContractError("grid domain does not match the problem domain")
    options = options or SolverOptions()
    start = time.perf_counter()
    f_values = sample_source(problem.source, grid).values
    if initial is not None:
        if initial.grid.cells != grid.cells:
            raise ContractError("initial guess lives on a different grid")
        u = initial.values.copy()
    else:
        u = np.full(grid.shape, float(f_values.mean()) / problem.lam)
    if continuation:
        schedule = _continuation_schedule(problem.eps, problem.gamma, options)
    else:
        schedule = [(problem.eps, problem.gamma)]
    stages = []
    for eps_s, gamma_s in schedule:
        ham = PowerHamiltonian(gamma_s, eps_s)
        u, history, damping, ok = _newton_stage(
            grid, problem.coefficient, ham, problem.lam, f_values, u, options
        )
        stages.append(
            StageReport(
                eps=eps_s,
                gamma=gamma_s,
                iterations=len(history) - 1,
                residual_norm=history[-1],
                damping_events=damping,
                residual_history=history,
            )
        )
        if not ok:
            report = SolveReport(
                stages=stages,
                converged=False,
                residual_norm=history[-1],
                wall_time=time.perf_counter() - start,
            )
            raise NonconvergenceError(
                f"Newton stalled at stage eps={eps_s:.3g}, gamma={gamma_s:.3g} "
                f"with residual {history[-1]:.3e}",
                best_iterate=ScalarField(grid, u),
                residual_norm=history[-1],
                report=report,
            )
    report = SolveReport(
        stages=stages,
        converged=True,
        residual_norm=stages[-1].residual_norm,
        wall_time=time.perf_counter() - start,
    )
    return ScalarField(grid, u), report


def manufacture_source(problem: ProblemSpec, u_star: ScalarField) -> Tabulated:
    """Source that makes ``u_star`` an exact discrete solution.

    The returned table is the residual of ``u_star`` with zero source, so
    feeding it back gives a residual that vanishes to rounding.
    """
    if u_star.grid.domain != problem.domain:
        raise ContractError("field domain does not match the problem domain")
    vals = _residual_values(
        u_star.grid,
        problem.coefficient,
        problem.hamiltonian,
        problem.lam,
        np.zeros(u_star.grid.shape),
        u_star.values,
    )
    return Tabulated(vals)


@dataclass
class EpsSweepRow:
    eps: float
    grad_norm_qgamma: float
    grad_norm_eta: float
    report: SolveReport


def epsilon_sweep(
    problem: ProblemSpec,
    grid: Grid,
    eps_list,
    options: SolverOptions | None = None,
    q: float = 2.0,
    eta: float | None = None,
) -> list[EpsSweepRow]:
    """Re-solve along decreasing regularizations, warm-starting each point.

    Reports the gradient norms the estimates control so the eps-independence
    of the bounds can be checked empirically.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])) or not eps_list:
        raise ParameterError("eps values must be strictly decreasing")
    if eta is None:
        eta = 2.0 * problem.gamma - problem.p + 1.0
    rows = []
    prev: ScalarField | None = None
    for i, eps in enumerate(eps_list):
        spec = dataclasses.replace(
            problem, eps=eps, hamiltonian=PowerHamiltonian(problem.gamma, eps)
        )
        u, report = solve(
            spec, grid, options, initial=prev, continuation=(prev is None)
        )
        du = gradient(u)
        rows.append(
            EpsSweepRow(
                eps=eps,
                grad_norm_qgamma=float(
                    np.sum(du.magnitude().values ** (q * problem.gamma))
                    * grid.cell_volume
                )
                ** (1.0 / (q * problem.gamma)),
                grad_norm_eta=float(
                    np.sum(du.magnitude().values ** eta) * grid.cell_volume
                )
                ** (1.0 / eta),
                report=report,
            )
        )
        prev = u
    return rows
