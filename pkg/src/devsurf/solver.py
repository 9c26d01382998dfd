"""Damped Gauss-Newton iteration over an :class:`~devsurf.energies.EnergyProblem`.

Each iteration freezes the normalization lengths ``|S_u x S_v|`` and the
closest reference points at the current state, linearizes, and takes a
Levenberg-damped step.  A step is accepted only if the energy evaluated
with refreshed quantities at the trial state is lower.
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateParameterizationError, NumericalFailure

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    max_iterations: int = 20
    damping: float = 1e-6
    damping_up: float = 10.0
    damping_down: float = 0.3
    max_retries: int = 40
    rel_tol: float = 1e-10
    step_tol: float = 1e-12
    log_every: int = 1

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.damping < 0:
            raise ValueError("damping must be >= 0")
        if self.rel_tol <= 0 or self.step_tol <= 0:
            raise ValueError("convergence thresholds must be positive")
        if self.damping_up <= 1 or not (0 < self.damping_down < 1):
            raise ValueError("damping factors must satisfy up > 1 and 0 < down < 1")


@dataclass
class IterationRecord:
    iteration: int
    E_total: float
    E_d: float
    E_r: float
    E_c: float
    E_f: float
    step_norm: float
    wall_time: float
    mu: float = 0.0
    residual_sq: float = 0.0


@dataclass
class SolveResult:
    state: object
    history: list
    converged: bool = False
    reason: str = ""
    assembly: object = field(default=None, repr=False)


class SingularSystemError(NumericalFailure):
    pass


def gn_step(r, J, mu=0.0):
    """Increment solving ``(J^T J + mu I) delta = -J^T r``."""
    J = sp.csr_matrix(J)
    n = J.shape[1]
    A = (J.T @ J).tocsc()
    if mu > 0:
        A = A + mu * sp.identity(n, format="csc")
    g = J.T @ r
    if not np.any(g):
        return np.zeros(n)
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
        delta = -lu.solve(g)
    except RuntimeError as exc:
        raise SingularSystemError(f"normal equations singular (mu={mu:g}): {exc}") from None
    if not np.all(np.isfinite(delta)):
        raise SingularSystemError(f"normal equations singular (mu={mu:g})")
    # a pivot-starved LU on a singular matrix can return garbage without failing
    resid = A @ delta + g
    if np.linalg.norm(resid) > 1e-6 * max(np.linalg.norm(g), 1e-300):
        raise SingularSystemError(f"normal equations ill-conditioned (mu={mu:g})")
    return delta


def _record(iteration, asm, step_norm, t0, mu):
    e = asm.energies
    return IterationRecord(iteration, e["E_total"], e["E_d"], e["E_r"], e["E_c"], e["E_f"],
                           step_norm, time.perf_counter() - t0, mu, float(asm.r @ asm.r))


def _dump(problem, state, iteration, energies=None):
    return {"iteration": iteration, "points": state.points.copy(), "v": state.v.copy(),
            "d": state.d.copy(), "moment": state.moment.copy(), "energies": energies}


def _evaluate(problem, state, jacobian):
    try:
        state, ctx = problem.prepare(state)
        asm = problem.assemble(state, ctx, jacobian=jacobian)
    except (DegenerateParameterizationError, FloatingPointError, np.linalg.LinAlgError):
        return state, None
    if not np.isfinite(asm.total):
        return state, None
    return state, asm


def optimize(problem, config=None, state=None, callback=None):
    """Minimize the problem's total energy; returns a :class:`SolveResult`.

    ``history[0]`` describes the starting state and every further record an
    accepted step, so the ``E_total`` column is nonincreasing.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    state = problem.initial_state() if state is None else state
    state, asm = _evaluate(problem, state, jacobian=True)
    if asm is None:
        raise NumericalFailure("non-finite energy at the initial state",
                               _dump(problem, state, 0))
    history = [_record(0, asm, 0.0, t0, 0.0)]
    if callback:
        callback(state, history[-1])
    mu = None
    small_steps = 0
    converged, reason = False, "max_iterations"

    for it in range(1, config.max_iterations + 1):
        if asm.total == 0.0:
            converged, reason = True, "zero energy"
            break
        J, r = asm.J, asm.r
        if mu is None:
            diag = np.asarray(J.multiply(J).sum(axis=0)).ravel()
            mu = config.damping * diag.sum() / max(J.shape[1], 1)
        accepted = None
        for _ in range(config.max_retries):
            try:
                delta = gn_step(r, J, mu)
            except SingularSystemError:
                mu = max(mu * config.damping_up, 1e-12)
                continue
            trial, trial_asm = _evaluate(problem, problem.layout.apply(state, delta), False)
            if trial_asm is not None and trial_asm.total < asm.total:
                accepted = (trial, delta, trial_asm)
                break
            mu = max(mu * config.damping_up, 1e-12)
        if accepted is None:
            converged, reason = True, "no descent step"
            break
        trial, delta, trial_asm = accepted
        mu *= config.damping_down
        previous = asm.total
        state, asm = _evaluate(problem, trial, jacobian=True)
        if asm is None:
            raise NumericalFailure(f"non-finite energy at iteration {it}",
                                   _dump(problem, trial, it))
        step_norm = float(np.linalg.norm(delta))
        history.append(_record(it, asm, step_norm, t0, mu))
        if config.log_every and it % config.log_every == 0:
            log.info("iter %d  E=%.6e  E_d=%.3e  E_r=%.3e  E_c=%.3e  E_f=%.3e  |step|=%.2e",
                     it, asm.total, asm.energies["E_d"], asm.energies["E_r"],
                     asm.energies["E_c"], asm.energies["E_f"], step_norm)
        if callback:
            callback(state, history[-1])
        rel = (previous - asm.total) / max(previous, 1e-300)
        if rel < config.rel_tol or step_norm < config.step_tol:
            small_steps += 1
            if small_steps >= 2:
                converged, reason = True, "converged"
                break
        else:
            small_steps = 0

    problem.store_planes(state)
    return SolveResult(state, history, converged, reason, asm)
