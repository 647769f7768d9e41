"""Penalty-based bilevel gradient descent outer loops.

Two variants are provided. The Jacobi solver updates u and v from the same
(u^k, v^k) snapshot, with the u update using the freshly computed inner
minimizer w^{k+1}. The Gauss-Seidel solver first refreshes w, then runs an
inner loop on the penalized objective over v (cold-started from v0), then
takes one projected u step using the refreshed v and w. Both record metrics
at every outer iterate, including the initial point.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .penalty import (
    PenaltyContext,
    StepsizeError,
    grad_penalized_u,
    grad_penalized_v,
    inner_solve,
)
from .problems import BilevelProblem, SmoothnessDescriptor

INNER_SCHEDULES = ("constant", "log")


@dataclass(frozen=True)
class JacobiParams:
    """Parameters for the Jacobi solver.

    alpha is the joint stepsize for the simultaneous u and v updates, beta
    the inner stepsize for the w solve, outer_steps the number of outer
    iterations, and inner_steps the base inner iteration count. With
    inner_schedule "constant" every outer step runs inner_steps inner
    iterations; with "log" step k runs ceil(inner_steps * ln(k + e)),
    growing logarithmically from inner_steps at k = 0.
    """

    alpha: float
    beta: float
    gamma: float
    outer_steps: int
    inner_steps: int
    inner_schedule: str = "constant"
    inner_init: str = "cold"

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.outer_steps < 0:
            raise ValueError(f"outer_steps must be >= 0, got {self.outer_steps}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.inner_schedule not in INNER_SCHEDULES:
            raise ValueError(f"inner_schedule must be one of {INNER_SCHEDULES}")

    def inner_steps_at(self, k: int) -> int:
        if self.inner_schedule == "constant":
            return self.inner_steps
        return max(self.inner_steps, math.ceil(self.inner_steps * math.log(k + math.e)))


@dataclass(frozen=True)
class GaussSeidelParams:
    """Parameters for the Gauss-Seidel solver.

    alpha is the u stepsize, beta the w inner stepsize, beta_tilde the
    v inner stepsize; both inner loops run inner_steps iterations.
    """

    alpha: float
    beta: float
    beta_tilde: float
    gamma: float
    outer_steps: int
    inner_steps: int
    inner_init: str = "cold"

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.beta_tilde <= 0:
            raise ValueError("alpha, beta and beta_tilde must be positive")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.outer_steps < 0:
            raise ValueError(f"outer_steps must be >= 0, got {self.outer_steps}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")


@dataclass(frozen=True)
class IterateRecord:
    """Metrics at one outer iterate (u^k, v^k).

    Gradient norms are the norms of the update directions leaving this
    iterate; the final record evaluates them with one extra inner solve.
    """

    k: int
    upper_rel_err: float
    lower_rel_err: float
    grad_norm_u: float
    grad_norm_v: float
    penalized_value: float
    mu_k: Optional[float] = None
    bias_bound: Optional[float] = None
    wall_millis: float = 0.0


@dataclass
class Trajectory:
    """One solver run: per-iterate records plus final iterates.

    records has outer_steps + 1 entries (the initial point is record 0)
    unless the run aborted; metadata then carries "aborted" and
    "abort_reason" and records keep the finite prefix.
    """

    records: list
    params: object
    problem_name: str
    seed: int
    metadata: dict = field(default_factory=dict)
    final_u: Optional[np.ndarray] = None
    final_v: Optional[np.ndarray] = None
    final_w: Optional[np.ndarray] = None


Observer = Callable[[int, np.ndarray, np.ndarray, np.ndarray], Optional[dict]]


def _as_vector(x, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise ValueError(f"{name} has size {arr.shape[0]}, expected {dim}")
    return arr.copy()


def _record(problem, gamma, k, u, v, d_u_norm, d_v_norm, observer, w, wall_millis):
    f_val = float(problem.f(u, v))
    g_val = float(problem.g(u, v))
    if problem.value_function_oracle is not None:
        g_star = float(problem.value_function_oracle(u))
    else:
        # Without an oracle the best available estimate is g at the inner
        # iterate; the resulting gap may slightly undershoot.
        g_star = float(problem.g(u, w))
    extra = {}
    if observer is not None:
        out = observer(k, u, v, w)
        if out:
            extra = out
    return IterateRecord(
        k=k,
        upper_rel_err=abs(f_val - problem.upper_reference),
        lower_rel_err=g_val - g_star,
        grad_norm_u=d_u_norm,
        grad_norm_v=d_v_norm,
        penalized_value=f_val + gamma * (g_val - g_star),
        mu_k=extra.get("mu_k"),
        bias_bound=extra.get("bias_bound"),
        wall_millis=wall_millis,
    )


def pbgd_jacobi(
    problem: BilevelProblem,
    params: JacobiParams,
    init,
    seed: int = 0,
    observer: Optional[Observer] = None,
) -> Trajectory:
    """Runs the Jacobi solver for params.outer_steps iterations.

    init is (u0, v0, w0). Each iteration refreshes w by an inner solve
    (cold-restarted from w0 by default), then updates u and v
    simultaneously from the (u^k, v^k) snapshot with stepsize alpha; the
    u direction uses the refreshed w. project_u, when the problem defines
    it, is applied after every u update. With gamma = 0 the method is
    plain gradient descent on f over (u, v).
    """
    u0, v0, w0 = init
    u = _as_vector(u0, problem.dim_u, "u0")
    v = _as_vector(v0, problem.dim_v, "v0")
    w_init = _as_vector(w0, problem.dim_v, "w0")
    if problem.project_u is not None:
        u = np.asarray(problem.project_u(u), dtype=np.float64).reshape(-1)

    records = []
    metadata = {}
    w = w_init.copy()
    t_prev = time.perf_counter()

    def elapsed_ms():
        nonlocal t_prev
        now = time.perf_counter()
        out = (now - t_prev) * 1000.0
        t_prev = now
        return out

    k = 0
    try:
        for k in range(params.outer_steps + 1):
            ctx = PenaltyContext(
                problem=problem,
                gamma=params.gamma,
                beta=params.beta,
                inner_steps=params.inner_steps_at(k),
                inner_init=params.inner_init,
            )
            if params.gamma > 0:
                start = w if params.inner_init == "warm" else w_init
                w = inner_solve(ctx, u, start).w
            d_u = grad_penalized_u(ctx, u, v, w)
            d_v = grad_penalized_v(ctx, u, v)
            if not (np.all(np.isfinite(d_u)) and np.all(np.isfinite(d_v))):
                raise StepsizeError(f"non-finite gradient at outer step {k}")
            records.append(
                _record(
                    problem,
                    params.gamma,
                    k,
                    u,
                    v,
                    float(np.linalg.norm(d_u)),
                    float(np.linalg.norm(d_v)),
                    observer,
                    w,
                    elapsed_ms(),
                )
            )
            if k == params.outer_steps:
                break
            u = u - params.alpha * d_u
            if problem.project_u is not None:
                u = np.asarray(problem.project_u(u), dtype=np.float64).reshape(-1)
            v = v - params.alpha * d_v
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise StepsizeError(f"non-finite iterate after outer step {k}")
    except StepsizeError as err:
        metadata["aborted"] = True
        metadata["abort_reason"] = str(err)

    return Trajectory(
        records=records,
        params=params,
        problem_name=problem.name,
        seed=seed,
        metadata=metadata,
        final_u=u,
        final_v=v,
        final_w=w,
    )


def _penalized_v_grad_fn(problem, u, gamma):
    if problem.make_penalized_v_grad is not None:
        return problem.make_penalized_v_grad(u, gamma)

    def generic(vv):
        grad = problem.grad_f_v(u, vv)
        if gamma != 0.0:
            grad = grad + gamma * problem.grad_g_v(u, vv)
        return grad

    return generic


def _gs_refresh(problem, params, ctx, u, w_init, w_prev, v_init, v_prev):
    """One (w, v) refresh at fixed u: inner w solve plus penalized v loop."""
    if params.gamma > 0:
        start = w_prev if params.inner_init == "warm" else w_init
        w = inner_solve(ctx, u, start).w
    else:
        w = w_init.copy()
    pen_grad = _penalized_v_grad_fn(problem, u, params.gamma)
    v_new = (v_prev if params.inner_init == "warm" else v_init).copy()
    scale = 1.0 + float(np.linalg.norm(v_new))
    for _ in range(params.inner_steps):
        v_new = v_new - params.beta_tilde * pen_grad(v_new)
        if not np.all(np.isfinite(v_new)) or float(np.linalg.norm(v_new)) > 1e10 * scale:
            raise StepsizeError("penalized v loop diverged; reduce beta_tilde")
    residual = float(np.linalg.norm(pen_grad(v_new)))
    return w, v_new, residual


def pbgd_gauss_seidel(
    problem: BilevelProblem,
    params: GaussSeidelParams,
    init,
    seed: int = 0,
    observer: Optional[Observer] = None,
) -> Trajectory:
    """Runs the Gauss-Seidel solver for params.outer_steps iterations.

    init is (u0, v0, w0). Each outer iteration cold-restarts the inner w
    solve from w0, runs inner_steps penalized-gradient steps on v starting
    from v0, then takes one u step with the refreshed (v, w) and projects
    when the problem defines project_u. Records describe (u^k, v^k); the
    trajectory metadata additionally reports the final metrics at
    (u^K, v^{K+1}), the indexing used by the method's guarantee.
    """
    u0, v0, w0 = init
    u = _as_vector(u0, problem.dim_u, "u0")
    v_init = _as_vector(v0, problem.dim_v, "v0")
    w_init = _as_vector(w0, problem.dim_v, "w0")
    if problem.project_u is not None:
        u = np.asarray(problem.project_u(u), dtype=np.float64).reshape(-1)

    ctx = PenaltyContext(
        problem=problem,
        gamma=params.gamma,
        beta=params.beta,
        inner_steps=params.inner_steps,
        inner_init=params.inner_init,
    )
    records = []
    metadata = {}
    v = v_init.copy()
    w = w_init.copy()
    t_prev = time.perf_counter()

    def elapsed_ms():
        nonlocal t_prev
        now = time.perf_counter()
        out = (now - t_prev) * 1000.0
        t_prev = now
        return out

    try:
        for k in range(params.outer_steps + 1):
            w_next, v_next, v_residual = _gs_refresh(
                problem, params, ctx, u, w_init, w, v_init, v
            )
            d_u = grad_penalized_u(ctx, u, v_next, w_next)
            if not np.all(np.isfinite(d_u)):
                raise StepsizeError(f"non-finite u gradient at outer step {k}")
            records.append(
                _record(
                    problem,
                    params.gamma,
                    k,
                    u,
                    v,
                    float(np.linalg.norm(d_u)),
                    v_residual,
                    observer,
                    w_next,
                    elapsed_ms(),
                )
            )
            if k == params.outer_steps:
                # The guarantee evaluates the final point at (u^K, v^{K+1}).
                f_fin = float(problem.f(u, v_next))
                g_fin = float(problem.g(u, v_next))
                if problem.value_function_oracle is not None:
                    g_star_fin = float(problem.value_function_oracle(u))
                else:
                    g_star_fin = float(problem.g(u, w_next))
                metadata["final_metrics"] = {
                    "indexing": "(u^K, v^{K+1})",
                    "upper_value": f_fin,
                    "upper_rel_err": abs(f_fin - problem.upper_reference),
                    "lower_rel_err": g_fin - g_star_fin,
                    "grad_norm_u": float(np.linalg.norm(d_u)),
                }
                v = v_next
                w = w_next
                break
            u = u - params.alpha * d_u
            if problem.project_u is not None:
                u = np.asarray(problem.project_u(u), dtype=np.float64).reshape(-1)
            v = v_next
            w = w_next
            if not np.all(np.isfinite(u)):
                raise StepsizeError(f"non-finite iterate after outer step {k}")
    except StepsizeError as err:
        metadata["aborted"] = True
        metadata["abort_reason"] = str(err)

    return Trajectory(
        records=records,
        params=params,
        problem_name=problem.name,
        seed=seed,
        metadata=metadata,
        final_u=u,
        final_v=v,
        final_w=w,
    )


def schedule_from_epsilon(
    epsilon: float,
    constants: SmoothnessDescriptor,
    c_gamma: float = 1.0,
    c_T: float = 1.0,
):
    """Target-accuracy parameter schedule.

    Returns (gamma, alpha, beta, T) with gamma = c_gamma * epsilon^-0.5,
    beta = 1/ell_g, alpha = 1/(ell_f + gamma*(ell_g + L_g)) where
    L_g = ell_g * (1 + ell_g/(2 mu_g)) is the induced smoothness of the
    value function, and T = ceil(c_T * log(gamma^2 / epsilon)).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if constants is None:
        raise ValueError("smoothness constants are required for the schedule")
    if c_gamma <= 0 or c_T <= 0:
        raise ValueError("c_gamma and c_T must be positive")
    gamma = c_gamma * epsilon**-0.5
    beta = 1.0 / constants.ell_g
    value_smoothness = constants.ell_g * (1.0 + constants.ell_g / (2.0 * constants.mu_g))
    alpha = 1.0 / (constants.ell_f + gamma * (constants.ell_g + value_smoothness))
    T = max(1, math.ceil(c_T * math.log(gamma**2 / epsilon)))
    return gamma, alpha, beta, T


def grid_search_stepsizes(
    problem: BilevelProblem,
    candidate_alphas,
    candidate_betas,
    budget: int,
    gamma: float,
    inner_steps: int,
    init,
    method: str = "jacobi",
    candidate_beta_tildes=None,
    seed: int = 0,
) -> dict:
    """Selects stepsizes by short deterministic pilot runs.

    Runs budget outer iterations for every grid point and returns the
    configuration whose final penalized value is smallest, breaking ties
    toward smaller alpha, then smaller beta, then smaller beta_tilde.
    Pilots that diverge are skipped; if every pilot diverges an error
    listing per-candidate diagnostics is raised.
    """
    alphas = list(candidate_alphas)
    betas = list(candidate_betas)
    if not alphas or not betas:
        raise ValueError("candidate grids must be nonempty")
    if method not in ("jacobi", "gauss_seidel"):
        raise ValueError(f"method must be 'jacobi' or 'gauss_seidel', got {method!r}")
    if method == "gauss_seidel":
        beta_tildes = list(candidate_beta_tildes) if candidate_beta_tildes else betas
    else:
        beta_tildes = [None]

    best = None
    failures = []
    for alpha in alphas:
        for beta in betas:
            for beta_tilde in beta_tildes:
                if method == "jacobi":
                    params = JacobiParams(
                        alpha=alpha,
                        beta=beta,
                        gamma=gamma,
                        outer_steps=budget,
                        inner_steps=inner_steps,
                    )
                    traj = pbgd_jacobi(problem, params, init, seed=seed)
                else:
                    params = GaussSeidelParams(
                        alpha=alpha,
                        beta=beta,
                        beta_tilde=beta_tilde,
                        gamma=gamma,
                        outer_steps=budget,
                        inner_steps=inner_steps,
                    )
                    traj = pbgd_gauss_seidel(problem, params, init, seed=seed)
                label = (alpha, beta, beta_tilde if beta_tilde is not None else beta)
                if traj.metadata.get("aborted") or not traj.records:
                    failures.append((label, traj.metadata.get("abort_reason", "no records")))
                    continue
                final_value = traj.records[-1].penalized_value
                if not np.isfinite(final_value):
                    failures.append((label, f"non-finite final value {final_value}"))
                    continue
                key = (final_value, label[0], label[1], label[2])
                if best is None or key < best[0]:
                    best = (key, label, final_value)
    if best is None:
        lines = ", ".join(f"alpha={a}, beta={b}, beta_tilde={bt}: {msg}" for (a, b, bt), msg in failures)
        raise StepsizeError(f"every grid candidate diverged: {lines}")
    (_, (alpha, beta, beta_tilde), final_value) = best
    result = {
        "alpha": alpha,
        "beta": beta,
        "final_penalized_value": final_value,
        "failures": failures,
    }
    if method == "gauss_seidel":
        result["beta_tilde"] = beta_tilde
    return result
