"""Bilevel problem definitions.

A bilevel problem couples an upper objective f(u, v) with a lower objective
g(u, v) minimized over v. This module defines the callback-bundle interface
plus five concrete instances: three analytic toy problems with known
stationary-point structure, a two-layer linear representation-learning
problem, and a data hyper-cleaning problem. Matrix-valued variables are
exposed to solvers as flat vectors in row-major order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import HypercleanDataset, PolarGaussianRng, ReprDataset
from .numerics import (
    SpectralSummary,
    as_matrix,
    min_norm_least_squares,
    pseudoinverse,
    spectral_summary,
    svd,
)

# Tolerance for treating a projector diagonal entry as exactly 1.
PROJECTOR_ONE_TOL = 1e-8


@dataclass(frozen=True)
class SmoothnessDescriptor:
    """Smoothness and curvature constants attached to a problem.

    ell_f bounds the gradient Lipschitz constant of f, ell_g that of g,
    mu_g is the PL constant of g(u, .) over v (convention
    ||grad||^2 >= 2*mu*(value - min)), and ell_f0 bounds ||grad f||.
    quality records whether the values are exact or regional estimates;
    estimated descriptors are advisory for stepsize defaults only.
    """

    ell_f: float
    ell_g: float
    mu_g: float
    ell_f0: float
    quality: str = "exact"

    def __post_init__(self):
        for field in ("ell_f", "ell_g", "mu_g", "ell_f0"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if self.quality not in ("exact", "estimated"):
            raise ValueError(f"quality must be 'exact' or 'estimated', got {self.quality!r}")


@dataclass(frozen=True)
class BilevelProblem:
    """Callback bundle for one bilevel problem.

    All variables are 1-D float64 vectors; gradients match their variable's
    shape. value_function_oracle, when present, returns the exact
    min over v of g(u, v). project_u, when present, is the idempotent
    projection onto the u-domain and solvers apply it after every u update.
    make_inner_grad / make_penalized_v_grad are optional performance
    factories returning specialized gradient closures for a fixed u; they
    must agree with the generic gradients and exist purely to hoist
    u-dependent precomputation out of inner loops.
    """

    name: str
    dim_u: int
    dim_v: int
    f: Callable[[np.ndarray, np.ndarray], float]
    grad_f_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_f_v: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], float]
    grad_g_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_g_v: Callable[[np.ndarray, np.ndarray], np.ndarray]
    constants: SmoothnessDescriptor
    value_function_oracle: Optional[Callable[[np.ndarray], float]] = None
    project_u: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # Reference upper value used by relative-error metrics (0 for problems
    # whose bilevel optimum is the origin, dataset ground truth otherwise).
    upper_reference: float = 0.0
    make_inner_grad: Optional[Callable[[np.ndarray], Callable]] = None
    make_inner_value: Optional[Callable[[np.ndarray], Callable]] = None
    make_penalized_v_grad: Optional[Callable[[np.ndarray, float], Callable]] = None


@dataclass(frozen=True)
class ReprProblem(BilevelProblem):
    """Representation-learning problem: u is W1 (m x h), v is W2 (h x n)."""

    dataset: ReprDataset = None
    x_trn_summary: SpectralSummary = None
    x_val_summary: SpectralSummary = None


@dataclass(frozen=True)
class HypercleanProblem(BilevelProblem):
    """Hyper-cleaning problem: u in [-u_bar, u_bar]^N, v is W (m x n)."""

    dataset: HypercleanDataset = None
    u_bar: float = 0.0
    x_trn_pinv: np.ndarray = None
    projector_diag: np.ndarray = None


# ---------------------------------------------------------------------------
# analytic examples


def example1() -> BilevelProblem:
    """Scalar problem f = 0.5*(u - sin v)^2, g = 0.5*(u - v)^2.

    The lower-level solution is v = u, the value function is identically 0,
    and the nested objective 0.5*(u - sin u)^2 has non-optimal stationary
    points at u = 2*pi*k.
    """

    def f(u, v):
        return 0.5 * (u[0] - math.sin(v[0])) ** 2

    def grad_f_u(u, v):
        return np.array([u[0] - math.sin(v[0])])

    def grad_f_v(u, v):
        return np.array([-(u[0] - math.sin(v[0])) * math.cos(v[0])])

    def g(u, v):
        return 0.5 * (u[0] - v[0]) ** 2

    def grad_g_u(u, v):
        return np.array([u[0] - v[0]])

    def grad_g_v(u, v):
        return np.array([v[0] - u[0]])

    return BilevelProblem(
        name="example1",
        dim_u=1,
        dim_v=1,
        f=f,
        grad_f_u=grad_f_u,
        grad_f_v=grad_f_v,
        g=g,
        grad_g_u=grad_g_u,
        grad_g_v=grad_g_v,
        # ell_g = 2 is the exact joint smoothness of g; mu_g = 1 is the exact
        # blockwise PL constant of g(u, .) in v. ell_f has no global value
        # (the Hessian of f grows with |u|), so the descriptor is estimated.
        constants=SmoothnessDescriptor(
            ell_f=2.0, ell_g=2.0, mu_g=1.0, ell_f0=10.0, quality="estimated"
        ),
        value_function_oracle=lambda u: 0.0,
    )


def example1_nested_objective(u: float) -> float:
    """Nested single-level objective of example1: 0.5*(u - sin u)^2."""
    return 0.5 * (u - math.sin(u)) ** 2


def example1_nested_gradient(u: float) -> float:
    """(u - sin u) * (1 - cos u), the derivative of the nested objective."""
    return (u - math.sin(u)) * (1.0 - math.cos(u))


def example2_lower_solution(u: float) -> float:
    """Unique root in v of 4*(u+v)^3 + e^v = 0.

    The residual is strictly increasing in v, so the root is found by
    expanding a bracket from [-|u|-10, |u|+10] (doubling on failure),
    bisecting to width 1e-12, then polishing with a few Newton steps.
    """

    def residual(v: float) -> float:
        return 4.0 * (u + v) ** 3 + math.exp(v)

    lo, hi = -abs(u) - 10.0, abs(u) + 10.0
    for _ in range(200):
        if residual(lo) < 0.0 < residual(hi):
            break
        lo, hi = 2.0 * lo, 2.0 * hi
    else:
        raise ArithmeticError(f"bracket expansion failed for u={u}")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    v = 0.5 * (lo + hi)
    for _ in range(3):
        slope = 12.0 * (u + v) ** 2 + math.exp(v)
        if slope <= 0.0:
            break
        step = residual(v) / slope
        if not lo <= v - step <= hi:
            break
        v -= step
    return v


def example2() -> BilevelProblem:
    """Scalar problem f = v, g = e^v + (u+v)^4.

    Both levels are jointly convex, yet the nested objective
    F(u) = (the lower-level root) is not convex in u.
    """

    def f(u, v):
        return float(v[0])

    def grad_f_u(u, v):
        return np.zeros(1)

    def grad_f_v(u, v):
        return np.ones(1)

    def g(u, v):
        return math.exp(v[0]) + (u[0] + v[0]) ** 4

    def grad_g_u(u, v):
        return np.array([4.0 * (u[0] + v[0]) ** 3])

    def grad_g_v(u, v):
        return np.array([4.0 * (u[0] + v[0]) ** 3 + math.exp(v[0])])

    def value_oracle(u):
        v = example2_lower_solution(float(u[0]))
        return math.exp(v) + (u[0] + v) ** 4

    return BilevelProblem(
        name="example2",
        dim_u=1,
        dim_v=1,
        f=f,
        grad_f_u=grad_f_u,
        grad_f_v=grad_f_v,
        g=g,
        grad_g_u=grad_g_u,
        grad_g_v=grad_g_v,
        # f is affine (any positive ell_f is a valid bound); g has unbounded
        # curvature so its constants are regional estimates.
        constants=SmoothnessDescriptor(
            ell_f=1.0, ell_g=50.0, mu_g=0.5, ell_f0=1.0, quality="estimated"
        ),
        value_function_oracle=value_oracle,
    )


def example3() -> BilevelProblem:
    """f = 0.5*(u/2 + v1 - sin v2)^2, g = 0.5*(u + v1 + sin v2)^2.

    u is scalar, v is 2-D. Both levels are blockwise PL, yet the penalized
    objective has non-optimal blockwise-stationary points.
    """

    def parts(u, v):
        a = 0.5 * u[0] + v[0] - math.sin(v[1])
        b = u[0] + v[0] + math.sin(v[1])
        return a, b

    def f(u, v):
        a, _ = parts(u, v)
        return 0.5 * a * a

    def grad_f_u(u, v):
        a, _ = parts(u, v)
        return np.array([0.5 * a])

    def grad_f_v(u, v):
        a, _ = parts(u, v)
        return np.array([a, -a * math.cos(v[1])])

    def g(u, v):
        _, b = parts(u, v)
        return 0.5 * b * b

    def grad_g_u(u, v):
        _, b = parts(u, v)
        return np.array([b])

    def grad_g_v(u, v):
        _, b = parts(u, v)
        return np.array([b, b * math.cos(v[1])])

    return BilevelProblem(
        name="example3",
        dim_u=1,
        dim_v=2,
        f=f,
        grad_f_u=grad_f_u,
        grad_f_v=grad_f_v,
        g=g,
        grad_g_u=grad_g_u,
        grad_g_v=grad_g_v,
        # mu_g = 1 is exact: ||grad_v g||^2 = b^2 (1 + cos^2 v2) >= 2 g.
        # The ell values are regional estimates (rank-one Hessians scaled by
        # the residuals, which are unbounded).
        constants=SmoothnessDescriptor(
            ell_f=2.5, ell_g=3.0, mu_g=1.0, ell_f0=10.0, quality="estimated"
        ),
        value_function_oracle=lambda u: 0.0,
    )


# ---------------------------------------------------------------------------
# representation learning


def repr_value_function(w1, data: ReprDataset) -> float:
    """Exact min over W2 of the training loss at fixed W1.

    Equals 0.5 * || (I - P) Y_trn ||^2 where P projects onto the column
    space of X_trn W1; zero whenever X_trn W1 has full row rank.
    """
    w1 = as_matrix(w1, "w1")
    a = data.x_trn @ w1
    fitted = a @ min_norm_least_squares(a, data.y_trn)
    return 0.5 * float(np.sum((data.y_trn - fitted) ** 2))


def repr_nested_objective(w1, data: ReprDataset) -> float:
    """Validation loss minimized over the lower-level solution set at W1."""
    w1 = as_matrix(w1, "w1")
    xw = data.x_trn @ w1
    xw_pinv = pseudoinverse(xw)
    a = data.y_val - data.x_val @ w1 @ (xw_pinv @ data.y_trn)
    xv_w1 = data.x_val @ w1
    m = xv_w1 @ (np.eye(w1.shape[1]) - xw_pinv @ xw)
    # m vanishes identically when row(X_val W1) lies inside row(X_trn W1),
    # leaving only rounding dust whose own sigma_max is meaningless; anchor
    # the cutoff to the scale of the factors that produced m instead.
    u_m, s_m, v_m = svd(m)
    floor = 1e-10 * max(np.linalg.norm(xv_w1, 2), 1e-300)
    inv_s = np.where(s_m > floor, 1.0 / np.where(s_m > floor, s_m, 1.0), 0.0)
    b = (v_m * inv_s) @ u_m.T @ a
    return 0.5 * float(np.sum((a - m @ b) ** 2))


def repr_problem(data: ReprDataset) -> ReprProblem:
    """Two-layer linear bilevel problem on a generated dataset.

    f is the validation loss and g the training loss of X W1 W2; u is W1
    flattened row-major, v is W2. The value-function oracle is the exact
    least-squares minimum of g over W2.
    """
    dims = data.dims
    m, h, n_out = dims["m"], dims["h"], dims["n"]
    x_trn, y_trn = data.x_trn, data.y_trn
    x_val, y_val = data.x_val, data.y_val

    def unpack(u, v):
        return u.reshape(m, h), v.reshape(h, n_out)

    def f(u, v):
        w1, w2 = unpack(u, v)
        r = x_val @ w1 @ w2 - y_val
        return 0.5 * float(np.sum(r * r))

    def grad_f_u(u, v):
        w1, w2 = unpack(u, v)
        r = x_val @ w1 @ w2 - y_val
        return (x_val.T @ r @ w2.T).reshape(-1)

    def grad_f_v(u, v):
        w1, w2 = unpack(u, v)
        r = x_val @ w1 @ w2 - y_val
        return ((x_val @ w1).T @ r).reshape(-1)

    def g(u, v):
        w1, w2 = unpack(u, v)
        r = x_trn @ w1 @ w2 - y_trn
        return 0.5 * float(np.sum(r * r))

    def grad_g_u(u, v):
        w1, w2 = unpack(u, v)
        r = x_trn @ w1 @ w2 - y_trn
        return (x_trn.T @ r @ w2.T).reshape(-1)

    def grad_g_v(u, v):
        w1, w2 = unpack(u, v)
        r = x_trn @ w1 @ w2 - y_trn
        return ((x_trn @ w1).T @ r).reshape(-1)

    def value_oracle(u):
        return repr_value_function(u.reshape(m, h), data)

    def make_inner_grad(u):
        # Hoists X_trn W1 out of the inner loop; u is fixed there.
        a = x_trn @ u.reshape(m, h)

        def inner_grad(v):
            w2 = v.reshape(h, n_out)
            return (a.T @ (a @ w2 - y_trn)).reshape(-1)

        return inner_grad

    def make_inner_value(u):
        a = x_trn @ u.reshape(m, h)

        def inner_value(v):
            r = a @ v.reshape(h, n_out) - y_trn
            return 0.5 * float(np.sum(r * r))

        return inner_value

    def make_penalized_v_grad(u, gamma):
        w1 = u.reshape(m, h)
        a_val = x_val @ w1
        a_trn = x_trn @ w1

        def penalized_v_grad(v):
            w2 = v.reshape(h, n_out)
            grad = a_val.T @ (a_val @ w2 - y_val)
            grad = grad + gamma * (a_trn.T @ (a_trn @ w2 - y_trn))
            return grad.reshape(-1)

        return penalized_v_grad

    # Constants anchored at the dataset's ground-truth weights; the problem
    # is not uniformly smooth, so these are estimates for stepsize defaults.
    xw_star = spectral_summary(x_trn @ data.w1_star)
    x_trn_summary = spectral_summary(x_trn)
    x_val_summary = spectral_summary(x_val)
    w1_max = spectral_summary(data.w1_star).sigma_max
    w2_max = spectral_summary(data.w2_star).sigma_max
    ell_g = x_trn_summary.sigma_max**2 * w1_max**2
    mu_g = (xw_star.sigma_star or 1.0) ** 2
    ell_f = x_val_summary.sigma_max**2 * (w1_max**2 + w2_max**2)
    r0 = x_val @ data.w1_star @ data.w2_star - y_val
    ell_f0 = float(
        np.linalg.norm(x_val.T @ r0 @ data.w2_star.T)
        + np.linalg.norm((x_val @ data.w1_star).T @ r0)
    ) + 1.0

    reference = 0.5 * float(np.sum((y_val - x_val @ data.w1_star @ data.w2_star) ** 2))

    return ReprProblem(
        name="repr",
        dim_u=m * h,
        dim_v=h * n_out,
        f=f,
        grad_f_u=grad_f_u,
        grad_f_v=grad_f_v,
        g=g,
        grad_g_u=grad_g_u,
        grad_g_v=grad_g_v,
        constants=SmoothnessDescriptor(
            ell_f=ell_f, ell_g=ell_g, mu_g=mu_g, ell_f0=ell_f0, quality="estimated"
        ),
        value_function_oracle=value_oracle,
        upper_reference=reference,
        make_inner_grad=make_inner_grad,
        make_inner_value=make_inner_value,
        make_penalized_v_grad=make_penalized_v_grad,
        dataset=data,
        x_trn_summary=x_trn_summary,
        x_val_summary=x_val_summary,
    )


# ---------------------------------------------------------------------------
# data hyper-cleaning


def sigmoid(t):
    """Numerically stable elementwise logistic function."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    exp_t = np.exp(t[~pos])
    out[~pos] = exp_t / (1.0 + exp_t)
    return out


def sigmoid_scalar(t: float) -> float:
    return float(sigmoid(np.array([t]))[0])


def hyperclean_value_function(u, data: HypercleanDataset) -> float:
    """Exact min over W of the weighted training loss.

    Only rows whose projector diagonal entry differs from 1 (equivalently,
    rows outside the reachable span) contribute: the value is
    0.5 * sum_i psi(u_i) ||y_i||^2 over those rows. Requires X_trn X_trn+
    to be diagonal.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    proj_diag = np.diag(data.x_trn @ pseudoinverse(data.x_trn))
    unreachable = np.abs(proj_diag - 1.0) > PROJECTOR_ONE_TOL
    row_norms = np.sum(data.y_trn**2, axis=1)
    return 0.5 * float(np.sum(sigmoid(u) * row_norms * unreachable))


def hyperclean_weighted_solution(u, data: HypercleanDataset, gamma: float) -> np.ndarray:
    """Min-norm minimizer of l_val(W) + gamma * l_trn(u, W) over W.

    Solves the stacked weighted least-squares system
    [X_val; sqrt(gamma * psi(u)) X_trn] W = [Y_val; sqrt(gamma * psi(u)) Y_trn].
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    weights = np.sqrt(gamma * sigmoid(u))
    x_stack = np.vstack([data.x_val, weights[:, None] * data.x_trn])
    y_stack = np.vstack([data.y_val, weights[:, None] * data.y_trn])
    return min_norm_least_squares(x_stack, y_stack)


def hyperclean_problem(data: HypercleanDataset, u_bar: float) -> HypercleanProblem:
    """Data reweighting bilevel problem on a generated dataset.

    u holds one logit per training row (weights psi(u_i)), v is the
    regression weight matrix W flattened row-major. f is the unweighted
    validation loss (u-independent); g is the psi-weighted training loss.
    u is constrained to the box [-u_bar, u_bar]^N via project_u.
    """
    if u_bar < 1.0:
        raise ValueError(f"u_bar must be >= 1, got {u_bar}")
    x_trn, y_trn = data.x_trn, data.y_trn
    x_val, y_val = data.x_val, data.y_val
    n_rows, m = x_trn.shape
    n_out = y_trn.shape[1]

    x_trn_pinv = pseudoinverse(x_trn)
    projector = x_trn @ x_trn_pinv
    off_diag = projector - np.diag(np.diag(projector))
    max_off = float(np.max(np.abs(off_diag)))
    if max_off > PROJECTOR_ONE_TOL:
        raise ValueError(
            "X_trn X_trn+ is not diagonal (max off-diagonal "
            f"{max_off:.3e}); the closed-form value function does not apply"
        )
    proj_diag = np.diag(projector).copy()
    unreachable = np.abs(proj_diag - 1.0) > PROJECTOR_ONE_TOL
    row_norms = np.sum(y_trn**2, axis=1)

    def unpack(v):
        return v.reshape(m, n_out)

    def f(u, v):
        r = x_val @ unpack(v) - y_val
        return 0.5 * float(np.sum(r * r))

    def grad_f_u(u, v):
        return np.zeros(n_rows)

    def grad_f_v(u, v):
        return (x_val.T @ (x_val @ unpack(v) - y_val)).reshape(-1)

    def g(u, v):
        r = y_trn - x_trn @ unpack(v)
        return 0.5 * float(np.sum(sigmoid(u) * np.sum(r * r, axis=1)))

    def grad_g_u(u, v):
        r = y_trn - x_trn @ unpack(v)
        psi = sigmoid(u)
        return 0.5 * psi * (1.0 - psi) * np.sum(r * r, axis=1)

    def grad_g_v(u, v):
        r = x_trn @ unpack(v) - y_trn
        return (x_trn.T @ (sigmoid(u)[:, None] * r)).reshape(-1)

    def value_oracle(u):
        return 0.5 * float(np.sum(sigmoid(u) * row_norms * unreachable))

    def project_u(u):
        return np.clip(u, -u_bar, u_bar)

    def make_inner_grad(u):
        psi = sigmoid(u)

        def inner_grad(v):
            r = x_trn @ unpack(v) - y_trn
            return (x_trn.T @ (psi[:, None] * r)).reshape(-1)

        return inner_grad

    def make_inner_value(u):
        psi = sigmoid(u)

        def inner_value(v):
            r = y_trn - x_trn @ unpack(v)
            return 0.5 * float(np.sum(psi * np.sum(r * r, axis=1)))

        return inner_value

    def make_penalized_v_grad(u, gamma):
        psi = sigmoid(u)
        # Quadratic in W: gradient is M W - C with fixed M, C.
        m_mat = x_val.T @ x_val + gamma * (x_trn.T @ (psi[:, None] * x_trn))
        c_mat = x_val.T @ y_val + gamma * (x_trn.T @ (psi[:, None] * y_trn))

        def penalized_v_grad(v):
            return (m_mat @ unpack(v) - c_mat).reshape(-1)

        return penalized_v_grad

    gram = x_trn.T @ x_trn
    gram_summary = spectral_summary(gram)
    psi_bar = sigmoid_scalar(u_bar)
    # Over the box, psi(u_i) lies in [1 - psi_bar, psi_bar]; the weighted
    # Gram matrix shares the kernel of the unweighted one, so these bounds
    # on the blockwise-v curvature are valid everywhere in the domain.
    mu_g = (1.0 - psi_bar) * (gram_summary.sigma_star or 1.0)
    ell_g = psi_bar * gram_summary.sigma_max
    ell_f = spectral_summary(x_val.T @ x_val).sigma_max
    r_star = x_val @ data.w_star - y_val
    ell_f0 = float(np.linalg.norm(x_val.T @ r_star)) + 1.0

    reference = 0.5 * float(np.sum((y_val - x_val @ data.w_star) ** 2))

    return HypercleanProblem(
        name="hyperclean",
        dim_u=n_rows,
        dim_v=m * n_out,
        f=f,
        grad_f_u=grad_f_u,
        grad_f_v=grad_f_v,
        g=g,
        grad_g_u=grad_g_u,
        grad_g_v=grad_g_v,
        constants=SmoothnessDescriptor(
            ell_f=ell_f, ell_g=ell_g, mu_g=mu_g, ell_f0=ell_f0, quality="estimated"
        ),
        value_function_oracle=value_oracle,
        project_u=project_u,
        upper_reference=reference,
        make_inner_grad=make_inner_grad,
        make_inner_value=make_inner_value,
        make_penalized_v_grad=make_penalized_v_grad,
        dataset=data,
        u_bar=float(u_bar),
        x_trn_pinv=x_trn_pinv,
        projector_diag=proj_diag,
    )


def default_init(problem: BilevelProblem, seed: int):
    """Deterministic (u0, v0, w0) starting point for a problem.

    Analytic examples start at u = 1, v = w = 0.5 per coordinate.

    The representation problem uses a balanced least-squares warm start:
    the backbone W1 is drawn i.i.d. normal with variance 1/h from a stream
    derived from seed + 1 (distinct from the dataset stream), the
    adaptation layer is the minimum-norm solution of (X_trn W1) W2 =
    Y_trn, and both layers are rescaled to share one spectral norm
    without changing their product. The starting training gap is exactly
    zero, and the balancing keeps the joint curvature as mild as this
    badly conditioned data allows.

    The hyper-cleaning problem starts from all-zero logits and the
    minimum-norm training interpolator, whose weighted training loss is
    zero for every u.
    """
    if isinstance(problem, ReprProblem):
        dims = problem.dataset.dims
        rng = PolarGaussianRng(seed + 1)
        g = rng.normal_matrix(dims["m"], dims["h"], 0.0, 1.0 / dims["h"])
        w2 = min_norm_least_squares(problem.dataset.x_trn @ g, problem.dataset.y_trn)
        norm_g = np.linalg.norm(g, 2)
        norm_w2 = np.linalg.norm(w2, 2)
        scale = float(np.sqrt(norm_w2 / norm_g)) if norm_g > 0 and norm_w2 > 0 else 1.0
        w1 = scale * g
        w2 = w2 / scale
        return w1.reshape(-1), w2.reshape(-1), w2.reshape(-1).copy()
    if isinstance(problem, HypercleanProblem):
        v0 = min_norm_least_squares(
            problem.dataset.x_trn, problem.dataset.y_trn
        ).reshape(-1)
        return np.zeros(problem.dim_u), v0, v0.copy()
    u0 = np.ones(problem.dim_u)
    v0 = np.full(problem.dim_v, 0.5)
    return u0, v0, v0.copy()
