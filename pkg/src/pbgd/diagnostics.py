"""Landscape and trajectory diagnostics.

Provides pointwise PL-ratio measurement, the closed-form per-iterate PL and
smoothness constants of the two experiment problems, finite-difference
gradient checks, and dense landscape grids for plotting. Certification here
is sample-based: a report states the measured infimum of the PL ratio over
recorded sample points, never a symbolic proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .data import HypercleanDataset, ReprDataset
from .numerics import SpectralSummary, min_norm_least_squares, pseudoinverse, spectral_summary
from .problems import PROJECTOR_ONE_TOL, sigmoid, sigmoid_scalar

# Gaps at or below this are treated as "already optimal" by pl_ratio.
OPTIMAL_GAP_TOL = 1e-14
# Gaps may undershoot the optimum by at most this before erroring.
NEGATIVE_GAP_TOL = 1e-12

PL_MODES = ("joint", "blockwise_u", "blockwise_v")


@dataclass(frozen=True)
class PLReport:
    """Sampled PL certificate for one objective.

    measured_mu is the infimum of ||grad||^2 / (2 * gap) over the sampled
    points (infinite when every sample sat at the optimum); certified means
    the infimum is positive with margin. min_location is the sample
    achieving the infimum.
    """

    mode: str
    measured_mu: float
    certified: bool
    sample_count: int
    min_location: Optional[np.ndarray]

    def __post_init__(self):
        if self.mode not in PL_MODES:
            raise ValueError(f"mode must be one of {PL_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class LandscapeGrid:
    """Dense objective evaluation over a rectangle.

    values[i, j] is the objective at (x_axis[i], y_axis[j]); NaN marks
    points where the objective is undefined.
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray
    label: str

    def __post_init__(self):
        if self.values.shape != (self.x_axis.shape[0], self.y_axis.shape[0]):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.x_axis.shape[0]}, {self.y_axis.shape[0]})"
            )

    def to_csv_text(self) -> str:
        lines = ["x,y,value"]
        for i, x in enumerate(self.x_axis):
            for j, y in enumerate(self.y_axis):
                lines.append(f"{repr(float(x))},{repr(float(y))},{repr(float(self.values[i, j]))}")
        return "\n".join(lines) + "\n"


def pl_ratio(value_fn, grad_fn, point, optimum_value: float) -> float:
    """||grad||^2 / (2 * (value - optimum)) at one point.

    Returns inf when the gap is at most OPTIMAL_GAP_TOL (the point is
    already optimal). A gap below -NEGATIVE_GAP_TOL means the supplied
    optimum is not a lower bound and raises ValueError.
    """
    value = float(value_fn(point))
    gap = value - float(optimum_value)
    if gap < -NEGATIVE_GAP_TOL:
        raise ValueError(
            f"value {value:.6e} lies below the claimed optimum {optimum_value:.6e}"
        )
    if gap <= OPTIMAL_GAP_TOL:
        return math.inf
    grad = np.asarray(grad_fn(point), dtype=np.float64).reshape(-1)
    return float(grad @ grad) / (2.0 * gap)


def sample_pl_report(
    value_fn, grad_fn, points, optimum_value: float, mode: str, margin: float = 1e-12
) -> PLReport:
    """Evaluates pl_ratio over points and reports the sampled infimum."""
    measured = math.inf
    location = None
    count = 0
    for point in points:
        count += 1
        ratio = pl_ratio(value_fn, grad_fn, point, optimum_value)
        if ratio < measured:
            measured = ratio
            location = np.array(point, dtype=np.float64)
    return PLReport(
        mode=mode,
        measured_mu=measured,
        certified=measured > margin,
        sample_count=count,
        min_location=location,
    )


# ---------------------------------------------------------------------------
# representation-learning trajectory constants


def build_x_gamma(data: ReprDataset, gamma: float) -> np.ndarray:
    """Stacked design matrix [X_val; sqrt(gamma) X_trn]."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return np.vstack([data.x_val, math.sqrt(gamma) * data.x_trn])


def build_y_gamma(data: ReprDataset, gamma: float) -> np.ndarray:
    """Stacked targets [Y_val; sqrt(gamma) Y_trn]."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return np.vstack([data.y_val, math.sqrt(gamma) * data.y_trn])


def repr_penalized_minimum(data: ReprDataset, gamma: float) -> float:
    """Exact min over (W1, W2) of L_val + gamma * L_trn.

    The product W1 W2 can realize any m x n matrix (h >= max(m, n)), so the
    minimum equals the least-squares optimum of the stacked system.
    """
    x_gamma = build_x_gamma(data, gamma)
    y_gamma = build_y_gamma(data, gamma)
    w = min_norm_least_squares(x_gamma, y_gamma)
    r = y_gamma - x_gamma @ w
    return 0.5 * float(np.sum(r * r))


def repr_mu_k(w1, w2, x_gamma_summary: SpectralSummary) -> Optional[float]:
    """Per-iterate joint PL constant (sigma_min^2(W1) + sigma_min^2(W2)) * sigma_*^2(X_gamma).

    Returns None when W1 or W2 is rank deficient (smallest singular value
    at or below tolerance): the certificate is unavailable at such iterates.
    """
    s1 = spectral_summary(np.asarray(w1, dtype=np.float64))
    s2 = spectral_summary(np.asarray(w2, dtype=np.float64))
    tol1 = s1.tolerance * s1.sigma_max
    tol2 = s2.tolerance * s2.sigma_max
    if s1.sigma_min <= tol1 or s2.sigma_min <= tol2:
        return None
    if x_gamma_summary.sigma_star is None:
        return None
    return (s1.sigma_min**2 + s2.sigma_min**2) * x_gamma_summary.sigma_star**2


def repr_L_k(
    w1,
    w2,
    x_gamma_summary: SpectralSummary,
    w_product_sigma_max: float,
    gap: float,
    alpha: float,
    delta: float,
) -> float:
    """Per-iterate smoothness constant of the penalized objective.

    gap is the current optimality gap of the penalized objective, alpha the
    outer stepsize and delta the gradient-estimation error bound; the
    formula is exact for the stacked least-squares structure.
    """
    if gap < 0:
        raise ValueError(f"gap must be >= 0, got {gap}")
    sigma1 = spectral_summary(np.asarray(w1, dtype=np.float64)).sigma_max
    sigma2 = spectral_summary(np.asarray(w2, dtype=np.float64)).sigma_max
    s2 = x_gamma_summary.sigma_max**2
    root = math.sqrt(2.0 * s2 * gap)
    term1 = s2 * (sigma1**2 + sigma2**2)
    term2 = 3.0 * alpha * delta * s2 * sigma2
    term3 = (1.0 + 3.0 * alpha * s2 * (sigma1**2 + sigma2**2)) * root
    term4 = 3.0 * alpha**2 * s2 * delta * sigma1 * root
    term5 = 6.0 * alpha**2 * s2**2 * w_product_sigma_max * gap
    return term1 + term2 + term3 + term4 + term5


# ---------------------------------------------------------------------------
# hyper-cleaning constants


def positive_mismatch(w, data: HypercleanDataset) -> Optional[float]:
    """Smallest strictly positive training-loss mismatch at W.

    The mismatch of row i is ||y_i - x_i W||^2 - ||y_i||^2 * [row i
    unreachable]; rows with nonpositive mismatch are skipped, and None is
    returned when no row has a positive one. Requires a diagonal
    X_trn X_trn+ (checked here).
    """
    w = np.asarray(w, dtype=np.float64)
    projector = data.x_trn @ pseudoinverse(data.x_trn)
    off = projector - np.diag(np.diag(projector))
    max_off = float(np.max(np.abs(off)))
    if max_off > PROJECTOR_ONE_TOL:
        raise ValueError(
            f"X_trn X_trn+ is not diagonal (max off-diagonal {max_off:.3e})"
        )
    unreachable = np.abs(np.diag(projector) - 1.0) > PROJECTOR_ONE_TOL
    residual_sq = np.sum((data.y_trn - data.x_trn @ w) ** 2, axis=1)
    floor_sq = np.sum(data.y_trn**2, axis=1) * unreachable
    terms = residual_sq - floor_sq
    positive = terms[terms > 0]
    if positive.size == 0:
        return None
    return float(np.min(positive))


def hyperclean_constants(data: HypercleanDataset, gamma: float, u_bar: float):
    """Spectral curvature constants of the hyper-cleaning problem.

    Returns (mu_w_gamma, L_w_gamma, mu_w, L_w, mu_u_block_fn): the PL and
    smoothness constants over W of the penalized objective and of the
    training loss alone, valid uniformly over u in the box, plus a function
    mapping W to the blockwise-u PL constant gamma * c(W) * psi(u_bar) *
    (1 - psi(u_bar))^2 / 4 (None when no positive mismatch exists at W).
    All weighted Gram matrices share the kernel of the unweighted ones, so
    the box endpoints give valid uniform bounds.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if u_bar <= 0:
        raise ValueError(f"u_bar must be positive, got {u_bar}")
    psi_bar = sigmoid_scalar(u_bar)
    psi_low = 1.0 - psi_bar
    gram_val = data.x_val.T @ data.x_val
    gram_trn = data.x_trn.T @ data.x_trn
    low = spectral_summary(gram_val + gamma * psi_low * gram_trn)
    high = spectral_summary(gram_val + gamma * psi_bar * gram_trn)
    trn = spectral_summary(gram_trn)
    mu_w_gamma = low.sigma_star if low.sigma_star is not None else 0.0
    L_w_gamma = high.sigma_max
    mu_w = psi_low * (trn.sigma_star if trn.sigma_star is not None else 0.0)
    L_w = psi_bar * trn.sigma_max

    scale = gamma * psi_bar * psi_low**2 / 4.0

    def mu_u_block_fn(w) -> Optional[float]:
        c = positive_mismatch(w, data)
        if c is None:
            return None
        return scale * c

    return mu_w_gamma, L_w_gamma, mu_w, L_w, mu_u_block_fn


# ---------------------------------------------------------------------------
# generic checks


def finite_diff_check(value_fn, grad_fn, points, step: float) -> float:
    """Worst-case central-difference error over points and coordinates.

    Per coordinate the error |fd_i - grad_i| is normalized by the larger of
    the analytic and difference gradient norms (floored at 1e-12), so a
    zero coordinate inside a large gradient does not dominate the report.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    worst = 0.0
    for point in points:
        p = np.asarray(point, dtype=np.float64).reshape(-1)
        grad = np.asarray(grad_fn(p), dtype=np.float64).reshape(-1)
        fd = np.empty_like(grad)
        for i in range(p.shape[0]):
            shift = np.zeros_like(p)
            shift[i] = step
            fd[i] = (float(value_fn(p + shift)) - float(value_fn(p - shift))) / (2.0 * step)
        scale = max(float(np.linalg.norm(grad)), float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.max(np.abs(fd - grad))) / scale)
    return worst


def landscape_grid(objective, u_range, v_range, resolution, label: str = "") -> LandscapeGrid:
    """Dense evaluation of objective(x, y) over a rectangle.

    resolution is an int (same for both axes) or an (nx, ny) pair, each at
    least 2. Non-finite objective values are stored as NaN.
    """
    if isinstance(resolution, int):
        res_x, res_y = resolution, resolution
    else:
        res_x, res_y = resolution
    if res_x < 2 or res_y < 2:
        raise ValueError(f"resolution must be >= 2 per axis, got ({res_x}, {res_y})")
    xs = np.linspace(float(u_range[0]), float(u_range[1]), res_x)
    ys = np.linspace(float(v_range[0]), float(v_range[1]), res_y)
    values = np.empty((res_x, res_y))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            try:
                val = float(objective(x, y))
            except (ArithmeticError, ValueError):
                val = math.nan
            values[i, j] = val if math.isfinite(val) else math.nan
    return LandscapeGrid(x_axis=xs, y_axis=ys, values=values, label=label)
