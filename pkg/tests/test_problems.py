import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pbgd.data import PolarGaussianRng, gen_hyperclean_dataset, gen_repr_dataset, ReprDataset
from pbgd.numerics import min_norm_least_squares, spectral_summary
from pbgd.problems import (
    SmoothnessDescriptor,
    default_init,
    example1,
    example1_nested_gradient,
    example1_nested_objective,
    example2,
    example2_lower_solution,
    example3,
    hyperclean_problem,
    hyperclean_value_function,
    hyperclean_weighted_solution,
    repr_nested_objective,
    repr_problem,
    repr_value_function,
    sigmoid,
)


# ---------------------------------------------------------------------------
# example 1: sine-coupled scalar pair


def test_example1_objective_values():
    p = example1()
    assert p.dim_u == 1 and p.dim_v == 1
    u = np.array([2.0])
    v = np.array([0.5])
    assert_allclose(p.f(u, v), 0.5 * (2.0 - math.sin(0.5)) ** 2, atol=1e-14)
    assert_allclose(p.g(u, v), 0.5 * (2.0 - 0.5) ** 2, atol=1e-14)
    assert p.value_function_oracle(u) == 0.0
    # unconstrained upper block: no projection attached
    assert p.project_u is None


def test_example1_saddle_family():
    # stationary points of the penalized objective at (2*gamma*pi/(1+gamma), 2*pi)
    # with value 2*gamma*pi^2/(1+gamma)
    # -------------------------------------------------------------------------
    p = example1()
    for gamma in (0.5, 1.0, 2.0):
        u = np.array([2.0 * gamma * math.pi / (1.0 + gamma)])
        v = np.array([2.0 * math.pi])
        grad_u = p.grad_f_u(u, v) + gamma * p.grad_g_u(u, v)
        grad_v = p.grad_f_v(u, v) + gamma * p.grad_g_v(u, v)
        assert np.linalg.norm(grad_u) <= 1e-10
        assert np.linalg.norm(grad_v) <= 1e-10
        value = p.f(u, v) + gamma * p.g(u, v)
        assert_allclose(value, 2.0 * gamma * math.pi**2 / (1.0 + gamma), rtol=1e-12)


def test_example1_grid_pl_constants():
    # on a 41x41 grid over [-3,3]^2: |grad f|^2 >= 2 f and |grad g|^2 >= 4 g
    # (both objectives have minimum zero)
    # -------------------------------------------------------------------------
    p = example1()
    axis = np.linspace(-3.0, 3.0, 41)
    worst_f = math.inf
    worst_g = math.inf
    for uu in axis:
        for vv in axis:
            u = np.array([uu])
            v = np.array([vv])
            f = p.f(u, v)
            g = p.g(u, v)
            gf = float(p.grad_f_u(u, v)[0] ** 2 + p.grad_f_v(u, v)[0] ** 2)
            gg = float(p.grad_g_u(u, v)[0] ** 2 + p.grad_g_v(u, v)[0] ** 2)
            if f > 1e-14:
                worst_f = min(worst_f, gf / (2.0 * f))
            if g > 1e-14:
                worst_g = min(worst_g, gg / (2.0 * g))
    assert worst_f >= 1.0 - 1e-9
    assert worst_g >= 2.0 - 1e-9


def test_example1_nested_objective_not_pl():
    # the nested objective F(u) = 0.5 (u - sin u)^2 has a flat stationary
    # point at u = 2*pi with F > 0, so the PL ratio collapses nearby
    # -------------------------------------------------------------------------
    grid = np.linspace(2.0 * math.pi - 0.5, 2.0 * math.pi + 0.5, 201)
    best = math.inf
    for uu in grid:
        f_val = example1_nested_objective(uu)
        g_val = example1_nested_gradient(uu)
        if f_val > 1e-14:
            best = min(best, g_val**2 / (2.0 * f_val))
    assert best < 1e-3

    assert abs(example1_nested_gradient(2.0 * math.pi)) <= 1e-10
    assert example1_nested_objective(2.0 * math.pi) >= 19.0


def test_example1_descriptor():
    c = example1().constants
    assert c.quality == "estimated"
    assert c.mu_g == 1.0
    assert c.ell_g == 2.0


# ---------------------------------------------------------------------------
# example 2: exponential-quartic lower level


def test_example2_lower_solution_anchors():
    # the two closed-form anchor inputs land on v = 0 and v = 1
    # -------------------------------------------------------------------------
    u_a = -((0.25) ** (1.0 / 3.0))
    u_b = -((math.e / 4.0) ** (1.0 / 3.0)) - 1.0
    assert abs(example2_lower_solution(u_a) - 0.0) <= 1e-8
    assert abs(example2_lower_solution(u_b) - 1.0) <= 1e-8


def test_example2_lower_solution_stationarity():
    # returned root satisfies e^v + 4 (u+v)^3 = 0 to tight tolerance
    # -------------------------------------------------------------------------
    rng = np.random.default_rng(0)
    for _ in range(25):
        u = float(rng.uniform(-4.0, 2.0))
        v = example2_lower_solution(u)
        resid = math.exp(v) + 4.0 * (u + v) ** 3
        assert abs(resid) <= 1e-9


def test_example2_solution_curve_is_nonlinear():
    # halfway between the anchors the solution is not the midpoint value 0.5:
    # the stationarity residual of v = 0.5 there is ~ -0.07
    # -------------------------------------------------------------------------
    u_a = -((0.25) ** (1.0 / 3.0))
    u_b = -((math.e / 4.0) ** (1.0 / 3.0)) - 1.0
    u_mid = 0.5 * (u_a + u_b)
    resid = math.exp(0.5) + 4.0 * (u_mid + 0.5) ** 3
    assert resid < -0.05
    v_mid = example2_lower_solution(u_mid)
    assert v_mid > 0.5
    assert abs(v_mid - 0.5082986959296694) <= 1e-9


def test_example2_problem_surface():
    p = example2()
    u = np.array([-1.0])
    v = np.array([0.3])
    assert_allclose(p.f(u, v), 0.3, atol=1e-14)
    assert_allclose(p.g(u, v), math.exp(0.3) + (-1.0 + 0.3) ** 4, atol=1e-14)
    # value oracle consistent with the root finder
    v_star = example2_lower_solution(-1.0)
    assert_allclose(p.value_function_oracle(u), p.g(u, np.array([v_star])), rtol=1e-12)


# ---------------------------------------------------------------------------
# example 3: quartic with linear upper level


def test_example3_u_stationary_point_and_value():
    # at v = (2, 0) the u-gradient of L_gamma vanishes at
    # u* = -(4+8g)/(4g+1), and the penalized value there is
    # (8g^2 + 2g)/(4g+1)^2; the v-gradient stays away from zero, which is
    # what makes the point a trap for u-only stationarity measures
    # -------------------------------------------------------------------------
    p = example3()
    for gamma in (0.5, 1.0):
        u = np.array([-(4.0 + 8.0 * gamma) / (4.0 * gamma + 1.0)])
        v = np.array([2.0, 0.0])
        grad_u = p.grad_f_u(u, v) + gamma * p.grad_g_u(u, v)
        assert np.linalg.norm(grad_u) <= 1e-10
        grad_v = p.grad_f_v(u, v) + gamma * p.grad_g_v(u, v)
        assert np.linalg.norm(grad_v) >= 0.1
        value = p.f(u, v) + gamma * (p.g(u, v) - p.value_function_oracle(u))
        expected = (8.0 * gamma**2 + 2.0 * gamma) / (4.0 * gamma + 1.0) ** 2
        assert_allclose(value, expected, atol=1e-12)
    # at gamma = 1 the value is exactly 0.4
    assert_allclose((8.0 * 1.0 + 2.0) / 25.0, 0.4, atol=0)


def test_example3_value_oracle_is_attained():
    # the lower level reaches zero for every u (oracle returns 0):
    # v = (-u, 0) zeroes the residual u + v1 + sin v2
    # -------------------------------------------------------------------------
    p = example3()
    rng = np.random.default_rng(1)
    for _ in range(10):
        u = rng.uniform(-3.0, 3.0, 1)
        assert p.value_function_oracle(u) == 0.0
        v = np.array([-u[0], 0.0])
        assert p.g(u, v) <= 1e-12


# ---------------------------------------------------------------------------
# shared properties of the analytic problems


def test_gap_nonnegative_on_samples():
    # g(u, v) - g*(u) >= -1e-10 on 1000 sampled pairs per problem
    # -------------------------------------------------------------------------
    rng = np.random.default_rng(2024)
    for p in (example1(), example2(), example3()):
        worst = math.inf
        for _ in range(1000):
            u = rng.uniform(-3.0, 3.0, p.dim_u)
            v = rng.uniform(-3.0, 3.0, p.dim_v)
            worst = min(worst, p.g(u, v) - p.value_function_oracle(u))
        assert worst >= -1e-10


def test_descriptor_validation():
    with pytest.raises(ValueError):
        SmoothnessDescriptor(ell_f=0.0, ell_g=1.0, mu_g=1.0, ell_f0=1.0, quality="exact")
    with pytest.raises(ValueError):
        SmoothnessDescriptor(ell_f=1.0, ell_g=1.0, mu_g=1.0, ell_f0=1.0, quality="guessed")


# ---------------------------------------------------------------------------
# representation learning


def test_repr_value_function_full_rank_is_zero():
    ds = gen_repr_dataset(0)
    val = repr_value_function(ds.w1_star, ds)
    assert 0.0 <= val <= 1e-12


def test_repr_value_function_zero_w1():
    ds = gen_repr_dataset(0)
    w1 = np.zeros_like(ds.w1_star)
    assert_allclose(repr_value_function(w1, ds), 0.5 * np.sum(ds.y_trn**2), rtol=1e-12)


def test_repr_value_function_rank_deficient_vs_gd():
    # rank-3 backbone leaves an out-of-range residual; plain gradient descent
    # on the adaptation layer must agree with the closed form
    # -------------------------------------------------------------------------
    rng = PolarGaussianRng(41)
    x = rng.normal_matrix(6, 8)
    y = rng.normal_matrix(6, 3)
    ds = ReprDataset(
        x_trn=x, y_trn=y,
        x_val=rng.normal_matrix(4, 8), y_val=rng.normal_matrix(4, 3),
        w1_star=np.zeros((8, 12)), w2_star=np.zeros((12, 3)),
        w2_tilde_star=np.zeros((12, 3)), seed=41,
    )
    w1 = rng.normal_matrix(8, 3) @ rng.normal_matrix(3, 12)
    a = x @ w1
    oracle = repr_value_function(w1, ds)
    assert oracle > 1e-3
    beta = 1.0 / np.linalg.norm(a, 2) ** 2
    w = np.zeros((12, 3))
    for _ in range(5000):
        w -= beta * (a.T @ (a @ w - y))
    gd_val = 0.5 * float(np.sum((a @ w - y) ** 2))
    assert abs(gd_val - oracle) <= 1e-6


def test_repr_nested_objective_identity_anchors():
    # 2x2 identity data: the nested objective is 0 at W1 = diag(2, -1)
    # (invertible backbone fits exactly) and 0.5 at W1 = diag(0, 1)
    # -------------------------------------------------------------------------
    eye = np.eye(2)
    ds = ReprDataset(x_trn=eye, y_trn=eye, x_val=eye, y_val=eye,
                     w1_star=eye, w2_star=eye, w2_tilde_star=eye, seed=0)
    assert_allclose(repr_nested_objective(np.diag([2.0, -1.0]), ds), 0.0, atol=1e-12)
    assert_allclose(repr_nested_objective(np.diag([0.0, 1.0]), ds), 0.5, atol=1e-12)


def test_repr_nested_objective_matches_nullspace_search():
    # the nested objective minimizes the validation loss over the whole
    # lower-level solution set; reproduce it independently by parametrizing
    # that set with an orthonormal kernel basis of X_trn W1
    # -------------------------------------------------------------------------
    ds = gen_repr_dataset(1, n_trn=5, n_val=4, m=6, n_out=2, h=8)
    rng = PolarGaussianRng(17)
    for trial in range(5):
        if trial % 2 == 0:
            w1 = rng.normal_matrix(6, 8)
        else:
            w1 = rng.normal_matrix(6, 2) @ rng.normal_matrix(2, 8)
        a = ds.x_trn @ w1
        b_mat = ds.x_val @ w1
        w2_part = min_norm_least_squares(a, ds.y_trn)
        _, s, vt = np.linalg.svd(a)
        rank = int(np.sum(s > 1e-10 * s[0]))
        kernel = vt[rank:].T  # orthonormal basis of null(a)
        target = ds.y_val - b_mat @ w2_part
        bk = b_mat @ kernel
        # drop directions of bk that are rounding dust relative to b_mat
        uk, sk, vkt = np.linalg.svd(bk, full_matrices=False)
        keep = sk > 1e-10 * max(np.linalg.norm(b_mat, 2), 1e-300)
        coeff = (vkt.T[:, keep] / sk[keep]) @ uk[:, keep].T @ target
        best = 0.5 * float(np.sum((b_mat @ (w2_part + kernel @ coeff) - ds.y_val) ** 2))
        assert_allclose(repr_nested_objective(w1, ds), best, rtol=1e-8, atol=1e-12)
        # never above the value at the minimum-norm particular solution
        at_min_norm = 0.5 * float(np.sum((b_mat @ w2_part - ds.y_val) ** 2))
        assert repr_nested_objective(w1, ds) <= at_min_norm + 1e-12


def test_repr_problem_surface_and_gradients():
    ds = gen_repr_dataset(0, n_trn=4, n_val=3, m=5, n_out=2, h=7)
    p = repr_problem(ds)
    assert p.dim_u == 5 * 7
    assert p.dim_v == 7 * 2
    rng = PolarGaussianRng(8)
    u = rng.normal_matrix(5, 7).reshape(-1)
    v = rng.normal_matrix(7, 2).reshape(-1)
    w1 = u.reshape(5, 7)
    w2 = v.reshape(7, 2)
    assert_allclose(p.f(u, v), 0.5 * np.sum((ds.x_val @ w1 @ w2 - ds.y_val) ** 2), rtol=1e-12)
    assert_allclose(p.g(u, v), 0.5 * np.sum((ds.x_trn @ w1 @ w2 - ds.y_trn) ** 2), rtol=1e-12)
    # analytic training gradient in the adaptation layer
    a = ds.x_trn @ w1
    expected = a.T @ (a @ w2 - ds.y_trn)
    assert_allclose(p.grad_g_v(u, v), expected.reshape(-1), rtol=1e-10)
    assert p.constants.quality == "estimated"
    assert p.upper_reference > 0.0


def test_repr_gap_nonnegative_on_samples():
    ds = gen_repr_dataset(0, n_trn=4, n_val=3, m=5, n_out=2, h=7)
    p = repr_problem(ds)
    rng = PolarGaussianRng(9)
    worst = math.inf
    for _ in range(1000):
        u = rng.normal_matrix(5, 7).reshape(-1)
        v = rng.normal_matrix(7, 2).reshape(-1)
        worst = min(worst, p.g(u, v) - p.value_function_oracle(u))
    assert worst >= -1e-10


# ---------------------------------------------------------------------------
# hyper-cleaning


def test_sigmoid_midpoint_and_range():
    assert sigmoid(np.array([0.0]))[0] == 0.5
    vals = sigmoid(np.linspace(-30, 30, 101))
    assert np.all(vals > 0.0) and np.all(vals < 1.0)
    assert np.all(np.diff(vals) > 0.0)


def test_hyperclean_problem_surface():
    ds = gen_hyperclean_dataset(0, n_trn=8, n_val=3, m=12, n_out=2)
    p = hyperclean_problem(ds, 5.0)
    rng = np.random.default_rng(0)
    u = rng.uniform(-5, 5, 8)
    w = rng.normal(size=(12, 2))
    v = w.reshape(-1)
    r = ds.y_trn - ds.x_trn @ w
    expected_g = 0.5 * float(np.sum(sigmoid(u)[:, None] * r * r))
    assert_allclose(p.g(u, v), expected_g, rtol=1e-12)
    # f ignores u entirely
    u2 = rng.uniform(-5, 5, 8)
    assert p.f(u, v) == p.f(u2, v)
    assert np.linalg.norm(p.grad_f_u(u, v)) == 0.0
    # per-coordinate weight gradient: 0.5 psi'(u_i) |r_i|^2
    dpsi = sigmoid(u) * (1.0 - sigmoid(u))
    expected_gu = 0.5 * dpsi * np.sum(r * r, axis=1)
    assert_allclose(p.grad_g_u(u, v), expected_gu, rtol=1e-10)


def test_hyperclean_projection_clamps():
    ds = gen_hyperclean_dataset(0, n_trn=6, n_val=3, m=10, n_out=2)
    p = hyperclean_problem(ds, 2.0)
    u = np.array([-9.0, -2.0, 0.0, 1.5, 2.0, 9.0])
    proj = p.project_u(u)
    assert_allclose(proj, [-2.0, -2.0, 0.0, 1.5, 2.0, 2.0], atol=0)
    assert_allclose(p.project_u(proj), proj, atol=0)  # idempotent


def test_hyperclean_value_function_cases():
    ds = gen_hyperclean_dataset(0, n_trn=8, n_val=3, m=12, n_out=2)
    # full row rank: every sample reachable, value 0 for any u
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = rng.uniform(-5, 5, 8)
        assert hyperclean_value_function(u, ds) == 0.0


def test_hyperclean_value_function_unreachable_rows():
    # orthogonal-row design with two zero rows: only those rows contribute,
    # each weighted by its sigmoid weight
    # -------------------------------------------------------------------------
    import pbgd.data as data_mod

    n, m = 5, 8
    x = np.zeros((n, m))
    for i in range(3):
        x[i, i] = 2.0 + i
    y = np.arange(n * 2, dtype=np.float64).reshape(n, 2) + 1.0
    ds = data_mod.HypercleanDataset(
        x_trn=x, y_trn=y, x_val=np.eye(m)[:2], y_val=np.ones((2, 2)),
        w_star=np.zeros((m, 2)), corruption_mask=np.zeros(n), seed=0,
    )
    u = np.array([0.3, -1.0, 2.0, 0.7, -0.2])
    expected = 0.5 * float(
        sigmoid(u[3:]) @ np.sum(y[3:] ** 2, axis=1)
    )
    assert_allclose(hyperclean_value_function(u, ds), expected, rtol=1e-12)


def test_hyperclean_solution_independence():
    # with full-row-rank X_trn the weighted minimizer interpolates for every
    # u, so the training gradient at the unweighted interpolator vanishes
    # -------------------------------------------------------------------------
    ds = gen_hyperclean_dataset(0)
    p = hyperclean_problem(ds, 5.0)
    w = min_norm_least_squares(ds.x_trn, ds.y_trn).reshape(-1)
    rng = np.random.default_rng(10)
    for _ in range(10):
        u = np.clip(rng.normal(0, 2, 100), -5, 5)
        assert np.linalg.norm(p.grad_g_v(u, w)) <= 1e-8


def test_hyperclean_monotone_loss():
    # raising any weight coordinatewise cannot lower any sample's weighted
    # loss at the weighted optimum
    # -------------------------------------------------------------------------
    ds = gen_hyperclean_dataset(0)
    rng = np.random.default_rng(11)
    for trial in range(4):
        u1 = rng.uniform(-5, 5, 100)
        u2 = np.clip(u1 + rng.uniform(0, 3, 100), -5, 5)
        u1 = np.minimum(u1, u2)
        for gamma in (0.5, 10.0):
            w1 = hyperclean_weighted_solution(u1, ds, gamma)
            w2 = hyperclean_weighted_solution(u2, ds, gamma)
            l1 = sigmoid(u1) * np.sum((ds.y_trn - ds.x_trn @ w1) ** 2, axis=1)
            l2 = sigmoid(u2) * np.sum((ds.y_trn - ds.x_trn @ w2) ** 2, axis=1)
            assert np.all(l1 <= l2 + 1e-9)


def test_hyperclean_gap_nonnegative_on_samples():
    ds = gen_hyperclean_dataset(0, n_trn=8, n_val=3, m=12, n_out=2)
    p = hyperclean_problem(ds, 5.0)
    rng = np.random.default_rng(12)
    worst = math.inf
    for _ in range(1000):
        u = rng.uniform(-5, 5, 8)
        v = rng.normal(size=12 * 2)
        worst = min(worst, p.g(u, v) - p.value_function_oracle(u))
    assert worst >= -1e-10


def test_hyperclean_problem_validation():
    ds = gen_hyperclean_dataset(0, n_trn=6, n_val=3, m=10, n_out=2)
    with pytest.raises(ValueError):
        hyperclean_problem(ds, 0.5)  # weight box must reach at least 1

    # duplicated rows make X X+ visibly non-diagonal
    import pbgd.data as data_mod

    x = np.zeros((3, 4))
    x[0, 0] = 1.0
    x[1, 0] = 1.0
    x[2, 1] = 1.0
    bad = data_mod.HypercleanDataset(
        x_trn=x, y_trn=np.ones((3, 2)), x_val=np.eye(4)[:2], y_val=np.ones((2, 2)),
        w_star=np.zeros((4, 2)), corruption_mask=np.zeros(3), seed=0,
    )
    with pytest.raises(ValueError):
        hyperclean_problem(bad, 5.0)


# ---------------------------------------------------------------------------
# starting points


def test_default_init_repr_balanced_interpolator():
    ds = gen_repr_dataset(0)
    p = repr_problem(ds)
    u0, v0, w0 = default_init(p, 0)
    assert np.array_equal(v0, w0) and v0 is not w0
    w1 = u0.reshape(40, 300)
    w2 = v0.reshape(300, 10)
    # balanced: both layers share one spectral norm
    s1 = np.linalg.norm(w1, 2)
    s2 = np.linalg.norm(w2, 2)
    assert_allclose(s1, s2, rtol=1e-10)
    # interpolating: the training loss starts at (numerical) zero
    assert p.g(u0, v0) <= 1e-15
    # deterministic in the seed
    again = default_init(p, 0)
    assert np.array_equal(u0, again[0]) and np.array_equal(v0, again[1])
    assert not np.array_equal(u0, default_init(p, 1)[0])


def test_default_init_hyperclean_interpolator():
    ds = gen_hyperclean_dataset(0)
    p = hyperclean_problem(ds, 5.0)
    u0, v0, w0 = default_init(p, 0)
    assert np.array_equal(u0, np.zeros(100))
    assert np.array_equal(v0, w0)
    assert p.g(u0, v0) <= 1e-12


def test_default_init_analytic():
    p = example1()
    u0, v0, w0 = default_init(p, 0)
    assert_allclose(u0, np.ones(1), atol=0)
    assert_allclose(v0, np.full(1, 0.5), atol=0)
    assert_allclose(w0, v0, atol=0)
