import numpy as np
import pytest
import scipy.linalg as sla

from ratlanczos import (LtiSystem, ParametricIO, ReducedController,
                        ShiftSequence, SparseSym, StabilityError, eval_control,
                        h2_norm, h2_norm_arnoldi, h2_param_norm, l2_stop_metric,
                        lqr_reduce, lqr_reduce_arnoldi, mass_transform)
from ratlanczos.control import warn_if_unstable

from conftest import rand_shifts, rand_sym


def _rand_stable_system(rng, n=30, p=1, q=1, lam_lo=-10.0, lam_hi=-0.5):
    A, Ad = rand_sym(rng, n, lam_lo, lam_hi)
    B = rng.standard_normal((n, p))
    C = rng.standard_normal((q, n))
    return LtiSystem(A=A, B=B, C=C), Ad


def _dense_h2(Ad, B, C):
    """Gramian-based H2 norm on the dense model (independent oracle)."""
    P = sla.solve_continuous_lyapunov(Ad.T, -(C.T @ C))
    return float(np.sqrt(np.trace(B.T @ P @ B)))


# ---------------------------------------------------------------------------
# mass matrix transform

def test_mass_transform_identity(rng):
    sys_, _ = _rand_stable_system(rng)
    assert mass_transform(sys_) is sys_


def test_mass_transform_hand_scaling():
    A = SparseSym.from_dense(np.diag([-4.0, -1.0]), definiteness_hint="negative")
    sys_ = LtiSystem(A=A, B=np.eye(2), C=np.eye(2), E=np.array([4.0, 1.0]),
                     x0=np.array([1.0, 1.0]))
    t = mass_transform(sys_)
    assert np.allclose(t.A.to_dense(), np.diag([-1.0, -1.0]))
    assert np.allclose(t.B, np.diag([0.5, 1.0]))
    assert np.allclose(t.C, np.diag([0.5, 1.0]))
    assert np.allclose(t.x0, [2.0, 1.0])
    assert t.E is None


def test_mass_transform_preserves_h2(rng):
    n = 12
    A, Ad = rand_sym(rng, n, -8.0, -0.5)
    E = rng.uniform(0.5, 3.0, n)
    B = rng.standard_normal((n, 1))
    C = rng.standard_normal((1, n))
    sys_ = LtiSystem(A=A, B=B, C=C, E=E)
    t = mass_transform(sys_)
    # dense oracle on the generalized model: E x' = A x + B u has the
    # explicit form x' = E^-1 A x + E^-1 B u, y = C x
    Ei = np.diag(1.0 / E)
    h2_full = _dense_h2(Ei @ Ad, Ei @ B, C)
    h2_tran = _dense_h2(t.A.to_dense(), t.B, t.C)
    assert abs(h2_full - h2_tran) <= 1e-10 * h2_full


def test_mass_transform_rejects_nonpositive():
    A = SparseSym.from_dense(np.diag([-1.0, -1.0]), definiteness_hint="negative")
    with pytest.raises(ValueError):
        LtiSystem(A=A, B=np.eye(2), C=np.eye(2), E=np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# H2 norm

def test_h2_analytic_2x2():
    A = SparseSym.from_dense(np.diag([-1.0, -2.0]), definiteness_hint="negative")
    sys_ = LtiSystem(A=A, B=np.array([1.0, 0.0]), C=np.array([[1.0, 0.0]]))
    res = h2_norm(sys_, ShiftSequence([3.0, 4.0]), tol=1e-12, s=1, max_m=2)
    assert abs(res.norm - np.sqrt(0.5)) <= 1e-12


def test_h2_zero_input():
    A = SparseSym.from_dense(np.diag([-1.0, -2.0]), definiteness_hint="negative")
    sys_ = LtiSystem(A=A, B=np.zeros((2, 1)), C=np.array([[1.0, 0.0]]))
    res = h2_norm(sys_, ShiftSequence([3.0, 4.0]), tol=1e-10, s=1, max_m=2)
    assert res.norm == 0.0


def test_h2_against_dense_oracle(rng):
    sys_, Ad = _rand_stable_system(rng, n=40, p=2, q=1)
    oracle = _dense_h2(Ad, sys_.B, sys_.C)
    res = h2_norm(sys_, None, tol=1e-11, s=1, max_m=40)
    assert abs(res.norm - oracle) <= 1e-7 * oracle
    assert res.seeded_with == "observability"


def test_h2_seed_side_selection(rng):
    sys_, _ = _rand_stable_system(rng, n=30, p=1, q=3)
    res = h2_norm(sys_, None, tol=1e-10, s=1, max_m=30)
    assert res.seeded_with == "controllability"


def test_h2_galerkin_residual(rng):
    n = 30
    sys_, Ad = _rand_stable_system(rng, n=n, p=2, q=1)
    sh = ShiftSequence([abs(s.value) for s in rand_shifts(rng, 12, 0.5, 10.0)])
    res = h2_norm(sys_, sh, tol=1e-13, s=1, max_m=12, retain_basis=True)
    blk = res.block
    m, q = blk.m, 1
    Q = blk.basis[:, :m * q]
    gamma = blk.R0
    W = np.zeros((m * q, m * q))
    W[:q, :q] = gamma @ gamma.T
    from ratlanczos import lyap_sym
    Y = lyap_sym(blk.J, W)
    P = Q @ Y @ Q.T
    residual = Ad @ P + P @ Ad + sys_.C.T @ sys_.C
    g = Q.T @ residual @ Q
    scale = np.linalg.norm(Ad, 2) * np.linalg.norm(P, 2) + np.linalg.norm(sys_.C) ** 2
    assert np.linalg.norm(g) <= 1e-10 * scale


def test_h2_arnoldi_agrees(rng):
    sys_, Ad = _rand_stable_system(rng, n=35, p=1, q=1)
    sh = ShiftSequence.cycled([0.8, 4.0, 9.0], 30)
    r1 = h2_norm(sys_, sh, tol=1e-10, s=1, max_m=30)
    r2 = h2_norm_arnoldi(sys_, sh, tol=1e-10, s=1, max_m=30)
    assert r1.iterations == r2.iterations
    assert abs(r1.norm - r2.norm) <= 1e-9 * abs(r1.norm)


# ---------------------------------------------------------------------------
# parametric H2 norm

def _param_demo(rng, n=16):
    A, Ad = rand_sym(rng, n, -6.0, -0.5)
    B1 = rng.standard_normal((n, 1))
    B2 = rng.standard_normal((n, 1))
    C1 = rng.standard_normal((1, n))
    C2 = rng.standard_normal((1, n))
    return A, Ad, B1, B2, C1, C2


def test_param_degenerate_matches_nonparametric(rng):
    A, Ad, B1, B2, C1, C2 = _param_demo(rng)
    pio = ParametricIO(B1=B1, B2=B2, C1=C1, C2=C2,
                       b=lambda mu: np.zeros((1, 1)),
                       c=lambda mu: np.zeros((1, 1)),
                       nodes=[0.3], weights=[1.0])
    res = h2_param_norm(A, pio, None, tol=1e-11, s=1, max_m=30)
    base = h2_norm(LtiSystem(A=A, B=B1, C=C1), None, tol=1e-11, s=1, max_m=30)
    assert abs(res.norm - base.norm) <= 1e-10 * base.norm


def test_param_constant_b_matches_shifted_input(rng):
    A, Ad, B1, B2, C1, C2 = _param_demo(rng)
    b0 = 0.7
    pio = ParametricIO(B1=B1, B2=B2, C1=C1, C2=C2,
                       b=lambda mu: b0 * np.eye(1),
                       c=lambda mu: np.zeros((1, 1)),
                       nodes=[0.0], weights=[1.0])
    res = h2_param_norm(A, pio, None, tol=1e-11, s=1, max_m=30)
    base = h2_norm(LtiSystem(A=A, B=B1 + b0 * B2, C=C1), None,
                   tol=1e-11, s=1, max_m=30)
    assert abs(res.norm - base.norm) <= 1e-10 * base.norm


def test_param_quadrature_matches_dense_oracle(rng):
    # two-node trapezoid, linear input map, constant output map
    A, Ad, B1, B2, C1, C2 = _param_demo(rng, n=10)
    nodes = [0.0, 1.0]
    weights = [0.5, 0.5]
    pio = ParametricIO(B1=B1, B2=B2, C1=C1, C2=C2,
                       b=lambda mu: float(mu) * np.eye(1),
                       c=lambda mu: np.zeros((1, 1)),
                       nodes=nodes, weights=weights)
    res = h2_param_norm(A, pio, None, tol=1e-12, s=1, max_m=25)
    total = 0.0
    for mu, w in zip(nodes, weights):
        Bmu = B1 + mu * B2
        total += w * _dense_h2(Ad, Bmu, C1) ** 2
    assert abs(res.norm - np.sqrt(total)) <= 1e-9 * np.sqrt(total)


def test_param_weight_validation(rng):
    A, Ad, B1, B2, C1, C2 = _param_demo(rng, n=8)
    with pytest.raises(ValueError):
        ParametricIO(B1=B1, B2=B2, C1=C1, C2=C2,
                     b=lambda mu: np.zeros((1, 1)),
                     c=lambda mu: np.zeros((1, 1)),
                     nodes=[0.0], weights=[-1.0])


# ---------------------------------------------------------------------------
# LQR

def test_lqr_zero_output_gives_zero_control():
    A = SparseSym.from_dense(np.diag([-1.0, -2.0]), definiteness_hint="negative")
    sys_ = LtiSystem(A=A, B=np.eye(2), C=np.zeros((1, 2)), R=np.eye(2),
                     x0=np.array([1.0, 1.0]))
    res = lqr_reduce(sys_, ShiftSequence([3.0]), tol=1e-8, s=1, max_m=2)
    assert res.converged
    assert np.array_equal(eval_control(res.controller, 0.7), np.zeros(2))


def test_lqr_scalar_analytic():
    A = SparseSym.from_dense(np.array([[-1.0]]), definiteness_hint="negative")
    sys_ = LtiSystem(A=A, B=np.array([1.0]), C=np.array([[1.0]]),
                     R=np.array([[1.0]]), x0=np.array([1.0]))
    res = lqr_reduce(sys_, ShiftSequence([5.0]), tol=1e-8, s=1, max_m=1)
    y = -1.0 + np.sqrt(2.0)
    assert abs(res.controller.Y[0, 0] - y) <= 5e-12
    u0 = eval_control(res.controller, 0.0)
    assert abs(u0[0] - y) <= 5e-12
    u1 = eval_control(res.controller, 1.0)
    # evaluation formula against the scalar closed form with the computed
    # Riccati value (the analytic y carries Newton's residual tolerance)
    yc = res.controller.Y[0, 0]
    assert abs(u1[0] - yc * np.exp((-1.0 - yc) * 1.0)) <= 1e-14
    assert abs(u1[0] - y * np.exp(-np.sqrt(2.0))) <= 5e-12


def test_eval_control_zero_feedback():
    ctrl = ReducedController(m=1, J=np.array([[-1.0]]), B=np.array([[1.0]]),
                             Y=np.zeros((1, 1)), z0=np.array([2.0]),
                             Rinv=np.eye(1))
    assert np.array_equal(eval_control(ctrl, 3.0), np.zeros(1))
    with pytest.raises(ValueError):
        eval_control(ctrl, -1.0)


def test_l2_metric_identical_controllers():
    ctrl = ReducedController(m=1, J=np.array([[-1.0]]), B=np.array([[1.0]]),
                             Y=np.array([[0.4]]), z0=np.array([1.5]),
                             Rinv=np.eye(1))
    assert l2_stop_metric(ctrl, ctrl) <= 1e-14


def test_l2_metric_against_quadrature():
    import scipy.integrate as si
    c1 = ReducedController(m=1, J=np.array([[-1.0]]), B=np.array([[1.0]]),
                           Y=np.array([[0.4142]]), z0=np.array([2.0]),
                           Rinv=np.eye(1))
    c2 = ReducedController(m=1, J=np.array([[-1.2]]), B=np.array([[0.8]]),
                           Y=np.array([[0.30]]), z0=np.array([1.7]),
                           Rinv=np.eye(1))
    met = l2_stop_metric(c1, c2)
    u1 = lambda t: eval_control(c1, t)[0]
    u2 = lambda t: eval_control(c2, t)[0]
    num = si.quad(lambda t: (u1(t) - u2(t)) ** 2, 0, 80)[0]
    den = si.quad(lambda t: u1(t) ** 2, 0, 80)[0]
    assert abs(met - num / den) <= 1e-9 * (num / den)


def test_l2_metric_rejects_unstable_closed_loop():
    ctrl = ReducedController(m=1, J=np.array([[1.0]]), B=np.array([[0.0]]),
                             Y=np.zeros((1, 1)), z0=np.array([1.0]),
                             Rinv=np.eye(1))
    with pytest.raises(StabilityError):
        l2_stop_metric(ctrl, ctrl)


def test_lqr_random_stabilizing_and_agreement(rng):
    n = 40
    A, Ad = rand_sym(rng, n, -8.0, -0.5)
    sys_ = LtiSystem(A=A, B=rng.standard_normal((n, 1)),
                     C=rng.standard_normal((1, n)), R=np.array([[2.0]]),
                     x0=rng.standard_normal(n))
    sh = ShiftSequence.cycled([0.7, 3.0, 7.5], 35)
    res = lqr_reduce(sys_, sh, tol=1e-9, s=2, max_m=35)
    ctrl = res.controller
    closed = ctrl.closed_loop()
    assert np.max(np.linalg.eigvals(closed).real) < 0.0
    ares = lqr_reduce_arnoldi(sys_, sh, tol=1e-9, s=2, max_m=35)
    assert res.iterations == ares.iterations
    for t in (0.0, 0.1, 1.0):
        uL = eval_control(res.controller, t)
        uA = eval_control(ares.controller, t)
        assert np.linalg.norm(uL - uA) <= 1e-6 * max(np.linalg.norm(uA), 1e-30)


def test_lqr_control_is_optimal_for_reduced_model(rng):
    # first-order optimality of the computed feedback on the reduced model
    # x' = J x - B u (input sign folded so the returned signal is the
    # minimizer), cost = int x' W x + u' R u
    n = 30
    A, Ad = rand_sym(rng, n, -8.0, -0.5)
    sys_ = LtiSystem(A=A, B=rng.standard_normal((n, 1)),
                     C=rng.standard_normal((1, n)), R=np.array([[1.5]]),
                     x0=rng.standard_normal(n))
    res = lqr_reduce(sys_, ShiftSequence.cycled([0.7, 4.0], 12), tol=1e-12,
                     s=1, max_m=12)
    ctrl = res.controller
    m = ctrl.m
    R = np.linalg.inv(ctrl.Rinv)
    gamma_sq_W = np.zeros((m, m))
    q = res.block.R0.shape[0]
    gamma = res.block.R0
    gamma_sq_W[:q, :q] = gamma @ gamma.T
    L = ctrl.gain()
    M = ctrl.closed_loop()

    def cost(eps, d, a):
        # augmented generator: state [x; x_u; s], u = L x_u + eps d s
        J, B = ctrl.J, ctrl.B
        F = np.block([
            [J, -B @ L, -eps * (B @ d.reshape(-1, 1))],
            [np.zeros((m, m)), M, np.zeros((m, 1))],
            [np.zeros((1, 2 * m)), np.array([[-a]])],
        ])
        P1 = np.hstack([np.eye(m), np.zeros((m, m + 1))])
        G = np.hstack([np.zeros((L.shape[0], m)), L,
                       eps * d.reshape(-1, 1)])
        Wfull = P1.T @ gamma_sq_W @ P1 + G.T @ R @ G
        X = sla.solve_continuous_lyapunov(F.T, -Wfull)
        w0 = np.concatenate([ctrl.z0, ctrl.z0, [1.0]])
        return float(w0 @ X @ w0)

    for k in range(20):
        g = np.random.default_rng(k)
        d = g.standard_normal(ctrl.B.shape[1])
        a = g.uniform(0.3, 3.0)
        base = cost(0.0, d, a)
        pert = cost(1e-3, d, a)
        assert pert >= base - 1e-8 * max(abs(base), 1.0)


def test_warns_on_unstable_operator(rng):
    A, _ = rand_sym(rng, 10, 0.5, 2.0)
    sys_ = LtiSystem(A=A, B=np.ones((10, 1)), C=np.ones((1, 10)))
    with pytest.warns(UserWarning):
        warn_if_unstable(sys_)
