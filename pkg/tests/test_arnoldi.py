import numpy as np

from ratlanczos import arnoldi_run, block_run, run

from conftest import rand_shifts, rand_sym


def _sign_align(Qa, Qb):
    """Diagonal sign similarity between two bases of the same flag."""
    return np.sign(np.sum(Qa * Qb, axis=0))


def _max_sin_principal_angle(Qa, Qb):
    """Largest principal-angle sine, computed through the complement
    projection so small angles are not lost to cancellation."""
    U1, _ = np.linalg.qr(Qa)
    U2, _ = np.linalg.qr(Qb)
    R = U2 - U1 @ (U1.T @ U2)
    return np.linalg.svd(R, compute_uv=False).max()


def test_span_matches_short_recurrence(rng):
    n, m = 100, 10
    A, Ad = rand_sym(rng, n, 1.0, 10.0)
    v = rng.standard_normal(n)
    sh = rand_shifts(rng, m, 1.0, 10.0)
    ar = arnoldi_run(A, v, sh, m)
    lz = run(A, v, sh, m, retain_basis=True)
    assert _max_sin_principal_angle(ar.Q, lz.basis) <= 1e-8


def test_cross_method_projections_agree(rng):
    # the two orthogonalizations produce the same basis up to column
    # signs, so the projections agree through that sign similarity
    n, m = 100, 10
    A, Ad = rand_sym(rng, n, 1.0, 10.0)
    v = rng.standard_normal(n)
    sh = rand_shifts(rng, m, 1.0, 10.0)
    ar = arnoldi_run(A, v, sh, m)
    lz = run(A, v, sh, m, retain_basis=True)
    d = _sign_align(ar.Q[:, :m], lz.basis[:, :m])
    J_aligned = (ar.J_m * d[None, :]) * d[:, None]
    assert np.abs(J_aligned - lz.J).max() <= 1e-9 * np.linalg.norm(Ad, 2)


def test_single_iteration(rng):
    A, Ad = rand_sym(rng, 20, 1.0, 5.0)
    v = rng.standard_normal(20)
    ar = arnoldi_run(A, v, rand_shifts(rng, 1, 1.0, 5.0), 1)
    vn = v / np.linalg.norm(v)
    assert np.abs(ar.Q[:, 0] - vn).max() <= 1e-14
    assert abs(ar.J_m[0, 0] - vn @ Ad @ vn) <= 1e-13


def test_orthogonality_enforced(rng):
    for _ in range(5):
        n = int(rng.integers(40, 150))
        m = int(rng.integers(4, 14))
        A, _ = rand_sym(rng, n, 0.5, 25.0)
        v = rng.standard_normal(n)
        ar = arnoldi_run(A, v, rand_shifts(rng, m, 0.5, 25.0), m)
        assert ar.orth_trace.max() <= 1e-12


def test_relation_matrices(rng):
    n, m = 80, 7
    A, Ad = rand_sym(rng, n, 0.5, 15.0)
    v = rng.standard_normal(n)
    ar = arnoldi_run(A, v, rand_shifts(rng, m, 0.5, 15.0), m)
    rel = np.linalg.norm(Ad @ ar.Q @ ar.Kbar - ar.Q @ ar.Hbar)
    assert rel <= 1e-12 * np.linalg.norm(Ad, 2)


def test_block_arnoldi_vs_block_recurrence(rng):
    n, p, m = 90, 2, 6
    A, Ad = rand_sym(rng, n, 1.0, 12.0)
    V = rng.standard_normal((n, p))
    sh = rand_shifts(rng, m, 1.0, 12.0)
    ar = arnoldi_run(A, V, sh, m)
    bl = block_run(A, V, sh, m, retain_basis=True)
    assert _max_sin_principal_angle(ar.Q, bl.basis) <= 1e-8
    assert ar.orth_trace.max() <= 1e-12


def test_lucky_termination_on_eigenvector(rng):
    import ratlanczos as rl
    A = rl.SparseSym.from_dense(np.diag([1.0, 2.0, 3.0]),
                                definiteness_hint="positive")
    e2 = np.array([0.0, 1.0, 0.0])
    ar = arnoldi_run(A, e2, rl.ShiftSequence([-1.0, -2.0]), 2)
    assert ar.termination == "lucky-breakdown"
    assert ar.m == 0
    assert abs(ar.J[0, 0] - 2.0) <= 1e-14


def test_timings_recorded(rng):
    A, _ = rand_sym(rng, 30, 1.0, 5.0)
    v = rng.standard_normal(30)
    ar = arnoldi_run(A, v, rand_shifts(rng, 4, 1.0, 5.0), 4)
    assert ar.timings.shape == (4,)
    assert np.all(ar.timings >= 0.0)
