"""Shared helpers for the test suite: random instances with prescribed
spectra, valid pole draws and independent reference computations."""

import numpy as np
import pytest

from ratlanczos import ShiftSequence, SparseSym


def rand_sym(rng, n, lam_lo, lam_hi):
    """Dense-backed symmetric matrix with eigenvalues uniform in
    [lam_lo, lam_hi] and a random orthogonal eigenbasis."""
    lam = rng.uniform(lam_lo, lam_hi, size=n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = (Q * lam) @ Q.T
    M = 0.5 * (M + M.T)
    if lam_lo > 0:
        hint = "positive"
    elif lam_hi < 0:
        hint = "negative"
    else:
        hint = "indefinite"
    return SparseSym.from_dense(M, definiteness_hint=hint), M


def rand_shifts(rng, m, lam_lo, lam_hi):
    """Poles with sign opposite to a positive spectrum in [lam_lo, lam_hi],
    magnitudes drawn from the spectral range."""
    mags = rng.uniform(lam_lo, lam_hi, size=m)
    return ShiftSequence([-float(x) for x in mags])


def reference_lanczos(Ad, v, m):
    """Independent classical three-term recurrence (no reorthogonalization).

    Returns (alpha, beta) of the tridiagonal projection.
    """
    n = Ad.shape[0]
    q = v / np.linalg.norm(v)
    q_prev = np.zeros(n)
    beta_prev = 0.0
    alphas, betas = [], []
    for _ in range(m):
        w = Ad @ q
        a = float(q @ w)
        w = w - a * q - beta_prev * q_prev
        b = float(np.linalg.norm(w))
        alphas.append(a)
        betas.append(b)
        if b == 0.0:
            break
        q_prev = q
        q = w / b
        beta_prev = b
    return np.array(alphas), np.array(betas)


def dense_matfun_oracle(Ad, f):
    """f(A) for dense symmetric A via eigendecomposition (numpy only)."""
    lam, V = np.linalg.eigh(Ad)
    if callable(f):
        flam = f(lam)
    else:
        flam = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt,
                "inv": lambda x: 1.0 / x}[f](lam)
    return (V * flam) @ V.T


def pole_polynomial(x, shifts, m):
    """q(x) = prod_{j<m} (1 - x / xi_j) over the first m-1 poles."""
    out = np.ones_like(np.asarray(x, dtype=float))
    for s in list(shifts)[:m - 1]:
        out = out * (1.0 - np.asarray(x, dtype=float) * s.inv)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
