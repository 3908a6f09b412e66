"""Poles, shifted operators I - A/xi and their reusable factorizations."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DimensionError, IndefiniteShiftError, ShiftError
from .sparse import SparseSym, power_iteration

DENSE_CUTOFF = 2000           # dense Cholesky below, sparse LDL above
CG_RTOL = 1e-14

#: debug switch: verify the residual of every shifted solve
CHECK_SOLVE_RESIDUALS = False
SOLVE_RESIDUAL_RTOL = 1e-8

SOLVE_METHODS = ("auto", "dense-cholesky", "sparse-ldl", "iterative-cg")


@dataclass(frozen=True)
class Shift:
    """A pole xi: either a finite nonzero real or the infinity sentinel.

    The inverse of the infinity sentinel is exactly zero, so an infinite
    pole turns a shifted solve into a plain copy (polynomial step).
    """

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise ShiftError("pole value is NaN")
        if v == 0.0:
            raise ShiftError("finite poles must be nonzero")
        object.__setattr__(self, "value", v)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def inv(self) -> float:
        """1 / xi, with 1 / inf = 0 exactly."""
        return 0.0 if self.is_infinite else 1.0 / self.value

    def __repr__(self):
        return "Shift(inf)" if self.is_infinite else f"Shift({self.value:g})"


INFINITY = Shift(math.inf)


class ShiftSequence:
    """Ordered pole list xi_1 ... xi_m consumed one per iteration.

    The two conceptual leading poles xi_{-1} = xi_0 = inf are not stored;
    the recurrences start from zero inverse shifts instead.
    """

    def __init__(self, shifts):
        out = []
        for s in shifts:
            out.append(s if isinstance(s, Shift) else Shift(float(s)))
        if not out:
            raise ShiftError("empty pole list")
        self.shifts = tuple(out)

    @classmethod
    def cycled(cls, values, m):
        """Repeat ``values`` cyclically until the sequence has length m."""
        vals = [v if isinstance(v, Shift) else Shift(float(v)) for v in values]
        if not vals:
            raise ShiftError("empty pole list")
        return cls([vals[i % len(vals)] for i in range(m)])

    @classmethod
    def all_infinite(cls, m):
        return cls([INFINITY] * m)

    def __len__(self):
        return len(self.shifts)

    def __getitem__(self, i):
        return self.shifts[i]

    def __iter__(self):
        return iter(self.shifts)

    def values(self):
        return np.array([s.value for s in self.shifts])

    def check_sign_against(self, A: SparseSym):
        """Warn if a finite pole shares the sign of a definite operator.

        Poles of the same sign as the spectrum can make I - A/xi indefinite.
        """
        hint = A.definiteness_hint
        if hint not in ("positive", "negative"):
            return
        want_negative = hint == "positive"
        for k, s in enumerate(self.shifts):
            if s.is_infinite:
                continue
            if (s.value < 0) != want_negative:
                warnings.warn(
                    f"pole {k + 1} ({s.value:g}) has the same sign as the "
                    f"{hint} definite operator; the shifted matrix may be "
                    "indefinite", stacklevel=2)


def default_shifts(A: SparseSym, m, num_poles=12, span_decades=6, seed=0):
    """Fallback pole sequence when the caller supplies none.

    ``num_poles`` real poles with magnitudes log-spaced over
    [norm(A)/10**span_decades, norm(A)], cycled to length ``m``.  The sign
    is taken opposite to the operator's definiteness so every shifted
    matrix stays positive definite (positive poles for a stable, negative
    definite operator); without a definiteness hint the Rayleigh quotient
    of the power iterate decides.
    """
    nrm, v = power_iteration(A, seed=seed)
    if nrm == 0.0:
        nrm = 1.0
    hint = A.definiteness_hint
    if hint == "negative":
        sign = 1.0
    elif hint == "positive":
        sign = -1.0
    else:
        sign = 1.0 if float(v @ A.matvec(v)) < 0.0 else -1.0
    mags = np.logspace(math.log10(nrm), math.log10(nrm) - span_decades, num_poles)
    return ShiftSequence.cycled([sign * mg for mg in mags], m)


class ShiftedFactorization:
    """Reusable factorization of I - A/xi.

    ``solve`` accepts a vector or an (n, k) block of right-hand sides and
    solves them all against the single stored factorization.  With the
    module flag CHECK_SOLVE_RESIDUALS set, every solve is verified
    against the operator.
    """

    def __init__(self, shift: Shift, method: str, n: int, solver, apply_op=None):
        self.shift = shift
        self.method = method
        self.n = n
        self._solver = solver
        self._apply_op = apply_op

    def solve(self, B):
        B = np.asarray(B, dtype=float)
        single = B.ndim == 1
        if B.shape[0] != self.n:
            raise DimensionError(
                f"right-hand side rows {B.shape[0]} != dimension {self.n}")
        B2 = B if not single else B.reshape(-1, 1)
        X = self._solver(B2)
        if CHECK_SOLVE_RESIDUALS and self._apply_op is not None:
            res = np.linalg.norm(self._apply_op(X) - B2, axis=0)
            bound = SOLVE_RESIDUAL_RTOL * np.maximum(
                np.linalg.norm(B2, axis=0), 1e-300)
            assert np.all(res <= bound), (
                f"shifted solve residual {res.max():.3e} exceeds "
                f"{bound.min():.3e} for xi = {self.shift.value:g}")
        return X[:, 0] if single else X


def shifted_matrix(A: SparseSym, xi: Shift):
    """Assemble I - A/xi as a scipy CSR matrix (identity for xi = inf)."""
    n = A.n
    if xi.is_infinite:
        return sp.identity(n, format="csr")
    return (sp.identity(n, format="csr") - xi.inv * A.to_scipy()).tocsr()


def shifted_factorize(A: SparseSym, xi: Shift, method: str = "auto") -> ShiftedFactorization:
    """Factor I - A/xi once for repeated multi right-hand-side solves.

    The shifted matrix must be symmetric positive definite, which holds
    whenever the pole sign is opposite to the spectrum of A.  An infinite
    pole yields the identity solver.

    Raises
    ------
    IndefiniteShiftError
        If the factorization detects a nonpositive pivot.
    """
    if method not in SOLVE_METHODS:
        raise ValueError(f"unknown solve method {method!r}")
    n = A.n
    if xi.is_infinite:
        return ShiftedFactorization(xi, "identity", n, lambda B: B.copy(),
                                    apply_op=lambda X: X)
    if method == "auto":
        method = "dense-cholesky" if n <= DENSE_CUTOFF else "sparse-ldl"
    inv = xi.inv
    apply_op = lambda X: X - inv * A.matmat(X)

    if method == "dense-cholesky":
        M = np.eye(n) - xi.inv * A.to_dense()
        try:
            c, low = sla.cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise IndefiniteShiftError(
                f"I - A/xi with xi = {xi.value:g} is not positive definite: {exc}",
                shift=xi) from exc
        return ShiftedFactorization(
            xi, method, n,
            lambda B: sla.cho_solve((c, low), B, check_finite=False),
            apply_op=apply_op)

    if method == "sparse-ldl":
        M = shifted_matrix(A, xi).tocsc()
        try:
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A",
                           diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise IndefiniteShiftError(
                f"sparse factorization of I - A/xi failed for xi = {xi.value:g}: {exc}",
                shift=xi) from exc
        dU = lu.U.diagonal()
        if np.any(dU <= 0.0):
            raise IndefiniteShiftError(
                f"I - A/xi with xi = {xi.value:g} is not positive definite "
                f"(pivot {dU.min():.3e})", shift=xi)
        return ShiftedFactorization(xi, method, n, lu.solve,
                                    apply_op=apply_op)

    # iterative-cg fallback
    M = shifted_matrix(A, xi)

    def cg_solve(B):
        X = np.empty_like(B)
        for k in range(B.shape[1]):
            x, info = spla.cg(M, B[:, k], rtol=CG_RTOL, atol=0.0)
            if info > 0:
                raise ConvergenceError(
                    f"CG did not converge for xi = {xi.value:g} (info={info})")
            if info < 0:
                raise IndefiniteShiftError(
                    f"CG breakdown for xi = {xi.value:g}", shift=xi)
            X[:, k] = x
        return X

    return ShiftedFactorization(xi, method, n, cg_solve, apply_op=apply_op)


def shifted_solve_multi(F: ShiftedFactorization, B):
    """Solve (I - A/xi) X = B for an (n, k) block against one factorization."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[1] < 1:
        raise DimensionError("expected an (n, k) block with k >= 1")
    return F.solve(B)


class FactorizationCache:
    """Cache of shifted factorizations keyed by pole value.

    Pole sequences are commonly short lists applied cyclically, so reusing
    the factorization of a repeated pole removes most of the solve setup
    cost of a run.
    """

    def __init__(self, A: SparseSym, method: str = "auto"):
        self.A = A
        self.method = method
        self._cache = {}

    def get(self, xi: Shift) -> ShiftedFactorization:
        key = xi.value
        fact = self._cache.get(key)
        if fact is None:
            fact = shifted_factorize(self.A, xi, self.method)
            self._cache[key] = fact
        return fact
