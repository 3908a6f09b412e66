"""Long-recurrence rational Arnoldi with full orthogonalization.

The memory-hungry reference method: it stores every basis vector,
orthogonalizes new directions against all of them (classical
Gram-Schmidt with one reorthogonalization pass) and forms the projected
matrix explicitly.  Used as the correctness oracle and comparison
baseline for the short-recurrence runs.  One shifted solve per iteration
per block column, half as many as the short recurrence.
"""

import time
from dataclasses import dataclass

import numpy as np

from .dense import qr_thin
from .errors import RankDeficiencyError, ShiftError
from .lanczos import TERM_CONVERGED, TERM_LUCKY_BREAKDOWN, TERM_MAX_ITERATIONS
from .shifts import FactorizationCache, ShiftSequence
from .sparse import SparseSym

_EPS = float(np.finfo(float).eps)


@dataclass
class ArnoldiResult:
    """Full-basis decomposition after m iterations.

    ``Q`` has (m+1) p orthonormal columns; ``J`` is the explicit
    projection Q^T A Q over all of them (slice the leading m p rows and
    columns to compare with a short-recurrence projection).  ``Hbar`` and
    ``Kbar`` satisfy A Q Kbar = Q Hbar.
    """

    Q: np.ndarray
    Hbar: np.ndarray
    Kbar: np.ndarray
    J: np.ndarray
    p: int
    m: int
    termination: str
    shifts: tuple
    orth_trace: np.ndarray
    timings: np.ndarray
    elapsed: float = 0.0

    @property
    def J_m(self):
        """Projection onto the first m block columns (matches the
        short-recurrence J of the same iteration count)."""
        mp = self.m * self.p
        return self.J[:mp, :mp]


class ArnoldiProcess:
    """Incremental rational Arnoldi; drives one solve-and-orthogonalize
    iteration at a time so callers can evaluate stopping rules."""

    def __init__(self, A: SparseSym, V, shifts, m, solver_cache=None,
                 solve_method="auto"):
        if not isinstance(shifts, ShiftSequence):
            shifts = ShiftSequence(shifts)
        if len(shifts) < m:
            raise ShiftError(f"{len(shifts)} poles supplied for m = {m} iterations")
        shifts.check_sign_against(A)
        V = np.asarray(V, dtype=float)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        n, p = V.shape
        self.A = A
        self.shifts = shifts
        self.m_max = m
        self.p = p
        self.n = n
        self.cache = solver_cache or FactorizationCache(A, method=solve_method)
        self.Q = np.zeros((n, (m + 1) * p))
        self.W = np.zeros((n, (m + 1) * p))          # A Q, grown with Q
        self.J = np.zeros(((m + 1) * p, (m + 1) * p))
        self.Hbar = np.zeros(((m + 1) * p, m * p))
        self.Kbar = np.zeros(((m + 1) * p, m * p))
        self.orth_trace = []
        self.timings = []
        self.j = 0
        self.terminated = None
        self.shifts_used = []

        Q0, self.R0 = qr_thin(V)
        self._append_block(Q0)

    def _append_block(self, Qnew):
        p = self.p
        k = self.j * p
        self.Q[:, k:k + p] = Qnew
        Wnew = self.A.matmat(Qnew)
        self.W[:, k:k + p] = Wnew
        # grow the explicit projection
        self.J[:k + p, k:k + p] = self.Q[:, :k + p].T @ Wnew
        self.J[k:k + p, :k] = self.J[:k, k:k + p].T

    def step(self):
        """One iteration: shifted solve, CGS2 orthogonalization, QR."""
        if self.terminated is not None:
            raise RuntimeError("process already terminated")
        if self.j >= self.m_max:
            raise RuntimeError("iteration budget exhausted")
        t0 = time.perf_counter()
        j, p = self.j, self.p
        xi = self.shifts[j]
        k = j * p
        Qj = self.Q[:, k:k + p]
        Wnew = self.cache.get(xi).solve(Qj)

        Qact = self.Q[:, :k + p]
        h1 = Qact.T @ Wnew
        Wnew = Wnew - Qact @ h1
        h2 = Qact.T @ Wnew
        Wnew = Wnew - Qact @ h2
        hcol = h1 + h2

        scale = np.linalg.norm(hcol) + np.linalg.norm(Wnew)
        lucky = np.linalg.norm(Wnew, "fro") <= self.n * _EPS * max(scale, 1.0)
        if lucky:
            self.terminated = TERM_LUCKY_BREAKDOWN
            self.timings.append(time.perf_counter() - t0)
            return False
        try:
            Qnew, hdiag = qr_thin(Wnew)
        except RankDeficiencyError:
            self.terminated = TERM_LUCKY_BREAKDOWN
            self.timings.append(time.perf_counter() - t0)
            return False

        # relation columns: (I - A/xi)^-1 q_j = sum_i q_i h_i implies
        # A (Q hcol_full) / xi = Q hcol_full - q_j
        hfull = np.zeros(((self.m_max + 1) * p, p))
        hfull[:k + p] = hcol
        hfull[k + p:k + 2 * p] = hdiag
        self.Kbar[:, k:k + p] = xi.inv * hfull[:self.Kbar.shape[0]]
        self.Hbar[:, k:k + p] = hfull[:self.Hbar.shape[0]]
        self.Hbar[k:k + p, k:k + p] -= np.eye(p)

        self.j += 1
        self.shifts_used.append(xi)
        self._append_block(Qnew)
        G = self.Q[:, :self.j * p + p].T @ self.Q[:, :self.j * p + p]
        self.orth_trace.append(np.linalg.norm(np.eye(G.shape[0]) - G, 2))
        self.timings.append(time.perf_counter() - t0)
        return True

    @property
    def J_view(self):
        """Projection onto the first j block columns."""
        jp = self.j * self.p
        return self.J[:jp, :jp]

    @property
    def J_full_view(self):
        """Projection onto all j + 1 block columns built so far."""
        jp = (self.j + 1) * self.p
        return self.J[:jp, :jp]

    def side_view(self, U):
        """Projection Q_j^T U of the current basis (the long method can
        afford to compute it on demand)."""
        return self.Q[:, :self.j * self.p].T @ U

    def result(self, termination=None):
        jp = (self.j + 1) * self.p
        return ArnoldiResult(
            Q=self.Q[:, :jp].copy(),
            Hbar=self.Hbar[:jp, :self.j * self.p].copy(),
            Kbar=self.Kbar[:jp, :self.j * self.p].copy(),
            J=self.J[:jp, :jp].copy(),
            p=self.p,
            m=self.j,
            termination=termination or self.terminated or TERM_MAX_ITERATIONS,
            shifts=tuple(self.shifts_used),
            orth_trace=np.array(self.orth_trace),
            timings=np.array(self.timings),
        )


def arnoldi_run(A: SparseSym, V, shifts, m, callback=None, solver_cache=None,
                solve_method="auto") -> ArnoldiResult:
    """Run m rational Arnoldi iterations from v (or an n x p block).

    ``callback(process)`` is evaluated after every iteration; returning
    True stops early with termination "converged".
    """
    t0 = time.perf_counter()
    proc = ArnoldiProcess(A, V, shifts, m, solver_cache=solver_cache,
                          solve_method=solve_method)
    termination = TERM_MAX_ITERATIONS
    while proc.j < m:
        if not proc.step():
            termination = proc.terminated
            break
        if callback is not None and callback(proc):
            termination = TERM_CONVERGED
            break
    res = proc.result(termination)
    res.elapsed = time.perf_counter() - t0
    return res
