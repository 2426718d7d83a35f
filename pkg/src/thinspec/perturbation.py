"""Eigenvalue perturbation series for a composite polynomial family.

Two independent routes compute the Taylor coefficients of the eigenvalue
branch of H(eps) = H0 + sum_p eps^p V_p in a truncated eigenbasis:

* `rs_expand` runs the order-by-order Rayleigh-Schrodinger recursion with
  intermediate normalization;
* `brute_force_branch_fit` diagonalizes H(eps) along a geometric ladder,
  follows the branch by eigenvector-overlap continuation, and extracts
  coefficients from a column-scaled Vandermonde least-squares fit.

The fit refines each tracked eigenvalue in extended precision against the
exactly formed H(eps) and solves the fit system in extended precision as
well; plain double arithmetic cannot reach the 1e-6 cross-route agreement
this package tests for (rounding of the assembled matrices alone injects
~1e-16 noise that the high-order Vandermonde columns amplify beyond it).
The double-precision condition number of the scaled system is still
reported so ill-posed fits stay visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf, matrix as mp_matrix, lu_solve as mp_lu_solve, norm as mp_norm, qr_solve as mp_qr_solve

from .errors import BranchCrossingError, DegenerateEigenvalueError, ParameterError

_FIT_DPS = 60
_OVERLAP_FLOOR = 0.7


@dataclass(frozen=True)
class PerturbationExpansion:
    """Eigenvalue branch mu_j + sum_n q_n eps^(n*step) around base index j."""

    base_index: int
    mu_j: float
    exponent_step: float
    q: np.ndarray
    M: float = 1.0
    alpha1: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if not 0.0 < self.exponent_step <= 1.0:
            raise ParameterError("exponent step must lie in (0, 1]")
        if self.alpha1 is None:
            object.__setattr__(self, "alpha1", self.exponent_step)

    @property
    def order(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class DensePerturbationProblem:
    """Base eigenvalues plus dense symmetric perturbation matrices V_1..V_N."""

    h0_diag: np.ndarray
    v_orders: tuple

    def __post_init__(self):
        object.__setattr__(self, "h0_diag", np.asarray(self.h0_diag, dtype=float))
        vs = tuple(np.asarray(v, dtype=float) for v in self.v_orders)
        S = self.h0_diag.size
        for v in vs:
            if v.shape != (S, S):
                raise ParameterError("perturbation matrices must be S x S")
            scale = max(1.0, float(np.max(np.abs(v))))
            if np.max(np.abs(v - v.T)) > 1e-12 * scale:
                raise ParameterError("perturbation matrices must be symmetric")
        object.__setattr__(self, "v_orders", vs)

    @property
    def size(self) -> int:
        return self.h0_diag.size

    @property
    def orders(self) -> int:
        return len(self.v_orders)

    def assemble(self, eps: float) -> np.ndarray:
        H = np.diag(self.h0_diag)
        for p, V in enumerate(self.v_orders, start=1):
            H = H + eps**p * V
        return H


def problem_from_table(mu, table) -> DensePerturbationProblem:
    """Dense problem over the oscillator eigenbasis from a matrix-element table."""
    return DensePerturbationProblem(np.asarray(mu, dtype=float), tuple(table.entries))


@dataclass(frozen=True)
class BranchFitResult:
    """Fitted branch coefficients plus the double-precision condition report."""

    coeffs: np.ndarray
    condition_number: float
    fit_order: int
    min_overlap: float


def rs_expand(problem: DensePerturbationProblem, j: int, N: int,
              exponent_step=1.0, M=1.0, alpha1=None) -> PerturbationExpansion:
    """Coefficients q_1..q_N of the eigenvalue branch through level j.

    Order n collects every cross term of the composite perturbation:
    q_n = sum_{p=1..n} <psi_j, V_p psi^(n-p)> with the corrections
    psi^(n) built through the reduced resolvent on the complement of psi_j
    (intermediate normalization <psi_j, psi^(n)> = 0). The grading metadata
    (exponent_step, M, alpha1) is attached verbatim for downstream
    evaluation; the default labels plain integer powers.
    """
    S = problem.size
    if not 0 <= j < S:
        raise ParameterError("base index j outside the basis")
    mu = problem.h0_diag
    gaps = np.abs(np.delete(mu, j) - mu[j])
    if gaps.size and np.min(gaps) < 1e-9 * max(1.0, float(np.max(np.abs(mu)))):
        raise DegenerateEigenvalueError(
            "base eigenvalue %g is degenerate within 1e-9" % mu[j]
        )
    e_j = np.zeros(S)
    e_j[j] = 1.0
    others = np.arange(S) != j
    denom = mu - mu[j]
    psi = {0: e_j}
    q = np.zeros(N + 1)
    for n in range(1, N + 1):
        total = 0.0
        for p in range(1, min(n, problem.orders) + 1):
            total += e_j @ (problem.v_orders[p - 1] @ psi[n - p])
        q[n] = total
        rhs = np.zeros(S)
        for p in range(1, min(n, problem.orders) + 1):
            rhs -= problem.v_orders[p - 1] @ psi[n - p]
        for k in range(1, n):
            rhs += q[k] * psi[n - k]
        corr = np.zeros(S)
        corr[others] = rhs[others] / denom[others]
        psi[n] = corr
    return PerturbationExpansion(j, float(mu[j]), exponent_step, q[1:], M=M, alpha1=alpha1)


def closed_form_q1_q2(table, mu, j: int):
    """First two branch coefficients from the matrix-element table.

    q1 = a[1,j,j]; q2 = sum_{s != j} a[1,s,j]*a[1,j,s] / (mu_j - mu_s)
    + a[2,j,j]. The signs follow the branch convention fixed by the
    brute-force fit (the contour-calculus statement of the same coefficients
    carries the opposite global sign; see the sign-convention report).
    """
    a = table.entries
    if a.shape[0] < 2:
        raise ParameterError("table must hold at least orders 1 and 2")
    mu = np.asarray(mu, dtype=float)
    S = a.shape[1]
    q1 = a[0, j, j]
    q2 = a[1, j, j]
    for s in range(S):
        if s == j:
            continue
        q2 += a[0, s, j] * a[0, j, s] / (mu[j] - mu[s])
    return float(q1), float(q2)


# ---------------------------------------------------------------------------
# brute-force branch fit
# ---------------------------------------------------------------------------

def _mp_branch_eigenvalue(problem, eps, lam, vec):
    """Eigenvalue of the exactly-formed H(eps) nearest lam, in mp precision."""
    S = problem.size
    ee = mpf(repr(float(eps)))
    A = mp_matrix(S)
    for i in range(S):
        for k in range(S):
            acc = mpf(0)
            p = ee
            for V in problem.v_orders:
                acc += p * mpf(V[i, k])
                p *= ee
            A[i, k] = acc
        A[i, i] += mpf(problem.h0_diag[i])
    shifted = A.copy()
    for i in range(S):
        shifted[i, i] -= mpf(lam)
    b = mp_matrix([mpf(x) for x in vec])
    try:
        w = mp_lu_solve(shifted, b)
        w = w / mp_norm(w)
    except Exception:
        w = b / mp_norm(b)
    acc = mpf(0)
    for i in range(S):
        row = mpf(0)
        for k in range(S):
            row += A[i, k] * w[k]
        acc += w[i] * row
    return acc


def _mp_vandermonde_fit(eps_values, values_mp, fit_order):
    m = len(eps_values)
    A = mp_matrix(m, fit_order)
    b = mp_matrix(m, 1)
    for i, (e, v) in enumerate(zip(eps_values, values_mp)):
        ee = mpf(repr(float(e)))
        p = ee
        for k in range(fit_order):
            A[i, k] = p
            p *= ee
        b[i] = v
    scales = []
    for k in range(fit_order):
        s = max(abs(A[i, k]) for i in range(m))
        s = s if s > 0 else mpf(1)
        scales.append(s)
        for i in range(m):
            A[i, k] /= s
    x, _ = mp_qr_solve(A, b)
    return np.array([float(x[k] / scales[k]) for k in range(fit_order)])


def suggest_fit_ladder(problem: DensePerturbationProblem, j: int, N: int, points=None):
    """Geometric ratio-1/2 ladder sized to the branch's convergence radius.

    The eigenvalue branch stays analytic while sum_p |eps|^p ||V_p|| < gap/2;
    the ladder top sits at a tenth of that bound so the omitted orders of the
    fit are negligible.
    """
    mu = problem.h0_diag
    gap = float(np.min(np.abs(np.delete(mu, j) - mu[j]))) if mu.size > 1 else 1.0
    vnorm = max(float(np.linalg.norm(V, 2)) for V in problem.v_orders) if problem.v_orders else 1.0
    radius = gap / (2.0 * vnorm + gap)
    top = 0.1 * min(radius, 1.0)
    if points is None:
        points = N + 8
    return [top * 0.5**i for i in range(points)]


def brute_force_branch_fit(problem: DensePerturbationProblem, j: int, eps_ladder, N: int,
                           fit_order=None) -> BranchFitResult:
    """Branch coefficients by diagonalization, continuation, and fitting.

    Diagonalizes H(eps) at every ladder point (ascending), follows the branch
    from the unperturbed eigenvector by maximal overlap (an overlap below 0.7
    raises a branch-crossing diagnostic), refines each tracked eigenvalue in
    extended precision, and least-squares fits a polynomial through the
    ladder. Returns coefficients 1..N with the condition number of the
    column-scaled double-precision fit matrix.
    """
    eps_sorted = sorted(float(e) for e in eps_ladder)
    if len(eps_sorted) < N + 2:
        raise ParameterError("ladder needs at least N+2 distinct points")
    if len(set(eps_sorted)) != len(eps_sorted):
        raise ParameterError("ladder values must be distinct")
    if fit_order is None:
        fit_order = min(N + 6, len(eps_sorted) - 2)
    fit_order = max(fit_order, N)
    S = problem.size
    ref = np.zeros(S)
    ref[j] = 1.0
    old_dps = mp.dps
    mp.dps = _FIT_DPS
    try:
        mu_j = mpf(problem.h0_diag[j])
        values = []
        min_overlap = 1.0
        for eps in eps_sorted:
            H = problem.assemble(eps)
            w, U = np.linalg.eigh(H)
            overlaps = np.abs(U.T @ ref)
            k = int(np.argmax(overlaps))
            if overlaps[k] < _OVERLAP_FLOOR:
                raise BranchCrossingError(
                    "overlap %.3f below %.1f at eps=%g" % (overlaps[k], _OVERLAP_FLOOR, eps)
                )
            min_overlap = min(min_overlap, float(overlaps[k]))
            ref = U[:, k] * np.sign(U[:, k] @ ref)
            values.append(_mp_branch_eigenvalue(problem, eps, w[k], U[:, k]) - mu_j)
        coeffs = _mp_vandermonde_fit(eps_sorted, values, fit_order)
    finally:
        mp.dps = old_dps
    # double-precision condition report for the same scaled system
    V = np.vander(np.asarray(eps_sorted), fit_order + 1, increasing=True)[:, 1:]
    colnorm = np.linalg.norm(V, axis=0)
    colnorm[colnorm == 0.0] = 1.0
    sv = np.linalg.svd(V / colnorm, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return BranchFitResult(coeffs[:N], cond, fit_order, min_overlap)


def evaluate_prediction(expansion: PerturbationExpansion, eps: float, K: int):
    """Truncated branch value and the unscaled 2D eigenvalue prediction.

    nu_K = mu_j + sum_{n<=K} q_n eps^(n*step);
    Lambda_K = pi^2/(M^2 eps^2) + eps^(-2*alpha1) * nu_K.
    """
    if K > expansion.order:
        raise ParameterError("K=%d exceeds available order %d" % (K, expansion.order))
    nu = expansion.mu_j
    for n in range(1, K + 1):
        nu += expansion.q[n - 1] * eps ** (n * expansion.exponent_step)
    lam = np.pi**2 / (expansion.M**2 * eps**2) + eps ** (-2.0 * expansion.alpha1) * nu
    return float(nu), float(lam)
