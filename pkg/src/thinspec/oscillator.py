"""1D Schrodinger eigensolver on a uniform Dirichlet grid.

The discrete operator is the 3-point finite-difference matrix of
-d^2/dy^2 + V(y), a symmetric tridiagonal matrix. Eigenvalues come from an
in-repo Sturm-sequence bisection (vectorized over the requested indices) and
eigenvectors from inverse iteration with a pivoting tridiagonal solve, so the
solver carries no external eigen dependency. Matrix elements over the
computed eigenbasis use composite Simpson quadrature on the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEigenvalueError, ParameterError
from .quadrature import simpson_weights, trapezoid_weights
from .series import PolynomialPotential


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of n points on [left, right], endpoints included."""

    left: float
    right: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ParameterError("grid needs at least 3 points")
        if not self.left < self.right:
            raise ParameterError("grid requires left < right")

    @property
    def spacing(self) -> float:
        return (self.right - self.left) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.left, self.right, self.n)


@dataclass(frozen=True)
class SpectralResult1D:
    """Lowest eigenpairs of a 1D Dirichlet Schrodinger operator.

    eigenfunctions[j] holds grid samples (boundary zeros included) normalized
    to unit discrete L2 norm under trapezoid weights, sign-fixed so each mode
    is positive at its first interior extremum.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: Grid1D

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class MatrixElementTable:
    """entries[n, s, k] = <H_{n+1} psi_s, psi_k> over one shared grid."""

    entries: np.ndarray

    @property
    def orders(self) -> int:
        return self.entries.shape[0]

    @property
    def basis_size(self) -> int:
        return self.entries.shape[1]


# ---------------------------------------------------------------------------
# symmetric tridiagonal eigensolver (Sturm bisection + inverse iteration)
# ---------------------------------------------------------------------------

_PIVMIN = 1e-300


def _sturm_counts(diag, off2, shifts):
    """Number of eigenvalues below each shift, by the Sturm sequence.

    Infinities propagate harmlessly through the recurrence (an inf pivot
    contributes a finite next term, a -inf pivot counts and recovers), so
    overflow is silenced rather than avoided.
    """
    q = diag[0] - shifts
    q = np.where(q == 0.0, -_PIVMIN, q)
    counts = (q < 0.0).astype(np.int64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        for i in range(1, diag.size):
            q = diag[i] - shifts - off2[i - 1] / q
            q = np.where(np.isnan(q), diag[i] - shifts, q)
            q = np.where(q == 0.0, -_PIVMIN, q)
            counts += q < 0.0
    return counts


def _bisect_lowest(diag, off, J, max_iter=60):
    """Lowest J eigenvalues of the tridiagonal (diag, off) by bisection."""
    off2 = off * off
    rad = np.zeros(diag.size)
    if off.size:
        rad[:-1] += np.abs(off)
        rad[1:] += np.abs(off)
    gmin = float(np.min(diag - rad))
    gmax = float(np.max(diag + rad))
    scale = max(abs(gmin), abs(gmax), 1.0)
    lo = np.full(J, gmin)
    hi = np.full(J, gmax)
    targets = np.arange(1, J + 1)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        counts = _sturm_counts(diag, off2, mid)
        go_down = counts >= targets
        hi = np.where(go_down, mid, hi)
        lo = np.where(go_down, lo, mid)
        if np.max(hi - lo) < 1e-10 * scale:
            break
    return 0.5 * (lo + hi), lo, hi


def _tridiag_solve(sub, diag, sup, rhs):
    """Solve a general tridiagonal system by elimination with partial pivoting."""
    n = diag.size
    c0 = np.concatenate([sub, [0.0]])
    c1 = diag.copy()
    c2 = np.concatenate([sup, [0.0]])
    c3 = np.zeros(n)
    x = rhs.copy()
    for i in range(n - 1):
        if abs(c0[i]) > abs(c1[i]):
            c1[i], c0[i] = c0[i], c1[i]
            c2[i], c1[i + 1] = c1[i + 1], c2[i]
            if i + 1 < n - 1:
                c3[i] = c2[i + 1]
                c2[i + 1] = 0.0
            x[i], x[i + 1] = x[i + 1], x[i]
        if c1[i] == 0.0:
            c1[i] = _PIVMIN
        mult = c0[i] / c1[i]
        c1[i + 1] -= mult * c2[i]
        if i + 1 < n - 1:
            c2[i + 1] -= mult * c3[i]
        x[i + 1] -= mult * x[i]
    if c1[n - 1] == 0.0:
        c1[n - 1] = _PIVMIN
    y = np.zeros(n)
    y[n - 1] = x[n - 1] / c1[n - 1]
    if n > 1:
        y[n - 2] = (x[n - 2] - c2[n - 2] * y[n - 1]) / c1[n - 2]
    for i in range(n - 3, -1, -1):
        y[i] = (x[i] - c2[i] * y[i + 1] - c3[i] * y[i + 2]) / c1[i]
    return y


def _apply_tridiag(diag, off, v):
    out = diag * v
    if off.size:
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
    return out


def _inverse_iteration(diag, off, shift, bracket, prev_vectors, seed):
    """Fixed-shift inverse iteration; the shift never moves, so the iterate
    cannot drift to a neighboring eigenvalue. Retries with fresh random
    starts if the Rayleigh quotient escapes the bisection bracket."""
    rng = np.random.default_rng(seed)
    lo, hi = bracket
    slack = 1e3 * max(hi - lo, 1e-13 * max(1.0, abs(shift)))
    for _attempt in range(4):
        v = rng.standard_normal(diag.size)
        v /= np.linalg.norm(v)
        rayleigh = shift
        for _ in range(3):
            v = _tridiag_solve(off, diag - shift, off, v)
            for u in prev_vectors:
                v -= (u @ v) * u
            nrm = np.linalg.norm(v)
            if not np.isfinite(nrm) or nrm == 0.0:
                v = rng.standard_normal(diag.size)
                nrm = np.linalg.norm(v)
            v /= nrm
        rayleigh = v @ _apply_tridiag(diag, off, v)
        if lo - slack <= rayleigh <= hi + slack:
            return rayleigh, v
    return rayleigh, v


def lowest_eigenpairs_tridiagonal(diag, off, J, seed=0):
    """Lowest J eigenpairs of a symmetric tridiagonal matrix.

    Bisection brackets the eigenvalues; inverse iteration with Rayleigh
    polishing delivers vectors and refined values. Eigenvalues closer than
    1e-9 relative raise a diagnostic, since the downstream theory assumes a
    simple spectrum.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    if J < 1 or J > diag.size:
        raise ParameterError("requested mode count J=%d outside 1..%d" % (J, diag.size))
    approx, lo, hi = _bisect_lowest(diag, off, J)
    scale = max(1.0, float(np.max(np.abs(approx))))
    gaps = np.diff(approx)
    if gaps.size and np.min(gaps) < 1e-9 * scale:
        raise DegenerateEigenvalueError(
            "eigenvalues %r are closer than 1e-9 relative; simple spectrum assumed"
            % (approx.tolist(),)
        )
    values = np.empty(J)
    vectors = np.empty((J, diag.size))
    done = []
    for j in range(J):
        shift = approx[j] + 1e-11 * scale
        lam, v = _inverse_iteration(diag, off, shift, (lo[j], hi[j]), done, seed + j)
        values[j] = lam
        vectors[j] = v
        done.append(v)
    order = np.argsort(values)
    return values[order], vectors[order]


# ---------------------------------------------------------------------------
# Schrodinger solves
# ---------------------------------------------------------------------------

def _potential_samples(potential, y):
    if isinstance(potential, PolynomialPotential):
        return potential(y)
    if callable(potential):
        return np.asarray(potential(y), dtype=float)
    v = np.asarray(potential, dtype=float)
    if v.shape != y.shape:
        raise ParameterError("sampled potential length does not match the grid")
    return v


def _finish_eigenfunctions(grid, vectors):
    """Embed interior vectors with boundary zeros, normalize, fix signs."""
    n = grid.n
    w = trapezoid_weights(n, grid.spacing)
    out = np.zeros((vectors.shape[0], n))
    out[:, 1:-1] = vectors
    for j in range(out.shape[0]):
        out[j] /= np.sqrt(np.sum(w * out[j] ** 2))
        out[j] *= _sign_at_first_extremum(out[j])
    return out


def _sign_at_first_extremum(psi):
    mag = np.max(np.abs(psi))
    dif = np.diff(psi)
    for i in range(1, psi.size - 1):
        if abs(psi[i]) < 1e-6 * mag:
            continue
        if dif[i - 1] * dif[i] <= 0.0:
            return 1.0 if psi[i] > 0 else -1.0
    k = int(np.argmax(np.abs(psi)))
    return 1.0 if psi[k] > 0 else -1.0


def solve_sturm_liouville(grid: Grid1D, v_samples, J: int, seed=0) -> SpectralResult1D:
    """Lowest J Dirichlet eigenpairs of -d2/dy2 + V on an explicit grid."""
    if J > grid.n - 2:
        raise ParameterError("J=%d exceeds the %d interior unknowns" % (J, grid.n - 2))
    y = grid.points()
    v = _potential_samples(v_samples, y)
    h = grid.spacing
    diag = 2.0 / h**2 + v[1:-1]
    off = np.full(grid.n - 3, -1.0 / h**2)
    values, vectors = lowest_eigenpairs_tridiagonal(diag, off, J, seed=seed)
    return SpectralResult1D(values, _finish_eigenfunctions(grid, vectors), grid)


def solve_schrodinger_1d(potential, box_halfwidths, n: int, J: int, seed=0) -> SpectralResult1D:
    """Lowest J eigenpairs of -d2/dy2 + V(y) on [-L_minus, L_plus].

    `box_halfwidths` is the pair (L_minus, L_plus); a symmetric box passes the
    same value twice. Second-order accuracy in the grid spacing.
    """
    lminus, lplus = box_halfwidths
    grid = Grid1D(-float(lminus), float(lplus), n)
    return solve_sturm_liouville(grid, potential, J, seed=seed)


def richardson_refine(potential, box_halfwidths, J, n_ladder, seed=0):
    """Eigenvalues extrapolated over two grids with doubled resolution.

    Returns (values, error_estimates) with values = (4*mu_fine - mu_coarse)/3,
    which cancels the second-order spacing term, and error estimates
    |mu_fine - mu_coarse|/3.
    """
    if len(n_ladder) != 2:
        raise ParameterError("n_ladder must hold exactly two grid sizes")
    n1, n2 = n_ladder
    mu1 = solve_schrodinger_1d(potential, box_halfwidths, n1, J, seed=seed).eigenvalues
    mu2 = solve_schrodinger_1d(potential, box_halfwidths, n2, J, seed=seed).eigenvalues
    refined = (4.0 * mu2 - mu1) / 3.0
    est = np.abs(mu2 - mu1) / 3.0
    return refined, est


def doubled_grid_size(n: int) -> int:
    """Grid size that halves the spacing of an n-point grid exactly."""
    return 2 * n - 1


def select_box_halfwidth(potential, tol, D=1.0, clip=None):
    """Smallest dyadic halfwidth whose Gaussian tail bound drops below tol.

    The tail bound D*exp(-0.5*sqrt(r)*L^2) uses r = (leading coefficient)/2
    of the confining polynomial, the decay rate the oscillator eigenfunctions
    obey beyond their turning points. When a clip is given (solving on the
    stretched finite interval) the result never exceeds it.
    """
    if tol <= 0:
        raise ParameterError("tolerance must be positive")
    if isinstance(potential, PolynomialPotential):
        deg, lead = potential.leading()
    else:
        deg, lead = potential
    if deg < 1 or lead <= 0:
        raise ParameterError("potential must grow at infinity")
    rate = 0.5 * np.sqrt(lead / 2.0)
    L = 1.0
    while D * np.exp(-rate * L * L) >= tol and L < 2**24:
        L *= 2.0
    if clip is not None:
        L = min(L, float(clip))
    return L


def matrix_elements(result: SpectralResult1D, potentials) -> MatrixElementTable:
    """Simpson-quadrature table a[n, s, k] = <H_n psi_s, psi_k>.

    Real multiplication operators give a symmetric table; the computed
    entries are symmetrized and the asymmetry is checked against 1e-10.
    """
    y = result.grid.points()
    w = simpson_weights(result.grid.n, result.grid.spacing)
    psi = result.eigenfunctions
    n_orders = len(potentials)
    S = psi.shape[0]
    table = np.zeros((n_orders, S, S))
    for i, pot in enumerate(potentials):
        hv = _potential_samples(pot, y)
        weighted = psi * (w * hv)
        block = weighted @ psi.T
        asym = np.max(np.abs(block - block.T)) if S > 1 else 0.0
        scale = max(1.0, float(np.max(np.abs(block))))
        if asym > 1e-10 * scale:
            raise ParameterError("matrix element table asymmetric beyond 1e-10")
        table[i] = 0.5 * (block + block.T)
    return MatrixElementTable(table)


def decay_certificate(result: SpectralResult1D, potential, rate_coeff=None):
    """Per-mode Gaussian-envelope constants beyond the classical turning points.

    For each mode j, finds the smallest D with |psi_j(y)| <= D*exp(-r*y^2)
    on grid points where V(y) >= 2*mu_j, with r = 0.5*sqrt(a0*a1) extracted
    from the leading coefficient (2*a0*a1) of the confining term. Returns the
    array of D values; the certificate passes when D <= 10*max|psi_j|.
    """
    y = result.grid.points()
    v = _potential_samples(potential, y)
    if rate_coeff is None:
        if not isinstance(potential, PolynomialPotential):
            raise ParameterError("rate_coeff is required for sampled potentials")
        _, lead = potential.leading()
        if lead <= 0:
            raise ParameterError("potential must be confining")
        rate_coeff = 0.5 * np.sqrt(lead / 2.0)
    Ds = np.zeros(result.mode_count)
    for j in range(result.mode_count):
        mu = result.eigenvalues[j]
        outside = v >= 2.0 * mu
        psi = result.eigenfunctions[j]
        if not np.any(outside):
            Ds[j] = np.max(np.abs(psi))
            continue
        with np.errstate(divide="ignore"):
            logd = np.log(np.abs(psi[outside])) + rate_coeff * y[outside] ** 2
        Ds[j] = float(np.exp(min(700.0, np.max(logd))))
    return Ds
