"""Truncated power-series algebra and the perturbation-potential builder.

The geometry is a narrow domain of height eps*h(x) over an interval, with
h(x) = M - c(x)*x**m taking its maximum M only at x = 0 (m even, c(0) != 0).
Stretching x = eps**alpha1 * y with alpha1 = 2/(m+2) turns the effective 1D
operator into an anharmonic oscillator

    H0 = -d^2/dy^2 + 2*a0*a1*y**m,    a0 = pi^2/M^2,  a1 = c0/M,

plus a graded family of polynomial corrections H_n entering at eps**(n*alpha1).
This module computes the H_n coefficient-by-coefficient from the Taylor
coefficients of c(x), entirely with dense truncated series arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError

KAPPA = np.pi**2 / 3.0 + 0.25  # transverse-mode energy constant


# ---------------------------------------------------------------------------
# truncated series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients of a power series truncated at a fixed order.

    coeffs[k] is the coefficient of x**k; len(coeffs) == order + 1.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ParameterError("series needs a nonempty 1-d coefficient vector")

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __getitem__(self, k: int) -> float:
        """Coefficient of x**k; negative or out-of-range indices read as zero."""
        if k < 0 or k > self.order:
            return 0.0
        return float(self.coeffs[k])

    @classmethod
    def from_list(cls, coeffs, order=None) -> "TruncatedSeries":
        c = np.asarray(coeffs, dtype=float)
        if order is not None:
            out = np.zeros(order + 1)
            out[: min(c.size, order + 1)] = c[: order + 1]
            c = out
        return cls(c)


def series_mul(a: TruncatedSeries, b: TruncatedSeries, order: int) -> TruncatedSeries:
    """Cauchy product of two truncated series, truncated at `order`."""
    out = np.zeros(order + 1)
    na = min(a.order, order)
    for i in range(na + 1):
        ai = a.coeffs[i]
        if ai == 0.0:
            continue
        nb = min(b.order, order - i)
        out[i : i + nb + 1] += ai * b.coeffs[: nb + 1]
    return TruncatedSeries(out)


def series_pow(a: TruncatedSeries, p: int, order: int) -> TruncatedSeries:
    """Integer power of a truncated series; negative p via the reciprocal.

    Raising to a negative power requires a nonzero constant term.
    """
    if p == 0:
        out = np.zeros(order + 1)
        out[0] = 1.0
        return TruncatedSeries(out)
    base = a
    if p < 0:
        base = _series_reciprocal(a, order)
        p = -p
    result = TruncatedSeries.from_list([1.0], order)
    power = TruncatedSeries.from_list(base.coeffs, order)
    while p > 0:
        if p & 1:
            result = series_mul(result, power, order)
        power = series_mul(power, power, order)
        p >>= 1
    return result


def _series_reciprocal(a: TruncatedSeries, order: int) -> TruncatedSeries:
    if a[0] == 0.0:
        raise ParameterError("reciprocal of a series with zero constant term")
    out = np.zeros(order + 1)
    out[0] = 1.0 / a[0]
    for k in range(1, order + 1):
        acc = 0.0
        for i in range(1, min(k, a.order) + 1):
            acc += a.coeffs[i] * out[k - i]
        out[k] = -acc / a[0]
    return TruncatedSeries(out)


def series_derivative(a: TruncatedSeries, order: int) -> TruncatedSeries:
    out = np.zeros(order + 1)
    n = min(a.order, order + 1)
    for k in range(1, n + 1):
        if k - 1 <= order:
            out[k - 1] = k * a[k]
    return TruncatedSeries(out)


# ---------------------------------------------------------------------------
# domain geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainProfile:
    """Geometry data of the narrow domain: h(x) = M - c(x)*x**m on [-l1, l2].

    c is a polynomial given by its coefficient list; the all-zero list is
    accepted as the degenerate rectangle geometry h == M used in tests and
    verification runs.
    """

    M: float
    m: int
    c_coeffs: tuple = field(default=(0.0,))
    l1: float = 1.0
    l2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c_coeffs", tuple(float(c) for c in self.c_coeffs))
        if self.M <= 0:
            raise GeometryError("maximum height M must be positive")
        if self.m < 2 or self.m % 2 != 0:
            raise GeometryError("flatness order m must be an even integer >= 2")
        if self.l1 <= 0 or self.l2 <= 0:
            raise GeometryError("interval endpoints l1, l2 must be positive")
        if any(c != 0.0 for c in self.c_coeffs) and self.c_coeffs[0] == 0.0:
            raise GeometryError("c(0) must be nonzero unless c vanishes identically")
        xs = np.linspace(-self.l1, self.l2, 4097)
        hs = self.h(xs)
        if np.any(hs <= 0.0):
            bad = xs[int(np.argmin(hs))]
            raise GeometryError(
                "height h(x) is nonpositive at x = %.6g (h = %.6g)"
                % (bad, float(np.min(hs)))
            )

    # -- scalar constants of the stretched problem --
    @property
    def c0(self) -> float:
        return self.c_coeffs[0]

    @property
    def is_rectangle(self) -> bool:
        return all(c == 0.0 for c in self.c_coeffs)

    @property
    def a0(self) -> float:
        return np.pi**2 / self.M**2

    @property
    def a1(self) -> float:
        return self.c0 / self.M

    @property
    def a_const(self) -> float:
        """Constant multiplying the subleading y**(nm-2) terms for constant c."""
        return KAPPA * self.m**2 * self.c0**2 / np.pi**2

    @property
    def alpha1(self) -> float:
        return 2.0 / (self.m + 2)

    @property
    def alpha(self) -> float:
        return self.m * self.alpha1

    # -- pointwise geometry --
    def c_value(self, x):
        return np.polynomial.polynomial.polyval(x, self.c_coeffs)

    def c_prime(self, x):
        d = np.polynomial.polynomial.polyder(self.c_coeffs)
        return np.polynomial.polynomial.polyval(x, d) if d.size else 0.0 * np.asarray(x)

    def c_second(self, x):
        d = np.polynomial.polynomial.polyder(self.c_coeffs, 2)
        return np.polynomial.polynomial.polyval(x, d) if d.size else 0.0 * np.asarray(x)

    def h(self, x):
        x = np.asarray(x, dtype=float)
        return self.M - self.c_value(x) * x**self.m

    def h_prime(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.c_prime(x) * x**self.m + self.m * self.c_value(x) * x ** (self.m - 1))

    def h_second(self, x):
        x = np.asarray(x, dtype=float)
        m = self.m
        return -(
            self.c_second(x) * x**m
            + 2 * m * self.c_prime(x) * x ** (m - 1)
            + m * (m - 1) * self.c_value(x) * x ** (m - 2)
        )


# ---------------------------------------------------------------------------
# polynomial potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolynomialPotential:
    """Finitely supported polynomial in y, stored degree -> coefficient."""

    coeffs: dict

    def __post_init__(self):
        cleaned = {int(d): float(c) for d, c in self.coeffs.items() if c != 0.0}
        object.__setattr__(self, "coeffs", cleaned)

    @property
    def degree(self) -> int:
        return max(self.coeffs) if self.coeffs else -1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for d, c in self.coeffs.items():
            out += c * y**d
        return out

    def leading(self):
        """(degree, coefficient) of the top term, or (-1, 0.0) for zero."""
        if self.is_zero:
            return -1, 0.0
        d = self.degree
        return d, self.coeffs[d]

    def scaled(self, factor: float) -> "PolynomialPotential":
        return PolynomialPotential({d: c * factor for d, c in self.coeffs.items()})


def oscillator_potential(profile: DomainProfile) -> PolynomialPotential:
    """Potential part of the stretched-limit oscillator, 2*a0*a1*y**m."""
    lead = 2.0 * profile.a0 * profile.a1
    return PolynomialPotential({profile.m: lead} if lead != 0.0 else {})


def build_perturbation_terms(profile: DomainProfile, N: int):
    """Perturbation potentials H_1..H_N of the stretched operator.

    Returns (H0, [H_1, ..., H_N]) where H0 is the oscillator potential and
    H_n collects every contribution at grading eps**(n*alpha1):

    * the expansion of the transverse energy pi^2/(eps*h)^2 contributes
      (s+2)*a0*alpha_{k,s} at degree n+m for each split k + s*m = n (s >= 0,
      with alpha_{k,s} the x**k coefficient of (c/M)**(s+1), so s = 0 yields
      the 2*a0*c_n/M term);
    * the bending energy kappa*(h'/h)^2 contributes, for each split with
      s >= 2, sum_{i+j=k} beta_{i,s} * (A1(s) d_j + A2(s) f_{j-1} + A3(s) g_{j-2})
      at degree n-2, with d, f, g the coefficients of c^2, c*c', c'^2,
      beta_{i,s} those of (c/M)**(s-2), and
      A1 = kappa*(m^2/pi^2)*(s-1)*a0, A2 = 2m*kappa*(s-1)/M^2,
      A3 = kappa*(s-1)/M^2.

    The degree of every nonzero H_n is exactly n+m when its leading
    coefficient survives, and the bending family always sits at degree n-2.
    """
    if N < 0:
        raise ParameterError("expansion order N must be nonnegative")
    m, M, a0 = profile.m, profile.M, profile.a0
    order = N
    c = TruncatedSeries.from_list(profile.c_coeffs, order)
    d = series_mul(c, c, order)
    cp = series_derivative(c, order)
    f = series_mul(c, cp, order)
    g = series_mul(cp, cp, order)
    c_over_M = TruncatedSeries(c.coeffs / M)

    smax = N // m
    alpha_fams = {s: series_pow(c_over_M, s + 1, order) for s in range(0, smax + 1)}
    beta_fams = {}
    for s in range(2, smax + 1):
        beta_fams[s] = series_pow(c_over_M, s - 2, order)

    terms = []
    for n in range(1, N + 1):
        poly = {}
        lead = 0.0
        for s in range(0, n // m + 1):
            k = n - s * m
            lead += (s + 2) * a0 * alpha_fams[s][k]
        if lead != 0.0:
            poly[n + m] = lead
        low = 0.0
        for s in range(2, n // m + 1):
            k = n - s * m
            beta = beta_fams[s]
            A1 = KAPPA * (m**2 / np.pi**2) * (s - 1) * a0
            A2 = (2.0 * m / M**2) * KAPPA * (s - 1)
            A3 = KAPPA * (s - 1) / M**2
            for i in range(k + 1):
                j = k - i
                low += beta[i] * (A1 * d[j] + A2 * f[j - 1] + A3 * g[j - 2])
        if low != 0.0 and n - 2 >= 0:
            poly[n - 2] = poly.get(n - 2, 0.0) + low
        terms.append(PolynomialPotential(poly))
    return oscillator_potential(profile), terms


def build_perturbation_terms_constant(profile: DomainProfile, N: int):
    """Closed-form potentials for constant c, graded in eps**(n*alpha).

    H_n = (n+2)*a0*a1^(n+1)*y^(nm+m) + (n-1)*a*a0*a1^(n-2)*y^(nm-2);
    the second term drops out at n = 1.
    """
    if any(c != 0.0 for c in profile.c_coeffs[1:]):
        raise ParameterError("constant-c closed form requires a constant profile")
    a0, a1, a = profile.a0, profile.a1, profile.a_const
    m = profile.m
    terms = []
    for n in range(1, N + 1):
        poly = {n * m + m: (n + 2) * a0 * a1 ** (n + 1)}
        if n >= 2:
            poly[n * m - 2] = poly.get(n * m - 2, 0.0) + (n - 1) * a * a0 * a1 ** (n - 2)
        terms.append(PolynomialPotential(poly))
    return oscillator_potential(profile), terms
