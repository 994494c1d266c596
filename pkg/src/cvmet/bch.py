"""Terminating operator-ordering expansion for the pair (X, P^m).

Everything here is exact symbolic algebra over polynomials in the momentum
quadrature P, with complex-rational coefficients: factorial ratios never see
floating point until a matrix is substituted.  The key facts used throughout:

  ad_X(P^k) = [X, P^k] = i k P^{k-1}        (canonical pair, [X, P] = i)

so repeated commutators with X only lower the degree, the reordering series
terminates at order m+1, and all coefficient operators are polynomials in P
that commute with each other and with P^m.

Two factorization variants are produced, differing in which factor is pulled
to the left:

  AB:  e^{l(X+P^m)} = e^{lX} e^{lP^m} e^{l^2 C_2} ... e^{l^{m+1} C_{m+1}}
  BA:  e^{l(X+P^m)} = e^{lP^m} e^{lX} e^{l^2 C'_2} ... e^{l^{m+1} C'_{m+1}}

with the exact relation C'_n = -(n-1) C_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping

import numpy as np

from .cvspace import FockDim, Operator, as_dim, build_quadrature, operator_power, propagator
from .errors import ContractViolationError, EnvelopeError


@dataclass(frozen=True)
class ExactComplex:
    """Complex number with exact rational real and imaginary parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, value) -> "ExactComplex":
        if isinstance(value, ExactComplex):
            return value
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        return cls(Fraction(value), Fraction(0))

    def __add__(self, other) -> "ExactComplex":
        o = ExactComplex.of(other)
        return ExactComplex(self.re + o.re, self.im + o.im)

    def __sub__(self, other) -> "ExactComplex":
        o = ExactComplex.of(other)
        return ExactComplex(self.re - o.re, self.im - o.im)

    def __mul__(self, other) -> "ExactComplex":
        o = ExactComplex.of(other)
        return ExactComplex(self.re * o.re - self.im * o.im,
                            self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __neg__(self) -> "ExactComplex":
        return ExactComplex(-self.re, -self.im)

    def __pow__(self, k: int) -> "ExactComplex":
        out = ExactComplex(Fraction(1))
        for _ in range(int(k)):
            out = out * self
        return out

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))


I_UNIT = ExactComplex(Fraction(0), Fraction(1))
MINUS_I = ExactComplex(Fraction(0), Fraction(-1))


@dataclass(frozen=True)
class PPoly:
    """Polynomial sum_k c_k P^k with exact coefficients, no zero terms stored."""

    coeffs: tuple  # ((power, ExactComplex), ...) sorted by power

    @classmethod
    def from_terms(cls, terms: Iterable[tuple]) -> "PPoly":
        acc: dict[int, ExactComplex] = {}
        for power, coeff in terms:
            c = ExactComplex.of(coeff)
            if power in acc:
                acc[power] = acc[power] + c
            else:
                acc[power] = c
        return cls(tuple(sorted((p, c) for p, c in acc.items() if not c.is_zero)))

    @classmethod
    def zero(cls) -> "PPoly":
        return cls(())

    @classmethod
    def monomial(cls, power: int, coeff=1) -> "PPoly":
        return cls.from_terms([(power, coeff)])

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        return self.coeffs[-1][0] if self.coeffs else -1

    def __add__(self, other: "PPoly") -> "PPoly":
        return PPoly.from_terms(list(self.coeffs) + list(other.coeffs))

    def __sub__(self, other: "PPoly") -> "PPoly":
        return self + other.scale(-1)

    def __mul__(self, other: "PPoly") -> "PPoly":
        terms = [(p1 + p2, c1 * c2) for p1, c1 in self.coeffs for p2, c2 in other.coeffs]
        return PPoly.from_terms(terms)

    def scale(self, factor) -> "PPoly":
        f = ExactComplex.of(factor)
        return PPoly.from_terms([(p, c * f) for p, c in self.coeffs])

    def as_complex_dict(self) -> Mapping[int, complex]:
        return {p: c.to_complex() for p, c in self.coeffs}

    def is_real(self, tol: float = 0.0) -> bool:
        return all(abs(float(c.im)) <= tol for _, c in self.coeffs)

    def to_matrix(self, quad_matrix: np.ndarray) -> np.ndarray:
        """Substitute a quadrature matrix for the symbol (Horner on matrices)."""
        d = quad_matrix.shape[0]
        out = np.zeros((d, d), dtype=complex)
        if self.is_zero:
            return out
        table = dict(self.coeffs)
        for power in range(self.degree, -1, -1):
            out = out @ quad_matrix
            c = table.get(power)
            if c is not None:
                out += c.to_complex() * np.eye(d)
        return out


def commutator_with_x(poly: PPoly) -> PPoly:
    """ad_X acting on a polynomial in P: c_k P^k -> i k c_k P^{k-1}."""
    return PPoly.from_terms(
        [(p - 1, c * I_UNIT * p) for p, c in poly.coeffs if p >= 1])


def nested_commutator_oracle(m: int, n: int) -> PPoly:
    """(-1)^{n-1} (1/n!) [X^{(n-1)}, P^m], built by iterating ad_X symbolically.

    n = 1 returns P^m itself (the zeroth nested commutator is the operator).
    This is the independent check for the closed-form coefficients below.
    """
    if m < 1 or n < 1:
        raise ContractViolationError("nested commutator oracle needs m >= 1, n >= 1")
    poly = PPoly.monomial(m)
    for _ in range(n - 1):
        poly = commutator_with_x(poly)
    sign = ExactComplex(Fraction((-1) ** (n - 1), factorial(n)))
    return poly.scale(sign)


def zassenhaus_term(m: int, n: int, variant: str = "AB") -> PPoly:
    """Closed-form coefficient operator of order n for the (X, P^m) pair.

    AB: (-i)^{n-1} m!/(n! (m-n+1)!) P^{m-n+1}; BA carries the extra -(n-1).
    Zero polynomial for n > m+1 (the expansion terminates).
    """
    if m < 1 or n < 2:
        raise ContractViolationError("expansion terms are defined for m >= 1, n >= 2")
    if variant not in ("AB", "BA"):
        raise ContractViolationError(f"variant must be 'AB' or 'BA', got {variant!r}")
    if n > m + 1:
        return PPoly.zero()
    coeff = (MINUS_I ** (n - 1)) * ExactComplex(
        Fraction(factorial(m), factorial(n) * factorial(m - n + 1)))
    if variant == "BA":
        coeff = coeff * ExactComplex(Fraction(-(n - 1)))
    return PPoly.monomial(m - n + 1, coeff)


@dataclass(frozen=True)
class ExpansionTable:
    """All non-vanishing coefficient operators for one (m, variant) pair."""

    m: int
    variant: str
    terms: tuple  # ((n, PPoly), ...) for n = 2 .. m+1

    @classmethod
    def build(cls, m: int, variant: str = "AB") -> "ExpansionTable":
        return cls(m, variant,
                   tuple((n, zassenhaus_term(m, n, variant)) for n in range(2, m + 2)))


def phase_derivative_generator(m: int, theta1: float, n_queries: int,
                               variant: str = "cs_branch") -> PPoly:
    """Hermitian generator g of the branch derivative in the second coupling.

    The branch state is (unitaries) e^{-i theta2 g} ... |phi> with every
    theta2-dependent factor a function of P, so d/d theta2 inserts -i g with

      cs_branch:     g = 2N P^m + i * sum_n (-2Ni)^n theta1^{n-1} C_n
      switch_branch: g = N  P^m + i * sum_n (-Ni)^n  theta1^{n-1} n C_n

    The i-factors cancel exactly, leaving real coefficients; for the switch
    the sum collapses to N (P - N theta1)^m.  theta1 is embedded exactly via
    Fraction, so the result stays in exact arithmetic.
    """
    if variant not in ("cs_branch", "switch_branch"):
        raise ContractViolationError(f"variant must be 'cs_branch' or 'switch_branch', got {variant!r}")
    t1 = ExactComplex(Fraction(theta1))
    n_q = int(n_queries)
    if variant == "cs_branch":
        lam = ExactComplex(Fraction(0), Fraction(-2 * n_q))  # -2Ni
        query_weight = 2 * n_q
        order_weight = lambda n: 1
    else:
        lam = ExactComplex(Fraction(0), Fraction(-n_q))      # -Ni
        query_weight = n_q
        order_weight = lambda n: n
    g = PPoly.monomial(m, query_weight)
    for n in range(2, m + 2):
        c_n = zassenhaus_term(m, n, "AB")
        w = (lam ** n) * (t1 ** (n - 1)) * ExactComplex(Fraction(order_weight(n)))
        g = g + c_n.scale(w * I_UNIT)
    if not g.is_real():
        raise ContractViolationError("derivative generator acquired imaginary coefficients")
    return g


FACTORIZATION_GUARD = 16
FACTORIZATION_MASS_TOL = 1e-14


@dataclass(frozen=True)
class FactorizationCheck:
    """Residual of the factorization identity on the envelope-safe columns."""

    residual: float
    columns_checked: int
    max_boundary_mass: float


def exp_antihermitian(mat: np.ndarray, dim: FockDim) -> np.ndarray:
    """e^{M} for verified anti-Hermitian M, via the Hermitian generator iM."""
    if np.abs(mat + mat.conj().T).max() > 1e-10:
        raise ContractViolationError("factorization exponent is not anti-Hermitian")
    if not mat.any():
        return np.eye(dim.d, dtype=complex)
    herm = Operator(dim, 1j * mat, hermitian=True)
    return propagator(herm, 1.0).mat


def verify_factorization(m: int, lambda_im: float, dim: FockDim | int,
                         variant: str = "AB",
                         guard: int = FACTORIZATION_GUARD,
                         mass_tol: float = FACTORIZATION_MASS_TOL,
                         detail: bool = False):
    """Max-element residual of the factorization at lambda = i*lambda_im.

    Both sides are built as d x d matrices.  Purely imaginary lambda keeps
    every factor unitary (real lambda exponentiates an unbounded X and
    explodes on a truncated basis; the identity is a formal power-series
    statement, so imaginary lambda tests the same coefficients).

    The truncated basis cannot represent columns whose image reaches the
    boundary, so the residual is taken over the columns for which every
    partial product keeps its top-`guard` occupation below `mass_tol`;
    if no column qualifies the envelope is violated and EnvelopeError
    carries the smallest offending mass.
    """
    dim = as_dim(dim)
    d = dim.d
    lam = 1j * float(lambda_im)
    x_op = build_quadrature(dim, "X")
    pm_op = operator_power(build_quadrature(dim, "P"), m)
    p_mat = build_quadrature(dim, "P").mat

    summed = Operator(dim, x_op.mat + pm_op.mat, hermitian=True)
    lhs = propagator(summed, -float(lambda_im)).mat  # e^{lam (X + P^m)}

    if variant == "AB":
        factors = [propagator(x_op, -float(lambda_im)).mat,
                   propagator(pm_op, -float(lambda_im)).mat]
    elif variant == "BA":
        factors = [propagator(pm_op, -float(lambda_im)).mat,
                   propagator(x_op, -float(lambda_im)).mat]
    else:
        raise ContractViolationError(f"variant must be 'AB' or 'BA', got {variant!r}")
    for n in range(2, m + 2):
        term = zassenhaus_term(m, n, variant)
        scaled = (lam ** n) * term.to_matrix(p_mat)
        factors.append(exp_antihermitian(scaled, dim))

    ok = np.ones(d, dtype=bool)
    worst = 0.0
    part = np.eye(d, dtype=complex)
    for f in reversed(factors):
        part = f @ part
        masses = (np.abs(part[d - guard:, :]) ** 2).sum(axis=0)
        ok &= masses < mass_tol
        worst = max(worst, float(masses.min()))
    lhs_mass = (np.abs(lhs[d - guard:, :]) ** 2).sum(axis=0)
    ok &= lhs_mass < mass_tol
    worst = max(worst, float(lhs_mass.min()))

    n_ok = int(ok.sum())
    if n_ok == 0:
        raise EnvelopeError(
            f"no column of d={d} stays inside the truncation envelope "
            f"(best boundary mass {worst:.3e} >= {mass_tol:g}); "
            "reduce |lambda| or enlarge d", offending_mass=worst)
    residual = float(np.abs(lhs[:, ok] - part[:, ok]).max())
    if detail:
        checked_masses = np.concatenate([
            (np.abs(lhs[d - guard:, ok]) ** 2).sum(axis=0),
            (np.abs(part[d - guard:, ok]) ** 2).sum(axis=0)])
        return FactorizationCheck(residual, n_ok, float(checked_masses.max()))
    return residual
