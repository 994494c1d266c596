"""Truncated Fock-basis representation of one continuous-variable mode.

Quadrature operators, probe preparation, Hermitian-generator evolution and
moment evaluation, all on a finite number basis of dimension d.  Every value
is immutable after construction and every operation is a pure function, so
concurrent use needs no coordination.

Truncation caveats: on the truncated basis [X, P] = i(I - d |d-1><d-1|), and
the top ~m rows/columns of P^m are corrupted, so callers must keep the
occupied subspace away from the boundary.  `converge_dimension` doubles d
until the requested scalar settles and reports non-convergence explicitly.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import (
    ContractViolationError,
    InvalidDimensionError,
    NonConvergenceError,
    TruncationLeakageError,
)

HERMITICITY_TOL = 1e-12
UNITARITY_TOL = 1e-10
NORM_TOL = 1e-10
IMAG_MOMENT_TOL = 1e-10
LEAKAGE_TOL = 1e-10


@dataclass(frozen=True)
class FockDim:
    """Fock truncation dimension, d levels |0> .. |d-1>."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise InvalidDimensionError(f"Fock dimension must be a positive integer, got {self.d!r}")


def as_dim(dim: FockDim | int) -> FockDim:
    return dim if isinstance(dim, FockDim) else FockDim(int(dim))


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Operator:
    """Dense complex operator on the truncated mode, with verified flags.

    `hermitian` / `unitary` are claims checked at construction time; code
    downstream relies on the flags, never on re-inspection.
    """

    dim: FockDim
    mat: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        d = self.dim.d
        if mat.shape != (d, d):
            raise ContractViolationError(f"operator shape {mat.shape} does not match dim {d}")
        if self.hermitian and np.abs(mat - mat.conj().T).max() > HERMITICITY_TOL:
            raise ContractViolationError("hermitian flag claimed but max |A - A^dag| exceeds 1e-12")
        if self.unitary:
            defect = np.abs(mat.conj().T @ mat - np.eye(d)).max()
            if defect > UNITARITY_TOL:
                raise ContractViolationError(f"unitary flag claimed but |A^dag A - I| = {defect:.3e}")
        object.__setattr__(self, "mat", _frozen(mat))

    @property
    def d(self) -> int:
        return self.dim.d


@dataclass(frozen=True)
class CvState:
    """Normalized pure state of one mode, amplitudes in the number basis."""

    dim: FockDim
    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=complex).reshape(-1)
        if vec.shape != (self.dim.d,):
            raise ContractViolationError(f"state length {vec.shape} does not match dim {self.dim.d}")
        nrm = np.linalg.norm(vec)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ContractViolationError(f"state norm {nrm!r} deviates from 1 beyond 1e-10")
        object.__setattr__(self, "vec", _frozen(vec))

    @property
    def d(self) -> int:
        return self.dim.d

    def overlap(self, other: "CvState") -> complex:
        return complex(np.vdot(self.vec, other.vec))

    def fidelity(self, other: "CvState") -> float:
        """|<self|other>|, global phase quotiented out."""
        return abs(self.overlap(other))

    def occupation(self) -> np.ndarray:
        return np.abs(self.vec) ** 2

    def boundary_mass(self, guard: int) -> float:
        """Occupation in the top `guard` levels next to the truncation edge."""
        return float(self.occupation()[self.d - guard:].sum())


@dataclass(frozen=True)
class ProbeSpec:
    """Initial probe |phi> for the coded channels.

    Kinds: vacuum, fock(n), coherent(alpha), squeezed_vacuum(r).  The large-N
    comparisons downstream assume N >> theta1 <P>, which the default vacuum
    meets trivially (<P> = 0).
    """

    kind: str = "vacuum"
    n: int = 0
    alpha: complex = 0j
    r: float = 0.0

    KINDS = ("vacuum", "fock", "coherent", "squeezed_vacuum")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractViolationError(f"unknown probe kind {self.kind!r}")

    @classmethod
    def vacuum(cls) -> "ProbeSpec":
        return cls("vacuum")

    @classmethod
    def fock(cls, n: int) -> "ProbeSpec":
        return cls("fock", n=int(n))

    @classmethod
    def coherent(cls, alpha: complex) -> "ProbeSpec":
        return cls("coherent", alpha=complex(alpha))

    @classmethod
    def squeezed_vacuum(cls, r: float) -> "ProbeSpec":
        return cls("squeezed_vacuum", r=float(r))


def lowering(dim: FockDim | int) -> np.ndarray:
    """Annihilation operator a with a|n> = sqrt(n)|n-1>."""
    d = as_dim(dim).d
    return np.diag(np.sqrt(np.arange(1.0, d)), 1).astype(complex)


def build_quadrature(dim: FockDim | int, which: str) -> Operator:
    """X = (a + a^dag)/sqrt(2) or P = i(a^dag - a)/sqrt(2), flagged hermitian."""
    dim = as_dim(dim)
    if dim.d < 2:
        raise InvalidDimensionError("quadrature operators need d >= 2")
    a = lowering(dim)
    if which == "X":
        mat = (a + a.conj().T) / math.sqrt(2)
    elif which == "P":
        mat = 1j * (a.conj().T - a) / math.sqrt(2)
    else:
        raise ContractViolationError(f"quadrature must be 'X' or 'P', got {which!r}")
    return Operator(dim, mat, hermitian=True)


def operator_power(op: Operator, m: int) -> Operator:
    """Repeated matrix product op^m; hermitian flag propagates from op."""
    if m < 0:
        raise ContractViolationError("operator power needs m >= 0")
    if m == 0:
        warnings.warn("operator_power with m = 0 yields the identity (degenerate Hamiltonian)")
        return Operator(op.dim, np.eye(op.d), hermitian=True, unitary=True)
    mat = op.mat
    for _ in range(m - 1):
        mat = mat @ op.mat
    return Operator(op.dim, mat, hermitian=op.hermitian)


def _coherent_amplitudes(alpha: complex, d: int) -> np.ndarray:
    amps = np.empty(d, dtype=complex)
    amps[0] = cmath.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, d):
        amps[k] = amps[k - 1] * alpha / math.sqrt(k)
    return amps


def _squeezed_amplitudes(r: float, d: int) -> np.ndarray:
    # S(r)|0> = (1/sqrt(cosh r)) sum_n (-tanh r)^n sqrt((2n)!)/(2^n n!) |2n>
    amps = np.zeros(d, dtype=complex)
    amps[0] = 1.0 / math.sqrt(math.cosh(r))
    t = -math.tanh(r)
    for n in range(1, (d - 1) // 2 + 1):
        # ratio c_{2n}/c_{2(n-1)} = t * sqrt((2n-1)/(2n))
        amps[2 * n] = amps[2 * (n - 1)] * t * math.sqrt((2 * n - 1) / (2 * n))
    return amps


def prepare_probe(spec: ProbeSpec, dim: FockDim | int) -> CvState:
    """Build the probe state at dimension d, renormalizing truncated tails.

    Raises TruncationLeakageError when the discarded tail mass exceeds 1e-10,
    so a too-small basis is an error rather than a silently wrong state.
    """
    dim = as_dim(dim)
    d = dim.d
    if spec.kind == "vacuum":
        vec = np.zeros(d, dtype=complex)
        vec[0] = 1.0
        return CvState(dim, vec)
    if spec.kind == "fock":
        if not 0 <= spec.n < d:
            raise TruncationLeakageError(f"fock level n={spec.n} outside basis of dimension {d}")
        vec = np.zeros(d, dtype=complex)
        vec[spec.n] = 1.0
        return CvState(dim, vec)
    if spec.kind == "coherent":
        amps = _coherent_amplitudes(spec.alpha, d)
        leakage = 1.0 - float((np.abs(amps) ** 2).sum())
        if leakage > LEAKAGE_TOL:
            raise TruncationLeakageError(
                f"coherent alpha={spec.alpha} leaks {leakage:.3e} past d={d} (limit 1e-10)")
        return CvState(dim, amps / np.linalg.norm(amps))
    if spec.kind == "squeezed_vacuum":
        amps = _squeezed_amplitudes(spec.r, d)
        leakage = 1.0 - float((np.abs(amps) ** 2).sum())
        if leakage > LEAKAGE_TOL:
            raise TruncationLeakageError(
                f"squeezed r={spec.r} leaks {leakage:.3e} past d={d} (limit 1e-10)")
        return CvState(dim, amps / np.linalg.norm(amps))
    raise ContractViolationError(f"unhandled probe kind {spec.kind!r}")


def propagator(generator: Operator, tau: float) -> Operator:
    """Unitary e^{-i tau H} through the eigendecomposition of Hermitian H.

    Eigendecomposition rather than a series: every generator in scope is
    Hermitian, and V f(w) V^dag is unitary by construction and independent of
    eigenvector phase conventions, keeping builder outputs smooth in tau.
    """
    if not generator.hermitian:
        raise ContractViolationError("evolution generator must carry a verified hermitian flag")
    if tau == 0:
        return Operator(generator.dim, np.eye(generator.d), hermitian=True, unitary=True)
    w, v = np.linalg.eigh(generator.mat)
    mat = (v * np.exp(-1j * tau * w)) @ v.conj().T
    return Operator(generator.dim, mat, unitary=True)


def apply_unitary(u: Operator, state):
    """Apply a verified unitary to a CvState, or blockwise to a QState."""
    if not u.unitary:
        raise ContractViolationError("apply_unitary needs a verified unitary flag")
    if hasattr(state, "control_dim"):  # strategies.QState, control-major blocks
        blocks = state.amplitudes.reshape(state.control_dim, -1)
        return replace(state, amplitudes=(blocks @ u.mat.T).reshape(-1))
    return replace(state, vec=u.mat @ state.vec)


def evolve(state, generator: Operator, tau: float):
    """e^{-i tau generator} applied to a CvState or QState (mode side)."""
    out = apply_unitary(propagator(generator, tau), state)
    return out


def moment(state, op: Operator, k: int = 1):
    """<state| op^k |state> by repeated matvec.

    For a hermitian operator the imaginary part must sit below 1e-10 and is
    discarded; anything larger is surfaced as a contract failure instead of
    silent numerical drift.
    """
    if k < 1:
        raise ContractViolationError("moment order k must be >= 1")
    vec = state.vec if hasattr(state, "vec") else np.asarray(state, dtype=complex)
    if vec.shape[0] != op.d:
        raise ContractViolationError("state and operator dimensions differ")
    work = vec
    for _ in range(k):
        work = op.mat @ work
    val = complex(np.vdot(vec, work))
    if op.hermitian:
        if abs(val.imag) > IMAG_MOMENT_TOL * max(1.0, abs(val.real)):
            raise ContractViolationError(
                f"imaginary part {val.imag:.3e} of a hermitian moment exceeds 1e-10")
        return val.real
    return val


def variance(state, op: Operator) -> float:
    m1 = moment(state, op, 1)
    m2 = moment(state, op, 2)
    if isinstance(m1, complex) or isinstance(m2, complex):
        raise ContractViolationError("variance is defined here for hermitian operators only")
    return m2 - m1 ** 2


DIM_START = 64
DIM_CAP = 1024
DIM_REL_TOL = 1e-6


@dataclass(frozen=True)
class DimensionScan:
    """Outcome of the dimension-doubling loop for one scalar target."""

    value: float
    dim_used: int
    converged: bool
    history: tuple = field(default_factory=tuple)  # ((d, value), ...)


def converge_dimension(evaluate: Callable[[int], float],
                       start: int = DIM_START,
                       cap: int = DIM_CAP,
                       rel_tol: float = DIM_REL_TOL,
                       raise_on_failure: bool = False) -> DimensionScan:
    """Double d from `start` until `evaluate(d)` moves by < rel_tol, cap at `cap`.

    Non-convergence is a first-class status (or NonConvergenceError when
    `raise_on_failure`), never a silently returned last value.
    """
    d = start
    prev = evaluate(d)
    history = [(d, prev)]
    while d < cap:
        d *= 2
        cur = evaluate(d)
        history.append((d, cur))
        if abs(cur - prev) <= rel_tol * max(abs(cur), abs(prev), 1e-300):
            return DimensionScan(cur, d, True, tuple(history))
        prev = cur
    if raise_on_failure:
        raise NonConvergenceError(
            f"dimension loop did not settle by d={cap}; history={history}")
    return DimensionScan(prev, d, False, tuple(history))
