"""Operator substrate: lattice-banded and dense realizations, commutators,
conjugations, norms, and spectral projections.

Two realizations coexist on purpose.  Banded lattice operators act exactly on
finitely supported sequences and compose exactly at the band level, so closed
form commutators survive with no truncation error.  Dense sections on the
index window [-K..K] (open boundary, no wrap) are used whenever an
eigendecomposition or a resolvent is needed.  Boundary-sensitive quantities
are only asserted on an interior margin; products of sections are never
trusted near the edge.

All operator values are immutable after construction, so any operation may
run concurrently on shared operators; parameter sweeps are embarrassingly
parallel and merge by key.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
import scipy.linalg


class SupportCapExceeded(Exception):
    """Lattice application would grow a vector past the configured support cap."""


class NormEstimateDiverged(Exception):
    """Power iteration did not settle; carries the last Rayleigh estimate."""

    def __init__(self, message: str, last_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate


class RealizationMismatch(Exception):
    """Operation requested on incompatible operator realizations."""


DEFAULT_SUPPORT_CAP = 1 << 22
NORM_REL_TOL = 1e-8
NORM_MAX_ITER = 20000
UNITARITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# vectors


@dataclass
class ComplexVector:
    """Finitely supported sequence on the integer lattice.

    ``entries[i]`` sits at lattice index ``index_offset + i``.
    """

    entries: np.ndarray
    index_offset: int = 0

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)

    @classmethod
    def delta(cls, k: int) -> "ComplexVector":
        return cls(np.array([1.0 + 0j]), index_offset=k)

    @property
    def support(self) -> range:
        return range(self.index_offset, self.index_offset + len(self.entries))

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def inner(self, other: "ComplexVector") -> complex:
        lo = max(self.index_offset, other.index_offset)
        hi = min(self.index_offset + len(self.entries),
                 other.index_offset + len(other.entries))
        if hi <= lo:
            return 0.0 + 0j
        a = self.entries[lo - self.index_offset:hi - self.index_offset]
        b = other.entries[lo - other.index_offset:hi - other.index_offset]
        return complex(np.vdot(a, b))

    def sub(self, other: "ComplexVector") -> "ComplexVector":
        lo = min(self.index_offset, other.index_offset)
        hi = max(self.index_offset + len(self.entries),
                 other.index_offset + len(other.entries))
        out = np.zeros(hi - lo, dtype=complex)
        out[self.index_offset - lo:self.index_offset - lo + len(self.entries)] = self.entries
        sl = other.index_offset - lo
        out[sl:sl + len(other.entries)] -= other.entries
        return ComplexVector(out, lo)

    def to_dense(self, K: int) -> np.ndarray:
        """Coefficients on [-K..K]; entries outside are dropped."""
        return self.to_dense_span(2 * K + 1, -K)

    def to_dense_span(self, n: int, offset: int) -> np.ndarray:
        """Coefficients on [offset, offset + n); entries outside are dropped."""
        out = np.zeros(n, dtype=complex)
        for i, k in enumerate(self.support):
            j = k - offset
            if 0 <= j < n:
                out[j] = self.entries[i]
        return out

    def trim(self, tol: float = 0.0) -> "ComplexVector":
        mask = np.abs(self.entries) > tol
        if not mask.any():
            return ComplexVector(np.zeros(1, dtype=complex), self.index_offset)
        i0 = int(np.argmax(mask))
        i1 = len(mask) - int(np.argmax(mask[::-1]))
        return ComplexVector(self.entries[i0:i1], self.index_offset + i0)


BandFn = Callable[[np.ndarray], np.ndarray]


def _as_band_fn(c) -> BandFn:
    if callable(c):
        return c
    val = complex(c)
    return lambda k, val=val: np.full(np.shape(k), val, dtype=complex)


# ---------------------------------------------------------------------------
# banded lattice operators


class LatticeBanded:
    """Banded operator on l2(Z): ``(S phi)_{k+d} += c_d(k) phi_k``.

    ``bands`` maps the offset ``d`` to a coefficient function of the column
    index ``k`` (vectorised over int arrays).  Application to a finitely
    supported vector is exact.  Heavy band algebra (products, adjoints,
    orbit averages) goes through :class:`BandWindow`, which materialises
    coefficients on an explicit index window.
    """

    def __init__(self, bands: Dict[int, Union[complex, BandFn]]):
        self.bands: Dict[int, BandFn] = {int(d): _as_band_fn(c) for d, c in bands.items()}

    @property
    def band_width(self) -> int:
        if not self.bands:
            return 0
        return max(abs(d) for d in self.bands)

    def apply(self, v: ComplexVector, support_cap: int = DEFAULT_SUPPORT_CAP) -> ComplexVector:
        if not self.bands:
            return ComplexVector(np.zeros(1, dtype=complex), v.index_offset)
        dmin = min(self.bands)
        dmax = max(self.bands)
        n = len(v.entries)
        if n + (dmax - dmin) > support_cap:
            raise SupportCapExceeded(
                f"application would need support {n + dmax - dmin} > cap {support_cap}; "
                "truncation needed")
        out = np.zeros(n + (dmax - dmin), dtype=complex)
        ks = np.arange(v.index_offset, v.index_offset + n)
        for d, fn in self.bands.items():
            sl = d - dmin
            out[sl:sl + n] += fn(ks) * v.entries
        return ComplexVector(out, v.index_offset + dmin)

    def adjoint(self) -> "LatticeBanded":
        out: Dict[int, BandFn] = {}
        for d, fn in self.bands.items():
            out[-d] = (lambda k, fn=fn, d=d: np.conj(fn(np.asarray(k) - d)))
        return LatticeBanded(out)

    def conjugate_by_diagonal_phase(self, t: float, diag: BandFn) -> "LatticeBanded":
        """e^{-itD} S e^{itD} for D = diag(a); exact band phases."""
        out: Dict[int, BandFn] = {}
        for d, fn in self.bands.items():
            out[d] = (lambda k, fn=fn, d=d, t=t:
                      np.exp(-1j * t * (diag(np.asarray(k) + d) - diag(np.asarray(k)))) * fn(k))
        return LatticeBanded(out)

    def commutator_with_diagonal(self, diag: BandFn) -> "LatticeBanded":
        """[D, S] with D = diag(a): band d picks up the weight a(k+d) - a(k)."""
        out: Dict[int, BandFn] = {}
        for d, fn in self.bands.items():
            out[d] = (lambda k, fn=fn, d=d:
                      (diag(np.asarray(k) + d) - diag(np.asarray(k))) * fn(k))
        return LatticeBanded(out)

    def window(self, kmin: int, kmax: int) -> "BandWindow":
        return BandWindow.from_lattice(self, kmin, kmax)

    def section(self, K: int) -> np.ndarray:
        """Dense matrix on [-K..K], open boundary (out-of-range rows dropped)."""
        return self.window(-K, K).section(K)

    def wrap_section(self, K: int, twist: float = 0.0) -> np.ndarray:
        """Periodic completion on [-K..K]: offsets wrap mod 2K+1, picking up
        the phase e^{i twist} per wrap.  Used only as an exactly unitary
        stand-in for algebraic identity checks, never for spectral sweeps.
        """
        n = 2 * K + 1
        out = np.zeros((n, n), dtype=complex)
        ks = np.arange(-K, K + 1)
        for d, fn in self.bands.items():
            coeffs = fn(ks)
            for i in range(n):
                j = i + d
                wraps, jm = divmod(j, n)
                out[jm, i] += coeffs[i] * np.exp(1j * twist * wraps)
        return out


class BandWindow:
    """Array-backed banded operator on an explicit column window.

    ``bands[d][i]`` is the coefficient c_d(kmin + i), i.e. the matrix entry
    at (row kmin+i+d, column kmin+i).  Products, adjoints and sums shrink the
    window conservatively so every retained coefficient is exact for the
    infinite operator; a final :meth:`section` materialises rows and columns
    in [-K..K] only when the window still covers them.
    """

    def __init__(self, bands: Dict[int, np.ndarray], kmin: int, kmax: int):
        if kmin > kmax:
            raise ValueError(f"empty band window [{kmin}, {kmax}]")
        width = kmax - kmin + 1
        self.bands = {}
        for d, arr in bands.items():
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (width,):
                raise ValueError(f"band {d}: expected {width} coefficients, got {arr.shape}")
            self.bands[int(d)] = arr
        self.kmin = int(kmin)
        self.kmax = int(kmax)

    @classmethod
    def from_lattice(cls, op: LatticeBanded, kmin: int, kmax: int) -> "BandWindow":
        ks = np.arange(kmin, kmax + 1)
        return cls({d: np.asarray(fn(ks), dtype=complex) for d, fn in op.bands.items()},
                   kmin, kmax)

    @classmethod
    def diagonal(cls, values: BandFn, kmin: int, kmax: int) -> "BandWindow":
        ks = np.arange(kmin, kmax + 1)
        return cls({0: np.asarray(values(ks), dtype=complex)}, kmin, kmax)

    @property
    def band_width(self) -> int:
        if not self.bands:
            return 0
        return max(abs(d) for d in self.bands)

    def _coeffs(self, d: int, ks: np.ndarray) -> np.ndarray:
        return self.bands[d][ks - self.kmin]

    def compose(self, other: "BandWindow") -> "BandWindow":
        """self @ other, on the largest window where both factors are known."""
        if not self.bands or not other.bands:
            return BandWindow({}, other.kmin, other.kmax)
        d2min = min(other.bands)
        d2max = max(other.bands)
        kmin = max(other.kmin, self.kmin - d2min)
        kmax = min(other.kmax, self.kmax - d2max)
        if kmin > kmax:
            raise ValueError("band windows too small to compose; enlarge the padding")
        ks = np.arange(kmin, kmax + 1)
        out: Dict[int, np.ndarray] = {}
        for d2, arr2 in other.bands.items():
            a2 = arr2[ks - other.kmin]
            for d1, arr1 in self.bands.items():
                a1 = arr1[ks + d2 - self.kmin]
                d = d1 + d2
                if d in out:
                    out[d] = out[d] + a1 * a2
                else:
                    out[d] = a1 * a2
        return BandWindow(out, kmin, kmax)

    def adjoint(self) -> "BandWindow":
        if not self.bands:
            return BandWindow({}, self.kmin, self.kmax)
        dmin = min(self.bands)
        dmax = max(self.bands)
        kmin = self.kmin + dmax
        kmax = self.kmax + dmin
        if kmin > kmax:
            raise ValueError("band window too small to take the adjoint")
        ks = np.arange(kmin, kmax + 1)
        out = {-d: np.conj(arr[(ks - d) - self.kmin]) for d, arr in self.bands.items()}
        return BandWindow(out, kmin, kmax)

    def add(self, other: "BandWindow", sign: complex = 1.0) -> "BandWindow":
        kmin = max(self.kmin, other.kmin)
        kmax = min(self.kmax, other.kmax)
        if kmin > kmax:
            raise ValueError("band windows do not overlap")
        ks = np.arange(kmin, kmax + 1)
        out: Dict[int, np.ndarray] = {}
        for d, arr in self.bands.items():
            out[d] = arr[ks - self.kmin].copy()
        for d, arr in other.bands.items():
            piece = sign * arr[ks - other.kmin]
            out[d] = out[d] + piece if d in out else piece
        return BandWindow(out, kmin, kmax)

    def scale(self, c: complex) -> "BandWindow":
        return BandWindow({d: c * arr for d, arr in self.bands.items()},
                          self.kmin, self.kmax)

    def section(self, K: int) -> np.ndarray:
        if self.kmin > -K or self.kmax < K:
            raise ValueError(
                f"window [{self.kmin}, {self.kmax}] does not cover the section [-{K}, {K}]; "
                "the band algebra consumed too much padding")
        n = 2 * K + 1
        out = np.zeros((n, n), dtype=complex)
        for d, arr in self.bands.items():
            col_lo = max(-K, -K - d)
            col_hi = min(K, K - d)
            if col_lo > col_hi:
                continue
            cols = np.arange(col_lo, col_hi + 1)
            vals = arr[cols - self.kmin]
            out[cols + d + K, cols + K] = vals
        return out


# ---------------------------------------------------------------------------
# operator wrappers


@dataclass
class UnitaryOp:
    """A unitary operator, realised either as exact lattice bands or as a
    dense matrix on a finite section.

    Dense construction checks ||U*U - 1|| <= unitarity_tol * n unless the
    matrix is declared a ``section`` of an infinite operator, in which case
    the defect (a boundary artifact) is only recorded.
    """

    realization: Union[LatticeBanded, np.ndarray]
    label: str = ""
    is_section: bool = False
    unitarity_defect: float = 0.0
    index_offset: int = 0

    @classmethod
    def dense(cls, matrix: np.ndarray, label: str = "",
              unitarity_tol: float = UNITARITY_TOL) -> "UnitaryOp":
        m = np.asarray(matrix, dtype=complex)
        n = m.shape[0]
        defect = float(np.linalg.norm(m.conj().T @ m - np.eye(n), 2))
        if defect > unitarity_tol * n:
            raise ValueError(f"matrix is not unitary: ||U*U - 1|| = {defect:.3e} "
                             f"> {unitarity_tol * n:.3e}")
        return cls(m, label=label, unitarity_defect=defect, index_offset=-(n // 2))

    @classmethod
    def dense_section(cls, matrix: np.ndarray, label: str = "") -> "UnitaryOp":
        m = np.asarray(matrix, dtype=complex)
        n = m.shape[0]
        defect = float(np.linalg.norm(m.conj().T @ m - np.eye(n), 2))
        return cls(m, label=label, is_section=True, unitarity_defect=defect,
                   index_offset=-(n // 2))

    @classmethod
    def lattice(cls, bands: Dict[int, Union[complex, BandFn]], label: str = "") -> "UnitaryOp":
        return cls(LatticeBanded(bands), label=label)

    @property
    def is_lattice(self) -> bool:
        return isinstance(self.realization, LatticeBanded)

    def matrix(self, K: Optional[int] = None) -> np.ndarray:
        if self.is_lattice:
            if K is None:
                raise RealizationMismatch("lattice operator needs a section size K")
            return self.realization.section(K)
        return self.realization


@dataclass
class ConjugateOp:
    """Self-adjoint conjugate operator: real diagonal on the lattice or a
    dense Hermitian matrix.  ``domain_weight`` w(k) = <a(k)> = sqrt(1+a(k)^2)
    encodes D(A)-membership strength for the weighted-space diagnostics.
    """

    realization: Union[BandFn, np.ndarray]
    label: str = ""
    _eigh_cache: Optional[tuple] = field(default=None, repr=False, compare=False)

    @classmethod
    def diagonal(cls, values: Union[Callable, np.ndarray], label: str = "") -> "ConjugateOp":
        if callable(values):
            fn = lambda k, f=values: np.asarray(f(k), dtype=float)
        else:
            arr = np.asarray(values, dtype=float)
            K = (len(arr) - 1) // 2
            fn = lambda k, a=arr, K=K: a[np.asarray(k) + K]
        return cls(fn, label=label)

    @classmethod
    def hermitian(cls, matrix: np.ndarray, label: str = "",
                  tol: float = 1e-12) -> "ConjugateOp":
        m = np.asarray(matrix, dtype=complex)
        asym = np.linalg.norm(m - m.conj().T, 2)
        scale = max(np.linalg.norm(m, 2), 1.0)
        if asym > tol * scale:
            raise ValueError(f"matrix is not Hermitian: ||A - A*|| = {asym:.3e}")
        return cls(0.5 * (m + m.conj().T), label=label)

    @property
    def is_diagonal(self) -> bool:
        return callable(self.realization)

    def diag_values(self, K: int) -> np.ndarray:
        if not self.is_diagonal:
            raise RealizationMismatch("not a diagonal conjugate operator")
        return self.realization(np.arange(-K, K + 1))

    def matrix(self, K: Optional[int] = None) -> np.ndarray:
        if self.is_diagonal:
            if K is None:
                raise RealizationMismatch("diagonal conjugate operator needs K")
            return np.diag(self.diag_values(K).astype(complex))
        return self.realization

    def matrix_span(self, n: int, offset: Optional[int] = None) -> np.ndarray:
        """Section matching a dense operator of size n (offset -(n//2))."""
        if self.is_diagonal:
            offset = -(n // 2) if offset is None else offset
            ks = np.arange(offset, offset + n)
            return np.diag(self.realization(ks).astype(complex))
        if self.realization.shape[0] != n:
            raise RealizationMismatch(
                f"dense conjugate operator has size {self.realization.shape[0]}, "
                f"expected {n}")
        return self.realization

    def eigh(self):
        if self.is_diagonal:
            raise RealizationMismatch("eigh cache is for dense realizations")
        if self._eigh_cache is None:
            object.__setattr__(self, "_eigh_cache", np.linalg.eigh(self.realization))
        return self._eigh_cache

    def domain_weight(self, k: np.ndarray) -> np.ndarray:
        if not self.is_diagonal:
            raise RealizationMismatch("domain_weight needs a diagonal realization")
        a = self.realization(k)
        return np.sqrt(1.0 + a * a)

    def weight_matrix(self, s: float, K: Optional[int] = None) -> np.ndarray:
        """<A>^{-s} as a dense matrix (diagonal fast path, eigh otherwise)."""
        if self.is_diagonal:
            if K is None:
                raise RealizationMismatch("diagonal conjugate operator needs K")
            a = self.diag_values(K)
            return np.diag((1.0 + a * a) ** (-s / 2.0)).astype(complex)
        w, V = self.eigh()
        return (V * (1.0 + w * w) ** (-s / 2.0)) @ V.conj().T

    def weight_span(self, s: float, n: int, offset: Optional[int] = None) -> np.ndarray:
        if self.is_diagonal:
            offset = -(n // 2) if offset is None else offset
            a = self.realization(np.arange(offset, offset + n))
            return np.diag((1.0 + a * a) ** (-s / 2.0)).astype(complex)
        if self.realization.shape[0] != n:
            raise RealizationMismatch("dense weight does not match the section size")
        return self.weight_matrix(s)


@dataclass(frozen=True)
class SpectralWindow:
    """Open arc of the unit circle given by an angle interval (radians).

    The arc is (angle_lo, angle_hi) traversed counterclockwise; it must be a
    proper sub-arc, and an optional excluded base point must lie outside its
    closure.
    """

    angle_lo: float
    angle_hi: float
    base_point_excluded: Optional[float] = None

    def __post_init__(self):
        width = self.angle_hi - self.angle_lo
        if not (0.0 < width < 2.0 * np.pi):
            raise ValueError(f"arc width {width} must lie in (0, 2*pi)")
        if self.base_point_excluded is not None:
            if self.contains(np.array([self.base_point_excluded]), closed=True)[0]:
                raise ValueError("excluded base point lies inside the closed arc")

    @property
    def width(self) -> float:
        return self.angle_hi - self.angle_lo

    def contains(self, angles, closed: bool = False) -> np.ndarray:
        rel = np.mod(np.asarray(angles, dtype=float) - self.angle_lo, 2.0 * np.pi)
        if closed:
            return (rel <= self.width) | (rel >= 2.0 * np.pi)
        return (rel > 0) & (rel < self.width)

    def indicator_fourier(self, l: int) -> complex:
        """Fourier coefficient of the arc indicator: (1/2pi) int_arc e^{-il t} dt."""
        if l == 0:
            return self.width / (2.0 * np.pi)
        return complex(
            (np.exp(-1j * l * self.angle_lo) - np.exp(-1j * l * self.angle_hi))
            / (2j * np.pi * l))

    def boundary_distance(self, angles) -> np.ndarray:
        def dist(a, b):
            return np.abs(np.mod(np.asarray(a) - b + np.pi, 2 * np.pi) - np.pi)
        return np.minimum(dist(angles, self.angle_lo), dist(angles, self.angle_hi))


# ---------------------------------------------------------------------------
# operations


def apply(op: Union[UnitaryOp, ConjugateOp], v: ComplexVector,
          support_cap: int = DEFAULT_SUPPORT_CAP) -> ComplexVector:
    """Exact linear action.  Lattice realizations grow the support by at most
    the band width; exceeding the cap raises instead of clipping."""
    if isinstance(op, UnitaryOp):
        if op.is_lattice:
            return op.realization.apply(v, support_cap)
        return _dense_apply(op.realization, op.index_offset, v)
    if isinstance(op, ConjugateOp):
        if op.is_diagonal:
            ks = np.arange(v.index_offset, v.index_offset + len(v.entries))
            return ComplexVector(op.realization(ks) * v.entries, v.index_offset)
        return _dense_apply(op.realization, -(op.realization.shape[0] // 2), v)
    raise RealizationMismatch(f"cannot apply object of type {type(op)!r}")


def _dense_apply(m: np.ndarray, offset: int, v: ComplexVector) -> ComplexVector:
    n = m.shape[0]
    dense = np.zeros(n, dtype=complex)
    for i, k in enumerate(v.support):
        j = k - offset
        if not (0 <= j < n):
            raise RealizationMismatch(
                f"vector support index {k} outside the dense section")
        dense[j] = v.entries[i]
    return ComplexVector(m @ dense, offset)


def commutator(A: ConjugateOp, S: Union[UnitaryOp, np.ndarray],
               K: Optional[int] = None) -> np.ndarray:
    """[A, S] = AS - SA on a common section.

    For a diagonal A and a lattice S the bands are weighted exactly and the
    *result* is sectioned, so no boundary defect enters.
    """
    if isinstance(S, UnitaryOp) and S.is_lattice and A.is_diagonal:
        if K is None:
            raise RealizationMismatch("lattice commutator needs a section size K")
        return S.realization.commutator_with_diagonal(A.realization).section(K)
    Sm = S.matrix(K) if isinstance(S, UnitaryOp) else np.asarray(S, dtype=complex)
    Am = A.matrix_span(Sm.shape[0])
    if Am.shape != Sm.shape:
        raise RealizationMismatch(
            f"incompatible sections: A is {Am.shape}, S is {Sm.shape}")
    return Am @ Sm - Sm @ Am


def commutator_banded(A: ConjugateOp, S: UnitaryOp) -> LatticeBanded:
    if not (S.is_lattice and A.is_diagonal):
        raise RealizationMismatch("band-level commutator needs lattice S and diagonal A")
    return S.realization.commutator_with_diagonal(A.realization)


def heisenberg_conjugate(A: ConjugateOp, S: Union[UnitaryOp, np.ndarray], t: float,
                         K: Optional[int] = None) -> np.ndarray:
    """e^{-itA} S e^{itA} on a section.  |t| <= 1 per contract; the phases are
    exact for a diagonal A, eigh-based otherwise."""
    if abs(t) > 1.0:
        raise ValueError(f"|t| = {abs(t)} exceeds the contract bound 1")
    if t == 0.0:
        return S.matrix(K) if isinstance(S, UnitaryOp) else np.asarray(S, dtype=complex)
    if isinstance(S, UnitaryOp) and S.is_lattice and A.is_diagonal:
        if K is None:
            raise RealizationMismatch("lattice conjugation needs a section size K")
        return S.realization.conjugate_by_diagonal_phase(t, A.realization).section(K)
    Sm = S.matrix(K) if isinstance(S, UnitaryOp) else np.asarray(S, dtype=complex)
    n = Sm.shape[0]
    if A.is_diagonal:
        a = A.realization(np.arange(-(n // 2), -(n // 2) + n))
        ph = np.exp(-1j * t * a)
        return (ph[:, None] * Sm) * np.conj(ph)[None, :]
    w, V = A.eigh()
    if not np.all(np.isfinite(w)):
        raise NormEstimateDiverged("eigendecomposition of A failed", float("nan"))
    E = (V * np.exp(-1j * t * w)) @ V.conj().T
    return E @ Sm @ E.conj().T


def heisenberg_conjugate_banded(A: ConjugateOp, S: UnitaryOp, t: float) -> LatticeBanded:
    if not (S.is_lattice and A.is_diagonal):
        raise RealizationMismatch("band-level conjugation needs lattice S and diagonal A")
    return S.realization.conjugate_by_diagonal_phase(t, A.realization)


def operator_norm(m, rel_tol: float = NORM_REL_TOL, max_iter: int = NORM_MAX_ITER) -> float:
    """Largest singular value via power iteration on S*S.

    Deterministic start (normalised all-ones).  Non-convergence raises with
    the last Rayleigh estimate attached.
    """
    if isinstance(m, UnitaryOp):
        if m.is_lattice:
            raise RealizationMismatch("lattice operator norm needs a section; "
                                      "use banded_section_norm")
        m = m.realization
    m = np.asarray(m, dtype=complex)
    n = m.shape[1]
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    est = 0.0
    for it in range(max_iter):
        w = m @ v
        sig = np.linalg.norm(w)
        if sig == 0.0:
            return 0.0
        v_new = m.conj().T @ w
        nn = np.linalg.norm(v_new)
        if nn == 0.0:
            return float(sig)
        v = v_new / nn
        new_est = float(np.sqrt(nn))
        if it > 0 and abs(new_est - est) <= rel_tol * max(new_est, 1e-300):
            return new_est
        est = new_est
    raise NormEstimateDiverged(
        f"power iteration did not converge in {max_iter} steps "
        f"(last estimate {est:.6e})", est)


def banded_section_norm(op: LatticeBanded, K: int, **kw) -> float:
    return operator_norm(op.section(K), **kw)


# ---------------------------------------------------------------------------
# spectral projections


@dataclass
class ProjectionResult:
    matrix: np.ndarray
    method: str
    rank: Optional[int] = None
    boundary_warnings: list = field(default_factory=list)
    smoothing_width: Optional[float] = None
    eigenvalues: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None


def eig_unitary(m: np.ndarray, normality_tol: float = 1e-8):
    """Orthonormal eigendecomposition of a (normal) unitary matrix via a
    complex Schur form.  Raises if the matrix is too far from normal."""
    T, Q = scipy.linalg.schur(np.asarray(m, dtype=complex), output="complex")
    off = np.linalg.norm(T - np.diag(np.diag(T)))
    if off > normality_tol * max(1.0, np.linalg.norm(np.diag(T))):
        raise RealizationMismatch(
            f"matrix is not normal enough for diagonalization (off-diag {off:.2e}); "
            "open-boundary sections of lattice models are not normal")
    return np.diag(T), Q


def spectral_projection(U: UnitaryOp, window: SpectralWindow, method: str = "diagonalize",
                        fejer_N: int = 32, K: Optional[int] = None,
                        guard_band: float = 1e-8) -> ProjectionResult:
    """Realise E^U(window) on a section.

    ``diagonalize`` gives the exact orthogonal projection onto eigenvectors
    with eigenvalue angle inside the arc (dense, normal realizations only).
    ``fejer`` gives a self-adjoint contraction: the Fejer-smoothed Fourier
    series of the arc indicator evaluated on U; it also works for lattice
    realizations, where powers of U are banded-exact.
    """
    if method == "diagonalize":
        m = U.matrix(K)
        vals, Q = eig_unitary(m)
        angles = np.angle(vals)
        mask = window.contains(angles)
        warnings = []
        near = window.boundary_distance(angles) < guard_band
        for idx in np.where(near)[0]:
            warnings.append(
                f"eigenvalue angle {angles[idx]:.6f} within guard band of the arc boundary")
        V = Q[:, mask]
        proj = V @ V.conj().T
        return ProjectionResult(proj, "diagonalize", rank=int(mask.sum()),
                                boundary_warnings=warnings,
                                eigenvalues=vals, basis=V)
    if method == "fejer":
        N = int(fejer_N)
        if N < 1:
            raise ValueError("fejer order must be >= 1")
        if U.is_lattice:
            if K is None:
                raise RealizationMismatch("fejer projection of a lattice operator needs K")
            bw = U.realization.band_width
            pad = (N + 1) * bw + 1
            Uw = U.realization.window(-K - pad, K + pad)
            acc = BandWindow.diagonal(
                lambda k: np.full(len(np.atleast_1d(k)), window.indicator_fourier(0)),
                -K - pad, K + pad)
            cur = Uw
            for l in range(1, N + 1):
                wgt = 1.0 - l / (N + 1.0)
                cl = window.indicator_fourier(l)
                acc = acc.add(cur.scale(wgt * cl))
                acc = acc.add(cur.adjoint().scale(wgt * np.conj(cl)))
                if l < N:
                    cur = cur.compose(Uw)
            mat = acc.section(K)
        else:
            m = U.matrix(K)
            n = m.shape[0]
            mat = window.indicator_fourier(0) * np.eye(n, dtype=complex)
            Ul = np.eye(n, dtype=complex)
            for l in range(1, N + 1):
                Ul = Ul @ m
                wgt = 1.0 - l / (N + 1.0)
                cl = window.indicator_fourier(l)
                mat += wgt * (cl * Ul + np.conj(cl) * Ul.conj().T)
        mat = 0.5 * (mat + mat.conj().T)
        return ProjectionResult(mat, "fejer", smoothing_width=2.0 * np.pi / (N + 1))
    raise ValueError(f"unknown projection method {method!r}")


def thresholded_window_basis(U: UnitaryOp, window: SpectralWindow, K: int,
                             fejer_N: int = 32, threshold: float = 0.5,
                             interior_margin: Optional[int] = None) -> np.ndarray:
    """Orthonormal basis of an interior window subspace for lattice models.

    The Fejer contraction is compressed to the interior block and its
    eigenvectors with eigenvalue >= threshold are kept.  This is the
    section-level surrogate for ran E^U(window) where open-boundary sections
    are not normal.
    """
    res = spectral_projection(U, window, method="fejer", fejer_N=fejer_N, K=K)
    n = 2 * K + 1
    if interior_margin is None:
        bw = U.realization.band_width if U.is_lattice else 1
        interior_margin = min(4 * bw, K // 4)
    sl = slice(interior_margin, n - interior_margin)
    block = res.matrix[sl, sl]
    w, V = np.linalg.eigh(block)
    keep = w >= threshold
    basis = np.zeros((n, int(keep.sum())), dtype=complex)
    basis[sl, :] = V[:, keep]
    return basis


def interior_slice(K: int, margin: int) -> slice:
    if margin >= K:
        raise ValueError(f"interior margin {margin} leaves no interior at K={K}")
    n = 2 * K + 1
    return slice(margin, n - margin)
