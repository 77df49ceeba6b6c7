"""Limiting-absorption sweeps, delta kernels, smooth partial sums and
spectral-type diagnostics.

Finite sections have pure point spectrum, so a boundary-value statement only
makes sense through a double limit: for each regularisation eps the section
size K is grown until the weighted resolvent norm stabilises (relative change
below 1 percent across consecutive K), and only stabilised entries enter the
reported supremum.  Unstabilised entries are marked, never silently used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .core import (
    ComplexVector,
    ConjugateOp,
    NormEstimateDiverged,
    SpectralWindow,
    SupportCapExceeded,
    UnitaryOp,
    apply,
)

STABILIZE_RTOL = 1e-2
POWER_TOL = 1e-10
POWER_MAXIT = 5000


# ---------------------------------------------------------------------------
# delta kernel


def _qr_inverse(A: np.ndarray) -> np.ndarray:
    """Inverse via QR.  LAPACK's LU pivots complex entries by |re|+|im|,
    which suffers ~(1/|z|)^n element growth on shift-like resolvent systems;
    Householder QR has no growth."""
    Q, R = np.linalg.qr(A)
    return scipy.linalg.solve_triangular(R, Q.conj().T)


def delta_kernel(U: UnitaryOp, z: complex, K: Optional[int] = None,
                 factorization_tol: float = 1e-10) -> Tuple[np.ndarray, float]:
    """delta(U,z) = (1 - z U*)^{-1} - (1 - conj(z)^{-1} U*)^{-1}.

    Returns the kernel and the residual of the Gram factorization
    delta = (1-|z|^2)(1-zU*)^{-1}{(1-zU*)^{-1}}*, which certifies positivity
    for |z| < 1.  Rejects |z| in {0, 1}.
    """
    z = complex(z)
    if abs(z) < 1e-12:
        raise ValueError("z = 0 is excluded (the reflected point is at infinity)")
    if abs(abs(z) - 1.0) < 1e-12:
        raise ValueError("|z| = 1 is excluded")
    Um = U.matrix(K)
    n = Um.shape[0]
    Ustar = Um.conj().T
    # delta is antisymmetric under z -> conj(z)^{-1}; compute at the point
    # inside the disk, where both solves are contractions
    flip = abs(z) > 1.0
    w = 1.0 / np.conj(z) if flip else z
    R_in = _qr_inverse(np.eye(n) - w * Ustar)
    if U.unitarity_defect <= 1e-8 * n:
        # For unitary U, (1 - conj(w)^{-1} U*)^{-1} = -conj(w) U (1 - conj(w) U)^{-1},
        # avoiding the 1/(|z|-1) conditioning of the outer-point solve.
        R_out = -np.conj(w) * (Um @ _qr_inverse(np.eye(n) - np.conj(w) * Um))
    else:
        R_out = np.linalg.solve(np.eye(n) - Ustar / np.conj(w), np.eye(n))
    delta = R_in - R_out
    fact = (1.0 - abs(w) ** 2) * (R_in @ R_in.conj().T)
    resid = float(np.linalg.norm(delta - fact, 2))
    return (-delta if flip else delta), resid


def delta_kernel_entry_lattice(U: UnitaryOp, z: complex, k: int = 0,
                               tol: float = 1e-16) -> complex:
    """<e_k, delta(U,z) e_k> by the exact geometric expansion on the lattice.

    Uses the Gram factorization: the value equals
    (1-|z|^2) || (1 - conj(z) U)^{-1} e_k ||^2 with the resolvent expanded as
    sum_n conj(z)^n U^n e_k, truncated once |z|^n falls below tol.
    """
    z = complex(z)
    if not (0 < abs(z) < 1):
        raise ValueError("lattice expansion needs 0 < |z| < 1")
    nmax = int(np.ceil(np.log(tol) / np.log(abs(z)))) + 1
    term = ComplexVector.delta(k)
    acc = term
    for n in range(1, nmax + 1):
        term = U.realization.apply(term)
        scaled = ComplexVector(np.conj(z) ** n * term.entries, term.index_offset)
        acc = acc.sub(ComplexVector(-scaled.entries, scaled.index_offset))
    return complex((1.0 - abs(z) ** 2) * acc.norm() ** 2)


# ---------------------------------------------------------------------------
# weighted resolvent machinery


class _ResolventApplier:
    """Matvec closures for R(z) = -(1-conj(th)U) [(i+z) - conj(th)(z-i) U]^{-1}
    on a section of size 2K+1, without forming the dense inverse.

    Lattice realizations use banded LU solves; dense ones use a prefactored
    LU.  For Im z < 0 on a lattice section the triangular system selects the
    exponentially growing solution branch (the inverse of the section is not
    the section of the inverse), so the lower half-plane is realised through
    the adjoint: R(z) := R(conj z)^H, which is the identity the self-adjoint
    limit object satisfies anyway.
    """

    def __init__(self, U: UnitaryOp, theta: complex, z: complex, K: int):
        self.theta = complex(theta)
        self.flip = (complex(z).imag < 0.0) and U.is_lattice
        self.z = np.conj(complex(z)) if self.flip else complex(z)
        z = self.z
        self.K = K
        n = 2 * K + 1
        self.n = n
        if U.is_lattice:
            bands = U.realization.bands
            nl = max(0, max(bands))       # lower bandwidth (row - col > 0)
            nu = max(0, -min(bands))
            ks = np.arange(-K, K + 1)
            # diagonal-ordered storage: a[i, j] lives at ab[nu + i - j, j]
            ab = np.zeros((nl + nu + 1, n), dtype=complex)
            ab[nu, :] = (1j + self.z)
            for d, fn in bands.items():
                coeffs = -np.conj(self.theta) * (self.z - 1j) * fn(ks)
                cols = np.arange(n)
                valid = (cols + d >= 0) & (cols + d < n)
                ab[nu + d, cols[valid]] += coeffs[cols[valid]]
            self._ab = ab
            self._l_and_u = (nl, nu)
            self._bands = {d: fn(ks) for d, fn in bands.items()}
            self._dense = None
        else:
            Um = U.matrix(K)
            if Um.shape[0] != n:
                raise ValueError("dense section size does not match K")
            M = (1j + self.z) * np.eye(n) - np.conj(self.theta) * (self.z - 1j) * Um
            self._lu = scipy.linalg.lu_factor(M)
            self._dense = Um
            self._ab = None

    def _u_matvec(self, v: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ v
        out = np.zeros_like(v)
        for d, coeffs in self._bands.items():
            if d >= 0:
                out[d:] += coeffs[:self.n - d] * v[:self.n - d]
            else:
                out[:d] += coeffs[-d:] * v[-d:]
        return out

    def _u_rmatvec(self, v: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense.conj().T @ v
        out = np.zeros_like(v)
        for d, coeffs in self._bands.items():
            if d >= 0:
                out[:self.n - d] += np.conj(coeffs[:self.n - d]) * v[d:]
            else:
                out[-d:] += np.conj(coeffs[-d:]) * v[:d]
        return out

    def _solve(self, v: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return scipy.linalg.lu_solve(self._lu, v)
        return scipy.linalg.solve_banded(self._l_and_u, self._ab, v)

    def _r(self, v: np.ndarray) -> np.ndarray:
        x = self._solve(v)
        return -(x - np.conj(self.theta) * self._u_matvec(x))

    def _rh(self, v: np.ndarray) -> np.ndarray:
        t = v - self.theta * self._u_rmatvec(v)
        return -_hermitian_solve(self, t)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the effective R(z) (adjoint realization for Im z < 0)."""
        return self._rh(v) if self.flip else self._r(v)

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        return self._r(v) if self.flip else self._rh(v)


def _weighted_resolvent_norm(U: UnitaryOp, A: ConjugateOp, theta: complex,
                             z: complex, K: int, s: float,
                             one_sided: bool = False) -> float:
    """||W R(z) W|| (or ||W R(z)|| when one_sided) via svds-free power
    iteration with explicit matvec and adjoint-matvec closures."""
    app = _ResolventApplier(U, theta, z, K)
    n = app.n
    ks = np.arange(-K, K + 1)
    if A.is_diagonal:
        w = (1.0 + A.realization(ks) ** 2) ** (-s / 2.0)
    else:
        Wm = A.weight_matrix(s)
        w = None
        if Wm.shape[0] != n:
            raise ValueError("dense weight does not match the section")

    theta_c = np.conj(complex(theta))

    def Xmat(v):
        t = (w * v) if w is not None else (Wm @ v)
        t = app.matvec(t)
        return (w * t) if (w is not None and not one_sided) else (t if one_sided else Wm @ t)

    def Xh(v):
        t = (w * v) if (w is not None and not one_sided) else (v if one_sided else Wm @ v)
        t = app.rmatvec(t)
        return (w * t) if w is not None else (Wm @ t)

    v = np.ones(n, dtype=complex) / np.sqrt(n)
    est = 0.0
    for it in range(POWER_MAXIT):
        u1 = Xmat(v)
        v1 = Xh(u1)
        nn = np.linalg.norm(v1)
        if nn == 0.0:
            return 0.0
        v = v1 / nn
        new_est = float(np.sqrt(nn))
        if it > 1 and abs(new_est - est) <= POWER_TOL * max(new_est, 1e-300):
            return new_est
        est = new_est
    raise NormEstimateDiverged(
        f"weighted resolvent norm power iteration stalled at {est:.6e}", est)


def _hermitian_solve(app: _ResolventApplier, v: np.ndarray) -> np.ndarray:
    """Solve M^H x = v for the applier's system matrix M."""
    if app._dense is not None:
        return scipy.linalg.lu_solve(app._lu, v, trans=2)
    nl, nu = app._l_and_u
    n = app.n
    abh = np.zeros((nu + nl + 1, n), dtype=complex)
    for d_idx in range(app._ab.shape[0]):
        d = d_idx - nu          # band offset (row - col) of M
        src = app._ab[d_idx]    # indexed by the column of M
        # M^H entry (c, r) = conj(M[r, c]) with c = r - d: band -d of M^H,
        # stored at abh[nl - d, r] (upper count of M^H is nl)
        rs = np.arange(n)
        cs = rs - d
        valid = (cs >= 0) & (cs < n)
        abh[nl - d, rs[valid]] = np.conj(src[cs[valid]])
    return scipy.linalg.solve_banded((nu, nl), abh, v)


@dataclass
class LapSweep:
    theta: complex
    s: float
    lambda_grid: np.ndarray
    eps_grid: np.ndarray
    K_schedule: Sequence[int]
    norms: Dict[Tuple[float, float], float] = field(default_factory=dict)
    norms_by_K: Dict[Tuple[float, float], list] = field(default_factory=dict)
    stabilized: Dict[Tuple[float, float], bool] = field(default_factory=dict)
    youpie: Dict[Tuple[float, float], float] = field(default_factory=dict)
    sup_bound: float = 0.0

    def rows(self):
        for (lam, eps), nv in sorted(self.norms.items()):
            yield {"lambda": lam, "eps": eps,
                   "K": self.K_schedule[len(self.norms_by_K[(lam, eps)]) - 1],
                   "norm": nv, "stabilized": self.stabilized[(lam, eps)],
                   "eps_norm2": self.youpie[(lam, eps)]}


def lap_sweep(U: UnitaryOp, A: ConjugateOp, theta: complex,
              lambda_grid: Sequence[float], s: float,
              eps_grid: Sequence[float], K_schedule: Sequence[int]) -> LapSweep:
    """Double-limit sweep of ||<A>^{-s} (H_theta - lambda - i eps)^{-1} <A>^{-s}||.

    For each (lambda, eps), K is grown through the schedule until two
    consecutive norms agree to 1 percent; only stabilised entries enter
    sup_bound.  The imaginary-part quantity eps * ||<A>^{-s} R||^2 is
    recorded alongside.
    """
    if s <= 0.5:
        raise ValueError("weight exponent s must exceed 1/2")
    eps_grid = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    sweep = LapSweep(theta=complex(theta), s=s, lambda_grid=lambda_grid,
                     eps_grid=eps_grid, K_schedule=list(K_schedule))
    sup_bound = 0.0
    for lam in lambda_grid:
        for eps in eps_grid:
            z = lam + 1j * eps
            history = []
            stab = False
            for K in K_schedule:
                nv = _weighted_resolvent_norm(U, A, theta, z, K, s)
                history.append(nv)
                if len(history) >= 2:
                    prev = history[-2]
                    if abs(nv - prev) <= STABILIZE_RTOL * max(abs(nv), 1e-300):
                        stab = True
                        break
            key = (float(lam), float(eps))
            sweep.norms[key] = history[-1]
            sweep.norms_by_K[key] = history
            sweep.stabilized[key] = stab
            Klast = sweep.K_schedule[len(history) - 1]
            one_sided = _weighted_resolvent_norm(U, A, theta, z, Klast, s,
                                                 one_sided=True)
            sweep.youpie[key] = float(eps * one_sided ** 2)
            if stab:
                sup_bound = max(sup_bound, history[-1])
    sweep.sup_bound = sup_bound
    return sweep


def lap_slope(sweep: LapSweep, lam: float, decade: float = 10.0) -> float:
    """Fitted d log(norm) / d log(eps) over the smallest stabilised decade."""
    pts = [(eps, sweep.norms[(lam, eps)]) for (l, eps) in sweep.norms
           if l == lam and sweep.stabilized[(l, eps)]]
    if len(pts) < 2:
        return float("nan")
    pts.sort()
    eps_min = pts[0][0]
    window = [(e, nv) for e, nv in pts if e <= eps_min * decade * (1 + 1e-9)]
    if len(window) < 2:
        window = pts[:2]
    le = np.log([e for e, _ in window])
    ln = np.log([nv for _, nv in window])
    return float(np.polyfit(le, ln, 1)[0])


# ---------------------------------------------------------------------------
# smooth partial sums


@dataclass
class SmoothnessReport:
    B_label: str
    window: Optional[SpectralWindow]
    N_schedule: Sequence[int]
    partial_sums: np.ndarray
    tail_decrements: np.ndarray
    dyadic_tails: Dict[int, float]
    provenance: str = "lattice"


def smooth_sum(U: UnitaryOp, A: ConjugateOp, s: float, phi: ComplexVector,
               N_schedule: Sequence[int], window: Optional[SpectralWindow] = None,
               K: Optional[int] = None,
               support_cap: int = 1 << 20) -> SmoothnessReport:
    """Partial sums sum_{|n| <= N} ||<A>^{-s} U^n E phi||^2.

    Lattice-exact iteration is used when the support growth permits; on
    overflow (or for dense realizations and windowed sums) the computation
    falls back to a dense section with a provenance note.
    """
    if s <= 0.5:
        raise ValueError("weight exponent s must exceed 1/2")
    N_schedule = sorted(int(N) for N in N_schedule)
    Nmax = N_schedule[-1]
    use_lattice = U.is_lattice and A.is_diagonal and window is None
    provenance = "lattice"
    weights_fn = None
    if A.is_diagonal:
        weights_fn = lambda ks: (1.0 + A.realization(ks) ** 2) ** (-s)

    contributions = np.zeros(2 * Nmax + 1)  # index n + Nmax

    if use_lattice:
        try:
            fwd = phi
            bwd = phi
            adj = U.realization.adjoint()
            ks = np.arange(phi.index_offset, phi.index_offset + len(phi.entries))
            contributions[Nmax] = float(np.sum(weights_fn(ks) * np.abs(phi.entries) ** 2))
            for n in range(1, Nmax + 1):
                fwd = U.realization.apply(fwd, support_cap)
                bwd = adj.apply(bwd, support_cap)
                for sign, vec in ((1, fwd), (-1, bwd)):
                    ks = np.arange(vec.index_offset, vec.index_offset + len(vec.entries))
                    contributions[Nmax + sign * n] = float(
                        np.sum(weights_fn(ks) * np.abs(vec.entries) ** 2))
        except SupportCapExceeded:
            use_lattice = False
            provenance = "dense fallback (lattice support cap exceeded)"
    if not use_lattice:
        if provenance == "lattice":
            provenance = "dense"
        Um = U.matrix(K)
        n_dim = Um.shape[0]
        Wm = A.weight_span(s, n_dim)
        if window is not None:
            from .core import spectral_projection
            E = spectral_projection(U, window, method="diagonalize", K=K).matrix
        else:
            E = np.eye(n_dim)
        base = E @ phi.to_dense_span(n_dim, -(n_dim // 2))
        fwd = base.copy()
        bwd = base.copy()
        contributions[Nmax] = float(np.linalg.norm(Wm @ base) ** 2)
        for n in range(1, Nmax + 1):
            fwd = Um @ fwd
            bwd = Um.conj().T @ bwd
            contributions[Nmax + n] = float(np.linalg.norm(Wm @ fwd) ** 2)
            contributions[Nmax - n] = float(np.linalg.norm(Wm @ bwd) ** 2)

    partial = []
    for N in N_schedule:
        sl = contributions[Nmax - N:Nmax + N + 1]
        partial.append(float(sl.sum()))
    partial = np.array(partial)
    decr = np.diff(partial)
    dyadic = {}
    kmax = int(np.floor(np.log2(Nmax))) if Nmax >= 1 else 0
    for kk in range(2, kmax):
        lo, hi = 2 ** kk, min(2 ** (kk + 1), Nmax + 1)
        if lo >= hi:
            continue
        mask = np.zeros_like(contributions, dtype=bool)
        mask[Nmax + lo:Nmax + hi] = True
        mask[Nmax - hi + 1:Nmax - lo + 1] = True
        dyadic[kk] = float(contributions[mask].sum())
    return SmoothnessReport(
        B_label=f"<A>^-{s}", window=window, N_schedule=N_schedule,
        partial_sums=partial, tail_decrements=decr, dyadic_tails=dyadic,
        provenance=provenance)


def smooth_sup_disk(U: UnitaryOp, A: ConjugateOp, s: float,
                    probes: Sequence[ComplexVector],
                    z_grid: Sequence[complex],
                    window: Optional[SpectralWindow] = None,
                    K: Optional[int] = None) -> dict:
    """sup over the z-grid and probe set of |<phi, B delta(U,z) E B phi>|,
    B = <A>^{-s}.  The grid must keep 1e-3 away from the unit circle."""
    z_grid = [complex(z) for z in z_grid]
    for z in z_grid:
        if abs(abs(z) - 1.0) < 1e-3:
            raise ValueError(f"z = {z} is within 1e-3 of the unit circle")
    Um = U.matrix(K)
    n = Um.shape[0]
    Wm = A.weight_span(s, n)
    if window is not None:
        from .core import spectral_projection
        E = spectral_projection(U, window, method="diagonalize", K=K).matrix
    else:
        E = np.eye(n)
    rows = []
    sup = 0.0
    for z in z_grid:
        delta, _ = delta_kernel(UnitaryOp.dense_section(Um), z)
        op = Wm @ delta @ E @ Wm
        for i, phi in enumerate(probes):
            v = phi.to_dense_span(n, -(n // 2))
            nv = np.linalg.norm(v)
            if nv == 0:
                val = 0.0
            else:
                v = v / nv
                val = abs(complex(np.vdot(v, op @ v)))
            rows.append({"z_re": z.real, "z_im": z.imag, "probe": i, "value": val})
            sup = max(sup, val)
    return {"sup": sup, "rows": rows}


# ---------------------------------------------------------------------------
# Wiener-type diagnostics


def autocorrelation_sequence(U: UnitaryOp, phi: ComplexVector, N: int,
                             support_cap: int = 1 << 22,
                             K: Optional[int] = None) -> np.ndarray:
    """c_n = <phi, U^n phi> for n = 0..N by direct power iteration."""
    out = np.zeros(N + 1, dtype=complex)
    if U.is_lattice:
        cur = phi
        out[0] = phi.inner(phi)
        for n in range(1, N + 1):
            cur = U.realization.apply(cur, support_cap)
            out[n] = phi.inner(cur)
        return out
    Um = U.matrix(K)
    nd = Um.shape[0]
    base = phi.to_dense_span(nd, -(nd // 2))
    cur = base.copy()
    out[0] = np.vdot(base, base)
    for n in range(1, N + 1):
        cur = Um @ cur
        out[n] = np.vdot(base, cur)
    return out


def wiener_diagnostic(coeffs: np.ndarray, fit_range: Optional[Tuple[int, int]] = None,
                      point_mass_threshold: float = 1e-3) -> dict:
    """Cesaro mass and decay fit of an autocorrelation sequence.

    Interpretation table (heuristics, thresholds are knobs, not conclusions):

    * ``cesaro`` = (1/N) sum |c_n|^2 estimates the sum of fourth powers of
      the point-mass weights in the probe's cyclic subspace; below the
      threshold it is read as "no detectable point part", 1 means a pure
      eigenvector probe.
    * ``coeff_decay_fit`` is the log-log slope of |c_n| on a dyadic grid
      (entries below 1e-14 dropped): summable-square decay is consistent
      with an absolutely continuous component, no decay with a singular one.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    N = len(coeffs) - 1
    absc2 = np.abs(coeffs[1:]) ** 2
    cums = np.cumsum(absc2)
    cesaro_full = float(cums[-1] / N) if N else float("nan")
    Ns = 2 ** np.arange(2, int(np.log2(N)) + 1) if N >= 4 else np.array([N])
    cesaro_dyadic = {int(NN): float(cums[NN - 1] / NN) for NN in Ns}
    lo, hi = fit_range if fit_range else (1, N)
    ns, vals = [], []
    k = max(lo, 1)
    while k <= hi:
        if abs(coeffs[k]) > 1e-14:
            ns.append(k)
            vals.append(abs(coeffs[k]))
        k *= 2
    fit = float("nan")
    if len(ns) >= 3:
        fit = float(np.polyfit(np.log(ns), np.log(vals), 1)[0])
    slope = float("nan")
    if len(cesaro_dyadic) >= 3:
        kk = np.array(sorted(cesaro_dyadic))
        vv = np.array([cesaro_dyadic[int(x)] for x in kk])
        good = vv > 0
        if good.sum() >= 3:
            slope = float(np.polyfit(np.log(kk[good]), np.log(vv[good]), 1)[0])
    return {
        "N": N,
        "cesaro": cesaro_full,
        "cesaro_dyadic": cesaro_dyadic,
        "cesaro_slope": slope,
        "coeff_decay_fit": fit,
        "mass_estimate": float(cums[-1]) if N else float("nan"),
        "point_mass_threshold": point_mass_threshold,
        "interpretation": ("no detectable point part"
                           if cesaro_full < point_mass_threshold
                           else "point mass detected"),
    }
