"""Cayley transform of a unitary operator and its structural identities.

The transform is represented resolvent-first: (H_theta - i)^{-1} equals
(i/2)(1 - conj(theta) U) for *any* matrix U, so that object is always
available and bounded.  The dense Hermitian H_theta itself is a derived
convenience that only exists when theta keeps a guard-band distance from the
section spectrum and the solve round-off stays below tolerance; otherwise a
resolvent-only object is returned and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import ConjugateOp, SpectralWindow, UnitaryOp, commutator

GUARD_BAND_ANGLE = 1e-6
CAYLEY_RELATION_TOL = 1e-8
ILL_CONDITIONED = 1e14


class MapsToInfinity(Exception):
    """The spectral parameter coincides with the Cayley base point."""


class SolveIllConditioned(Exception):
    def __init__(self, message: str, cond: float):
        super().__init__(message)
        self.cond = cond


def spectral_map(theta_prime: complex, theta: complex) -> float:
    """lambda = -i (1 + conj(theta) theta') / (1 - conj(theta) theta').

    Maps the unit circle minus {theta} to the real line, stereographically
    with origin theta.
    """
    w = np.conj(theta) * theta_prime
    if abs(1.0 - w) < 1e-15:
        raise MapsToInfinity(f"theta' = {theta_prime} maps to infinity (base point)")
    lam = -1j * (1.0 + w) / (1.0 - w)
    return float(lam.real)


def inverse_spectral_map(lam: float, theta: complex) -> complex:
    """theta' = theta (lambda + i) / (lambda - i); inverse of spectral_map."""
    return complex(theta * (lam + 1j) / (lam - 1j))


def mapped_interval(window: SpectralWindow, theta: complex) -> Tuple[float, float]:
    """Real interval {spectral_map(e^{i phi}, theta) : phi in arc}.

    Requires the base point outside the closed arc; the map is monotone
    decreasing in the angle measured from the base point.
    """
    phi_t = float(np.angle(theta))
    if window.contains(np.array([phi_t]), closed=True)[0]:
        raise ValueError("base point lies in the closed arc; image is unbounded")
    lo = spectral_map(np.exp(1j * window.angle_hi), theta)
    hi = spectral_map(np.exp(1j * window.angle_lo), theta)
    return (min(lo, hi), max(lo, hi))


@dataclass
class CayleyOperator:
    theta: complex
    resolvent_at_i: np.ndarray          # (i/2)(1 - conj(theta) U), exact
    dense_H: Optional[np.ndarray]       # Hermitian section, or None when refused
    asymmetry: float                    # ||H_raw - H_raw*|| before symmetrization
    cond: float                         # condition estimate of (1 - conj(theta) U)
    refused_reason: Optional[str] = None
    source_label: str = ""

    @property
    def has_dense(self) -> bool:
        return self.dense_H is not None


def build_cayley(U: UnitaryOp, theta: complex, K: Optional[int] = None,
                 guard_band: float = GUARD_BAND_ANGLE) -> CayleyOperator:
    """Cayley transform H = -i (1 + conj(theta) U)(1 - conj(theta) U)^{-1}.

    The dense Hermitian form is refused (resolvent-only result) when theta
    sits within the guard band of a near-unimodular section eigenvalue, or
    when the symmetrized solve fails the Cayley relation residual test.
    """
    theta = complex(theta)
    if abs(abs(theta) - 1.0) > 1e-12:
        raise ValueError("base point theta must be unimodular")
    Um = U.matrix(K)
    n = Um.shape[0]
    res_i = 0.5j * (np.eye(n) - np.conj(theta) * Um)
    eigs = np.linalg.eigvals(Um)
    near_circle = eigs[np.abs(np.abs(eigs) - 1.0) < 0.5]
    refused = None
    if near_circle.size:
        dist = np.abs(np.mod(np.angle(near_circle) - np.angle(theta) + np.pi,
                             2 * np.pi) - np.pi)
        if dist.min() < guard_band:
            refused = (f"theta within guard band {guard_band:g} of a section "
                       f"eigenvalue (angular distance {dist.min():.2e})")
    B = np.eye(n) - np.conj(theta) * Um
    cond = float(np.linalg.cond(B))
    dense_H = None
    asym = float("nan")
    if refused is None:
        H_raw = -1j * np.linalg.solve(B, np.eye(n) + np.conj(theta) * Um)
        asym = float(np.linalg.norm(H_raw - H_raw.conj().T, 2))
        H_sym = 0.5 * (H_raw + H_raw.conj().T)
        relation = np.linalg.norm(B @ H_sym + 1j * (np.eye(n) + np.conj(theta) * Um), 2)
        if relation <= CAYLEY_RELATION_TOL * n:
            dense_H = H_sym
        else:
            refused = (f"symmetrized section violates the Cayley relation "
                       f"(residual {relation:.2e} > {CAYLEY_RELATION_TOL * n:.2e}); "
                       "the section is too far from unitary at this base point")
    return CayleyOperator(theta=theta, resolvent_at_i=res_i, dense_H=dense_H,
                          asymmetry=asym, cond=cond, refused_reason=refused,
                          source_label=U.label)


def cayley_resolvent(U: UnitaryOp, theta: complex, z: complex,
                     K: Optional[int] = None,
                     dense_H: Optional[np.ndarray] = None) -> np.ndarray:
    """(H_theta - z)^{-1} = -(1 - conj(theta) U) [(i+z) - conj(theta)(z-i) U]^{-1}.

    A single well-posed solve: for Im z != 0 the bracket is c (1 - zeta U)
    with |zeta| != 1.  When a dense Hermitian section is supplied the residual
    ||(H - z) R - 1|| is verified against 1e-8.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("resolvent needs Im z != 0")
    theta = complex(theta)
    Um = U.matrix(K)
    n = Um.shape[0]
    M = (1j + z) * np.eye(n) - np.conj(theta) * (z - 1j) * Um
    cond = float(np.linalg.cond(M))
    if cond > ILL_CONDITIONED:
        raise SolveIllConditioned(
            f"resolvent solve condition estimate {cond:.3e} exceeds 1e14", cond)
    X = np.linalg.solve(M, np.eye(n) - np.conj(theta) * Um)
    R = -X
    if dense_H is not None:
        resid = np.linalg.norm((dense_H - z * np.eye(n)) @ R - np.eye(n), 2)
        if resid > 1e-8 * cond:
            raise SolveIllConditioned(
                f"resolvent residual {resid:.3e} too large (cond {cond:.3e})", cond)
    return R


def verify_identity_a(U: UnitaryOp, A: ConjugateOp, theta: complex,
                      K: Optional[int] = None) -> float:
    """Residual of [A, (H_theta - i)^{-1}] = -(i conj(theta)/2) [A, U].

    Exact linear algebra for any realization; the residual is round-off.
    """
    theta = complex(theta)
    Um = U.matrix(K)
    n = Um.shape[0]
    Am = A.matrix_span(n)
    res_i = 0.5j * (np.eye(n) - np.conj(theta) * Um)
    lhs = Am @ res_i - res_i @ Am
    rhs = -0.5j * np.conj(theta) * (Am @ Um - Um @ Am)
    return float(np.linalg.norm(lhs - rhs, 2))


def verify_identity_b(U: UnitaryOp, A: ConjugateOp, theta: complex,
                      K: Optional[int] = None) -> dict:
    """Residual of i[H_theta, A] = 2 {(1-conj(theta)U)^{-1}}* U*[A,U] (1-conj(theta)U)^{-1}.

    Needs the dense Hermitian section (the identity consumes U*U = 1, so it
    only holds on honestly unitary realizations).  Returns the residual and
    the solve condition number; the contract is residual <= 1e-8 * cond.
    """
    cay = build_cayley(U, theta, K)
    if not cay.has_dense:
        raise ValueError(f"dense Cayley section refused: {cay.refused_reason}")
    theta = complex(theta)
    Um = U.matrix(K)
    n = Um.shape[0]
    Am = A.matrix_span(n)
    H = cay.dense_H
    lhs = 1j * (H @ Am - Am @ H)
    B = np.eye(n) - np.conj(theta) * Um
    R = np.linalg.solve(B, np.eye(n))
    C = Am @ Um - Um @ Am
    rhs = 2.0 * R.conj().T @ (Um.conj().T @ C) @ R
    return {
        "residual": float(np.linalg.norm(lhs - rhs, 2)),
        "cond": cay.cond,
        "asymmetry": cay.asymmetry,
    }


def mourre_transfer(U: UnitaryOp, A: ConjugateOp, theta: complex,
                    interval: Tuple[float, float], a: float,
                    K: Optional[int] = None,
                    commutator_section: Optional[np.ndarray] = None) -> dict:
    """Transfer of a strict Mourre bound to the Cayley side.

    Given a certified commutator bound U*[A,U] >= a (supplied as the exact
    section ``commutator_section`` for lattice models, recomputed from the
    dense matrices otherwise), forms
        W = 2 {(1-conj(theta)U)^{-1}}* M (1-conj(theta)U)^{-1},
    the quadratic-form realization of [iH_theta, A], and checks
    min spec( E W E ) >= a/2 on the spectral window E = E^{H_theta}(interval).
    """
    cay = build_cayley(U, theta, K)
    if not cay.has_dense:
        raise ValueError(f"dense Cayley section refused: {cay.refused_reason}")
    theta = complex(theta)
    Um = U.matrix(K)
    n = Um.shape[0]
    if commutator_section is None:
        Am = A.matrix_span(n)
        C = Am @ Um - Um @ Am
        M = Um.conj().T @ C
    else:
        M = np.asarray(commutator_section, dtype=complex)
    B = np.eye(n) - np.conj(theta) * Um
    R = np.linalg.solve(B, np.eye(n))
    W = 2.0 * R.conj().T @ M @ R
    W = 0.5 * (W + W.conj().T)
    evals, V = np.linalg.eigh(cay.dense_H)
    lo, hi = interval
    sel = (evals >= lo) & (evals <= hi)
    if not sel.any():
        return {"lhs_min_eig": float("nan"), "bound": a / 2.0, "passed": True,
                "vacuous": True, "window_dim": 0}
    Vw = V[:, sel]
    Cw = Vw.conj().T @ W @ Vw
    Cw = 0.5 * (Cw + Cw.conj().T)
    min_eig = float(np.linalg.eigvalsh(Cw)[0])
    return {
        "lhs_min_eig": min_eig,
        "bound": a / 2.0,
        "passed": bool(min_eig >= a / 2.0 - 1e-8),
        "vacuous": False,
        "window_dim": int(sel.sum()),
    }


def projection_transport_residual(U: UnitaryOp, theta: complex,
                                  window: SpectralWindow,
                                  K: Optional[int] = None) -> float:
    """|| E^U(window) - E^{H_theta}(J) || with J the mapped interval.

    Both projections are computed on the same dense section; the identity is
    exact for normal unitary realizations.
    """
    from .core import spectral_projection

    EU = spectral_projection(U, window, method="diagonalize", K=K).matrix
    cay = build_cayley(U, theta, K)
    if not cay.has_dense:
        raise ValueError(f"dense Cayley section refused: {cay.refused_reason}")
    lo, hi = mapped_interval(window, theta)
    evals, V = np.linalg.eigh(cay.dense_H)
    sel = (evals > lo) & (evals < hi)
    EH = V[:, sel] @ V[:, sel].conj().T
    return float(np.linalg.norm(EU - EH, 2))
