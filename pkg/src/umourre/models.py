"""The four application models and the averaged-conjugate construction.

Each model ships with its closed-form commutator so every numerical path has
an exact oracle:

* bilateral shift with the number operator: U*[A,U] = 1;
* free evolution e^{-iT xi^2} in the momentum representation with the
  regularised dilation-type conjugate: U*[A,U] = 2T xi^2/(xi^2+1);
* multiplicative cocycle over an irrational rotation, conjugate P = -i d/dx
  (Fourier side: diag 2 pi k) and its orbit averages P_n;
* flow-induced shift in logarithmic coordinates (dilation instance), where
  U_t*[A,U_t] = 2t exactly in grid arithmetic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    BandWindow,
    ConjugateOp,
    LatticeBanded,
    UnitaryOp,
)

GHAT_GRID = 4096          # sampling grid for the cocycle symbol transform
BAND_THRESHOLD = 1e-15    # relative cutoff for retained Fourier bands
RATIONAL_DENOM_FLAG = 10**6


# ---------------------------------------------------------------------------
# bilateral shift


@dataclass
class ShiftModel:
    """(U phi)_n = phi_{n-1} with the number operator A = diag(n)."""

    U: UnitaryOp = field(default_factory=lambda: UnitaryOp.lattice({1: 1.0}, label="shift"))
    A: ConjugateOp = field(default_factory=lambda: ConjugateOp.diagonal(
        lambda k: np.asarray(k, dtype=float), label="number"))
    name: str = "shift"

    def dense_section(self, K: int) -> np.ndarray:
        return self.U.realization.section(K)

    def unitary_dense(self, K: int) -> UnitaryOp:
        """Twisted periodic completion (wrap phase -1): exactly unitary and
        free of an eigenvalue at 1, for algebraic identity checks."""
        m = self.U.realization.wrap_section(K, twist=np.pi)
        return UnitaryOp.dense(m, label="shift-wrap")


def build_shift() -> ShiftModel:
    return ShiftModel()


# ---------------------------------------------------------------------------
# free evolution


@dataclass
class FreeEvolutionModel:
    """Momentum-space section of e^{-iT P^2} with the conjugate
    A = (W Q + Q W)/2, W = P (P^2+1)^{-1}, Q = i * central difference."""

    T: float
    Xi: float
    M: int
    xi: np.ndarray
    dxi: float
    U: UnitaryOp
    A: ConjugateOp
    name: str = "free_evolution"

    @property
    def commutator_target(self) -> np.ndarray:
        return 2.0 * self.T * self.xi**2 / (self.xi**2 + 1.0)

    def commutator_matrix(self) -> np.ndarray:
        Um = self.U.realization
        Am = self.A.realization
        return Um.conj().T @ Am @ Um - Am

    def fidelity(self, margin: int = 4) -> dict:
        """Constant-probe (row-sum) residual of U*[A,U] against the target
        multiplication operator, interior rows only, relative to max|target|.

        The stencil is second order: the residual must drop ~4x when M
        doubles.  Matrix-norm comparison is meaningless here (the grid's
        Nyquist modes see the stencil with the opposite sign), so fidelity is
        defined on the resolved, smooth vectors which the model represents.
        """
        E = self.commutator_matrix() - np.diag(self.commutator_target)
        r = E @ np.ones(self.M)
        sl = slice(margin, self.M - margin)
        rel = float(np.abs(r[sl]).max() / np.abs(self.commutator_target).max())
        return {"rel_error": rel, "margin": margin, "M": self.M}

    def window_indices(self, angle_lo: float, angle_hi: float, margin: int = 4) -> np.ndarray:
        ang = np.angle(np.diag(self.U.realization))
        sel = (ang > angle_lo) & (ang < angle_hi)
        sel[:margin] = False
        sel[-margin:] = False
        return np.where(sel)[0]

    def smooth_window_basis(self, angle_lo: float, angle_hi: float,
                            margin: int = 4, mode_fraction: int = 8) -> np.ndarray:
        """Orthonormal smooth vectors spanning the resolved part of
        E^U(window): lowest discrete sine modes on each contiguous index
        block.  Rough (Nyquist-scale) vectors are excluded on purpose; they
        are grid artifacts the difference stencil cannot represent.
        """
        idx = self.window_indices(angle_lo, angle_hi, margin)
        if len(idx) == 0:
            return np.zeros((self.M, 0))
        blocks = np.split(idx, np.where(np.diff(idx) != 1)[0] + 1)
        cols = []
        for b in blocks:
            B = len(b)
            for q in range(1, max(1, B // mode_fraction) + 1):
                v = np.zeros(self.M)
                v[b] = np.sin(np.pi * q * np.arange(1, B + 1) / (B + 1))
                cols.append(v / np.linalg.norm(v))
        V, _ = np.linalg.qr(np.array(cols).T)
        return V


def build_free_evolution(T: float, Xi: float, M: int) -> FreeEvolutionModel:
    if T <= 0:
        raise ValueError("T must be positive")
    if M < 8:
        raise ValueError("M must be at least 8")
    xi = np.linspace(-Xi, Xi, M)
    dxi = xi[1] - xi[0]
    u = np.exp(-1j * T * xi**2)
    w = xi / (xi**2 + 1.0)
    sup = 1j * (w[:-1] + w[1:]) / (4.0 * dxi)   # A_{j,j+1} of (WQ+QW)/2
    A = np.diag(sup, 1) + np.diag(np.conj(sup), -1)
    return FreeEvolutionModel(
        T=T, Xi=Xi, M=M, xi=xi, dxi=dxi,
        U=UnitaryOp.dense(np.diag(u), label="free-evolution"),
        A=ConjugateOp.hermitian(A, label="yokoyama"))


# ---------------------------------------------------------------------------
# cocycle over an irrational rotation


def _hermitian_series(coeffs: Dict[int, complex], x: np.ndarray) -> np.ndarray:
    """Real trig series sum_l c_l e^{2 pi i l x} with c_{-l} = conj(c_l)."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    for l, c in coeffs.items():
        if l == 0:
            out = out + np.real(c)
        elif l > 0:
            out = out + 2.0 * np.real(c * np.exp(2j * np.pi * l * np.asarray(x)))
    return out


def _continued_fraction_denominators(theta: float, qmax: int = 10**9):
    """Denominators of the continued-fraction convergents of theta."""
    denoms = []
    a = theta
    p0, q0, p1, q1 = 0, 1, 1, 0
    for _ in range(64):
        ai = int(np.floor(a))
        p0, q0, p1, q1 = p1, q1, ai * p1 + p0, ai * q1 + q0
        denoms.append((p1, q1))
        frac = a - ai
        if frac < 1e-15 or q1 > qmax:
            break
        a = 1.0 / frac
    return denoms


@dataclass
class CocycleModel:
    """U phi(x) = e^{2 pi i f(x)} phi([x + theta]), f = m*id + h.

    In the Fourier basis, U_{jk} = ghat_{j-k} e^{2 pi i k theta} with ghat the
    coefficients of g = e^{2 pi i f}.  ghat is computed by sampling g on a
    4096-point grid; the discarded tail mass is recorded.  h is given by its
    Fourier coefficients (positive frequencies; Hermitian extension implied),
    so h is a real trigonometric polynomial and g is entire.
    """

    m: int
    h_hat: Dict[int, complex]
    theta: float
    K: int
    ghat: Dict[int, complex] = field(default_factory=dict)
    tail_mass: float = 0.0
    name: str = "cocycle"

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("winding number m must be nonzero")
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if self.K < 8:
            raise ValueError("section half-size K must be at least 8")
        bad = {l: c for l, c in self.h_hat.items() if l < 0}
        if bad:
            raise ValueError("h_hat must be given on positive frequencies only")
        if abs(self.h_hat.get(0, 0.0)) != 0.0:
            raise ValueError(
                "constant Fourier coefficient of h must vanish "
                "(ergodic_average_bound precondition: mean-zero h')")
        self.h_hat = {l: complex(c) for l, c in self.h_hat.items() if l > 0}
        self._check_rationality()
        self._compute_ghat()

    def _check_rationality(self):
        for p, q in _continued_fraction_denominators(self.theta):
            if q == 0:
                continue
            err = abs(self.theta - p / q)
            if q <= RATIONAL_DENOM_FLAG and err <= 1e-10 / q:
                warnings.warn(
                    f"theta is within {err:.1e} of {p}/{q} (denominator <= 1e6); "
                    "ergodic averaging will degrade", stacklevel=3)
                return

    def _compute_ghat(self):
        x = np.arange(GHAT_GRID) / GHAT_GRID
        g = np.exp(2j * np.pi * (self.m * x + _hermitian_series(self.h_hat, x)))
        ghat = np.fft.fft(g) / GHAT_GRID
        mags = np.abs(ghat)
        cutoff = BAND_THRESHOLD * mags.max()
        bands: Dict[int, complex] = {}
        tail = 0.0
        for idx in range(GHAT_GRID):
            l = idx if idx <= GHAT_GRID // 2 else idx - GHAT_GRID
            if mags[idx] > cutoff and abs(l) <= self.K:
                bands[l] = complex(ghat[idx])
            else:
                tail += float(mags[idx])
        self.ghat = bands
        self.tail_mass = tail

    # -- realizations -------------------------------------------------

    @property
    def band_width(self) -> int:
        return max(abs(l) for l in self.ghat)

    @property
    def U(self) -> UnitaryOp:
        th = self.theta
        bands = {l: (lambda k, c=c, th=th: c * np.exp(2j * np.pi * np.asarray(k) * th))
                 for l, c in self.ghat.items()}
        return UnitaryOp(LatticeBanded(bands), label="cocycle")

    @property
    def P(self) -> ConjugateOp:
        return ConjugateOp.diagonal(lambda k: 2.0 * np.pi * np.asarray(k, dtype=float),
                                    label="momentum")

    def dense_section(self, K: Optional[int] = None) -> np.ndarray:
        return self.U.realization.section(self.K if K is None else K)

    def unitary_dense(self, K: Optional[int] = None) -> UnitaryOp:
        """Fourier-aliased periodic completion; unitary up to the symbol tail."""
        K = self.K if K is None else K
        n = 2 * K + 1
        if n <= 2 * self.band_width:
            raise ValueError("section too small for an alias-free periodic completion")
        ks = np.arange(-K, K + 1)
        phases = np.exp(2j * np.pi * ks * self.theta)
        out = np.zeros((n, n), dtype=complex)
        for l, c in self.ghat.items():
            for i in range(n):
                out[(i + l) % n, i] += c * phases[i]
        return UnitaryOp.dense(out, label="cocycle-wrap", unitarity_tol=1e-11)

    # -- symbol-side helpers (exact for the infinite operator) ---------

    def hprime_hat(self) -> Dict[int, complex]:
        return {l: 2j * np.pi * l * c for l, c in self.h_hat.items()}

    def hprime_at(self, x: np.ndarray) -> np.ndarray:
        return _hermitian_series(self.hprime_hat(), x)

    def g_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.exp(2j * np.pi * (self.m * x + _hermitian_series(self.h_hat, x)))

    def commutator_weight_at(self, x: np.ndarray) -> np.ndarray:
        """Symbol of U*[P,U]: 2 pi (m + h'([x - theta]))."""
        return 2.0 * np.pi * (self.m + self.hprime_at(np.asarray(x) - self.theta))

    def averaged_weight_at(self, n: int, x: np.ndarray) -> np.ndarray:
        """Symbol of U*[P_n,U]: 2 pi (m + (1/n) sum_{j=1..n} h'([x - j theta]))."""
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for j in range(1, n + 1):
            acc += self.hprime_at(x - j * self.theta)
        return 2.0 * np.pi * (self.m + acc / n)

    # -- lattice powers and averaged conjugates ------------------------

    def averaged_momentum_section(self, n: int, K: Optional[int] = None) -> np.ndarray:
        """Section of U*[P_n,U] computed by exact band-level composition."""
        K = self.K if K is None else K
        bw = self.band_width
        pad = (2 * n + 4) * bw + 4
        Um = self.U.realization.window(-K - pad, K + pad)
        Pd = BandWindow.diagonal(lambda k: 2.0 * np.pi * np.asarray(k, dtype=float),
                                 -K - pad, K + pad)
        Pn = band_average_conjugate(Um, Pd, n)
        comm = Pn.compose(Um).add(Um.compose(Pn), sign=-1.0)
        M = Um.adjoint().compose(comm)
        return M.section(K)


def build_cocycle(m: int, h_hat: Dict[int, complex], theta: float, K: int) -> CocycleModel:
    return CocycleModel(m=m, h_hat=dict(h_hat), theta=theta, K=K)


# ---------------------------------------------------------------------------
# dilation flow


@dataclass
class DilationModel:
    """Flow shift in logarithmic coordinates y_k = k dy.

    U_t phi(y) = phi(y + t) with t = steps * dy on the grid, and A is
    multiplication by -g with g(y) = 2y.  U_t*[A,U_t] = 2t exactly whenever
    dy is dyadic (the grid products are exact in binary floating point).
    """

    t: float
    dy: float
    K: int
    steps: int
    name: str = "dilation"

    @property
    def U(self) -> UnitaryOp:
        return UnitaryOp.lattice({-self.steps: 1.0}, label="dilation-flow")

    @property
    def A(self) -> ConjugateOp:
        dy = self.dy
        return ConjugateOp.diagonal(lambda k, dy=dy: -2.0 * dy * np.asarray(k, dtype=float),
                                    label="-log-dilation")

    def dense_section(self, K: Optional[int] = None) -> np.ndarray:
        return self.U.realization.section(self.K if K is None else K)

    def unitary_dense(self, K: Optional[int] = None) -> UnitaryOp:
        m = self.U.realization.wrap_section(self.K if K is None else K, twist=np.pi)
        return UnitaryOp.dense(m, label="dilation-wrap")


def build_dilation(t: float, dy: float, K: int) -> DilationModel:
    if dy <= 0:
        raise ValueError("dy must be positive")
    steps = round(t / dy)
    if abs(t - steps * dy) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"flow time t={t} is not an integer multiple of dy={dy}")
    if K < 8:
        raise ValueError("K must be at least 8")
    return DilationModel(t=float(steps * dy), dy=dy, K=K, steps=steps)


# ---------------------------------------------------------------------------
# averaged conjugates


def band_average_conjugate(U: BandWindow, A: BandWindow, n: int) -> BandWindow:
    """A_n = (1/n) sum_{j=0}^{n-1} U^{-j} A U^j by exact band composition.

    Every product shrinks the valid window; callers must pad their windows by
    at least 2 n * band_width.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    Ustar = U.adjoint()
    X = A
    acc = A
    for _ in range(1, n):
        X = Ustar.compose(X).compose(U)
        acc = acc.add(X)
    return acc.scale(1.0 / n)


def averaged_conjugate(U: UnitaryOp, A: ConjugateOp, n: int, K: int,
                       pad: Optional[int] = None):
    """Orbit-averaged conjugate A_n = (1/n) sum_j U^{-j} A U^j on a section.

    Returns (matrix, band_window) where ``band_window`` is the exact
    band-level representation when both operators have lattice realizations
    (None for dense inputs).  An explicit window padding that cannot
    accommodate the n-fold conjugation is rejected up front, naming the
    required amount.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if U.is_lattice and A.is_diagonal:
        bw = max(U.realization.band_width, 1)
        need = 2 * (n + 1) * bw + 2
        if pad is None:
            pad = need
        elif pad < need:
            raise ValueError(
                f"window padding {pad} too small for n={n} conjugations of a "
                f"band-width-{bw} operator; need at least {need} beyond K={K}")
        Um = U.realization.window(-K - pad, K + pad)
        Ad = BandWindow.diagonal(A.realization, -K - pad, K + pad)
        An = band_average_conjugate(Um, Ad, n)
        return An.section(K), An
    Um = U.matrix(K)
    Am = A.matrix(K)
    acc = np.zeros_like(Am)
    X = Am.copy()
    acc += X
    for _ in range(1, n):
        X = Um.conj().T @ X @ Um
        acc += X
    return acc / n, None


def averaged_conjugate_identity_residual(U: UnitaryOp, A: ConjugateOp, n: int, K: int) -> float:
    """|| [A_n, U] - (1/n) sum_j U^{-j} [A,U] U^j || on a section.

    This is an exact operator identity; the residual is pure round-off.  For
    lattice inputs both sides are composed at the band level and the final
    bands are sectioned, so the comparison is boundary-clean.
    """
    if U.is_lattice and A.is_diagonal:
        bw = max(U.realization.band_width, 1)
        pad = 2 * (n + 2) * bw + 4
        Um = U.realization.window(-K - pad, K + pad)
        Ustar = Um.adjoint()
        Ad = BandWindow.diagonal(A.realization, -K - pad, K + pad)
        An = band_average_conjugate(Um, Ad, n)
        lhs = An.compose(Um).add(Um.compose(An), sign=-1.0).section(K)
        C = Ad.compose(Um).add(Um.compose(Ad), sign=-1.0)
        acc = C
        X = C
        for _ in range(1, n):
            X = Ustar.compose(X).compose(Um)
            acc = acc.add(X)
        rhs = acc.scale(1.0 / n).section(K)
        return float(np.linalg.norm(lhs - rhs, 2))
    Um = U.matrix(K)
    Am = A.matrix(K)
    An, _ = averaged_conjugate(U, A, n, K)
    lhs = An @ Um - Um @ An
    C = Am @ Um - Um @ Am
    acc = np.zeros_like(C)
    X = C.copy()
    acc += X
    for _ in range(1, n):
        X = Um.conj().T @ X @ Um
        acc += X
    return float(np.linalg.norm(lhs - acc / n, 2))


# ---------------------------------------------------------------------------
# ergodic averages


def ergodic_average_bound(hprime_hat: Dict[int, complex], theta: float, n: int,
                          grid_size: int = 4096, refine: bool = True) -> float:
    """sup_x |(1/n) sum_{j=1..n} h'([x - j theta])|.

    The grid scan is polished by a bounded 1-d maximisation around the best
    grid point, since a bare 4096-point grid misses a generic peak by ~3e-7.
    """
    if abs(hprime_hat.get(0, 0.0)) != 0.0:
        raise ValueError("mean of h' must vanish (int h' = 0 required)")
    coeffs = {l: c for l, c in hprime_hat.items() if l != 0}
    if not coeffs:
        return 0.0
    if n < 1:
        raise ValueError("n must be >= 1")
    # Fourier side: (1/n) sum_j e^{-2 pi i j l theta} multiplies coefficient l
    avg_coeffs = {}
    for l, c in coeffs.items():
        j = np.arange(1, n + 1)
        factor = np.exp(-2j * np.pi * j * l * theta).sum() / n
        avg_coeffs[l] = c * factor

    def f(x):
        return np.abs(_hermitian_series(avg_coeffs, np.asarray(x)))

    xs = np.arange(grid_size) / grid_size
    vals = f(xs)
    i0 = int(np.argmax(vals))
    best = float(vals[i0])
    if refine:
        lo = (i0 - 1) / grid_size
        hi = (i0 + 1) / grid_size
        res = minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        best = max(best, float(-res.fun))
    return best


def smallest_n_for_bound(hprime_hat: Dict[int, complex], theta: float,
                         target: float = 0.5, n_max: int = 100000) -> int:
    """Smallest n whose conservative per-harmonic bound
    sum_l |h'_l| / (n |sin(pi l theta)|) drops below the target."""
    coeffs = {l: c for l, c in hprime_hat.items() if l != 0}
    if not coeffs:
        return 1
    total = 0.0
    for l, c in coeffs.items():
        s = abs(np.sin(np.pi * l * theta))
        if s < 1e-12:
            raise ValueError(f"harmonic {l} is resonant with theta (sin(pi l theta) = 0)")
        mult = 2.0 if l > 0 and -l not in coeffs else 1.0
        total += mult * abs(c) / s
    n = int(np.ceil(total / target))
    while n <= n_max and total / n >= target:
        n += 1
    if n > n_max:
        raise ValueError("no n below the cap satisfies the conservative bound")
    return max(n, 1)


def mourre_constant_cocycle(model: CocycleModel, n: int, K: Optional[int] = None,
                            margin: Optional[int] = None) -> dict:
    """Smallest eigenvalue of the interior compression of U*[P_n,U].

    Requires the ergodic average bound below 1/2 (the sign of m then fixes a
    global positive lower bound; for m < 0 the conjugate is flipped to -P_n).
    The symbol infimum 2 pi (|m| - bound) is reported as the exact target,
    with tol(K) from the discarded symbol tail.
    """
    K = model.K if K is None else K
    bound = ergodic_average_bound(model.hprime_hat(), model.theta, n)
    if bound >= 0.5:
        raise ValueError(
            f"ergodic average bound {bound:.6f} >= 1/2 for n={n}; "
            "increase n before certifying the averaged commutator")
    sign = 1.0 if model.m > 0 else -1.0
    M = sign * model.averaged_momentum_section(n, K)
    M = 0.5 * (M + M.conj().T)
    # The band-composed section is the exact [-K..K] block of the infinite
    # operator, so by Cauchy interlacing its spectrum already sits above the
    # symbol infimum; the margin knob only cuts further into the block.
    margin = 0 if margin is None else margin
    if margin >= K:
        raise ValueError(f"margin {margin} leaves no interior at K={K}; increase K")
    sl = slice(margin, 2 * K + 1 - margin)
    ev = np.linalg.eigvalsh(M[sl, sl])
    xs = np.arange(200001) / 200001.0
    symbol_inf = float((sign * model.averaged_weight_at(n, xs)).min())
    return {
        "min_eig": float(ev[0]),
        "symbol_inf": symbol_inf,
        "ergodic_bound": float(bound),
        "target": 2.0 * np.pi * (abs(model.m) - bound),
        "tol_K": float(model.tail_mass * 4.0 * np.pi * (abs(model.m) + 1)),
        "K": K,
        "margin": margin,
        "interior_dim": 2 * K + 1 - 2 * margin,
        "n": n,
    }


# ---------------------------------------------------------------------------
# exact cocycle autocorrelations (orbit products)


def cocycle_autocorrelation(model: CocycleModel, N: int,
                            phi_hat: Optional[Dict[int, complex]] = None) -> np.ndarray:
    """<phi, U^n phi> for n = 0..N via the closed orbit-product form.

    U^n phi(x) = exp(2 pi i [m n x + m theta n(n-1)/2 + H_n(x)]) phi([x+n theta]),
    H_n(x) = sum_{j<n} h(x + j theta).  H_n is a short trig polynomial with
    Dirichlet-sum coefficients, so e^{2 pi i H_n} is band-limited and each
    coefficient is an exact small FFT; no large-grid quadrature is involved.
    """
    if phi_hat is None:
        phi_hat = {0: 1.0 + 0j}
    norm2 = sum(abs(c)**2 for c in phi_hat.values())
    out = np.zeros(N + 1, dtype=complex)
    out[0] = norm2
    for n in range(1, N + 1):
        Hn = {}
        amp = 0.0
        for l, c in model.h_hat.items():
            j = np.arange(n)
            S = np.exp(2j * np.pi * j * l * model.theta).sum()
            Hn[l] = c * S
            amp += 2.0 * abs(c * S)
        Lh = max(Hn) if Hn else 1
        # bandwidth of e^{2 pi i H_n}: Bessel-type decay past Lh*(2 pi amp)
        half = int(Lh * (2.0 * np.pi * amp + 12.0)) + 8
        G = 1 << int(np.ceil(np.log2(max(64, 4 * half))))
        xg = np.arange(G) / G
        F = np.exp(2j * np.pi * _hermitian_series(Hn, xg))
        Fhat = np.fft.fft(F) / G
        phase = np.exp(1j * np.pi * model.m * model.theta * n * (n - 1))
        c_n = 0.0 + 0j
        for k, a in phi_hat.items():
            for kp, b in phi_hat.items():
                q = k - kp - model.m * n
                if abs(q) <= G // 2 - 1:
                    c_n += np.conj(a) * b * np.exp(2j * np.pi * kp * n * model.theta) \
                        * Fhat[q % G]
        out[n] = phase * c_n
    return out


def export_section(model, path, K: Optional[int] = None, fmt: str = "binary"):
    """Write a model's dense unitary section in the shared interchange
    formats (binary MULB blob, or JSON for small sections)."""
    from . import serialize

    if hasattr(model, "dense_section"):
        m = model.dense_section(K)
    else:
        m = model.U.matrix(K)
    if fmt == "binary":
        serialize.save_matrix(path, m)
    elif fmt == "json":
        import pathlib
        pathlib.Path(path).write_text(serialize.matrix_to_json(m), encoding="utf-8")
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return m.shape


MODEL_BUILDERS = {
    "shift": lambda params: build_shift(),
    "free_evolution": lambda params: build_free_evolution(
        T=params.get("T", 1.0), Xi=params.get("Xi", 1.5), M=params.get("M", 256)),
    "cocycle": lambda params: build_cocycle(
        m=params.get("m", 1),
        h_hat={int(l): complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
               for l, v in params.get("h_hat", {}).items()},
        theta=params.get("theta", (np.sqrt(5.0) - 1.0) / 2.0),
        K=params.get("K", 64)),
    "dilation": lambda params: build_dilation(
        t=params.get("t", 0.125), dy=params.get("dy", 0.125), K=params.get("K", 32)),
}


def build_model(config: dict):
    name = config.get("model")
    if name not in MODEL_BUILDERS:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(MODEL_BUILDERS)}")
    params = {k: v for k, v in config.items() if k != "model"}
    return MODEL_BUILDERS[name](params)
