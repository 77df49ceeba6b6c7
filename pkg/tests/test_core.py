import numpy as np
import pytest

from umourre.core import (
    BandWindow,
    ComplexVector,
    ConjugateOp,
    LatticeBanded,
    NormEstimateDiverged,
    SpectralWindow,
    SupportCapExceeded,
    UnitaryOp,
    apply,
    commutator,
    heisenberg_conjugate,
    operator_norm,
    spectral_projection,
)
from umourre.models import build_cocycle, build_dilation, build_free_evolution, build_shift

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def random_unitary(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (m + m.conj().T)


class TestApply:
    def test_shift_on_delta(self):
        sh = build_shift()
        out = apply(sh.U, ComplexVector.delta(0))
        assert list(out.support) == [1]
        assert out.entries[0] == 1.0

    def test_diagonal_action(self):
        A = ConjugateOp.diagonal(lambda k: np.asarray(k, dtype=float))
        out = apply(A, ComplexVector.delta(5))
        assert out.entries[0] == 5.0
        assert list(out.support) == [5]

    def test_cocycle_h0_matches_closed_form(self):
        # ghat_l = delta_{l,1} for g = e^{2 pi i x}; U e_0 = e^{0} e_1
        with pytest.warns(UserWarning, match="7/10"):
            co = build_cocycle(1, {}, 0.7, 16)
        out = apply(co.U, ComplexVector.delta(0)).trim(1e-13)
        assert list(out.support) == [1]
        assert abs(out.entries[0] - 1.0) < 1e-12

    def test_support_cap(self):
        sh = build_shift()
        v = ComplexVector(np.ones(64), 0)
        with pytest.raises(SupportCapExceeded):
            sh.U.realization.apply(v, support_cap=63)


class TestCommutator:
    def test_shift_number_exact(self):
        sh = build_shift()
        C = commutator(sh.A, sh.U, K=12)
        assert np.array_equal(C, sh.U.realization.section(12))

    def test_identity_commutes(self):
        A = ConjugateOp.hermitian(random_hermitian(9, 3))
        C = commutator(A, np.eye(9, dtype=complex))
        assert np.linalg.norm(C) == 0.0

    def test_cocycle_momentum_closed_form(self):
        # [P,U]_{jk} = 2 pi (j-k) U_{jk} and U is a single superdiagonal
        co = build_cocycle(1, {}, GOLDEN, 16)
        C = commutator(co.P, co.U, K=12)
        assert np.linalg.norm(C - 2 * np.pi * co.U.realization.section(12)) < 1e-12

    @pytest.mark.parametrize("seed", range(4))
    def test_antisymmetry(self, seed):
        # ([A,S])* + [A,S*] = 0 for Hermitian A
        n = 12
        A = ConjugateOp.hermitian(random_hermitian(n, seed))
        rng = np.random.default_rng(100 + seed)
        S = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        lhs = commutator(A, S).conj().T + commutator(A, S.conj().T)
        assert np.abs(lhs).max() < 1e-12


class TestHeisenbergConjugate:
    def test_t_zero(self):
        U = UnitaryOp.dense(random_unitary(8, 0))
        A = ConjugateOp.hermitian(random_hermitian(8, 1))
        assert np.array_equal(heisenberg_conjugate(A, U, 0.0), U.realization)

    def test_shift_closed_form(self):
        # diagonal with unit increments conjugates the shift to e^{-it} U
        sh = build_shift()
        for t in np.linspace(0.05, 1.0, 10):
            got = heisenberg_conjugate(sh.A, sh.U, t, K=10)
            want = np.exp(-1j * t) * sh.U.realization.section(10)
            assert np.abs(got - want).max() < 1e-10

    def test_commuting_diagonals(self):
        A = ConjugateOp.diagonal(lambda k: 2.0 * np.asarray(k, dtype=float))
        S = np.diag(np.exp(1j * np.arange(7)))
        for t in (0.1, 0.9):
            assert np.abs(heisenberg_conjugate(A, S, t) - S).max() < 1e-15

    def test_t_contract(self):
        sh = build_shift()
        with pytest.raises(ValueError):
            heisenberg_conjugate(sh.A, sh.U, 1.5, K=4)

    @pytest.mark.parametrize("t", np.linspace(0.1, 1.0, 10))
    def test_singular_values_invariant(self, t):
        rng = np.random.default_rng(42)
        S = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
        A = ConjugateOp.hermitian(random_hermitian(10, 7))
        got = np.linalg.svd(heisenberg_conjugate(A, S, float(t)), compute_uv=False)
        want = np.linalg.svd(S, compute_uv=False)
        assert np.abs(got - want).max() < 1e-10


class TestOperatorNorm:
    def test_zero(self):
        assert operator_norm(np.zeros((5, 5))) == 0.0

    def test_unitary(self):
        U = random_unitary(8, 11)
        assert abs(operator_norm(U) - 1.0) < 1e-8

    def test_shift_commutator_norm(self):
        sh = build_shift()
        C = commutator(sh.A, sh.U, K=16)
        assert abs(operator_norm(C) - 1.0) < 1e-8

    def test_nonconvergence_carries_estimate(self):
        m = np.diag([1.0, 0.999])
        with pytest.raises(NormEstimateDiverged) as exc:
            operator_norm(m, rel_tol=0.0, max_iter=5)
        assert 0.9 < exc.value.last_estimate <= 1.0


class TestSpectralProjection:
    def test_explicit_diagonal(self):
        U = UnitaryOp.dense(np.diag([1, 1j, -1, -1j]).astype(complex))
        win = SpectralWindow(np.pi / 2 - np.pi / 4, np.pi / 2 + np.pi / 4)
        res = spectral_projection(U, win)
        assert res.rank == 1
        want = np.zeros((4, 4), dtype=complex)
        want[1, 1] = 1.0
        assert np.abs(res.matrix - want).max() < 1e-12

    def test_full_circle_minus_point(self):
        U = UnitaryOp.dense(np.diag(np.exp(1j * np.linspace(0.3, 2.0, 6))))
        win = SpectralWindow(2.5, 2.5 + 2 * np.pi - 1e-3)
        res = spectral_projection(U, win)
        assert np.abs(res.matrix - np.eye(6)).max() < 1e-12

    def test_idempotence_selfadjointness(self):
        U = UnitaryOp.dense(random_unitary(16, 5))
        win = SpectralWindow(0.2, 1.9)
        E = spectral_projection(U, win).matrix
        assert np.linalg.norm(E @ E - E, 2) < 1e-10
        assert np.linalg.norm(E - E.conj().T, 2) < 1e-10

    def test_guard_band_warning(self):
        ang = 0.5
        U = UnitaryOp.dense(np.diag([np.exp(1j * ang), np.exp(2j)]))
        win = SpectralWindow(ang - 1e-12, 1.0)
        res = spectral_projection(U, win)
        assert res.boundary_warnings

    def test_fejer_shift_half_circle(self):
        # <e0, E e0> = arc length fraction = 1/2 for every order
        sh = build_shift()
        win = SpectralWindow(0.0, np.pi)
        for N in (4, 16, 64):
            E = spectral_projection(sh.U, win, method="fejer", fejer_N=N, K=N + 2).matrix
            mid = E.shape[0] // 2
            assert abs(E[mid, mid].real - 0.5) < 1e-12

    def test_fejer_is_contraction(self):
        U = UnitaryOp.dense(random_unitary(12, 9))
        win = SpectralWindow(0.4, 2.0)
        E = spectral_projection(U, win, method="fejer", fejer_N=24).matrix
        assert np.linalg.norm(E - E.conj().T, 2) < 1e-12
        assert operator_norm(E) <= 1.0 + 1e-10


class TestUnitarityInvariants:
    def test_shipped_models_unitary_realizations(self):
        golden = GOLDEN
        realizations = [
            build_shift().unitary_dense(24).realization,
            build_cocycle(1, {1: -0.25j / np.pi}, golden, 24).unitary_dense().realization,
            build_dilation(0.25, 0.125, 24).unitary_dense().realization,
            build_free_evolution(1.0, 1.5, 48).U.realization,
        ]
        for m in realizations:
            n = m.shape[0]
            assert np.linalg.norm(m.conj().T @ m - np.eye(n), 2) <= 1e-10 * n

    def test_lattice_roundtrip(self):
        # U then U* returns a finitely supported vector exactly
        co = build_cocycle(1, {1: -0.25j / np.pi}, GOLDEN, 24)
        v = ComplexVector(np.array([1.0, -2.0j, 0.5]), -1)
        w = co.U.realization.adjoint().apply(co.U.realization.apply(v))
        diff = w.sub(v)
        assert diff.norm() <= 1e-12 * v.norm()

    def test_dense_constructor_rejects_nonunitary(self):
        with pytest.raises(ValueError):
            UnitaryOp.dense(np.diag([1.0, 2.0]).astype(complex))


class TestBandWindow:
    def test_compose_matches_dense(self):
        rng = np.random.default_rng(17)
        c1 = rng.normal(size=41)
        c2 = rng.normal(size=41)
        op1 = LatticeBanded({1: lambda k: np.asarray(k, float),
                             -2: lambda k: np.cos(np.asarray(k, float))})
        op2 = LatticeBanded({0: lambda k: np.asarray(k, float) ** 2 / 10,
                             1: 0.5})
        K, pad = 8, 8
        w = op1.window(-K - pad, K + pad).compose(op2.window(-K - pad, K + pad))
        got = w.section(K)
        big = op1.section(K + pad) @ op2.section(K + pad)
        sl = slice(pad, pad + 2 * K + 1)
        assert np.abs(got - big[sl, sl]).max() < 1e-12

    def test_adjoint_matches_dense(self):
        op = LatticeBanded({2: lambda k: 1j * np.asarray(k, float), -1: 3.0})
        got = op.window(-12, 12).adjoint().section(8)
        want = op.section(8).conj().T
        assert np.abs(got - want).max() == 0.0

    def test_window_exhaustion_raises(self):
        op = LatticeBanded({5: 1.0})
        w = op.window(-4, 4)
        with pytest.raises(ValueError):
            w.compose(w).compose(w)


class TestSpectralWindow:
    def test_rejects_bad_arcs(self):
        with pytest.raises(ValueError):
            SpectralWindow(1.0, 1.0)
        with pytest.raises(ValueError):
            SpectralWindow(0.0, 7.0)
        with pytest.raises(ValueError):
            SpectralWindow(0.0, 2.0, base_point_excluded=1.0)

    def test_indicator_coefficients(self):
        win = SpectralWindow(-0.7, 1.3)
        # quadrature oracle for a few coefficients
        ts = np.linspace(-0.7, 1.3, 200001)
        for l in (0, 1, 3):
            want = np.trapezoid(np.exp(-1j * l * ts), ts) / (2 * np.pi)
            assert abs(win.indicator_fourier(l) - want) < 1e-8
