import numpy as np
import pytest

from umourre.core import ConjugateOp, SpectralWindow, UnitaryOp
from umourre.models import build_free_evolution, build_shift
from umourre.mourre import (
    _exact_commutator_section,
    certify_mourre,
    count_window_eigenvalues,
    exponential_perturbation,
    perturbed_certificate,
    virial_check,
)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (m + m.conj().T)


def perturbed_shift_wrap(K):
    """W = VU on the twisted wrap, V = 1 - 2 P_0 (rank-one phase flip)."""
    sh = build_shift()
    n = 2 * K + 1
    Um = sh.unitary_dense(K).realization
    Vm = np.eye(n, dtype=complex)
    Vm[K, K] = -1.0
    return sh, UnitaryOp.dense(Vm, label="1-2P0"), UnitaryOp.dense(Vm @ Um, label="VU")


class TestVirial:
    def test_exact_eigenvector_of_diagonal(self):
        U = UnitaryOp.dense(np.diag([1.0 + 0j, 1j]))
        A = ConjugateOp.hermitian(random_hermitian(2, 1))
        rep = virial_check(U, A, np.array([1.0, 0.0]), tol=1e-12)
        assert abs(rep.virial_value) < 1e-14
        assert rep.passed

    def test_every_wrap_eigenvector(self):
        # acceptance criterion 5 at reduced size: all eigenvectors of the
        # rank-one-perturbed wrap satisfy the virial identity
        sh, V, W = perturbed_shift_wrap(16)
        vals, vecs = np.linalg.eig(W.realization)
        for i in range(vecs.shape[1]):
            rep = virial_check(W, sh.A, vecs[:, i], tol=1e-8)
            assert rep.eigen_residual <= 1e-9
            assert abs(rep.virial_value) <= 1e-8

    def test_non_eigenvector_raises(self):
        U = UnitaryOp.dense(np.diag([1.0 + 0j, 1j, -1.0 + 0j]))
        A = ConjugateOp.hermitian(random_hermitian(3, 2))
        phi = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
        with pytest.raises(ValueError, match="residual|Rayleigh"):
            virial_check(U, A, phi, tol=1e-10)


class TestCertifyMourre:
    def test_shift_exact_constant(self):
        sh = build_shift()
        K = 64
        M = _exact_commutator_section(sh.U, sh.A, K)
        cert = certify_mourre(sh.U, sh.A, SpectralWindow(0.5, 2.5), K=K,
                              commutator_section=M)
        assert abs(cert.a_estimate - 1.0) <= 1e-12
        assert cert.allowance_rank == 0 and cert.passed

    def test_commuting_pair_fails(self):
        U = UnitaryOp.dense(np.diag(np.exp(1j * np.linspace(0.1, 3.0, 12))))
        A = ConjugateOp.diagonal(lambda k: np.asarray(k, dtype=float))
        cert = certify_mourre(U, A, SpectralWindow(0.0, np.pi))
        assert abs(cert.a_estimate) < 1e-12
        assert not cert.passed

    def test_allowance_monotonicity(self):
        rng = np.random.default_rng(3)
        sh, V, W = perturbed_shift_wrap(12)
        a_prev = -np.inf
        for rank in range(4):
            cert = certify_mourre(W, sh.A, SpectralWindow(0.5, 2.5),
                                  allowance_rank=rank)
            assert cert.a_estimate >= a_prev - 1e-12
            a_prev = cert.a_estimate

    def test_free_evolution_window_bound(self):
        fe = build_free_evolution(1.0, 1.5, 256)
        basis = fe.smooth_window_basis(-2.0, -1.0)
        cert = certify_mourre(fe.U, fe.A, SpectralWindow(-2.0, -1.0), basis=basis)
        delta, T = 1.0, 1.0
        assert cert.a_estimate >= 2 * T * delta / (delta + 1) - 1e-3

    def test_vacuous_window(self):
        U = UnitaryOp.dense(np.diag([np.exp(0.2j)] * 4))
        A = ConjugateOp.hermitian(random_hermitian(4, 9))
        cert = certify_mourre(U, A, SpectralWindow(2.0, 3.0))
        assert cert.vacuous and cert.passed and cert.window_dim == 0


class TestCountWindowEigenvalues:
    def test_explicit_diagonal(self):
        angles = np.linspace(0.2, 5.8, 8)
        U = UnitaryOp.dense(np.diag(np.exp(1j * angles)))
        win = SpectralWindow(0.1, angles[2] + 0.05)
        res = count_window_eigenvalues(U, win)
        assert res["count"] == 3

    def test_shift_section_all_spurious(self):
        sh = build_shift()
        U = UnitaryOp.dense_section(sh.U.realization.section(16))
        win = SpectralWindow(-3.0, 3.0)
        res = count_window_eigenvalues(U, win, lattice_source=sh.U)
        assert res["count"] > 0
        assert res["open_boundary_artifacts"] == res["count"]
        assert res["genuine_count"] == 0

    def test_perturbed_wrap_counts_in_window(self):
        # eigensolve oracle picks a window around a known eigenvalue
        sh, V, W = perturbed_shift_wrap(12)
        vals = np.linalg.eigvals(W.realization)
        ang = float(np.angle(vals[0]))
        win = SpectralWindow(ang - 0.1, ang + 0.1)
        res = count_window_eigenvalues(W, win)
        assert res["count"] >= 1


class TestExponentialPerturbation:
    def test_zero_generator(self):
        pert = exponential_perturbation(np.zeros((5, 5), dtype=complex))
        assert np.array_equal(pert.V.realization, np.eye(5))
        A = ConjugateOp.hermitian(random_hermitian(5, 4))
        res = pert.commutator_with(A)
        assert np.linalg.norm(res["series"]) == 0.0

    def test_pi_projector_closed_form(self):
        # B = pi P_0: V = 1 + (e^{i pi} - 1) P_0 = 1 - 2 P_0
        n = 9
        B = np.zeros((n, n), dtype=complex)
        B[4, 4] = np.pi
        pert = exponential_perturbation(B, series_tol=1e-12)
        want = np.eye(n, dtype=complex)
        want[4, 4] = -1.0
        assert np.linalg.norm(pert.V.realization - want, 2) < 1e-12
        assert pert.rank == 1
        A = ConjugateOp.hermitian(random_hermitian(n, 6))
        res = pert.commutator_with(A)
        assert res["residual"] <= 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_norm_bound(self, seed):
        B = random_hermitian(8, 200 + seed)
        B *= 0.7 / np.linalg.norm(B, 2)
        pert = exponential_perturbation(B)
        nb = np.linalg.norm(B, 2)
        assert np.linalg.norm(pert.V.realization - np.eye(8), 2) <= nb * np.exp(nb)

    def test_series_matches_direct(self):
        B = random_hermitian(7, 77)
        pert = exponential_perturbation(B, series_tol=1e-13)
        A = ConjugateOp.hermitian(random_hermitian(7, 78))
        res = pert.commutator_with(A)
        base = np.linalg.norm(A.realization @ B - B @ A.realization, 2)
        assert res["residual"] <= 10 * 1e-13 * max(base, 1.0) * 100


class TestPerturbedCertificate:
    def test_identity_perturbation(self):
        sh = build_shift()
        K = 24
        M = _exact_commutator_section(sh.U, sh.A, K)
        U = sh.unitary_dense(K)
        V = UnitaryOp.dense(np.eye(2 * K + 1, dtype=complex), label="1")
        base = certify_mourre(sh.U, sh.A, SpectralWindow(0.5, 2.5), K=K,
                              commutator_section=M)
        res = perturbed_certificate(U, V, sh.A, SpectralWindow(0.6, 2.4), base,
                                    commutator_section=M)
        assert res["perturbation_rank"] == 0
        assert res["commutator_difference_norm"] < 1e-12
        assert res["certificate"].passed
        assert abs(res["certificate"].a_estimate - base.a_estimate) < 1e-9

    def test_rank_one_flip(self):
        sh, V, W = perturbed_shift_wrap(32)
        K = 32
        M = _exact_commutator_section(sh.U, sh.A, K)
        base = certify_mourre(sh.U, sh.A, SpectralWindow(0.5, 2.5), K=K,
                              commutator_section=M)
        U = sh.unitary_dense(K)
        res = perturbed_certificate(U, V, sh.A, SpectralWindow(0.6, 2.4), base,
                                    commutator_section=M)
        cert = res["certificate"]
        assert cert.allowance_rank <= 2
        assert cert.passed
        assert res["commutator_difference_norm"] <= res["commutator_difference_bound"]

    def test_full_rank_perturbation_rejected(self):
        sh = build_shift()
        K = 10
        n = 2 * K + 1
        U = sh.unitary_dense(K)
        rng = np.random.default_rng(11)
        H = random_hermitian(n, 12)
        Vm = exponential_perturbation(H).V
        base = certify_mourre(sh.U, sh.A, SpectralWindow(0.5, 2.5), K=K,
                              commutator_section=_exact_commutator_section(sh.U, sh.A, K))
        with pytest.raises(ValueError, match="unverifiable"):
            perturbed_certificate(U, Vm, sh.A, SpectralWindow(0.6, 2.4), base)


    def test_conjugation_equivalence(self):
        # sigma(UV) = sigma(VU): the products are unitarily equivalent
        sh, V, W = perturbed_shift_wrap(16)
        Um = sh.unitary_dense(16).realization
        a = np.sort_complex(np.linalg.eigvals(Um @ V.realization))
        b = np.sort_complex(np.linalg.eigvals(V.realization @ Um))
        assert np.abs(a - b).max() < 1e-10
