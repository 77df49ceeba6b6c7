from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import quad

from umourre.core import ConjugateOp, UnitaryOp
from umourre.models import build_cocycle, build_dilation, build_free_evolution, build_shift
from umourre.regularity import (
    c11_integrand,
    c1plus0_integrand,
    classify,
    cocycle_integrands,
    log_grid,
)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class TestShiftClosedForms:
    def test_c11_closed_form(self):
        sh = build_shift()
        for t in log_grid(1e-4, 16):
            want = 2.0 * (1.0 - np.cos(t))
            assert abs(c11_integrand(sh.U, sh.A, t, K=12) - want) < 1e-10

    def test_c1plus0_closed_form(self):
        sh = build_shift()
        for t in log_grid(1e-4, 16):
            want = 2.0 * abs(np.sin(t / 2.0))
            assert abs(c1plus0_integrand(sh.U, sh.A, t, K=12) - want) < 1e-10

    def test_K_independence_exact(self):
        sh = build_shift()
        for t in (1e-3, 0.2, 0.9):
            vals = [c11_integrand(sh.U, sh.A, t, K=K) for K in (8, 16, 32)]
            assert max(vals) - min(vals) <= 1e-12

    def test_integral_against_quadrature(self):
        sh = build_shift()
        rep = classify(sh.U, sh.A, K_schedule=(8, 16))
        want_c11 = quad(lambda t: 2 * (1 - np.cos(t)) / t**2, 1e-4, 1.0, limit=200)[0]
        want_c10 = quad(lambda t: 2 * abs(np.sin(t / 2)) / t, 1e-4, 1.0, limit=200)[0]
        assert abs(rep.integral_c11 - want_c11) <= 0.01 * want_c11
        assert abs(rep.integral_c1plus0 - want_c10) <= 0.01 * want_c10
        assert rep.flag_c11 == "converged"
        assert rep.flag_c1plus0 == "converged"


class TestTrivialCases:
    def test_identity_operator(self):
        U = UnitaryOp.dense(np.eye(6, dtype=complex))
        A = ConjugateOp.hermitian(np.diag(np.arange(6.0)).astype(complex))
        for t in (1e-3, 0.5):
            assert c11_integrand(U, A, t) < 1e-13
            assert c1plus0_integrand(U, A, t) < 1e-13

    def test_commuting_diagonals(self):
        U = UnitaryOp.dense(np.diag(np.exp(1j * np.arange(5))))
        A = ConjugateOp.diagonal(lambda k: np.asarray(k, dtype=float))
        for t in (1e-3, 0.5):
            assert c1plus0_integrand(U, A, t) < 1e-13
        rep = classify(U, A, K_schedule=(2,))
        assert rep.integral_c11 < 1e-10 and rep.integral_c1plus0 < 1e-10

    def test_t_domain(self):
        sh = build_shift()
        with pytest.raises(ValueError):
            c11_integrand(sh.U, sh.A, 0.0, K=4)
        with pytest.raises(ValueError):
            c11_integrand(sh.U, sh.A, 1.5, K=4)


class TestInvariants:
    def test_second_difference_bounded_by_first(self):
        # c11(t) <= t * sup_{s<=t} c1plus0(s) + 1e-8 on the shipped models
        grid = log_grid(1e-3, 24)
        cases = []
        sh = build_shift()
        cases.append((sh.U, sh.A, 10, None))
        dil = build_dilation(0.25, 0.125, 24)
        cases.append((dil.U, dil.A, 10, None))
        co = build_cocycle(1, {1: -0.25j / np.pi}, GOLDEN, 32)
        c11f, c10f = cocycle_integrands(co, grid=1 << 12)
        cases.append((None, None, None, (c11f, c10f)))
        fe = build_free_evolution(1.0, 1.5, 96)
        cases.append((fe.U, fe.A, None, None))
        for U, A, K, fns in cases:
            sup_first = 0.0
            for t in grid:
                if fns is None:
                    a = c11_integrand(U, A, t, K=K)
                    b = c1plus0_integrand(U, A, t, K=K)
                else:
                    a, b = fns[0](t), fns[1](t)
                sup_first = max(sup_first, b)
                assert a <= t * sup_first + 1e-8

    def test_integrands_vanish_at_zero(self):
        sh = build_shift()
        grid = log_grid(1e-4, 32)
        vals = [c11_integrand(sh.U, sh.A, t, K=8) for t in grid[:8]]
        assert all(x < 1e-5 for x in vals)
        assert vals == sorted(vals)


class TestCocycleIntegrands:
    def test_against_banded_sections(self):
        # dual route: exact symbol sup vs operator norm of the conjugated
        # band difference on a section (which can only undershoot)
        co = build_cocycle(1, {1: -0.25j / np.pi}, GOLDEN, 48)
        c11f, c10f = cocycle_integrands(co, grid=1 << 12)
        for t in (0.05, 0.3, 0.8):
            sym = c10f(t)
            sec = c1plus0_integrand(co.U, co.P, t, K=48)
            assert sec <= sym + 1e-9
            assert sym - sec <= 0.05 * sym + 1e-6

    def test_oscillation_oracle(self):
        # brute-force sup of |v(x-t) - v(x)| on an independent fine grid
        co = build_cocycle(1, {1: -0.25j / np.pi}, GOLDEN, 16)
        c11f, c10f = cocycle_integrands(co)
        x = np.linspace(0.0, 1.0, 300001)
        for t in (0.02, 0.4):
            v = lambda y: 2 * np.pi * (1 + np.cos(2 * np.pi * y)) * co.g_at(y)
            want = np.abs(v(x - t) - v(x)).max()
            assert abs(c10f(t) - want) < 1e-6

    def test_smooth_cocycle_converges(self):
        co = build_cocycle(1, {1: -0.25j / np.pi}, GOLDEN, 24)
        c11f, c10f = cocycle_integrands(co, grid=1 << 12)
        rep = classify(co.U, co.P, K_schedule=(24,), c11_fn=c11f, c1plus0_fn=c10f)
        assert rep.flag_c1plus0 == "converged"

    def test_divergent_dini_modulus_flags_growing(self):
        # h' with a cusp of modulus 1/sqrt(log(1/t)): the Dini integral
        # int dt/t / sqrt(log(1/t)) = 2 sqrt(log(1/t)) diverges, so the
        # per-decade masses of the c1plus0 integral must not die out.
        G = 1 << 17
        x = np.arange(G) / G
        xt = np.minimum(x, 1.0 - x)
        f = 1.0 / np.sqrt(np.log(np.e**2 + 1.0 / np.maximum(xt, 1e-300)))
        hp = 3.0 * (f - f.mean())
        spec = np.fft.fft(hp) / G
        freqs = np.fft.fftfreq(G, 1.0 / G)
        spec_h = np.zeros_like(spec)
        nz = freqs != 0
        spec_h[nz] = spec[nz] / (2j * np.pi * freqs[nz])
        h = np.fft.ifft(spec_h * G).real

        fake = SimpleNamespace(
            m=1,
            g_at=lambda y: np.exp(2j * np.pi * (np.asarray(y) + _interp_per(y, h))),
            hprime_at=lambda y: _interp_per(y, hp),
        )
        c11f, c10f = cocycle_integrands(fake, grid=G)
        rep = classify(None, None, t_grid=log_grid(1e-4, 48),
                       K_schedule=(1,), c11_fn=c11f, c1plus0_fn=c10f)
        assert rep.flag_c1plus0 == "growing"
        inc = rep.decade_increments_c1plus0
        assert inc[-1] > 0.5 * inc[0]


def _interp_per(y, samples):
    G = len(samples)
    pos = np.mod(np.asarray(y, dtype=float), 1.0) * G
    i0 = np.floor(pos).astype(int) % G
    i1 = (i0 + 1) % G
    w = pos - np.floor(pos)
    return (1 - w) * samples[i0] + w * samples[i1]


def test_report_serializes_to_json():
    import json
    sh = build_shift()
    rep = classify(sh.U, sh.A, t_grid=log_grid(1e-3, 16), K_schedule=(8,))
    blob = json.dumps(rep.to_dict())
    back = json.loads(blob)
    assert back["divergence_flag"]["c11"] == rep.flag_c11
    assert len(back["t_grid"]) == 16
    assert back["integral_estimates"]["c11"] == rep.integral_c11
