import numpy as np
import pytest

from casimirlab.errors import (
    DivergentStaticPermittivityError, IncompleteSpectrumError, ValidationError,
)
from casimirlab.spectra import (
    Drude, LinearTail, ModelSum, NinhamParsegian, Oscillator, Plasma,
    TabulatedModel, TabulatedSpectrum, eval_eps_imaginary_axis, eval_im_eps,
    kramers_kronig, strip_free_carriers,
)

UNTREATED_UPPER = Oscillator(strength=240.54, width=8.5, center=9.0)


def drude_table(wp=9.0, gamma=0.035, w_lo=1e-4, w_hi=500.0, n=600):
    model = Drude(wp, gamma)
    w = np.geomspace(w_lo, w_hi, n)
    # oscillator tail with g0*gamma0 = wp^2*gamma matches the w^-3 falloff
    tail = Oscillator(strength=wp * wp * gamma, width=1.0, center=1.0)
    return model, TabulatedSpectrum(w, np.asarray(model.im_eps(w)),
                                    low_tail=model, high_tail=tail)


def oscillator_table(g0=111.52, gamma0=4.0, w0=8.0, w_lo=1e-3, w_hi=800.0, n=700):
    model = Oscillator(g0, gamma0, w0)
    w = np.geomspace(w_lo, w_hi, n)
    im = np.asarray(model.im_eps(w))
    return model, TabulatedSpectrum(w, im, low_tail=LinearTail(im[0] / w[0]),
                                    high_tail=model)


class TestImEps:
    def test_oscillator_peak_value(self):
        # direct evaluation with the untreated-sample upper extrapolation set
        got = eval_im_eps(UNTREATED_UPPER, 9.0)
        assert got == pytest.approx(240.54 * 8.5 * 9.0 / (8.5 ** 2 * 9.0 ** 2))
        assert got == pytest.approx(3.144, abs=5e-4)

    def test_drude_high_frequency_decay(self):
        model = Drude(9.0, 0.035)
        hi = eval_im_eps(model, 2.0e4)
        assert eval_im_eps(model, 1.0e4) == pytest.approx(8.0 * hi, rel=1e-4)
        assert hi < 1e-11

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValidationError):
            eval_im_eps(Drude(9.0, 0.035), 0.0)


class TestEpsImaginaryAxis:
    def test_ninham_parsegian_static(self):
        quartz = NinhamParsegian(1.93, 1.359, 0.1378, 13.38)
        assert eval_eps_imaginary_axis(quartz, 0.0) == pytest.approx(4.289)

    def test_drude_at_first_matsubara(self):
        xi1 = 0.148897
        got = eval_eps_imaginary_axis(Drude(9.0, 0.035), xi1)
        assert got == pytest.approx(1.0 + 81.0 / (xi1 * (xi1 + 0.035)), rel=1e-12)
        assert got == pytest.approx(2.959e3, rel=1e-3)

    def test_oscillator_static(self):
        assert eval_eps_imaginary_axis(UNTREATED_UPPER, 0.0) == pytest.approx(
            1.0 + 240.54 / 81.0)

    def test_carrier_models_diverge_at_zero(self):
        for model in (Drude(9.0, 0.035), Plasma(9.0)):
            with pytest.raises(DivergentStaticPermittivityError):
                eval_eps_imaginary_axis(model, 0.0)

    @pytest.mark.parametrize("model", [
        Drude(9.0, 0.035), Plasma(1.3), UNTREATED_UPPER,
        NinhamParsegian(1.93, 1.359, 0.1378, 13.38),
        ModelSum((Drude(1.5, 0.128), Oscillator(111.52, 4.0, 8.0))),
    ])
    def test_monotone_decreasing_toward_one(self, model):
        xi = np.geomspace(0.01, 300.0, 40)
        eps = np.array([float(eval_eps_imaginary_axis(model, x)) for x in xi])
        assert np.all(np.diff(eps) < 0.0)
        assert np.all(eps >= 1.0)
        assert eps[-1] == pytest.approx(1.0, abs=0.02)

    def test_sum_equals_termwise_sum_exactly(self):
        terms = (Drude(1.5, 0.128), Oscillator(172.0, 6.25, 8.5),
                 Oscillator(1.5, 0.8, 3.0))
        total = ModelSum(terms)
        for xi in (0.05, 0.148897, 1.0, 10.0):
            parts = sum(float(t.eps_imag_axis(xi)) - 1.0 for t in terms)
            assert float(total.eps_imag_axis(xi)) == 1.0 + parts


class TestKramersKronig:
    def test_drude_round_trip_at_1ev(self):
        model, spec = drude_table()
        got = kramers_kronig(spec, 1.0)
        assert got == pytest.approx(1.0 + 81.0 / 1.035, rel=1e-3)

    def test_oscillator_round_trip_at_tenth_ev(self):
        model, spec = oscillator_table()
        got = kramers_kronig(spec, 0.1)
        assert got == pytest.approx(1.0 + 111.52 / (64.0 + 0.4 + 0.01), rel=1e-3)

    def test_vacuum_spectrum_gives_unity(self):
        w = np.geomspace(0.01, 100.0, 50)
        spec = TabulatedSpectrum(w, np.zeros_like(w))
        for xi in (0.01, 1.0, 30.0):
            assert kramers_kronig(spec, xi) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip_tolerance_over_grid(self):
        model, spec = drude_table()
        for xi in np.geomspace(0.01, 20.0, 9):
            want = float(model.eps_imag_axis(xi))
            assert kramers_kronig(spec, float(xi)) == pytest.approx(want, rel=1e-3)

    def test_missing_tail_is_an_error(self):
        model = Drude(9.0, 0.035)
        w = np.geomspace(1e-4, 500.0, 200)
        spec = TabulatedSpectrum(w, np.asarray(model.im_eps(w)), low_tail=None,
                                 high_tail=None, mismatch_tol=1.0)
        with pytest.raises(IncompleteSpectrumError):
            kramers_kronig(spec, 1.0)

    def test_rejects_nonpositive_xi(self):
        _, spec = drude_table()
        with pytest.raises(ValidationError):
            kramers_kronig(spec, 0.0)


class TestTabulatedSpectrum:
    def test_rejects_decreasing_omega(self):
        with pytest.raises(ValidationError):
            TabulatedSpectrum(np.array([1.0, 0.5, 2.0, 3.0]), np.ones(4))

    def test_rejects_negative_im_eps(self):
        with pytest.raises(ValidationError):
            TabulatedSpectrum(np.array([1.0, 2.0, 3.0, 4.0]),
                              np.array([1.0, -0.1, 1.0, 1.0]))

    def test_rejects_tail_mismatch(self):
        model = Drude(9.0, 0.035)
        w = np.geomspace(1e-3, 10.0, 50)
        with pytest.raises(ValidationError, match="low tail"):
            TabulatedSpectrum(w, np.asarray(model.im_eps(w)),
                              low_tail=Drude(5.0, 0.035))

    def test_tabulated_model_caches_and_matches_analytic(self):
        model, spec = drude_table()
        tab = TabulatedModel(spec)
        first = float(tab.eps_imag_axis(0.5))
        assert float(tab.eps_imag_axis(0.5)) == first
        assert first == pytest.approx(float(model.eps_imag_axis(0.5)), rel=1e-3)


class TestStripFreeCarriers:
    def test_strip_model_sum(self):
        core = (Oscillator(172.0, 6.25, 8.5), Oscillator(1.5, 0.8, 3.0))
        full = ModelSum((Drude(1.5, 0.128), *core))
        stripped = strip_free_carriers(full)
        assert not stripped.has_carriers
        assert stripped.terms == core   # identical objects, bit-identical evals

    def test_strip_then_re_add_is_exact(self):
        drude = Drude(1.5, 0.128)
        core = (Oscillator(172.0, 6.25, 8.5),)
        full = ModelSum((drude, *core))
        rebuilt = ModelSum((drude, *strip_free_carriers(full).terms))
        for xi in (0.02, 0.148897, 3.0, 25.0):
            assert float(rebuilt.eps_imag_axis(xi)) == float(full.eps_imag_axis(xi))

    def test_no_carrier_term_warns_and_returns_unchanged(self):
        quartz = NinhamParsegian(1.93, 1.359, 0.1378, 13.38)
        with pytest.warns(UserWarning, match="no free-carrier"):
            assert strip_free_carriers(quartz) is quartz

    def test_stripped_static_is_finite_while_full_diverges(self):
        full = ModelSum((Drude(1.5, 0.128), Oscillator(172.0, 6.25, 8.5)))
        stripped = strip_free_carriers(full)
        with pytest.raises(DivergentStaticPermittivityError):
            eval_eps_imaginary_axis(full, 0.0)
        assert np.isfinite(eval_eps_imaginary_axis(stripped, 0.0))

    def test_strip_tabulated_subtracts_low_tail(self):
        model, spec = drude_table(wp=1.5, gamma=0.128, w_lo=1e-3, w_hi=100.0, n=300)
        osc = Oscillator(111.52, 4.0, 8.0)
        w = spec.omega
        full_spec = TabulatedSpectrum(w, np.asarray(model.im_eps(w))
                                      + np.asarray(osc.im_eps(w)),
                                      low_tail=model, high_tail=osc,
                                      mismatch_tol=0.2)
        stripped = strip_free_carriers(TabulatedModel(full_spec))
        assert not stripped.has_carriers
        want = float(osc.eps_imag_axis(1.0))
        assert float(stripped.eps_imag_axis(1.0)) == pytest.approx(want, rel=5e-3)
