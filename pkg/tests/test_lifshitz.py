import numpy as np
import pytest

from casimirlab.constants import HBAR_C_EV_NM
from casimirlab.errors import ValidationError
from casimirlab.lifshitz import (
    LayerStack, SphereGeometry, ThermalConfig, casimir_force_pfa,
    force_curve, fresnel_semispace, fresnel_semispace_static,
    layered_reflection, layered_reflection_static, matsubara_frequency,
)
from casimirlab.materials import gold_drude, ito_model, quartz_substrate
from casimirlab.spectra import (
    Drude, IdealMetal, NinhamParsegian, Oscillator, Plasma, StaticClass,
)

KPERP = np.geomspace(1e-4, 0.3, 12)


class TestMatsubara:
    def test_zero_index(self):
        assert matsubara_frequency(275.0, 0) == 0.0

    def test_first_frequency_at_275k(self):
        assert matsubara_frequency(275.0, 1) == pytest.approx(0.148897, rel=1e-5)

    def test_linear_in_index(self):
        assert matsubara_frequency(275.0, 10) == pytest.approx(
            10 * matsubara_frequency(275.0, 1), rel=1e-14)

    def test_rejects_negative_index(self):
        with pytest.raises(ValidationError):
            matsubara_frequency(275.0, -1)


class TestFresnelSemispace:
    def test_ideal_metal_limit(self):
        r_tm, r_te = fresnel_semispace(np.inf, 1.0, KPERP)
        assert np.all(r_tm == 1.0) and np.all(r_te == -1.0)

    def test_vacuum_reflects_nothing(self):
        r_tm, r_te = fresnel_semispace(1.0, 1.0, KPERP)
        assert np.allclose(r_tm, 0.0) and np.allclose(r_te, 0.0)

    def test_bounded_by_unity(self):
        r_tm, r_te = fresnel_semispace(250.0, 0.5, KPERP)
        assert np.all(np.abs(r_tm) <= 1.0) and np.all(np.abs(r_te) <= 1.0)

    def test_static_dielectric(self):
        quartz = quartz_substrate()
        r_tm, r_te = fresnel_semispace_static(quartz.static_class(), KPERP)
        eps0 = 4.289
        assert r_tm == pytest.approx((eps0 - 1) / (eps0 + 1), rel=1e-6)
        assert np.all(r_te == 0.0)

    def test_static_drude(self):
        r_tm, r_te = fresnel_semispace_static(Drude(9.0, 0.035).static_class(),
                                              KPERP)
        assert np.all(r_tm == 1.0)
        assert np.all(r_te == 0.0)

    def test_static_plasma(self):
        wp = 9.0
        r_tm, r_te = fresnel_semispace_static(Plasma(wp).static_class(), KPERP)
        k = np.sqrt(KPERP ** 2 + (wp / HBAR_C_EV_NM) ** 2)
        assert np.all(r_tm == 1.0)
        assert r_te == pytest.approx((KPERP - k) / (KPERP + k), rel=1e-12)
        assert np.all(r_te < 0.0)


class TestLayeredReflection:
    def test_thick_film_equals_semispace(self, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated"), 5e4, quartz)
        film_eps = float(stack.film.eps_imag_axis(0.5))
        want = fresnel_semispace(film_eps, 0.5, KPERP)
        got = layered_reflection(stack, 0.5, KPERP)
        assert got[0] == pytest.approx(want[0], rel=1e-9)
        assert got[1] == pytest.approx(want[1], rel=1e-9)

    def test_homogeneous_film_equals_semispace_any_thickness(self, gold, quartz):
        for d in (1.0, 74.6, 900.0):
            stack = LayerStack(gold, quartz, d, quartz)
            want = fresnel_semispace(float(quartz.eps_imag_axis(0.3)), 0.3, KPERP)
            got = layered_reflection(stack, 0.3, KPERP)
            assert got[0] == pytest.approx(want[0], rel=1e-12)
            assert got[1] == pytest.approx(want[1], rel=1e-12)

    def test_vanishing_film_equals_substrate(self, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated"), 1e-4, quartz)
        want = fresnel_semispace(float(quartz.eps_imag_axis(0.5)), 0.5, KPERP)
        got = layered_reflection(stack, 0.5, KPERP)
        assert got[0] == pytest.approx(want[0], rel=1e-5, abs=1e-7)
        assert got[1] == pytest.approx(want[1], rel=1e-5, abs=1e-7)

    def test_static_drude_film_is_perfect_tm_mirror(self, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated", "drude"), 74.6, quartz)
        r_tm, r_te = layered_reflection_static(stack, KPERP)
        assert np.all(r_tm == 1.0)
        assert np.allclose(r_te, 0.0)

    def test_static_stripped_film_mixes_interfaces(self, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated", "none"), 74.6, quartz)
        r_tm, r_te = layered_reflection_static(stack, KPERP)
        eps_f = float(stack.film.eps_imag_axis(0.0))
        r01 = (eps_f - 1) / (eps_f + 1)
        assert np.all(np.abs(r_tm) <= 1.0)
        assert np.allclose(r_te, 0.0)
        # thick-film end of the k-perp range approaches the film half-space
        assert r_tm[-1] == pytest.approx(r01, rel=1e-3)


def ideal_stack():
    ideal = IdealMetal()
    return LayerStack(ideal, ideal, 100.0, ideal)


class TestCasimirForce:
    def test_separation_bounds(self, geometry, thermal):
        stack = ideal_stack()
        with pytest.raises(ValidationError):
            casimir_force_pfa(stack, geometry, thermal, 5.0)
        with pytest.raises(ValidationError):
            casimir_force_pfa(stack, geometry, thermal, 2500.0)

    def test_pfa_validity_assertion(self, thermal):
        with pytest.raises(ValidationError, match="R/a"):
            casimir_force_pfa(ideal_stack(), SphereGeometry(10.0), thermal, 500.0)

    def test_attractive_sign(self, geometry, thermal, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated"), 74.6, quartz)
        assert casimir_force_pfa(stack, geometry, thermal, 100.0) < 0.0

    def test_decay_bracket(self, geometry, thermal, gold):
        # effective power of the decay stays between 2 and 4
        stack = LayerStack(gold, gold, 100.0, gold)
        for a in (60.0, 100.0, 150.0):
            ratio = casimir_force_pfa(stack, geometry, thermal, 2 * a) \
                / casimir_force_pfa(stack, geometry, thermal, a)
            assert 1.0 / 16.0 < ratio < 1.0 / 4.0

    def test_vacuum_film_shifts_the_gap(self, geometry, thermal, gold):
        # a vacuum film of thickness d over a gold substrate is the same as
        # a wider empty gap: F(a; vacuum film d) == F(a + d; gold half-space)
        vacuum_film = NinhamParsegian(1e-12, 1e-12, 1.0, 1.0)  # eps -> 1
        for d in (10.0, 40.0):
            layered = LayerStack(gold, vacuum_film, d, gold)
            halfspace = LayerStack(gold, gold, 50.0, gold)
            got = casimir_force_pfa(layered, geometry, thermal, 100.0)
            want = casimir_force_pfa(halfspace, geometry, thermal, 100.0 + d)
            assert got == pytest.approx(want, rel=1e-5)

    def test_pointwise_stronger_eps_means_stronger_force(self, geometry,
                                                         thermal, gold, quartz):
        class Boosted:
            """eps(i xi) + shift wrapper preserving the static class."""
            has_carriers = False

            def __init__(self, inner, shift):
                self.inner, self.shift = inner, shift

            def eps_imag_axis(self, xi):
                return self.inner.eps_imag_axis(xi) + self.shift

            def im_eps(self, omega):
                return self.inner.im_eps(omega)

            def static_class(self):
                sc = self.inner.static_class()
                if sc.order > 0:
                    return sc
                return StaticClass(0, sc.eps0 + self.shift,
                                   sc.amplitude + self.shift, sc.eps_xi2)

        film = ito_model("untreated", "none")
        base = LayerStack(gold, film, 74.6, quartz)
        f0 = casimir_force_pfa(base, geometry, thermal, 100.0)
        for layer in ("sphere", "film", "substrate"):
            kwargs = {"sphere": gold, "film": film, "substrate": quartz}
            kwargs[layer] = Boosted(kwargs[layer], 0.3)
            boosted = LayerStack(kwargs["sphere"], kwargs["film"], 74.6,
                                 kwargs["substrate"])
            f1 = casimir_force_pfa(boosted, geometry, thermal, 100.0)
            assert abs(f1) > abs(f0)

    def test_deterministic_reduction(self, geometry, thermal, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated"), 74.6, quartz)
        a = casimir_force_pfa(stack, geometry, thermal, 80.0)
        b = casimir_force_pfa(stack, geometry, thermal, 80.0)
        assert a == b

    def test_tolerance_convergence(self, geometry, gold):
        stack = LayerStack(gold, gold, 100.0, gold)
        coarse = casimir_force_pfa(stack, geometry,
                                   ThermalConfig(matsubara_rel_tol=1e-6), 80.0)
        fine = casimir_force_pfa(stack, geometry,
                                 ThermalConfig(matsubara_rel_tol=1e-9,
                                               kperp_rel_tol=1e-9), 80.0)
        assert coarse == pytest.approx(fine, rel=5e-6)


class TestForceCurve:
    def test_monotone_magnitudes(self, geometry, thermal, gold, quartz):
        stack = LayerStack(gold, ito_model("untreated"), 74.6, quartz)
        seps = np.arange(60.0, 81.0, 1.0)
        curve = force_curve(stack, geometry, thermal, seps)
        assert len(curve.force_pn) == 21
        assert np.all(np.diff(np.abs(curve.force_pn)) < 0.0)

    def test_empty_input(self, geometry, thermal, gold):
        curve = force_curve(LayerStack(gold, gold, 1.0, gold), geometry,
                            thermal, [])
        assert curve.force_pn.size == 0

    def test_rejects_unsorted(self, geometry, thermal, gold):
        with pytest.raises(ValidationError):
            force_curve(LayerStack(gold, gold, 1.0, gold), geometry, thermal,
                        [80.0, 70.0])

    def test_carrier_toggle_ordering(self, geometry, thermal, gold, quartz):
        included = LayerStack(gold, ito_model("untreated", "drude"), 74.6, quartz)
        stripped = LayerStack(gold, ito_model("untreated", "none"), 74.6, quartz)
        for a in (60.0, 120.0, 300.0):
            fi = casimir_force_pfa(included, geometry, thermal, a)
            fs = casimir_force_pfa(stripped, geometry, thermal, a)
            assert abs(fi) > abs(fs)
