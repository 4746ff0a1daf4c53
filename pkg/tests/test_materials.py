import numpy as np
import pytest

from casimirlab import data_path
from casimirlab.configfile import load_spectrum_file
from casimirlab.materials import (
    ELLIPSOMETRY_RANGE_EV, ITO_HIGH_TAILS, gold_drude, ito_core_oscillators,
    ito_drude, ito_model, ito_synthetic_spectrum, ito_tabulated_model,
    quartz_substrate,
)
from casimirlab.spectra import Oscillator, TabulatedModel, TabulatedSpectrum


def test_gold_parameters():
    au = gold_drude()
    assert (au.plasma_frequency, au.relaxation) == (9.0, 0.035)


def test_quartz_parameters():
    qz = quartz_substrate()
    assert (qz.c_ir, qz.c_uv, qz.w_ir, qz.w_uv) == (1.93, 1.359, 0.1378, 13.38)


def test_ito_drude_parameters():
    assert ito_drude("untreated").relaxation == 0.128
    assert ito_drude("uv").relaxation == 0.132
    assert ito_drude("uv").plasma_frequency == 1.5


@pytest.mark.parametrize("sample", ["untreated", "uv"])
def test_extrapolation_sets_meet_at_table_end(sample):
    # both published high-frequency sets pass through the measured endpoint
    w_end = ELLIPSOMETRY_RANGE_EV[1]
    upper = Oscillator(*ITO_HIGH_TAILS[(sample, "upper")]).im_eps(w_end)
    lower = Oscillator(*ITO_HIGH_TAILS[(sample, "lower")]).im_eps(w_end)
    assert upper == pytest.approx(lower, rel=2e-3)


@pytest.mark.parametrize("sample,tail", [
    ("untreated", "upper"), ("untreated", "lower"),
    ("uv", "upper"), ("uv", "lower"),
])
def test_synthetic_spectrum_tails_are_continuous(sample, tail):
    spec = ito_synthetic_spectrum(sample, tail)
    lo_val = float(spec.low_tail.im_eps(spec.omega[0]))
    hi_val = float(spec.high_tail.im_eps(spec.omega[-1]))
    assert spec.im_eps[0] == pytest.approx(lo_val, rel=0.05)
    assert spec.im_eps[-1] == pytest.approx(hi_val, rel=0.05)


def test_untreated_core_has_3ev_peak_and_uv_core_does_not():
    centers_untreated = {o.center for o in ito_core_oscillators("untreated")}
    centers_uv = {o.center for o in ito_core_oscillators("uv")}
    assert 3.0 in centers_untreated
    assert 3.0 not in centers_uv


def test_dual_route_matches_with_matched_tail():
    # tabulating the analytic composite with its own oscillator as the tail
    # must reproduce the analytic eps(i xi) through Kramers-Kronig
    ana = ito_model("untreated")
    core = ito_core_oscillators("untreated")
    w = np.geomspace(*ELLIPSOMETRY_RANGE_EV, 400)
    spec = TabulatedSpectrum(w, np.asarray(ana.im_eps(w)),
                             low_tail=ito_drude("untreated"), high_tail=core[0])
    tab = TabulatedModel(spec)
    for xi in np.geomspace(0.02, 20.0, 8):
        assert float(tab.eps_imag_axis(float(xi))) == pytest.approx(
            float(ana.eps_imag_axis(float(xi))), rel=1e-3)


@pytest.mark.parametrize("name,sample", [
    ("ito_untreated_synthetic.dat", "untreated"),
    ("ito_uv_synthetic.dat", "uv"),
])
def test_shipped_spectrum_files_match_generator(name, sample):
    omega, im_eps = load_spectrum_file(data_path(name))
    spec = ito_synthetic_spectrum(sample)
    assert omega == pytest.approx(spec.omega, rel=1e-7)
    assert im_eps == pytest.approx(spec.im_eps, rel=1e-7)


def test_carrier_treatments():
    assert ito_model("untreated", "drude").has_carriers
    assert ito_model("untreated", "plasma").has_carriers
    assert not ito_model("untreated", "none").has_carriers
    assert ito_tabulated_model("uv", "upper", "drude").has_carriers
    assert not ito_tabulated_model("uv", "upper", "none").has_carriers


def test_plasma_treatment_uses_longitudinal_frequency():
    model = ito_model("untreated", "plasma")
    sc = model.static_class()
    assert sc.order == 2
    assert sc.eps_xi2 == pytest.approx(1.3 ** 2)
