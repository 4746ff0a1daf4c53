"""Declarative run configuration: INI sections for geometry, thermal
settings, one section per layer, roughness files and calibration truth.

Layer sections name a model kind and its parameters, e.g.

    [layer.film]
    model = tabulated
    spectrum_file = ito.dat
    thickness_nm = 74.6
    low_tail = drude
    low_plasma_frequency_eV = 1.5
    low_relaxation_eV = 0.128
    high_tail = oscillator
    high_strength_eV2 = 240.54
    high_width_eV = 8.5
    high_center_eV = 9.0

Spectrum files are two-column text tables (omega_eV, im_eps) with '#'
comments; their closure tails live in the layer section.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .electrocal import CalibrationTruth
from .errors import ValidationError
from .lifshitz import LayerStack, SphereGeometry, ThermalConfig
from .materials import ito_model, ito_tabulated_model
from .roughness import RoughnessDistribution, load_distribution
from .spectra import (
    Drude, IdealMetal, LinearTail, NinhamParsegian, Oscillator, Plasma,
    PermittivityModel, TabulatedModel, TabulatedSpectrum,
)

__all__ = ["RunConfig", "load_config", "load_spectrum_file", "save_spectrum_file"]


def load_spectrum_file(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column omega_eV, im_eps table with '#' comment lines."""
    try:
        data = np.loadtxt(path, comments="#", delimiter=None)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read spectrum file {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValidationError(f"spectrum file {path} must have two columns")
    return data[:, 0], data[:, 1]


def save_spectrum_file(path, omega_ev, im_eps, header: str = "") -> None:
    with open(path, "w") as fh:
        fh.write("# omega_eV, im_eps\n")
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for w, s in zip(omega_ev, im_eps):
            fh.write(f"{w:.8e} {s:.8e}\n")


def _build_tails(section, base: Path):
    low = section.get("low_tail", "none").lower()
    if low == "drude":
        low_tail = Drude(section.getfloat("low_plasma_frequency_eV"),
                         section.getfloat("low_relaxation_eV"))
    elif low == "linear":
        low_tail = LinearTail(section.getfloat("low_slope_per_eV"))
    elif low == "none":
        low_tail = None
    else:
        raise ValidationError(f"unknown low_tail {low!r}")
    high = section.get("high_tail", "none").lower()
    if high == "oscillator":
        high_tail = Oscillator(section.getfloat("high_strength_eV2"),
                               section.getfloat("high_width_eV"),
                               section.getfloat("high_center_eV"))
    elif high == "none":
        high_tail = None
    else:
        raise ValidationError(f"unknown high_tail {high!r}")
    return low_tail, high_tail


def _build_model(section, base: Path) -> PermittivityModel:
    kind = section.get("model", "").lower()
    if kind == "drude":
        return Drude(section.getfloat("plasma_frequency_eV"),
                     section.getfloat("relaxation_eV"))
    if kind == "plasma":
        return Plasma(section.getfloat("plasma_frequency_eV"))
    if kind == "oscillator":
        return Oscillator(section.getfloat("strength_eV2"),
                          section.getfloat("width_eV"),
                          section.getfloat("center_eV"))
    if kind == "ninham_parsegian":
        return NinhamParsegian(section.getfloat("c_ir"), section.getfloat("c_uv"),
                               section.getfloat("w_ir_eV"), section.getfloat("w_uv_eV"))
    if kind == "ideal_metal":
        return IdealMetal()
    if kind == "tabulated":
        omega, im_eps = load_spectrum_file(base / section.get("spectrum_file"))
        low, high = _build_tails(section, base)
        return TabulatedModel(TabulatedSpectrum(omega, im_eps, low, high))
    if kind == "synthetic_ito":
        sample = section.get("sample", "untreated")
        carriers = section.get("carriers", "drude")
        tail = section.get("tail", "")
        if tail:
            return ito_tabulated_model(sample, tail, carriers)
        return ito_model(sample, carriers)
    raise ValidationError(f"unknown model kind {kind!r}")


@dataclass
class RunConfig:
    stack: LayerStack | None
    geometry: SphereGeometry
    thermal: ThermalConfig
    roughness_plate: RoughnessDistribution | None
    roughness_sphere: RoughnessDistribution | None
    calibration: CalibrationTruth | None


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValidationError(f"cannot read config file {path}")
    base = Path(path).resolve().parent

    geometry = SphereGeometry()
    if parser.has_section("geometry"):
        geometry = SphereGeometry(parser["geometry"].getfloat(
            "sphere_radius_um", 101.2))

    thermal = ThermalConfig()
    if parser.has_section("thermal"):
        sec = parser["thermal"]
        thermal = ThermalConfig(
            temperature_k=sec.getfloat("temperature_K", 275.0),
            matsubara_rel_tol=sec.getfloat("matsubara_rel_tol", 1e-6),
            kperp_rel_tol=sec.getfloat("kperp_rel_tol", 1e-6),
            l_max_cap=sec.getint("l_max_cap", 5000),
        )

    stack = None
    layer_names = ("layer.sphere", "layer.film", "layer.substrate")
    if all(parser.has_section(n) for n in layer_names):
        stack = LayerStack(
            sphere=_build_model(parser["layer.sphere"], base),
            film=_build_model(parser["layer.film"], base),
            film_thickness_nm=parser["layer.film"].getfloat("thickness_nm"),
            substrate=_build_model(parser["layer.substrate"], base),
        )
    elif any(parser.has_section(n) for n in layer_names):
        raise ValidationError("a layer stack needs all three layer.* sections")

    def rough(section_name):
        if not parser.has_section(section_name):
            return None
        return load_distribution(base / parser[section_name].get("file"))

    calibration = None
    if parser.has_section("calibration"):
        sec = parser["calibration"]
        calibration = CalibrationTruth(
            v0_mv=sec.getfloat("v0_mV", -196.8),
            sensitivity_nm_per_v=sec.getfloat("sensitivity_nm_per_V", 104.4),
            contact_separation_nm=sec.getfloat("z0_nm", 29.5),
            force_constant_nn_per_v=sec.getfloat("ktilde_nN_per_V", 1.45),
            drift_rate_nm_per_s=sec.getfloat("drift_rate_nm_per_s", 0.0),
            acq_interval_s=sec.getfloat("acq_interval_s", 1e-3),
            sensor_noise_v=sec.getfloat("sensor_noise_V", 0.0053),
            radius_um=geometry.radius_um,
        )

    return RunConfig(stack=stack, geometry=geometry, thermal=thermal,
                     roughness_plate=rough("roughness.plate"),
                     roughness_sphere=rough("roughness.sphere"),
                     calibration=calibration)
