"""Embedded measurement tables and sample metadata for the experiment
this workbench reproduces: mean measured force magnitudes for the
untreated and UV-treated plate in two measurement sets with total
95%-confidence errors, the calibration parameters of both sessions, and
the applied-voltage ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["PaperDataset", "load_paper_table", "SAMPLES", "sample_metadata"]

# a_nm, untreated |F| set1, set2, total err, uv |F| set1, set2, total err (pN)
_TABLE_I = np.array([
    [60.0, 303.8, 304.4, 2.5, 239.5, 238.8, 2.9],
    [70.0, 204.4, 204.0, 2.3, 156.4, 155.6, 2.5],
    [80.0, 143.6, 143.7, 2.1, 106.7, 105.5, 2.3],
    [90.0, 107.0, 106.2, 2.0, 75.4, 74.6, 2.1],
    [100.0, 81.6, 80.7, 1.9, 55.5, 54.9, 2.0],
    [120.0, 50.1, 51.1, 1.8, 33.0, 32.9, 1.8],
    [140.0, 32.9, 33.4, 1.7, 22.6, 21.2, 1.7],
    [160.0, 21.8, 23.3, 1.7, 15.4, 15.1, 1.6],
    [180.0, 16.3, 15.3, 1.6, 10.5, 10.9, 1.6],
    [200.0, 11.9, 11.0, 1.6, 6.6, 8.0, 1.6],
    [220.0, 6.7, 7.6, 1.6, 5.5, 6.3, 1.5],
    [240.0, 5.8, 5.5, 1.5, 4.4, 4.2, 1.5],
    [260.0, 5.7, 5.3, 1.5, 3.7, 3.8, 1.5],
    [280.0, 4.6, 4.2, 1.5, 3.1, 3.2, 1.5],
    [300.0, 4.0, 4.1, 1.5, 3.0, 2.4, 1.5],
])

SAMPLES = ("untreated", "uv")

# per sample: applied voltage range (V) of set 1, residual potential (V),
# separation error (nm), random error of the mean force at 95% (pN)
_META = {
    "untreated": {
        "voltage_range_v": (-0.260, -0.110),
        "v0_v": -0.1968,
        "delta_a_nm": 0.4,
        "random_error_pn": 1.1,
        "sigma_mean_pn": 0.55,
        "calibration": {"v0_mv": -196.8, "m_nm_per_v": 104.4,
                        "z0_nm": 29.5, "ktilde_nn_per_v": 1.45},
    },
    "uv": {
        "voltage_range_v": (-0.025, 0.150),
        "v0_v": 0.065,
        "delta_a_nm": 0.6,
        "random_error_pn": 1.0,
        "sigma_mean_pn": 0.5,
        "calibration": {"v0_mv": 65.0, "m_nm_per_v": 103.5,
                        "z0_nm": 29.0, "ktilde_nn_per_v": 1.43},
    },
}

SPHERE_RADIUS_UM = 101.2
FILM_THICKNESS_NM = 74.6
TEMPERATURE_K = 275.0
ROUGHNESS_LEVELS = {"plate": (9.54, 2.28), "sphere": (11.51, 3.17)}


@dataclass(frozen=True)
class PaperDataset:
    """Embedded force table plus the fixed experiment geometry."""
    a_nm: np.ndarray
    force_set1_pn: np.ndarray          # magnitudes
    force_set2_pn: np.ndarray
    total_error_pn: np.ndarray
    sample: str
    radius_um: float = SPHERE_RADIUS_UM
    film_thickness_nm: float = FILM_THICKNESS_NM
    temperature_k: float = TEMPERATURE_K

    def consistency_ok(self) -> bool:
        """Set-to-set differences must stay below the total errors."""
        return bool(np.all(np.abs(self.force_set1_pn - self.force_set2_pn)
                           < self.total_error_pn))

    def mean_voltage_square_v2(self) -> float:
        lo, hi = _META[self.sample]["voltage_range_v"]
        volts = np.linspace(lo, hi, 10)
        return float(np.mean((volts - _META[self.sample]["v0_v"]) ** 2))


def load_paper_table(sample: str = "untreated") -> PaperDataset:
    """The embedded force-vs-separation table for one sample."""
    if sample not in SAMPLES:
        raise ValidationError(f"unknown sample {sample!r}")
    cols = (1, 2, 3) if sample == "untreated" else (4, 5, 6)
    return PaperDataset(
        a_nm=_TABLE_I[:, 0].copy(),
        force_set1_pn=_TABLE_I[:, cols[0]].copy(),
        force_set2_pn=_TABLE_I[:, cols[1]].copy(),
        total_error_pn=_TABLE_I[:, cols[2]].copy(),
        sample=sample,
    )


def sample_metadata(sample: str = "untreated") -> dict:
    if sample not in SAMPLES:
        raise ValidationError(f"unknown sample {sample!r}")
    return dict(_META[sample])


def applied_voltages(sample: str = "untreated", n: int = 10) -> np.ndarray:
    """An even ladder across the published applied-voltage range."""
    lo, hi = _META[sample]["voltage_range_v"]
    return np.linspace(lo, hi, n)


def uv_reduction_fractions(a_values=(60.0, 100.0, 140.0)) -> np.ndarray:
    """1 - F_uv/F_untreated at selected separations (set 1)."""
    untreated = load_paper_table("untreated")
    uv = load_paper_table("uv")
    out = []
    for a in a_values:
        i = int(np.argmin(np.abs(untreated.a_nm - a)))
        if untreated.a_nm[i] != a:
            raise ValidationError(f"separation {a} nm is not tabulated")
        out.append(1.0 - uv.force_set1_pn[i] / untreated.force_set1_pn[i])
    return np.array(out)
