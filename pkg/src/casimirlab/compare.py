"""Theory bands from alternative high-frequency extrapolations and the
comparison of rough-corrected force curves against measured data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .lifshitz import LayerStack, SphereGeometry, ThermalConfig, force_curve
from .paperdata import PaperDataset
from .roughness import RoughnessDistribution, rough_force_curve

__all__ = ["BandCurve", "theory_band", "ComparisonReport", "compare",
           "smooth_force_interpolator", "rough_corrected_curve"]


def smooth_force_interpolator(stack: LayerStack, geom: SphereGeometry,
                              cfg: ThermalConfig, a_min_nm: float,
                              a_max_nm: float, step_nm: float = 2.0):
    """Cubic-spline surrogate of the smooth force over [a_min, a_max].

    The Lifshitz sum is evaluated on an even grid once; roughness
    averaging then reuses the spline for its several hundred shifted
    separations per point.
    """
    grid = np.arange(a_min_nm, a_max_nm + 0.5 * step_nm, step_nm)
    curve = force_curve(stack, geom, cfg, grid)
    spline = CubicSpline(curve.separation_nm, curve.force_pn)

    def f(a):
        a = np.asarray(a, dtype=float)
        if np.any((a < grid[0] - 1e-9) | (a > grid[-1] + 1e-9)):
            raise ValidationError("separation outside the interpolated range")
        return spline(a)

    return f


def rough_corrected_curve(stack: LayerStack, geom: SphereGeometry,
                          cfg: ThermalConfig, dist_plate: RoughnessDistribution,
                          dist_sphere: RoughnessDistribution, separations_nm,
                          step_nm: float = 2.0) -> np.ndarray:
    """Geometrically roughness-averaged force on a separation grid."""
    seps = np.asarray(separations_nm, dtype=float)
    pad = (dist_plate.zero_level_nm + dist_sphere.zero_level_nm
           - dist_plate.heights_nm.min() - dist_sphere.heights_nm.min())
    lo = seps.min() + dist_plate.zero_level_nm + dist_sphere.zero_level_nm \
        - dist_plate.heights_nm.max() - dist_sphere.heights_nm.max()
    hi = seps.max() + pad
    smooth = smooth_force_interpolator(stack, geom, cfg, max(lo - step_nm, 10.0),
                                       hi + step_nm, step_nm)
    return rough_force_curve(smooth, dist_plate, dist_sphere, seps)


@dataclass
class BandCurve:
    """Theory band: pointwise envelope of alternative model curves."""
    a_nm: np.ndarray
    lo_pn: np.ndarray     # more negative edge
    hi_pn: np.ndarray

    def __post_init__(self):
        if np.any(self.lo_pn > self.hi_pn):
            raise ValidationError("band edges are not ordered")

    def width_pn(self) -> np.ndarray:
        return self.hi_pn - self.lo_pn


def theory_band(stack_lo: LayerStack, stack_hi: LayerStack,
                geom: SphereGeometry, cfg: ThermalConfig,
                dist_plate: RoughnessDistribution,
                dist_sphere: RoughnessDistribution,
                separations_nm, step_nm: float = 2.0) -> BandCurve:
    """Band spanned by two stacks differing in extrapolation parameters."""
    seps = np.asarray(separations_nm, dtype=float)
    f1 = rough_corrected_curve(stack_lo, geom, cfg, dist_plate, dist_sphere,
                               seps, step_nm)
    f2 = rough_corrected_curve(stack_hi, geom, cfg, dist_plate, dist_sphere,
                               seps, step_nm)
    return BandCurve(seps, np.minimum(f1, f2), np.maximum(f1, f2))


@dataclass
class ComparisonReport:
    """Per-separation overlap of the theory band with measured intervals."""
    a_nm: np.ndarray
    theory_lo_pn: np.ndarray
    theory_hi_pn: np.ndarray
    measured_pn: np.ndarray
    measured_err_pn: np.ndarray
    overlap: np.ndarray

    @property
    def overlap_fraction(self) -> float:
        return float(self.overlap.mean())

    def verdict(self) -> str:
        frac = self.overlap_fraction
        if frac >= 0.95:
            return "consistent"
        if frac <= 0.05:
            return "excluded"
        return f"partial overlap ({frac:.0%})"


def compare(band: BandCurve, data: PaperDataset, measurement_set: int = 1
            ) -> ComparisonReport:
    """Overlap test per tabulated point; the band is interpolated onto the
    data grid.  Measured magnitudes are compared as attractive forces."""
    if band.a_nm.size == 0 or data.a_nm.size == 0:
        raise ValidationError("empty grids cannot be compared")
    if measurement_set not in (1, 2):
        raise ValidationError("measurement_set must be 1 or 2")
    a = data.a_nm
    if a.min() < band.a_nm.min() - 1e-9 or a.max() > band.a_nm.max() + 1e-9:
        raise ValidationError("band does not cover the data grid")
    lo = np.interp(a, band.a_nm, band.lo_pn)
    hi = np.interp(a, band.a_nm, band.hi_pn)
    mag = data.force_set1_pn if measurement_set == 1 else data.force_set2_pn
    measured = -mag
    err = data.total_error_pn
    overlap = (measured - err <= hi) & (measured + err >= lo)
    return ComparisonReport(a, lo, hi, measured, err, overlap)
