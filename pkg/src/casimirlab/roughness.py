"""Stochastic surface roughness and geometrical averaging of the force.

A rough surface is a discrete distribution of heights h_i covering area
fractions v_i, measured from the lowest point (min h_i = 0).  The zero
roughness level H0 is the mean height and delta is the rms spread.  The
force between two rough surfaces is the double average of the smooth force
over both height distributions, evaluated at the separation between the
zero roughness levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError

__all__ = [
    "RoughnessDistribution", "derive_levels", "rough_force",
    "rough_force_curve", "ito_plate_roughness", "gold_sphere_roughness",
    "save_distribution", "load_distribution",
]


def derive_levels(fractions, heights) -> tuple[float, float]:
    """Zero level H0 = sum(v h) and rms variance delta of a height table."""
    v = np.asarray(fractions, dtype=float)
    h = np.asarray(heights, dtype=float)
    if v.shape != h.shape or v.ndim != 1 or v.size == 0:
        raise ValidationError("fractions and heights must be matching 1-D arrays")
    if abs(v.sum() - 1.0) > 1e-9:
        raise ValidationError(f"area fractions must sum to 1 (got {v.sum():.12f})")
    if np.any(v < 0.0):
        raise ValidationError("area fractions must be >= 0")
    if np.any(h < 0.0):
        raise ValidationError("heights must be >= 0")
    h0 = float(np.sum(v * h))
    delta = float(np.sqrt(np.sum(v * (h0 - h) ** 2)))
    return h0, delta


@dataclass(frozen=True)
class RoughnessDistribution:
    """Discrete height fractions with derived zero level and variance."""
    fractions: np.ndarray
    heights_nm: np.ndarray
    zero_level_nm: float = field(init=False)
    variance_nm: float = field(init=False)

    def __post_init__(self):
        v = np.asarray(self.fractions, dtype=float)
        h = np.asarray(self.heights_nm, dtype=float)
        object.__setattr__(self, "fractions", v)
        object.__setattr__(self, "heights_nm", h)
        h0, delta = derive_levels(v, h)
        if h.min() != 0.0:
            raise ValidationError("distribution heights are measured from the "
                                  "lowest point: min h must be 0")
        object.__setattr__(self, "zero_level_nm", h0)
        object.__setattr__(self, "variance_nm", delta)

    def __len__(self) -> int:
        return len(self.fractions)

    @staticmethod
    def smooth() -> "RoughnessDistribution":
        """Single zero-height bin: averaging leaves the force unchanged."""
        return RoughnessDistribution(np.array([1.0]), np.array([0.0]))


def _constrained_bell(n_bins: int, h_max: float, target_h0: float,
                      target_delta: float) -> RoughnessDistribution:
    """Discrete bell-shaped distribution matched exactly to H0 and delta.

    Gaussian weights on an even height grid are projected onto the linear
    constraints sum v = 1, sum v h = H0, sum v (h-H0)^2 = delta^2 (minimum
    norm correction), which pins the published levels exactly.
    """
    h = np.linspace(0.0, h_max, n_bins)
    g = np.exp(-0.5 * ((h - target_h0) / target_delta) ** 2)
    g /= g.sum()
    a_mat = np.vstack([np.ones_like(h), h, (h - target_h0) ** 2])
    b = np.array([1.0, target_h0, target_delta ** 2])
    lam = np.linalg.solve(a_mat @ a_mat.T, a_mat @ g - b)
    v = g - a_mat.T @ lam
    if np.any(v < 0.0):
        raise ValidationError("synthetic roughness projection went negative; "
                              "adjust the grid")
    return RoughnessDistribution(v, h)


def ito_plate_roughness() -> RoughnessDistribution:
    """Synthetic 18-bin stand-in pinned to the plate's H0 = 9.54 nm,
    delta = 2.28 nm (the published bin sets are graphical only)."""
    return _constrained_bell(18, 19.0, 9.54, 2.28)


def gold_sphere_roughness() -> RoughnessDistribution:
    """Synthetic 25-bin stand-in pinned to the sphere's H0 = 11.51 nm,
    delta = 3.17 nm."""
    return _constrained_bell(25, 23.0, 11.51, 3.17)


def rough_force(smooth_force: Callable, dist_plate: RoughnessDistribution,
                dist_sphere: RoughnessDistribution, a_nm: float) -> float:
    """Geometrically averaged force between two rough surfaces.

    F(a) = sum_ik v_i v_k F_smooth(a + H0_plate + H0_sphere - h_i - h_k)
    where a is the separation between the zero roughness levels.
    """
    shift0 = dist_plate.zero_level_nm + dist_sphere.zero_level_nm
    h_sum = dist_plate.heights_nm[:, None] + dist_sphere.heights_nm[None, :]
    separations = a_nm + shift0 - h_sum
    if np.any(separations <= 0.0):
        i, k = np.unravel_index(np.argmin(separations), separations.shape)
        raise ValidationError(
            f"non-positive effective separation {separations[i, k]:.3f} nm for "
            f"height pair (h_plate={dist_plate.heights_nm[i]:.2f}, "
            f"h_sphere={dist_sphere.heights_nm[k]:.2f})")
    weights = dist_plate.fractions[:, None] * dist_sphere.fractions[None, :]
    values = np.asarray(smooth_force(separations.ravel()), dtype=float)
    return float(np.sum(weights.ravel() * values))


def rough_force_curve(smooth_force: Callable, dist_plate: RoughnessDistribution,
                      dist_sphere: RoughnessDistribution, separations_nm):
    """rough_force over a grid, evaluating the smooth force once per
    distinct shifted separation (memoized through a shared table)."""
    seps = np.asarray(separations_nm, dtype=float)
    shift0 = dist_plate.zero_level_nm + dist_sphere.zero_level_nm
    h_sum = (dist_plate.heights_nm[:, None] + dist_sphere.heights_nm[None, :]).ravel()
    weights = (dist_plate.fractions[:, None] * dist_sphere.fractions[None, :]).ravel()
    shifted = seps[:, None] + (shift0 - h_sum)[None, :]
    if np.any(shifted <= 0.0):
        raise ValidationError("non-positive effective separation in curve")
    uniq, inverse = np.unique(np.round(shifted, 9), return_inverse=True)
    values = np.asarray(smooth_force(uniq), dtype=float)
    grid_vals = values[inverse].reshape(shifted.shape)
    return grid_vals @ weights


def save_distribution(dist: RoughnessDistribution, path) -> None:
    with open(path, "w") as fh:
        fh.write("# fraction, height_nm\n")
        for v, h in zip(dist.fractions, dist.heights_nm):
            fh.write(f"{v:.9f} {h:.6f}\n")


def load_distribution(path) -> RoughnessDistribution:
    data = np.loadtxt(path, comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValidationError("distribution file must have two columns")
    v, h = data.T
    v = v / v.sum()   # renormalize away the file's rounding
    return RoughnessDistribution(v, h)
