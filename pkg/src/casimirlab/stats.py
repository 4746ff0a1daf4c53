"""Random, systematic and total experimental error budgets at 95% confidence.

The random error is the variance of the mean of the individual force
values scaled by the Student coefficient (the conventional rounded t = 2
for 100 samples, with the exact value behind a flag).  Systematic errors
combine the instrument floor of the total-force measurement with the
separation-uncertainty error of the subtracted electric force; components
are added in quadrature, and random and systematic combine in quadrature
to the total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import t as student_t

from .electrocal import x_kernel_poly_derivative
from .errors import NumericalError, ValidationError

__all__ = [
    "random_error", "combine_errors", "relative_error_report",
    "ForceHistogram", "histogram_and_gauss",
    "SystematicFloor", "calibrate_systematic_floor", "ErrorBudget",
    "electric_force_systematic", "build_error_budget",
]

CONFIDENCE = 0.95


def random_error(samples, confidence: float = CONFIDENCE,
                 exact_student: bool = False) -> float:
    """Random error of the mean force from n individual values.

    sigma is the variance of the mean (standard error); the 95% interval
    uses t = 2 by convention, or the exact Student quantile when
    exact_student is set.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValidationError("random error needs at least two samples")
    sigma = x.std(ddof=1) / np.sqrt(x.size)
    if exact_student:
        factor = float(student_t.ppf(0.5 + confidence / 2.0, x.size - 1))
    elif confidence == CONFIDENCE:
        factor = 2.0
    else:
        factor = float(student_t.ppf(0.5 + confidence / 2.0, x.size - 1))
    return float(factor * sigma)


def combine_errors(random_pn: float, systematic_components_pn) -> tuple[float, float]:
    """Quadrature over systematic components, then with the random error.

    Returns (systematic total, grand total).
    """
    comps = np.asarray(systematic_components_pn, dtype=float)
    if random_pn < 0.0 or np.any(comps < 0.0):
        raise ValidationError("error components must be >= 0")
    sys_total = float(np.sqrt(np.sum(comps ** 2)))
    return sys_total, float(np.hypot(random_pn, sys_total))


def relative_error_report(separation_nm, force_pn, total_error_pn):
    """Rows (a, |F|, total, total/|F|); zero-force rows are dropped with a note."""
    a = np.asarray(separation_nm, dtype=float)
    f = np.abs(np.asarray(force_pn, dtype=float))
    e = np.asarray(total_error_pn, dtype=float)
    keep = f > 0.0
    rows = np.column_stack([a[keep], f[keep], e[keep], e[keep] / f[keep]])
    notes = [f"separation {x:g} nm skipped: zero force" for x in a[~keep]]
    return rows, notes


@dataclass(frozen=True)
class ForceHistogram:
    bin_edges_pn: np.ndarray
    fractions: np.ndarray
    gauss_mean_pn: float
    gauss_sigma_pn: float


def histogram_and_gauss(samples, bin_width_pn: float) -> ForceHistogram:
    """Normalized histogram plus the maximum-likelihood Gaussian fit."""
    x = np.asarray(samples, dtype=float)
    if x.size < 30:
        raise ValidationError("histogram needs at least 30 samples")
    if bin_width_pn <= 0.0:
        raise ValidationError("bin width must be > 0")
    sigma = float(x.std(ddof=0))
    if sigma == 0.0:
        raise NumericalError("degenerate samples: zero spread")
    lo = bin_width_pn * np.floor(x.min() / bin_width_pn)
    hi = bin_width_pn * np.ceil(x.max() / bin_width_pn)
    edges = np.arange(lo, hi + 0.5 * bin_width_pn, bin_width_pn)
    counts, edges = np.histogram(x, bins=edges)
    return ForceHistogram(edges, counts / x.size, float(x.mean()), sigma)


@dataclass(frozen=True)
class SystematicFloor:
    """Instrument floor of the total-force error: base + short-range term.

    floor(a) = base_pn + amplitude_pn * (60 nm / a)^power
    """
    base_pn: float
    amplitude_pn: float
    power: float

    def __call__(self, a_nm):
        a = np.asarray(a_nm, dtype=float)
        out = self.base_pn + self.amplitude_pn * (60.0 / a) ** self.power
        return out if out.shape else float(out)


def electric_force_systematic(a_nm, radius_um: float, voltages_v, v0_v: float,
                              delta_a_nm: float):
    """|dF_el/da| * (separation error), averaged over the applied voltages."""
    dv2 = np.mean((np.asarray(voltages_v, dtype=float) - v0_v) ** 2)
    slope = np.abs(x_kernel_poly_derivative(a_nm, radius_um)) * dv2
    return slope * delta_a_nm


def calibrate_systematic_floor(a_nm, total_target_pn, random_pn: float,
                               el_systematic_pn) -> SystematicFloor:
    """Fit the floor parameters so the combined totals hit published values.

    Minimizes the worst-case deviation of sqrt(random^2 + el^2 + floor^2)
    from the target totals over the tabulated separations.
    """
    a = np.asarray(a_nm, dtype=float)
    target = np.asarray(total_target_pn, dtype=float)
    el = np.asarray(el_systematic_pn, dtype=float)
    backed = target ** 2 - random_pn ** 2 - el ** 2
    if np.any(backed <= 0.0):
        raise ValidationError("published totals are smaller than the other components")
    floor_target = np.sqrt(backed)

    def residual(p):
        base, amp, power = p
        model = base + amp * (60.0 / a) ** power
        combined = np.sqrt(random_pn ** 2 + el ** 2 + model ** 2)
        return combined - target

    fit = least_squares(residual, x0=[floor_target[-1], 1.0, 1.5],
                        bounds=([0.0, 0.0, 0.2], [10.0, 10.0, 6.0]))
    if not fit.success:
        raise NumericalError("systematic floor calibration failed")
    # polish toward minimax with iteratively reweighted least squares
    p = fit.x
    for _ in range(40):
        r = residual(p)
        w = np.maximum(np.abs(r), 1e-6) ** 0.5
        fit = least_squares(lambda q: residual(q) * w, x0=p,
                            bounds=([0.0, 0.0, 0.2], [10.0, 10.0, 6.0]))
        if not fit.success or np.allclose(fit.x, p, rtol=1e-10, atol=1e-12):
            p = fit.x
            break
        p = fit.x
    return SystematicFloor(base_pn=float(p[0]), amplitude_pn=float(p[1]),
                           power=float(p[2]))


@dataclass
class ErrorBudget:
    """Per-separation error decomposition at 95% confidence."""
    a_nm: np.ndarray
    random_pn: np.ndarray
    sys_floor_pn: np.ndarray
    sys_electric_pn: np.ndarray
    sys_total_pn: np.ndarray
    total_pn: np.ndarray
    confidence: float = CONFIDENCE

    def validate(self):
        if np.any(self.total_pn + 1e-12 < np.maximum(self.random_pn, self.sys_total_pn)):
            raise ValidationError("total error smaller than a component")
        quad = np.hypot(self.random_pn, self.sys_total_pn)
        if not np.allclose(self.total_pn, quad, rtol=1e-9, atol=1e-12):
            raise ValidationError("total error is not the quadrature combination")


def build_error_budget(a_nm, random_pn: float, floor: SystematicFloor,
                       radius_um: float, voltages_v, v0_v: float,
                       delta_a_nm: float) -> ErrorBudget:
    a = np.asarray(a_nm, dtype=float)
    el = np.asarray(electric_force_systematic(a, radius_um, voltages_v, v0_v,
                                              delta_a_nm))
    fl = np.asarray(floor(a))
    rand = np.full_like(a, random_pn)
    sys_total = np.hypot(fl, el)
    total = np.hypot(rand, sys_total)
    budget = ErrorBudget(a, rand, fl, el, sys_total, total)
    budget.validate()
    return budget
