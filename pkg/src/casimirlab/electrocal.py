"""Sphere-plate electrostatics, synthetic AFM deflection data and the
calibration pipeline recovering the residual potential V0, the optical
lever sensitivity m, the separation on contact z0 and the force-calibration
constant ktilde = k*m.

The electric force between the conducting sphere and plate is
F_el(a, V) = X(a) (V - V0)^2 with the kernel X(a) available both as the
exact bispherical series and as the eighth-order polynomial fit in a/R.

The synthetic data generator reproduces the two systematic effects the
analysis must correct: a constant-rate mechanical drift of the sphere-plate
separation and the finite acquisition rate near the contact point.  The
uncorrected analysis maps piezo position and deflection straight to
separation and shows the characteristic anomalies (a residual potential
that trends with separation, a contact separation that trends with the fit
end point); the corrected analysis estimates the drift from the time rate
of change of contact points at matched applied voltages and removes it.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .constants import EPS0_PN_PER_V2
from .errors import NumericalError, ValidationError

__all__ = [
    "x_kernel_exact", "x_kernel_poly", "electrostatic_force",
    "CalibrationTruth", "SweepSpec", "Sweep", "DeflectionDataset",
    "synthesize_dataset", "default_voltage_ladder",
    "ContactPoint", "detect_contact", "contact_table",
    "estimate_drift_matched_pairs", "correct_systematics",
    "SignalGrid", "build_signal_grid", "fit_parabola_at_separation",
    "ParabolaTable", "fit_parabolas", "fit_contact_and_constant",
    "CalibrationResult", "calibrate", "extract_casimir", "ExtractionResult",
    "save_dataset", "load_dataset",
]

# polynomial kernel coefficients c_{-1} .. c_6
_POLY_C = np.array([0.5, -1.18260, 22.2375, -571.366, 9592.45,
                    -90200.5, 383084.0, -300357.0])


def x_kernel_exact(a_nm: float, radius_um: float = 101.2,
                   rel_tol: float = 1e-8, max_terms: int = 2_000_000) -> float:
    """Exact sphere-plate electrostatic kernel X(a) in pN/V^2 (negative).

    Series over image charges with cosh(alpha) = 1 + a/R; terms are summed
    in blocks until the last block is below rel_tol of the running sum.
    Large n*alpha arguments switch to the asymptotic form of the term to
    avoid sinh overflow.
    """
    if a_nm <= 0.0:
        raise ValidationError("separation must be > 0")
    ratio = a_nm / (1e3 * radius_um)
    alpha = np.arccosh(1.0 + ratio)
    coth_alpha = 1.0 / np.tanh(alpha)

    total = 0.0
    n0 = 1
    block = 4096
    while n0 < max_terms:
        n = np.arange(n0, n0 + block, dtype=float)
        na = n * alpha
        safe = na < 350.0
        term = np.empty_like(n)
        ns, nas = n[safe], na[safe]
        term[safe] = (coth_alpha - ns / np.tanh(nas)) / np.sinh(nas)
        nl, nal = n[~safe], na[~safe]
        # coth -> 1 and 1/sinh -> 2 exp(-n alpha) far out
        term[~safe] = 2.0 * (coth_alpha - nl) * np.exp(-nal)
        total += term.sum()
        if abs(term[-1]) < rel_tol * abs(total) or np.exp(-na[-1]) == 0.0:
            break
        n0 += block
    else:
        raise NumericalError("electrostatic series did not converge")
    return 2.0 * np.pi * EPS0_PN_PER_V2 * total


def x_kernel_poly(a_nm, radius_um: float = 101.2):
    """Polynomial kernel X(a) in pN/V^2, valid for a/R < 0.02."""
    a = np.asarray(a_nm, dtype=float)
    if np.any(a <= 0.0):
        raise ValidationError("separation must be > 0")
    x = a / (1e3 * radius_um)
    if np.any(x >= 0.02):
        raise ValidationError("polynomial kernel valid only for a/R < 0.02")
    powers = sum(c * x ** i for i, c in zip(range(-1, 7), _POLY_C))
    out = -2.0 * np.pi * EPS0_PN_PER_V2 * powers
    return out if out.shape else float(out)


def x_kernel_poly_derivative(a_nm, radius_um: float = 101.2):
    """dX/da in pN/(V^2 nm) for the polynomial kernel."""
    a = np.asarray(a_nm, dtype=float)
    r_nm = 1e3 * radius_um
    x = a / r_nm
    powers = sum(i * c * x ** (i - 1) for i, c in zip(range(-1, 7), _POLY_C) if i != 0)
    out = -2.0 * np.pi * EPS0_PN_PER_V2 * powers / r_nm
    return out if out.shape else float(out)


def electrostatic_force(a_nm, radius_um: float, v_volt, v0_volt: float,
                        kernel: str = "poly"):
    """F_el = X(a) (V - V0)^2 in pN; zero exactly at V = V0."""
    dv = np.asarray(v_volt, dtype=float) - v0_volt
    if kernel == "poly":
        x = x_kernel_poly(a_nm, radius_um)
    elif kernel == "exact":
        x = x_kernel_exact(a_nm, radius_um)
    else:
        raise ValidationError("kernel must be 'poly' or 'exact'")
    out = x * dv * dv
    return out if np.asarray(out).shape else float(out)


# --- synthetic deflection data ------------------------------------------------

@dataclass(frozen=True)
class CalibrationTruth:
    """Ground-truth setup parameters for the synthetic data generator."""
    v0_mv: float = -196.8
    sensitivity_nm_per_v: float = 104.4        # optical lever sensitivity m
    contact_separation_nm: float = 29.5        # z0
    force_constant_nn_per_v: float = 1.45      # ktilde = k * m
    drift_rate_nm_per_s: float = 0.0
    acq_interval_s: float = 1e-3
    sensor_noise_v: float = 0.0053             # tuned to ~0.55 pN variance of the mean
    radius_um: float = 101.2

    def __post_init__(self):
        if self.sensitivity_nm_per_v <= 0.0 or self.force_constant_nn_per_v <= 0.0:
            raise ValidationError("sensitivity and force constant must be > 0")
        if self.contact_separation_nm <= 0.0:
            raise ValidationError("contact separation must be > 0")
        if self.acq_interval_s <= 0.0:
            raise ValidationError("acquisition interval must be > 0")

    @property
    def spring_constant_n_per_m(self) -> float:
        return self.force_constant_nn_per_v / self.sensitivity_nm_per_v


@dataclass(frozen=True)
class SweepSpec:
    """Piezo schedule: approach over the full travel at fixed speed.

    contact_margin_nm is the rig overtravel: the mount is positioned so
    nominal contact sits that far above the end of the piezo range, which
    keeps a usable hard-wall region even when drift moves the surfaces
    apart during the session.
    """
    z_start_nm: float = 2150.0
    speed_nm_per_s: float = 200.0
    settle_s: float = 5.0
    n_repeats: int = 10
    contact_margin_nm: float = 150.0

    def __post_init__(self):
        if self.z_start_nm <= 0.0 or self.speed_nm_per_s <= 0.0:
            raise ValidationError("sweep span and speed must be > 0")
        if not 0.0 <= self.contact_margin_nm < self.z_start_nm:
            raise ValidationError("contact margin must lie inside the travel")
        if self.n_repeats < 1:
            raise ValidationError("need at least one repeat")

    @property
    def duration_s(self) -> float:
        return self.z_start_nm / self.speed_nm_per_s + self.settle_s


@dataclass
class Sweep:
    """One approach curve at a fixed applied voltage."""
    voltage_v: float
    t_s: np.ndarray
    z_piezo_nm: np.ndarray
    s_def_v: np.ndarray

    def validate(self):
        if not (len(self.t_s) == len(self.z_piezo_nm) == len(self.s_def_v)):
            raise ValidationError("sweep arrays must have equal length")
        if np.any(np.diff(self.z_piezo_nm) >= 0.0):
            raise ValidationError("z_piezo must be strictly monotone within a sweep")


@dataclass
class DeflectionDataset:
    sweeps: list
    drift_corrected: bool = False
    drift_rate_nm_per_s: float | None = None

    @property
    def applied_voltages(self) -> np.ndarray:
        return np.unique([s.voltage_v for s in self.sweeps])

    def validate(self, min_voltages: int = 10):
        if len(self.applied_voltages) < min_voltages:
            raise ValidationError(
                f"calibration needs >= {min_voltages} distinct applied voltages")
        for s in self.sweeps:
            s.validate()


def default_voltage_ladder(center_v: float = -0.195,
                           half_spans_v: Sequence[float] = (0.01, 0.03, 0.05, 0.07, 0.09)
                           ) -> np.ndarray:
    """Ten voltages placed symmetrically around a nominal residual potential.

    The symmetric placement guarantees pairs with equal (V - V0)^2 when the
    nominal center is close to the true V0, which the drift estimator needs.
    """
    spans = np.asarray(half_spans_v, dtype=float)
    return np.sort(np.concatenate([center_v - spans, center_v + spans]))


def _dense_separation_grid(z0: float, z_start: float) -> np.ndarray:
    near = np.geomspace(max(z0, 10.5), 130.0, 1400)
    far = np.linspace(130.5, z_start + 120.0, 1800)
    return np.concatenate([near, far])


def synthesize_dataset(truth: CalibrationTruth, casimir_force: Callable,
                       voltages_v: Sequence[float] | None = None,
                       sweep: SweepSpec = SweepSpec(), seed: int = 0) -> DeflectionDataset:
    """Forward-model a full calibration session.

    casimir_force maps separation (nm, ndarray) to force (pN, negative).
    Each sweep solves the quasi-static cantilever equilibrium
    a = z0 + z_piezo + m S + drift*t on the approach branch, snaps to hard
    contact at the fold where the force gradient reaches the spring
    constant, and follows the contact line thereafter.  Gaussian sensor
    noise is added to every deflection sample.
    """
    if voltages_v is None:
        voltages_v = default_voltage_ladder(center_v=round(truth.v0_mv * 1e-3, 3) + 0.002)
    voltages_v = np.asarray(voltages_v, dtype=float)
    rng = np.random.default_rng(seed)

    v0 = truth.v0_mv * 1e-3
    m = truth.sensitivity_nm_per_v
    kt_pn = truth.force_constant_nn_per_v * 1e3      # pN/V
    z0 = truth.contact_separation_nm
    rate = truth.drift_rate_nm_per_s
    speed = sweep.speed_nm_per_s
    step = speed * truth.acq_interval_s

    a_grid = _dense_separation_grid(z0, sweep.z_start_nm)
    f_cas = np.asarray(casimir_force(a_grid), dtype=float)
    x_grid = np.where(a_grid / (1e3 * truth.radius_um) < 0.019,
                      x_kernel_poly(np.minimum(a_grid, 0.019 * 1e3 * truth.radius_um - 1.0),
                                    truth.radius_um), 0.0)
    slow = a_grid / (1e3 * truth.radius_um) >= 0.019
    if slow.any():
        x_grid[slow] = [x_kernel_exact(float(a), truth.radius_um) for a in a_grid[slow]]

    drift_gain = 1.0 - rate / speed
    margin = sweep.contact_margin_nm
    z_samples = np.arange(sweep.z_start_nm, -0.5 * step, -step)

    sweeps = []
    for rep in range(sweep.n_repeats):
        for i, volt in enumerate(voltages_v):
            t0 = (rep * len(voltages_v) + i) * sweep.duration_s
            dv2 = (volt - v0) ** 2
            s_grid = (f_cas + x_grid * dv2) / kt_pn
            z_branch = (a_grid - z0 + margin - m * s_grid
                        - rate * (t0 + sweep.z_start_nm / speed)) / drift_gain
            # valid approach branch: z strictly increasing with a; cut at the fold
            dz = np.diff(z_branch)
            bad = np.flatnonzero(dz <= 0.0)
            cut = bad[-1] + 1 if bad.size else 0
            zb, sb = z_branch[cut:], s_grid[cut:]
            z_snap = zb[0]
            t_samples = t0 + (sweep.z_start_nm - z_samples) / speed
            on_branch = z_samples > z_snap
            s_def = np.empty_like(z_samples)
            s_def[on_branch] = np.interp(z_samples[on_branch], zb, sb)
            wall = ~on_branch
            s_def[wall] = -(z_samples[wall] * drift_gain - margin
                            + rate * (t0 + sweep.z_start_nm / speed)) / m
            if truth.sensor_noise_v > 0.0:
                s_def = s_def + rng.normal(0.0, truth.sensor_noise_v, s_def.shape)
            sweeps.append(Sweep(volt, t_samples, z_samples.copy(), s_def))
    return DeflectionDataset(sweeps)


# --- contact points and drift -------------------------------------------------

@dataclass(frozen=True)
class ContactPoint:
    voltage_v: float
    z_c_nm: float
    t_c_s: float
    s_c_v: float


def _walk_off_line(z, s, coef, sigma, n_start, z_fit):
    """Last index still on the contact line, using a prediction band."""
    n_fit = len(z_fit)
    z_mean = float(z_fit.mean())
    sxx = float(np.sum((z_fit - z_mean) ** 2))
    pred_sigma = sigma * np.sqrt(1.0 + 1.0 / n_fit + (z - z_mean) ** 2 / sxx)
    thresh = np.maximum(6.0 * pred_sigma, 1e-9)
    off = np.abs(s - np.polyval(coef, z)) > thresh
    run = 0
    for idx in range(n_start, len(z)):
        run = run + 1 if off[idx] else 0
        if run >= 3:
            return idx - run
    raise ValidationError("no departure from the contact line found")


def detect_contact(sweep: Sweep, deep_window_nm: float = 8.0) -> ContactPoint:
    """Locate the sphere-plate contact from the hard-wall part of a sweep.

    A line is fitted to the deepest part of the curve (where the sphere
    certainly rides on the plate and the deflection follows the piezo with
    slope -1/m) and extended outward while samples stay inside its
    prediction band; once a rough edge is known the line is refitted on
    the whole wall region and the walk repeated, so the extrapolation
    error does not bias the edge.  The contact point is the midpoint of
    the bracketing sample interval.
    """
    order = np.argsort(sweep.z_piezo_nm)
    z = sweep.z_piezo_nm[order]
    s = sweep.s_def_v[order]
    t = sweep.t_s[order]
    step = float(np.median(np.diff(z)))
    n_deep = int(np.searchsorted(z, z[0] + max(deep_window_nm, 12.0 * step)))
    n_deep = max(n_deep, 12)
    if n_deep >= len(z):
        raise ValidationError("sweep too short for contact detection")

    # the line is refit on 80% of the smallest edge found so far, so the
    # fit window shrinks onto confident wall data and a first pass that
    # overshoots (its short lever arm inflates the prediction band) cannot
    # drag pre-contact samples into later fits
    window = None
    edge = -10
    coef = None
    for _ in range(8):
        n_fit = n_deep if window is None else max(int(0.8 * window), n_deep)
        z_fit, s_fit = z[:n_fit], s[:n_fit]
        coef = np.polyfit(z_fit, s_fit, 1)
        sigma = max(float(np.std(s_fit - np.polyval(coef, z_fit))), 1e-12)
        new_edge = _walk_off_line(z, s, coef, sigma, n_deep, z_fit)
        window = new_edge if window is None else min(window, new_edge)
        if abs(new_edge - edge) <= 1:
            edge = new_edge
            break
        edge = new_edge
    if edge >= len(z) - 1 or edge < 0:
        raise ValidationError("contact line extends to the whole sweep")
    z_c = 0.5 * (z[edge] + z[edge + 1])
    s_c = float(np.polyval(coef, z_c))
    t_c = float(np.interp(z_c, z, t))
    return ContactPoint(sweep.voltage_v, float(z_c), t_c, s_c)


def contact_table(dataset: DeflectionDataset) -> list:
    return [detect_contact(s) for s in dataset.sweeps]


def _contact_regression(contacts: Sequence[ContactPoint],
                        drift_rate: float = 0.0):
    """Fit z_c + drift*t_c = c0 - m*S_c; returns (c0, m, sigma_m)."""
    z = np.array([c.z_c_nm + drift_rate * c.t_c_s for c in contacts])
    s = np.array([c.s_c_v for c in contacts])
    a_mat = np.column_stack([np.ones_like(s), -s])
    coef, res, *_ = np.linalg.lstsq(a_mat, z, rcond=None)
    dof = max(len(z) - 2, 1)
    s2 = float(res[0]) / dof if res.size else 0.0
    cov = s2 * np.linalg.inv(a_mat.T @ a_mat)
    return float(coef[0]), float(coef[1]), float(np.sqrt(max(cov[1, 1], 0.0)))


def estimate_drift_matched_pairs(contacts: Sequence[ContactPoint],
                                 sensitivity_nm_per_v: float | None = None,
                                 pair_rel_tol: float = 0.25) -> float:
    """Drift rate from contact points whose applied voltages give equal
    electrostatic deflection.

    Contacts repeated at the same voltage are exactly matched: their
    contact points can only differ through drift, so the time slope of
    z_c at fixed voltage gives the rate directly.  Without repeats,
    different-voltage pairs with nearly equal measured contact deflection
    are used, compensating the residual deflection difference with the
    lever sensitivity.
    """
    by_v: dict[float, list[ContactPoint]] = {}
    for c in contacts:
        by_v.setdefault(c.voltage_v, []).append(c)
    slopes, weights = [], []
    for group in by_v.values():
        if len(group) < 2:
            continue
        tt = np.array([c.t_c_s for c in group])
        zz = np.array([c.z_c_nm for c in group])
        lever = float(np.sum((tt - tt.mean()) ** 2))
        if lever <= 0.0:
            continue
        slope = float(np.polyfit(tt, zz, 1)[0])
        slopes.append(-slope)
        weights.append(lever)
    if slopes:
        return float(np.average(slopes, weights=weights))

    # no repeats: different-voltage pairs with nearly equal deflection
    if sensitivity_nm_per_v is None:
        _, sensitivity_nm_per_v, _ = _contact_regression(contacts)
    items = sorted(contacts, key=lambda c: c.s_c_v)
    rate = 0.0
    for _ in range(3):
        num = den = 0.0
        n_pairs = 0
        for c1, c2 in zip(items[:-1], items[1:]):
            if c1.voltage_v == c2.voltage_v:
                continue
            scale = max(abs(c1.s_c_v), abs(c2.s_c_v), 1e-9)
            if abs(c1.s_c_v - c2.s_c_v) > pair_rel_tol * scale:
                continue
            dt = c2.t_c_s - c1.t_c_s
            if dt == 0.0:
                continue
            dz = c2.z_c_nm - c1.z_c_nm
            ds = c2.s_c_v - c1.s_c_v
            num += -(dz + sensitivity_nm_per_v * ds) * dt
            den += dt * dt
            n_pairs += 1
        if n_pairs == 0:
            raise ValidationError(
                "cannot estimate drift: no matched applied-voltage pairs "
                "with equal electrostatic deflection")
        rate = num / den
        corrected = [ContactPoint(c.voltage_v, c.z_c_nm, c.t_c_s, c.s_c_v)
                     for c in contacts]
        _, sensitivity_nm_per_v, _ = _contact_regression(corrected, drift_rate=rate)
    return float(rate)


def correct_systematics(dataset: DeflectionDataset) -> DeflectionDataset:
    """Remove the separation drift: z_piezo -> z_piezo + rate*t per sample.

    The rate comes from the matched contact-point rule; contact points are
    re-found on the corrected sweeps by the same interpolation procedure.
    """
    if dataset.drift_corrected:
        return dataset
    contacts = contact_table(dataset)
    rate = estimate_drift_matched_pairs(contacts)
    corrected = [Sweep(s.voltage_v, s.t_s, s.z_piezo_nm + rate * s.t_s, s.s_def_v)
                 for s in dataset.sweeps]
    return DeflectionDataset(corrected, drift_corrected=True,
                             drift_rate_nm_per_s=float(rate))


# --- separation grid and parabola fits -----------------------------------------

@dataclass
class SignalGrid:
    """Deflection signals interpolated to a common relative-separation grid.

    zeta = z_piezo + m*S_def - c0 measures separation relative to contact;
    the absolute separation is a = z0 + zeta with z0 recovered later from
    the parabola curvatures.  repeat_index labels the k-th occurrence of
    each applied voltage so parabolas can be fit per measurement round.
    """
    zeta_nm: np.ndarray
    signals: np.ndarray            # (n_sweeps, n_zeta)
    voltages: np.ndarray           # per sweep
    repeat_index: np.ndarray       # per sweep
    sensitivity_nm_per_v: float
    sensitivity_sigma: float
    contact_intercept_nm: float
    drift_rate_nm_per_s: float | None = None


def build_signal_grid(dataset: DeflectionDataset, zeta_step_nm: float = 1.0,
                      zeta_max_nm: float = 1500.0) -> SignalGrid:
    """Interpolate every sweep's approach branch onto an even zeta grid."""
    contacts = contact_table(dataset)
    c0, m_hat, m_sigma = _contact_regression(contacts)
    starts, stops = [], []
    branches = []
    for sweep, contact in zip(dataset.sweeps, contacts):
        pre = sweep.z_piezo_nm > contact.z_c_nm + 0.75
        z = sweep.z_piezo_nm[pre][::-1]
        s = sweep.s_def_v[pre][::-1]
        zeta = z + m_hat * s - c0
        order = np.argsort(zeta)
        zeta, s = zeta[order], s[order]
        branches.append((zeta, s))
        starts.append(zeta[0])
        stops.append(zeta[-1])
    lo = np.ceil(max(starts) + 1.0)
    hi = min(min(stops) - 1.0, zeta_max_nm)
    if hi - lo < 30.0:
        raise ValidationError("usable approach range is too short")
    grid = np.arange(lo, hi + 0.5 * zeta_step_nm, zeta_step_nm)
    signals = np.vstack([np.interp(grid, zeta, s) for zeta, s in branches])
    seen: dict[float, int] = {}
    repeat = np.empty(len(dataset.sweeps), dtype=int)
    for i, sweep in enumerate(dataset.sweeps):
        repeat[i] = seen.get(sweep.voltage_v, 0)
        seen[sweep.voltage_v] = repeat[i] + 1
    return SignalGrid(
        zeta_nm=grid, signals=signals,
        voltages=np.array([s.voltage_v for s in dataset.sweeps]),
        repeat_index=repeat,
        sensitivity_nm_per_v=m_hat, sensitivity_sigma=m_sigma,
        contact_intercept_nm=c0,
        drift_rate_nm_per_s=dataset.drift_rate_nm_per_s,
    )


@dataclass
class ParabolaTable:
    """Per-separation quadratic fits S(V) = s_cas + beta (V - V0)^2."""
    zeta_nm: np.ndarray
    v0_v: np.ndarray
    beta_per_v: np.ndarray
    s_cas_v: np.ndarray
    sigma_v0: np.ndarray
    sigma_beta: np.ndarray


def _quadratic_design(voltages: np.ndarray):
    v_ref = voltages.mean()
    dv = voltages - v_ref
    return v_ref, np.column_stack([np.ones_like(dv), dv, dv * dv])


def _fit_parabolas_pooled(zeta, signals, volts) -> ParabolaTable:
    v_ref, a_mat = _quadratic_design(volts)
    pinv = np.linalg.pinv(a_mat)
    coef = pinv @ signals                          # (3, n_zeta)
    resid = signals - a_mat @ coef
    dof = max(signals.shape[0] - 3, 1)
    s2 = (resid ** 2).sum(axis=0) / dof
    cov_base = np.linalg.inv(a_mat.T @ a_mat)      # scaled by s2 per zeta
    c0, c1, c2 = coef
    if np.any(np.abs(c2) < 1e-12):
        raise NumericalError("degenerate parabola: zero curvature")
    v0 = v_ref - c1 / (2.0 * c2)
    s_cas = c0 - c1 ** 2 / (4.0 * c2)
    # delta method for the vertex: grad = (0, -1/(2 c2), c1/(2 c2^2))
    var_v0 = s2 * (cov_base[1, 1] / (4 * c2 ** 2)
                   + cov_base[2, 2] * c1 ** 2 / (4 * c2 ** 4)
                   - 2 * cov_base[1, 2] * c1 / (4 * c2 ** 3))
    var_beta = s2 * cov_base[2, 2]
    return ParabolaTable(zeta, v0, c2, s_cas,
                         np.sqrt(np.maximum(var_v0, 0.0)),
                         np.sqrt(np.maximum(var_beta, 0.0)))


def fit_parabolas(grid: SignalGrid) -> ParabolaTable:
    """Quadratic fits S(V) at every separation.

    With repeated measurement rounds the parabola is fit per round and the
    per-round vertices and curvatures are averaged (their scatter gives
    honest uncertainties); a single round falls back to one pooled fit.
    """
    volts = grid.voltages
    if len(np.unique(volts)) < 3:
        raise ValidationError("parabola fit needs >= 3 distinct voltages")
    n_rounds = int(grid.repeat_index.max()) + 1
    counts = np.bincount(grid.repeat_index, minlength=n_rounds)
    balanced = n_rounds >= 2 and np.all(counts == counts[0]) and counts[0] >= 3
    if not balanced:
        return _fit_parabolas_pooled(grid.zeta_nm, grid.signals, volts)

    tables = []
    for r in range(n_rounds):
        sel = grid.repeat_index == r
        if len(np.unique(volts[sel])) < 3:
            return _fit_parabolas_pooled(grid.zeta_nm, grid.signals, volts)
        tables.append(_fit_parabolas_pooled(grid.zeta_nm, grid.signals[sel],
                                            volts[sel]))
    v0 = np.vstack([t.v0_v for t in tables])
    beta = np.vstack([t.beta_per_v for t in tables])
    s_cas = np.vstack([t.s_cas_v for t in tables])
    root_n = np.sqrt(n_rounds)
    return ParabolaTable(grid.zeta_nm,
                         v0.mean(axis=0), beta.mean(axis=0), s_cas.mean(axis=0),
                         v0.std(axis=0, ddof=1) / root_n,
                         beta.std(axis=0, ddof=1) / root_n)


def fit_parabola_at_separation(grid: SignalGrid, zeta_nm: float):
    """Single-separation parabola fit; returns (V0, beta, S_cas, sigma_V0)."""
    idx = int(np.argmin(np.abs(grid.zeta_nm - zeta_nm)))
    if abs(grid.zeta_nm[idx] - zeta_nm) > 0.51 * np.diff(grid.zeta_nm).mean():
        raise ValidationError(f"zeta={zeta_nm} nm lies outside the grid")
    sub = SignalGrid(grid.zeta_nm[idx:idx + 1], grid.signals[:, idx:idx + 1],
                     grid.voltages, grid.repeat_index,
                     grid.sensitivity_nm_per_v, grid.sensitivity_sigma,
                     grid.contact_intercept_nm)
    table = fit_parabolas(sub)
    return (float(table.v0_v[0]), float(table.beta_per_v[0]),
            float(table.s_cas_v[0]), float(table.sigma_v0[0]))


# --- contact separation and calibration constant -------------------------------

@dataclass(frozen=True)
class ContactFit:
    z0_nm: float
    z0_sigma: float
    ktilde_nn_per_v: float
    ktilde_sigma: float
    a_end_nm: float
    residual_rms: float


def fit_contact_and_constant(parabolas: ParabolaTable, radius_um: float,
                             a_end_nm: float = 1000.0, a_start_nm: float = 60.0,
                             z0_init_nm: float = 30.0) -> ContactFit:
    """Fit beta(zeta) = X(zeta + z0)/ktilde for (z0, ktilde).

    The window [a_start, a_end] refers to absolute separation, so it is
    re-selected once after the first z0 estimate.
    """
    zeta = parabolas.zeta_nm
    beta = parabolas.beta_per_v
    sig = np.where(parabolas.sigma_beta > 0, parabolas.sigma_beta, 1.0)

    z0 = z0_init_nm
    result = None
    for _ in range(2):
        mask = (zeta + z0 >= a_start_nm) & (zeta + z0 <= a_end_nm)
        if mask.sum() < 8:
            raise ValidationError("too few separations in the fit window")
        zz, bb, ss = zeta[mask], beta[mask], sig[mask]

        def model(p):
            z0_p, kt_pn = p
            return (x_kernel_poly(zz + z0_p, radius_um) / kt_pn - bb) / ss

        fit = least_squares(model, x0=[z0, 1.4e3], method="lm")
        if not fit.success:
            raise NumericalError(f"contact/constant fit failed: {fit.message}")
        z0 = float(fit.x[0])
        if not 2.0 <= z0 <= 250.0:
            raise NumericalError(f"contact/constant fit diverged (z0={z0:.1f} nm)")
        result = fit
    z0, kt_pn = result.x
    dof = max(len(result.fun) - 2, 1)
    s2 = float(result.fun @ result.fun) / dof
    cov = s2 * np.linalg.inv(result.jac.T @ result.jac)
    return ContactFit(
        z0_nm=float(z0), z0_sigma=float(np.sqrt(max(cov[0, 0], 0.0))),
        ktilde_nn_per_v=float(kt_pn) / 1e3,
        ktilde_sigma=float(np.sqrt(max(cov[1, 1], 0.0))) / 1e3,
        a_end_nm=a_end_nm,
        residual_rms=float(np.sqrt(np.mean(result.fun ** 2))),
    )


def default_a_end_schedule() -> np.ndarray:
    """End points 1000 down to 400 nm in 100 nm steps, then finer below."""
    return np.concatenate([np.arange(1000.0, 399.0, -100.0),
                           np.array([350.0, 300.0, 250.0, 200.0])])


# --- full pipeline --------------------------------------------------------------

@dataclass
class CalibrationResult:
    v0_mv: float
    v0_sigma_mv: float
    sensitivity_nm_per_v: float
    sensitivity_sigma: float
    z0_nm: float
    z0_sigma: float
    ktilde_nn_per_v: float
    ktilde_sigma: float
    drift_rate_nm_per_s: float | None
    corrected: bool
    v0_trend_zscore: float
    a_nm: np.ndarray
    v0_vs_a_mv: np.ndarray
    v0_vs_a_sigma_mv: np.ndarray
    beta_vs_a: np.ndarray
    stability_a_end: np.ndarray
    stability_z0: np.ndarray
    stability_ktilde: np.ndarray

    def v0_is_flat(self, nsigma: float = 2.0, min_fraction: float = 0.9) -> bool:
        """The no-anomaly condition: V0(a) is constant within its errors.

        True when at least min_fraction of the per-separation values lie
        within nsigma of the weighted mean.
        """
        w = 1.0 / np.maximum(self.v0_vs_a_sigma_mv, 1e-9) ** 2
        mean = np.average(self.v0_vs_a_mv, weights=w)
        inside = (np.abs(self.v0_vs_a_mv - mean)
                  <= nsigma * np.maximum(self.v0_vs_a_sigma_mv, 1e-9))
        return bool(inside.mean() >= min_fraction)


def _weighted_trend_zscore(x: np.ndarray, y: np.ndarray, sigma: np.ndarray) -> float:
    w = 1.0 / np.maximum(sigma, 1e-12) ** 2
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    return float(slope * np.sqrt(sxx))


def calibrate(dataset: DeflectionDataset, corrected: bool = True,
              radius_um: float = 101.2, a_start_nm: float = 60.0,
              a_stop_nm: float = 300.0, validate: bool = True) -> CalibrationResult:
    """Run the full electrostatic calibration on a dataset.

    corrected=True applies the drift correction first (the production
    path); corrected=False runs the naive analysis, which exhibits the
    V0(a) and z0(a_end) anomalies on drifted data.
    """
    if validate:
        dataset.validate()
    if corrected:
        dataset = correct_systematics(dataset)
    grid = build_signal_grid(dataset)
    par = fit_parabolas(grid)

    headline = fit_contact_and_constant(par, radius_um, a_end_nm=1000.0,
                                        a_start_nm=a_start_nm)
    schedule = default_a_end_schedule()
    z0_vs_end = np.full_like(schedule, np.nan)
    kt_vs_end = np.full_like(schedule, np.nan)
    for i, a_end in enumerate(schedule):
        try:
            fit = fit_contact_and_constant(par, radius_um, a_end_nm=float(a_end),
                                           a_start_nm=a_start_nm,
                                           z0_init_nm=headline.z0_nm)
            z0_vs_end[i] = fit.z0_nm
            kt_vs_end[i] = fit.ktilde_nn_per_v
        except (ValidationError, NumericalError):
            continue

    a_abs = par.zeta_nm + headline.z0_nm
    window = (a_abs >= a_start_nm) & (a_abs <= a_stop_nm)
    v0_w = par.v0_v[window]
    sig_w = np.maximum(par.sigma_v0[window], 1e-6)
    v0_mean = float(np.average(v0_w, weights=1.0 / sig_w ** 2))
    v0_sigma = float(np.std(v0_w, ddof=1)) if v0_w.size > 1 else float(sig_w[0])
    trend = _weighted_trend_zscore(a_abs[window], v0_w, sig_w)

    return CalibrationResult(
        v0_mv=1e3 * v0_mean, v0_sigma_mv=1e3 * v0_sigma,
        sensitivity_nm_per_v=grid.sensitivity_nm_per_v,
        sensitivity_sigma=grid.sensitivity_sigma,
        z0_nm=headline.z0_nm, z0_sigma=headline.z0_sigma,
        ktilde_nn_per_v=headline.ktilde_nn_per_v,
        ktilde_sigma=headline.ktilde_sigma,
        drift_rate_nm_per_s=grid.drift_rate_nm_per_s,
        corrected=corrected,
        v0_trend_zscore=trend,
        a_nm=a_abs[window],
        v0_vs_a_mv=1e3 * v0_w,
        v0_vs_a_sigma_mv=1e3 * sig_w,
        beta_vs_a=par.beta_per_v[window],
        stability_a_end=schedule,
        stability_z0=z0_vs_end,
        stability_ktilde=kt_vs_end,
    )


# --- force extraction -----------------------------------------------------------

@dataclass
class ExtractionResult:
    a_nm: np.ndarray
    forces_pn: np.ndarray          # (n_sweeps, n_a) individual values
    mean_force_pn: np.ndarray

    @property
    def n_values_per_separation(self) -> int:
        return self.forces_pn.shape[0]


def extract_casimir(dataset: DeflectionDataset, calib: CalibrationResult,
                    radius_um: float = 101.2, a_start_nm: float = 60.0,
                    a_stop_nm: float = 300.0) -> ExtractionResult:
    """F(a) = ktilde * S_def(a, V_i) - F_el(a, V_i) for every sweep.

    Expects the drift-corrected dataset and a completed calibration;
    returns the individual per-sweep values (10 voltages x repeats) and
    their mean at each separation.
    """
    for name in ("ktilde_nn_per_v", "v0_mv", "z0_nm"):
        if getattr(calib, name) is None or not np.isfinite(getattr(calib, name)):
            raise ValidationError(f"calibration is missing {name}")
    if calib.corrected and not dataset.drift_corrected:
        dataset = correct_systematics(dataset)
    grid = build_signal_grid(dataset)
    a_abs = grid.zeta_nm + calib.z0_nm
    window = (a_abs >= a_start_nm) & (a_abs <= a_stop_nm)
    a_sel = a_abs[window]
    kt_pn = calib.ktilde_nn_per_v * 1e3
    x_sel = x_kernel_poly(a_sel, radius_um)
    dv2 = (grid.voltages - 1e-3 * calib.v0_mv) ** 2
    f_el = dv2[:, None] * x_sel[None, :]
    forces = kt_pn * grid.signals[:, window] - f_el
    return ExtractionResult(a_nm=a_sel, forces_pn=forces,
                            mean_force_pn=forces.mean(axis=0))


# --- dataset file round trip ----------------------------------------------------

_DATASET_HEADER = "voltage_mV, t_s, z_piezo_nm, S_def_V"


def save_dataset(dataset: DeflectionDataset, path) -> None:
    """Text table with one row per sample; sweeps are contiguous blocks."""
    with open(path, "w") as fh:
        fh.write(f"# {_DATASET_HEADER}\n")
        for sweep in dataset.sweeps:
            for t, z, s in zip(sweep.t_s, sweep.z_piezo_nm, sweep.s_def_v):
                fh.write(f"{1e3 * sweep.voltage_v:.6f} {t:.6f} {z:.6f} {s:.8f}\n")


def load_dataset(path) -> DeflectionDataset:
    """Parse the save_dataset format; sweep boundaries are piezo restarts."""
    data = np.loadtxt(path, comments="#")
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValidationError("dataset file must have 4 columns")
    v_mv, t, z, s = data.T
    breaks = np.flatnonzero(np.diff(z) > 0.0) + 1
    sweeps = []
    for chunk in np.split(np.arange(len(t)), breaks):
        volts = v_mv[chunk]
        if np.ptp(volts) > 1e-9:
            raise ValidationError("voltage changed inside a sweep block")
        sweeps.append(Sweep(1e-3 * volts[0], t[chunk], z[chunk], s[chunk]))
    return DeflectionDataset(sweeps)
