"""Finite-temperature sphere-plate dispersion force in the proximity-force
approximation for a film-on-substrate plate.

The force is a Matsubara sum over imaginary frequencies xi_l = 2 pi k_B T l
of transverse-wavevector integrals of log(1 - r r exp(-2 a q)) terms, one
per polarization.  The plate reflection combines the vacuum-film and
film-substrate Fresnel coefficients through the film of thickness d.

The l = 0 term is evaluated from each material's static classification
(finite, Drude-like or plasma-like divergence of eps(i xi)), never by
numerically approaching xi = 0: the transverse-electric zero-frequency
behaviour differs qualitatively between those classes and drives the
carrier-treatment comparisons this package exists for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import EV_PER_NM_IN_PN, HBAR_C_EV_NM, K_B_EV_PER_K
from .errors import NumericalError, TruncationWarning, ValidationError
from .quadrature import adaptive_gauss_kronrod
from .spectra import PermittivityModel, StaticClass

__all__ = [
    "LayerStack", "SphereGeometry", "ThermalConfig", "ForceCurve",
    "matsubara_frequency", "fresnel_semispace", "fresnel_semispace_static",
    "layered_reflection", "layered_reflection_static",
    "casimir_force_pfa", "force_curve",
]

_Y_SPAN = 50.0          # exp(-y) < 1e-21 beyond the window
_CONSECUTIVE_SMALL = 3  # Matsubara stopping rule


def matsubara_frequency(temperature_k: float, l: int) -> float:
    """xi_l = 2 pi k_B T l in eV."""
    if temperature_k <= 0.0:
        raise ValidationError("temperature must be > 0")
    if l < 0 or int(l) != l:
        raise ValidationError("Matsubara index must be a nonnegative integer")
    return 2.0 * np.pi * K_B_EV_PER_K * temperature_k * l


@dataclass(frozen=True)
class SphereGeometry:
    """Sphere radius in micrometers (default: the Au-coated probe)."""
    radius_um: float = 101.2

    def __post_init__(self):
        if self.radius_um <= 0.0:
            raise ValidationError("sphere radius must be > 0")

    @property
    def radius_nm(self) -> float:
        return 1e3 * self.radius_um


@dataclass(frozen=True)
class ThermalConfig:
    temperature_k: float = 275.0
    matsubara_rel_tol: float = 1e-6
    kperp_rel_tol: float = 1e-6
    l_max_cap: int = 5000

    def __post_init__(self):
        if self.temperature_k <= 0.0:
            raise ValidationError("temperature must be > 0")
        for name in ("matsubara_rel_tol", "kperp_rel_tol"):
            tol = getattr(self, name)
            if not 0.0 < tol <= 1e-3:
                raise ValidationError(f"{name} must be in (0, 1e-3]")
        if self.l_max_cap < 10:
            raise ValidationError("l_max_cap must be at least 10")


@dataclass(frozen=True)
class LayerStack:
    """sphere | vacuum gap | film (thickness d) | substrate half-space."""
    sphere: PermittivityModel
    film: PermittivityModel
    film_thickness_nm: float
    substrate: PermittivityModel

    def __post_init__(self):
        if self.film_thickness_nm <= 0.0:
            raise ValidationError("film thickness must be > 0")


@dataclass
class ForceCurve:
    """Force vs separation; forces are negative (attraction)."""
    separation_nm: np.ndarray
    force_pn: np.ndarray
    truncated: np.ndarray = field(default=None)

    def __post_init__(self):
        self.separation_nm = np.asarray(self.separation_nm, dtype=float)
        self.force_pn = np.asarray(self.force_pn, dtype=float)
        if self.truncated is None:
            self.truncated = np.zeros(self.separation_nm.shape, dtype=bool)

    def magnitude(self) -> np.ndarray:
        return np.abs(self.force_pn)


def _ratio_guarded(num_a, num_b):
    """(a - b)/(a + b) with infinities mapped to their limits."""
    a = np.asarray(num_a, dtype=float)
    b = np.asarray(num_b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=float)
    inf_a, inf_b = np.isinf(a), np.isinf(b)
    both = inf_a & inf_b
    only_a = inf_a & ~inf_b
    only_b = inf_b & ~inf_a
    ok = ~(inf_a | inf_b)
    out[both] = 0.0
    out[only_a] = 1.0
    out[only_b] = -1.0
    denom = a[ok] + b[ok]
    out[ok] = np.where(denom != 0.0, (a[ok] - b[ok]) / np.where(denom != 0.0, denom, 1.0), 0.0)
    return out


def fresnel_semispace(eps: float, xi_ev: float, kperp):
    """Half-space reflection coefficients (r_TM, r_TE) at xi > 0.

    eps is the material's eps(i*xi); kperp in 1/nm (scalar or array).
    """
    kp = np.asarray(kperp, dtype=float)
    if np.any(kp <= 0.0):
        raise ValidationError("kperp must be > 0")
    kappa = xi_ev / HBAR_C_EV_NM
    q = np.sqrt(kp * kp + kappa * kappa)
    if np.isinf(eps):
        return np.ones_like(q), -np.ones_like(q)
    k = np.sqrt(kp * kp + eps * kappa * kappa)
    return _ratio_guarded(eps * q, k), _ratio_guarded(q, k)


def _static_k(kperp, sc: StaticClass):
    """Zero-frequency layer momentum: sqrt(kperp^2 + lim eps*xi^2 / (hbar c)^2)."""
    if np.isinf(sc.eps_xi2):
        return np.full_like(np.asarray(kperp, dtype=float), np.inf)
    shift = sc.eps_xi2 / HBAR_C_EV_NM ** 2
    kp = np.asarray(kperp, dtype=float)
    return np.sqrt(kp * kp + shift)


_VACUUM_STATIC = StaticClass(order=0, eps0=1.0, amplitude=0.0)


def _static_tm_interface(sc_n: StaticClass, k_n, sc_np: StaticClass, k_np):
    """TM reflection at xi=0 between media n and n' by divergence order."""
    if sc_np.order > sc_n.order:
        return np.ones_like(np.asarray(k_n, dtype=float))
    if sc_np.order < sc_n.order:
        return -np.ones_like(np.asarray(k_n, dtype=float))
    val_n = sc_n.eps0 if sc_n.order == 0 else sc_n.amplitude
    val_np = sc_np.eps0 if sc_np.order == 0 else sc_np.amplitude
    if np.isinf(val_n) and np.isinf(val_np):
        return _ratio_guarded(k_n, k_np)
    return _ratio_guarded(val_np * k_n, val_n * k_np)


def fresnel_semispace_static(static: StaticClass, kperp):
    """(r_TM, r_TE) of a half-space at the zero-frequency term.

    Finite eps gives ((eps-1)/(eps+1), 0); Drude-like divergence gives
    (1, 0); plasma-like divergence gives (1, r_TE < 0) computed with the
    zero-frequency momentum shifted by the plasma frequency.
    """
    kp = np.asarray(kperp, dtype=float)
    if np.any(kp <= 0.0):
        raise ValidationError("kperp must be > 0")
    k = _static_k(kp, static)
    r_tm = _static_tm_interface(_VACUUM_STATIC, kp, static, k)
    r_te = _ratio_guarded(kp, k)
    return r_tm, r_te


def layered_reflection(stack: LayerStack, xi_ev: float, kperp):
    """Plate reflection (r_TM, r_TE) for film-on-substrate at xi > 0."""
    kp = np.asarray(kperp, dtype=float)
    if np.any(kp <= 0.0):
        raise ValidationError("kperp must be > 0")
    kappa = xi_ev / HBAR_C_EV_NM
    eps_f = float(stack.film.eps_imag_axis(xi_ev))
    q = np.sqrt(kp * kp + kappa * kappa)
    if np.isinf(eps_f):
        ones = np.ones_like(q)
        return ones, -ones
    eps_s = float(stack.substrate.eps_imag_axis(xi_ev))
    k_f = np.sqrt(kp * kp + eps_f * kappa * kappa)
    if np.isinf(eps_s):
        k_s = np.full_like(q, np.inf)
    else:
        k_s = np.sqrt(kp * kp + eps_s * kappa * kappa)
    r01_tm = _ratio_guarded(eps_f * q, k_f)
    r01_te = _ratio_guarded(q, k_f)
    r12_tm = _ratio_guarded(eps_s * k_f, eps_f * k_s)
    r12_te = _ratio_guarded(k_f, k_s)
    damp = np.exp(-2.0 * k_f * stack.film_thickness_nm)
    r_tm = (r01_tm + r12_tm * damp) / (1.0 + r01_tm * r12_tm * damp)
    r_te = (r01_te + r12_te * damp) / (1.0 + r01_te * r12_te * damp)
    return r_tm, r_te


def layered_reflection_static(stack: LayerStack, kperp):
    """Plate reflection at the zero-frequency term, by static classification."""
    kp = np.asarray(kperp, dtype=float)
    if np.any(kp <= 0.0):
        raise ValidationError("kperp must be > 0")
    sc_f = stack.film.static_class()
    sc_s = stack.substrate.static_class()
    k_f = _static_k(kp, sc_f)
    k_s = _static_k(kp, sc_s)
    r01_tm = _static_tm_interface(_VACUUM_STATIC, kp, sc_f, k_f)
    r01_te = _ratio_guarded(kp, k_f)
    r12_tm = _static_tm_interface(sc_f, k_f, sc_s, k_s)
    r12_te = _ratio_guarded(k_f, k_s)
    with np.errstate(over="ignore"):
        damp = np.where(np.isinf(k_f), 0.0, np.exp(-2.0 * k_f * stack.film_thickness_nm))
    r_tm = (r01_tm + r12_tm * damp) / (1.0 + r01_tm * r12_tm * damp)
    r_te = (r01_te + r12_te * damp) / (1.0 + r01_te * r12_te * damp)
    return r_tm, r_te


def _sphere_static(stack: LayerStack):
    return stack.sphere.static_class()


def _term_integrand(stack: LayerStack, a_nm: float, xi_ev: float,
                    eps_sphere: float | None):
    """Returns f(y) for int_{y0}^{inf} y [ln(1-..TM) + ln(1-..TE)] dy."""
    kappa = xi_ev / HBAR_C_EV_NM

    if xi_ev == 0.0:
        sc1 = _sphere_static(stack)

        def f(y):
            kp = y / (2.0 * a_nm)
            kp = np.where(kp > 0.0, kp, 1e-300)
            r1_tm, r1_te = fresnel_semispace_static(sc1, kp)
            r2_tm, r2_te = layered_reflection_static(stack, kp)
            e = np.exp(-y)
            return y * (np.log1p(-r1_tm * r2_tm * e) + np.log1p(-r1_te * r2_te * e))

        return f

    def f(y):
        q2 = (y / (2.0 * a_nm)) ** 2
        kp = np.sqrt(np.maximum(q2 - kappa * kappa, 1e-300))
        r1_tm, r1_te = fresnel_semispace(eps_sphere, xi_ev, kp)
        r2_tm, r2_te = layered_reflection(stack, xi_ev, kp)
        e = np.exp(-y)
        return y * (np.log1p(-r1_tm * r2_tm * e) + np.log1p(-r1_te * r2_te * e))

    return f


def _matsubara_term(stack: LayerStack, a_nm: float, xi_ev: float,
                    rel_tol: float) -> float:
    """The y-integral for one Matsubara frequency (dimensionless, <= 0)."""
    if xi_ev == 0.0:
        eps_sphere = None
        y0 = 0.0
    else:
        eps_sphere = float(stack.sphere.eps_imag_axis(xi_ev))
        y0 = 2.0 * a_nm * xi_ev / HBAR_C_EV_NM
    f = _term_integrand(stack, a_nm, xi_ev, eps_sphere)
    return adaptive_gauss_kronrod(f, y0, y0 + _Y_SPAN, rel_tol=rel_tol,
                                  initial_panels=6)


def casimir_force_pfa(stack: LayerStack, geom: SphereGeometry,
                      cfg: ThermalConfig, a_nm: float) -> float:
    """Sphere-plate force at separation a (nm), in pN; negative = attraction.

    The primed Matsubara sum halves the l = 0 term.  Accumulation stops
    once three consecutive terms fall below matsubara_rel_tol of the
    running sum; if the cap l_max_cap is reached first, the remaining sum
    is estimated as a midpoint integral over a continuous Matsubara index
    and a TruncationWarning reports the tail fraction.
    """
    if not 10.0 <= a_nm <= 2000.0:
        raise ValidationError("separation must lie in [10, 2000] nm")
    radius = geom.radius_nm
    if radius / a_nm <= 100.0:
        raise ValidationError(
            f"proximity-force approximation requires R/a > 100 (got {radius / a_nm:.1f})")

    temp = cfg.temperature_k
    xi1 = matsubara_frequency(temp, 1)
    pref = K_B_EV_PER_K * temp * radius / (4.0 * a_nm * a_nm) * EV_PER_NM_IN_PN

    total = 0.5 * _matsubara_term(stack, a_nm, 0.0, cfg.kperp_rel_tol)
    small_run = 0
    capped = True
    for l in range(1, cfg.l_max_cap + 1):
        term = _matsubara_term(stack, a_nm, xi1 * l, cfg.kperp_rel_tol)
        total += term
        if abs(term) < cfg.matsubara_rel_tol * abs(total):
            small_run += 1
            if small_run >= _CONSECUTIVE_SMALL:
                capped = False
                break
        else:
            small_run = 0

    if capped:
        tail = _matsubara_tail(stack, a_nm, cfg, l_last=cfg.l_max_cap)
        frac = abs(tail) / max(abs(total + tail), 1e-300)
        if frac > 0.5:
            raise NumericalError(
                f"Matsubara sum not converged at cap {cfg.l_max_cap}: "
                f"tail fraction {frac:.1%}")
        warnings.warn(
            f"Matsubara cap {cfg.l_max_cap} reached at a={a_nm:g} nm; "
            f"added integral tail estimate ({frac:.2%} of the force)",
            TruncationWarning)
        total += tail

    return pref * total


def _matsubara_tail(stack: LayerStack, a_nm: float, cfg: ThermalConfig,
                    l_last: int) -> float:
    """sum_{l > L} term(l) ~ (1/xi_1) * int_{xi_{L+1/2}}^{inf} term(xi) dxi."""
    xi1 = matsubara_frequency(cfg.temperature_k, 1)
    xi_start = xi1 * (l_last + 0.5)

    def term_of_xi(xi_arr):
        return np.array([
            _matsubara_term(stack, a_nm, float(x), 10.0 * cfg.kperp_rel_tol)
            for x in np.atleast_1d(xi_arr)])

    span = _Y_SPAN * HBAR_C_EV_NM / (2.0 * a_nm)
    integral = adaptive_gauss_kronrod(term_of_xi, xi_start, xi_start + span,
                                      rel_tol=1e-4, initial_panels=6,
                                      max_splits=6)
    return integral / xi1


def force_curve(stack: LayerStack, geom: SphereGeometry, cfg: ThermalConfig,
                separations_nm) -> ForceCurve:
    """Pointwise casimir_force_pfa over an ascending separation grid."""
    seps = np.asarray(separations_nm, dtype=float)
    if seps.size == 0:
        return ForceCurve(seps, np.array([]))
    if np.any(np.diff(seps) <= 0.0):
        raise ValidationError("separations must be sorted strictly ascending")
    forces = np.empty_like(seps)
    truncated = np.zeros(seps.shape, dtype=bool)
    for i, a in enumerate(seps):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncationWarning)
            forces[i] = casimir_force_pfa(stack, geom, cfg, float(a))
        truncated[i] = any(issubclass(w.category, TruncationWarning) for w in caught)
    mags = np.abs(forces)
    if np.any(np.diff(mags) >= 0.0):
        raise NumericalError("force magnitude is not strictly decreasing in a")
    return ForceCurve(seps, forces, truncated)
