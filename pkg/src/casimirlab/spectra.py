"""Dielectric permittivity models on the real and imaginary frequency axes.

Every model evaluates Im eps(omega) for omega > 0 and eps(i*xi) >= 1 for
xi > 0 (both in eV).  Models carrying a free-carrier term (Drude or plasma)
diverge at xi = 0; instead of evaluating there, callers take the model's
static classification, which encodes how fast eps(i*xi) diverges and what
survives in the xi -> 0 limits the reflection coefficients need.

Conventions:
    Drude       eps(i xi) = 1 + wp^2 / (xi (xi + gamma))
    plasma      eps(i xi) = 1 + wp^2 / xi^2
    oscillator  eps(i xi) = 1 + g0 / (w0^2 + gamma0 xi + xi^2)
with the matching imaginary parts on the real axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .errors import (
    DivergentStaticPermittivityError,
    IncompleteSpectrumError,
    ValidationError,
)
from .quadrature import log_trapezoid_refined

__all__ = [
    "StaticClass", "Drude", "Plasma", "Oscillator", "NinhamParsegian",
    "IdealMetal", "ModelSum", "TabulatedSpectrum", "TabulatedModel",
    "LinearTail", "eval_im_eps", "eval_eps_imaginary_axis",
    "kramers_kronig", "strip_free_carriers",
]


@dataclass(frozen=True)
class StaticClass:
    """Behaviour of eps(i*xi) as xi -> 0.

    order: divergence power p in eps ~ amplitude / xi^p (0 = finite).
    eps0: finite static value (order 0 only, else None).
    amplitude: lim xi^p * (eps(i xi) - 1); equals eps0 - 1 at order 0,
        wp^2/gamma for Drude, wp^2 for plasma.
    eps_xi2: lim xi^2 * eps(i xi); nonzero (wp^2) only for plasma-type
        models, it sets the transverse-electric momentum at zero frequency.
    """
    order: int
    eps0: float | None
    amplitude: float
    eps_xi2: float = 0.0


def _as_array(x):
    return np.asarray(x, dtype=float)


class PermittivityModel:
    """Base class; subclasses implement the two axes and the static limit."""

    has_carriers: bool = False

    def im_eps(self, omega):
        raise NotImplementedError

    def eps_imag_axis(self, xi):
        raise NotImplementedError

    def static_class(self) -> StaticClass:
        raise NotImplementedError

    def _check_positive_omega(self, omega):
        if np.any(_as_array(omega) <= 0.0):
            raise ValidationError("Im eps is evaluated only at omega > 0")

    def _check_xi(self, xi):
        xi = _as_array(xi)
        if np.any(xi < 0.0):
            raise ValidationError("imaginary-axis frequency must be >= 0")
        if self.static_class().order > 0 and np.any(xi == 0.0):
            raise DivergentStaticPermittivityError(
                f"{type(self).__name__} diverges at xi=0; "
                "use static_class() for the zero-frequency term"
            )
        return xi


@dataclass(frozen=True)
class Drude(PermittivityModel):
    """Free carriers with relaxation: wp and gamma in eV."""
    plasma_frequency: float
    relaxation: float

    has_carriers = True

    def __post_init__(self):
        if self.plasma_frequency <= 0.0:
            raise ValidationError("Drude plasma frequency must be > 0")
        if self.relaxation < 0.0:
            raise ValidationError("Drude relaxation must be >= 0")

    def im_eps(self, omega):
        self._check_positive_omega(omega)
        w = _as_array(omega)
        wp, g = self.plasma_frequency, self.relaxation
        return wp * wp * g / (w * (w * w + g * g))

    def eps_imag_axis(self, xi):
        xi = self._check_xi(xi)
        wp, g = self.plasma_frequency, self.relaxation
        return 1.0 + wp * wp / (xi * (xi + g))

    def static_class(self) -> StaticClass:
        wp, g = self.plasma_frequency, self.relaxation
        if g == 0.0:
            return StaticClass(order=2, eps0=None, amplitude=wp * wp,
                               eps_xi2=wp * wp)
        return StaticClass(order=1, eps0=None, amplitude=wp * wp / g)


@dataclass(frozen=True)
class Plasma(PermittivityModel):
    """Dissipationless free carriers: eps(i xi) = 1 + wp^2/xi^2."""
    plasma_frequency: float

    has_carriers = True

    def __post_init__(self):
        if self.plasma_frequency <= 0.0:
            raise ValidationError("plasma frequency must be > 0")

    def im_eps(self, omega):
        self._check_positive_omega(omega)
        return np.zeros_like(_as_array(omega))

    def eps_imag_axis(self, xi):
        xi = self._check_xi(xi)
        wp = self.plasma_frequency
        return 1.0 + wp * wp / (xi * xi)

    def static_class(self) -> StaticClass:
        wp2 = self.plasma_frequency ** 2
        return StaticClass(order=2, eps0=None, amplitude=wp2, eps_xi2=wp2)


@dataclass(frozen=True)
class Oscillator(PermittivityModel):
    """Single damped oscillator: strength g0 (eV^2), width gamma0, center w0."""
    strength: float
    width: float
    center: float

    def __post_init__(self):
        if min(self.strength, self.width, self.center) <= 0.0:
            raise ValidationError("oscillator strength, width and center must be > 0")

    def im_eps(self, omega):
        self._check_positive_omega(omega)
        w = _as_array(omega)
        g0, gm, w0 = self.strength, self.width, self.center
        return g0 * gm * w / ((w * w - w0 * w0) ** 2 + gm * gm * w * w)

    def eps_imag_axis(self, xi):
        xi = self._check_xi(xi)
        g0, gm, w0 = self.strength, self.width, self.center
        return 1.0 + g0 / (w0 * w0 + gm * xi + xi * xi)

    def static_class(self) -> StaticClass:
        amp = self.strength / self.center ** 2
        return StaticClass(order=0, eps0=1.0 + amp, amplitude=amp)


@dataclass(frozen=True)
class NinhamParsegian(PermittivityModel):
    """Two-oscillator (IR + UV) insulator representation."""
    c_ir: float
    c_uv: float
    w_ir: float
    w_uv: float

    def __post_init__(self):
        if min(self.c_ir, self.c_uv, self.w_ir, self.w_uv) <= 0.0:
            raise ValidationError("Ninham-Parsegian parameters must all be > 0")

    def im_eps(self, omega):
        # undamped limit: the absorption is a pair of delta functions, which
        # only matter through their imaginary-axis image below
        self._check_positive_omega(omega)
        return np.zeros_like(_as_array(omega))

    def eps_imag_axis(self, xi):
        xi = self._check_xi(xi)
        x2 = xi * xi
        return (1.0
                + self.c_ir / (1.0 + x2 / self.w_ir ** 2)
                + self.c_uv / (1.0 + x2 / self.w_uv ** 2))

    def static_class(self) -> StaticClass:
        return StaticClass(order=0, eps0=1.0 + self.c_ir + self.c_uv,
                           amplitude=self.c_ir + self.c_uv)


@dataclass(frozen=True)
class IdealMetal(PermittivityModel):
    """Perfect reflector (eps -> infinity at all frequencies)."""

    def im_eps(self, omega):
        raise ValidationError("ideal metal has no finite permittivity")

    def eps_imag_axis(self, xi):
        self._check_xi(xi)
        return np.full_like(_as_array(xi), np.inf)

    def static_class(self) -> StaticClass:
        return StaticClass(order=np.iinfo(np.int32).max, eps0=None,
                           amplitude=np.inf)


@dataclass(frozen=True)
class ModelSum(PermittivityModel):
    """Sum of susceptibilities: eps - 1 adds termwise on both axes."""
    terms: tuple[PermittivityModel, ...]

    def __init__(self, terms: Sequence[PermittivityModel]):
        object.__setattr__(self, "terms", tuple(terms))
        if not self.terms:
            raise ValidationError("ModelSum needs at least one term")
        if any(isinstance(t, IdealMetal) for t in self.terms):
            raise ValidationError("ideal metal cannot be combined additively")

    @property
    def has_carriers(self) -> bool:
        return any(t.has_carriers for t in self.terms)

    def im_eps(self, omega):
        total = self.terms[0].im_eps(omega)
        for t in self.terms[1:]:
            total = total + t.im_eps(omega)
        return total

    def eps_imag_axis(self, xi):
        total = self.terms[0].eps_imag_axis(xi)
        for t in self.terms[1:]:
            total = total + (t.eps_imag_axis(xi) - 1.0)
        return total

    def static_class(self) -> StaticClass:
        classes = [t.static_class() for t in self.terms]
        order = max(c.order for c in classes)
        amp = sum(c.amplitude for c in classes if c.order == order)
        eps_xi2 = sum(c.eps_xi2 for c in classes)
        eps0 = 1.0 + amp if order == 0 else None
        return StaticClass(order=order, eps0=eps0, amplitude=amp,
                           eps_xi2=eps_xi2)


@dataclass(frozen=True)
class LinearTail:
    """Low-frequency closure Im eps = slope * omega (carrier-free spectra)."""
    slope: float

    def __post_init__(self):
        if self.slope < 0.0:
            raise ValidationError("linear tail slope must be >= 0")

    def im_eps(self, omega):
        return self.slope * _as_array(omega)


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Im eps samples on (omega_min, omega_max) plus analytic tails.

    The low tail (Drude or LinearTail) closes the integrand on
    (0, omega_min]; the high tail (Oscillator) closes [omega_max, inf).
    Each tail must be continuous with the adjacent table endpoint to
    within mismatch_tol (relative).
    """
    omega: np.ndarray
    im_eps: np.ndarray
    low_tail: Drude | LinearTail | None = None
    high_tail: Oscillator | None = None
    mismatch_tol: float = 0.05

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        imeps = np.asarray(self.im_eps, dtype=float)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "im_eps", imeps)
        if omega.ndim != 1 or omega.size < 4 or omega.shape != imeps.shape:
            raise ValidationError("spectrum needs matching 1-D omega/im_eps with >= 4 points")
        if omega[0] <= 0.0 or np.any(np.diff(omega) <= 0.0):
            raise ValidationError("omega must be positive and strictly increasing")
        if np.any(imeps < 0.0):
            raise ValidationError("Im eps must be >= 0 everywhere")
        self._check_tail_continuity()

    def _check_tail_continuity(self):
        def mismatch(table_val, tail_val):
            scale = max(abs(table_val), abs(tail_val), 1e-12)
            return abs(table_val - tail_val) / scale

        if self.low_tail is not None:
            m = mismatch(self.im_eps[0], float(self.low_tail.im_eps(self.omega[0])))
            if m > self.mismatch_tol:
                raise ValidationError(
                    f"low tail mismatches table start by {m:.1%} "
                    f"(tolerance {self.mismatch_tol:.0%})")
        if self.high_tail is not None:
            m = mismatch(self.im_eps[-1], float(self.high_tail.im_eps(self.omega[-1])))
            if m > self.mismatch_tol:
                raise ValidationError(
                    f"high tail mismatches table end by {m:.1%} "
                    f"(tolerance {self.mismatch_tol:.0%})")

    def interpolate_im_eps(self, omega):
        """Log-log linear interpolation (power-law segments are exact)."""
        w = _as_array(omega)
        lo, hi = self.omega[0], self.omega[-1]
        if np.any((w < lo * (1 - 1e-9)) | (w > hi * (1 + 1e-9))):
            raise ValidationError("interpolation outside the tabulated interval")
        w = np.clip(w, lo, hi)
        positive = self.im_eps > 0.0
        if positive.all():
            return np.exp(np.interp(np.log(w), np.log(self.omega),
                                    np.log(self.im_eps)))
        return np.interp(w, self.omega, self.im_eps)


def _drude_segment_integral(wp: float, gamma: float, w_hi: float, xi: float) -> float:
    """closed form of int_0^W  wp^2 gamma / ((w^2+gamma^2)(w^2+xi^2)) dw."""
    a2, b2 = gamma * gamma, xi * xi
    if gamma == 0.0:
        # pure plasma has Im eps = 0; nothing to integrate
        return 0.0
    if abs(a2 - b2) > 1e-10 * max(a2, b2):
        term = (np.arctan(w_hi / gamma) / gamma - np.arctan(w_hi / xi) / xi)
        return wp * wp * gamma * term / (b2 - a2)
    # double pole: int dw/(w^2+g^2)^2
    val = w_hi / (2.0 * a2 * (w_hi * w_hi + a2)) + np.arctan(w_hi / gamma) / (2.0 * a2 * gamma)
    return wp * wp * gamma * val


def kramers_kronig(spectrum: TabulatedSpectrum, xi: float,
                   rel_tol: float = 1e-5) -> float:
    """eps(i*xi) = 1 + (2/pi) * int_0^inf w Im eps(w) / (w^2 + xi^2) dw.

    The integral is split into the low tail (closed form / quadrature),
    the tabulated interval (refined log-spaced trapezoid on the
    interpolant) and the high oscillator tail (adaptive quadrature).
    """
    if xi <= 0.0:
        raise ValidationError("kramers_kronig needs xi > 0; the static limit "
                              "is taken from the model classification")
    w_min, w_max = float(spectrum.omega[0]), float(spectrum.omega[-1])
    xi2 = xi * xi

    low = 0.0
    if spectrum.low_tail is None:
        if spectrum.im_eps[0] > 1e-12 * max(spectrum.im_eps.max(), 1.0):
            raise IncompleteSpectrumError(
                "table starts with nonzero Im eps but no low-frequency tail is given")
    elif isinstance(spectrum.low_tail, Drude):
        low = _drude_segment_integral(spectrum.low_tail.plasma_frequency,
                                      spectrum.low_tail.relaxation, w_min, xi)
    else:  # LinearTail: int_0^W s w^2/(w^2+xi^2) dw
        s = spectrum.low_tail.slope
        low = s * (w_min - xi * np.arctan(w_min / xi))

    def table_integrand(w):
        return w * spectrum.interpolate_im_eps(w) / (w * w + xi2)

    middle = log_trapezoid_refined(table_integrand, w_min, w_max, rel_tol=rel_tol)

    high = 0.0
    if spectrum.high_tail is None:
        if spectrum.im_eps[-1] > 1e-12 * max(spectrum.im_eps.max(), 1.0):
            raise IncompleteSpectrumError(
                "table ends with nonzero Im eps but no high-frequency tail is given")
    else:
        tail = spectrum.high_tail

        def tail_integrand(w):
            return w * tail.im_eps(w) / (w * w + xi2)

        high, _ = quad(tail_integrand, w_max, np.inf,
                       epsabs=rel_tol * max(middle + low, 1e-12) * 0.01,
                       epsrel=0.1 * rel_tol, limit=200)

    return 1.0 + (2.0 / np.pi) * (low + middle + high)


@dataclass(frozen=True)
class TabulatedModel(PermittivityModel):
    """Permittivity backed by a tabulated spectrum via Kramers-Kronig."""
    spectrum: TabulatedSpectrum
    kk_rel_tol: float = 1e-5
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def has_carriers(self) -> bool:
        return isinstance(self.spectrum.low_tail, Drude)

    def im_eps(self, omega):
        self._check_positive_omega(omega)
        w = _as_array(omega)
        out = np.empty_like(w)
        table = (w >= self.spectrum.omega[0]) & (w <= self.spectrum.omega[-1])
        if table.any():
            out[table] = self.spectrum.interpolate_im_eps(w[table])
        below = w < self.spectrum.omega[0]
        if below.any():
            if self.spectrum.low_tail is None:
                out[below] = 0.0
            else:
                out[below] = self.spectrum.low_tail.im_eps(w[below])
        above = w > self.spectrum.omega[-1]
        if above.any():
            if self.spectrum.high_tail is None:
                out[above] = 0.0
            else:
                out[above] = self.spectrum.high_tail.im_eps(w[above])
        return out if out.shape else float(out)

    def _eps_scalar(self, xi: float) -> float:
        key = float(xi)
        hit = self._cache.get(key)
        if hit is None:
            hit = kramers_kronig(self.spectrum, key, rel_tol=self.kk_rel_tol)
            self._cache[key] = hit
        return hit

    def eps_imag_axis(self, xi):
        xi_arr = self._check_xi(xi)
        if xi_arr.ndim == 0:
            if float(xi_arr) == 0.0:
                return self.static_class().eps0
            return self._eps_scalar(float(xi_arr))
        return np.array([self.eps_imag_axis(float(x)) for x in xi_arr])

    def static_class(self) -> StaticClass:
        low = self.spectrum.low_tail
        if isinstance(low, Drude):
            if low.relaxation == 0.0:
                wp2 = low.plasma_frequency ** 2
                return StaticClass(order=2, eps0=None, amplitude=wp2, eps_xi2=wp2)
            return StaticClass(order=1, eps0=None,
                               amplitude=low.plasma_frequency ** 2 / low.relaxation)
        eps0 = self._cache.get(0.0)
        if eps0 is None:
            eps0 = self._static_eps0()
            self._cache[0.0] = eps0
        return StaticClass(order=0, eps0=eps0, amplitude=eps0 - 1.0)

    def _static_eps0(self) -> float:
        """eps(0) = 1 + (2/pi) int Im eps(w)/w dw for carrier-free spectra."""
        spec = self.spectrum
        low = 0.0
        if isinstance(spec.low_tail, LinearTail):
            low = spec.low_tail.slope * spec.omega[0]
        middle = log_trapezoid_refined(
            lambda w: spec.interpolate_im_eps(w) / w,
            float(spec.omega[0]), float(spec.omega[-1]), rel_tol=self.kk_rel_tol)
        high = 0.0
        if spec.high_tail is not None:
            tail = spec.high_tail
            high, _ = quad(lambda w: tail.im_eps(w) / w, float(spec.omega[-1]),
                           np.inf, epsrel=0.1 * self.kk_rel_tol, limit=200)
        return 1.0 + (2.0 / np.pi) * (low + middle + high)


# --- module-level operations ------------------------------------------------

def eval_im_eps(model: PermittivityModel, omega):
    """Im eps(omega) of the selected variant (omega > 0, eV)."""
    return model.im_eps(omega)


def eval_eps_imaginary_axis(model: PermittivityModel, xi):
    """eps(i*xi); raises DivergentStaticPermittivityError at xi=0 for carriers."""
    return model.eps_imag_axis(xi)


def strip_free_carriers(model: PermittivityModel) -> PermittivityModel:
    """Remove the Drude/plasma term from a model, leaving the rest untouched.

    On a ModelSum the non-carrier terms are returned identically; on a
    tabulated model the analytic low-tail contribution is subtracted from
    the table and the tail replaced by a matched linear closure.
    """
    if not model.has_carriers:
        warnings.warn("model has no free-carrier term; returning it unchanged")
        return model
    if isinstance(model, (Drude, Plasma)):
        raise ValidationError("cannot strip carriers from a bare carrier model")
    if isinstance(model, ModelSum):
        rest = tuple(t for t in model.terms if not t.has_carriers)
        if not rest:
            raise ValidationError("stripping would leave no terms")
        return ModelSum(rest)
    if isinstance(model, TabulatedModel):
        spec = model.spectrum
        drude = spec.low_tail
        stripped = spec.im_eps - np.asarray(drude.im_eps(spec.omega))
        if np.any(stripped < 0.0):
            warnings.warn("carrier subtraction clipped negative Im eps to zero")
            stripped = np.clip(stripped, 0.0, None)
        if stripped[0] > 0.0:
            slope = stripped[0] / spec.omega[0]
            low: LinearTail | None = LinearTail(slope)
        else:
            low = None
        new_spec = replace(spec, im_eps=stripped, low_tail=low)
        return TabulatedModel(new_spec, kk_rel_tol=model.kk_rel_tol)
    raise ValidationError(f"cannot strip carriers from {type(model).__name__}")
