"""Voigt lineshapes in the spectral and delay domain, FWHM composition and
coherence-time integrals.

Widths are FWHM in GHz, delays in ps, coherence times in ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize

from .core import FWHM_PER_SIGMA, DegenerateProfileError, VoigtParams

__all__ = [
    "faddeeva",
    "voigt_eval",
    "voigt_fwhm",
    "numeric_fwhm",
    "g1_voigt",
    "G1Curve",
    "coherence_time",
    "fourier_limit",
    "TruncationError",
]

SQRT_PI = math.sqrt(math.pi)
LN2 = math.log(2.0)


class TruncationError(ValueError):
    """Sampled g1 curve does not decay inside its grid."""


# --------------------------------------------------------------------------
# complex error function
# --------------------------------------------------------------------------


def _weideman_coefficients(n):
    m = 2 * n
    k = np.arange(-m + 1, m)
    L = math.sqrt(n / math.sqrt(2.0))
    t = L * np.tan(k * np.pi / (2 * m))
    f = np.zeros(t.size + 1)
    f[1:] = np.exp(-t * t) * (L * L + t * t)
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return L, np.flipud(a[1 : n + 1])


_WEID_L, _WEID_A = _weideman_coefficients(40)
_CF_TERMS = 12
_CF_RADIUS = 8.0


def faddeeva(z):
    """w(z) = exp(-z^2) erfc(-iz) for Im z >= 0.

    Weideman's rational series (40 terms) inside ``|z| < 8`` and the Laplace
    continued fraction outside. Relative error of Re w stays below 1e-6 for
    Im z >= 1e-8.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    far = np.abs(z) >= _CF_RADIUS
    zn = z[~far]
    if zn.size:
        iz = 1j * zn
        Z = (_WEID_L + iz) / (_WEID_L - iz)
        p = np.polyval(_WEID_A, Z)
        out[~far] = 2.0 * p / (_WEID_L - iz) ** 2 + (1.0 / SQRT_PI) / (_WEID_L - iz)
    zf = z[far]
    if zf.size:
        r = np.zeros_like(zf)
        for k in range(_CF_TERMS, 0, -1):
            r = (0.5 * k) / (zf - r)
        out[far] = 1j / SQRT_PI / (zf - r)
    return out


def _voigt_shape(x, gamma_hom, gamma_inhom):
    """Un-normalized Voigt shape (arbitrary scale) at offsets x (GHz)."""
    x = np.asarray(x, dtype=float)
    hwhm = 0.5 * gamma_hom
    if gamma_inhom == 0:
        return hwhm**2 / (x * x + hwhm**2)
    sigma = gamma_inhom / FWHM_PER_SIGMA
    if gamma_hom == 0:
        return np.exp(-0.5 * (x / sigma) ** 2)
    s2 = sigma * math.sqrt(2.0)
    return faddeeva((x + 1j * hwhm) / s2).real


def voigt_eval(x, p: VoigtParams):
    """Voigt profile with unit peak at ``p.center``, scaled and offset.

    Returns ``amplitude * V(x - center) / V(0) + offset``.
    """
    if p.gamma_hom == 0 and p.gamma_inhom == 0:
        raise DegenerateProfileError("both Voigt widths are zero")
    peak = float(_voigt_shape(0.0, p.gamma_hom, p.gamma_inhom))
    v = _voigt_shape(np.asarray(x, dtype=float) - p.center, p.gamma_hom, p.gamma_inhom) / peak
    return p.amplitude * v + p.offset


def voigt_fwhm(gamma_hom: float, gamma_inhom: float, exact: bool = False) -> float:
    """Total FWHM (GHz) of a Voigt profile.

    Olivero-Longbothum: ``0.5346 fL + sqrt(0.2166 fL^2 + fG^2)``, accurate to
    about 0.02 %. Pure profiles return their own width exactly. With
    ``exact=True`` the half-maximum points are root-found instead.
    """
    if gamma_hom < 0 or gamma_inhom < 0:
        raise ValueError(f"widths must be non-negative, got ({gamma_hom}, {gamma_inhom})")
    if gamma_hom == 0 and gamma_inhom == 0:
        raise DegenerateProfileError("both Voigt widths are zero")
    if gamma_inhom == 0:
        return float(gamma_hom)
    if gamma_hom == 0:
        return float(gamma_inhom)
    if exact:
        return numeric_fwhm(VoigtParams(gamma_hom, gamma_inhom))
    return 0.5346 * gamma_hom + math.sqrt(0.2166 * gamma_hom**2 + gamma_inhom**2)


def numeric_fwhm(p: VoigtParams) -> float:
    """FWHM by bracketing root-find of the half-maximum of ``voigt_eval``."""
    shape = VoigtParams(p.gamma_hom, p.gamma_inhom)
    upper = p.gamma_hom + p.gamma_inhom  # V(upper/2) < 1/2 always

    def half(x):
        return float(voigt_eval(x, shape)) - 0.5

    x = optimize.brentq(half, 0.0, upper, xtol=1e-14 * upper, rtol=4 * np.finfo(float).eps)
    return 2.0 * x


# --------------------------------------------------------------------------
# delay domain
# --------------------------------------------------------------------------


def _g1_closed(tau_ns, gamma_hom, gamma_inhom):
    tau_ns = np.abs(np.asarray(tau_ns, dtype=float))
    return np.exp(-math.pi * gamma_hom * tau_ns) * np.exp(-((math.pi * gamma_inhom * tau_ns) ** 2) / (4 * LN2))


def g1_voigt(tau, p: VoigtParams):
    """|g1(tau)| for a Voigt spectrum; ``tau`` in ps.

    Product of the Lorentzian (exponential) and Gaussian transforms.
    """
    return _g1_closed(np.asarray(tau, dtype=float) * 1e-3, p.gamma_hom, p.gamma_inhom)


@dataclass(frozen=True)
class G1Curve:
    """|g1| either in closed form (``params``) or sampled on ``delays`` (ps).

    A sampled curve whose delays are all non-negative is taken as the
    positive half of a symmetric function.
    """

    params: Optional[VoigtParams] = None
    delays: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.params is None) == (self.delays is None):
            raise ValueError("give either params or sampled delays/values")
        if self.delays is not None:
            d = np.asarray(self.delays, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if d.shape != v.shape or d.ndim != 1 or d.size < 3:
                raise ValueError("sampled curve needs matching 1-d delays/values (>= 3 points)")
            if np.any(np.diff(d) <= 0):
                raise ValueError("delays must be strictly increasing")
            object.__setattr__(self, "delays", d)
            object.__setattr__(self, "values", v)

    @property
    def closed_form(self) -> bool:
        return self.params is not None

    def __call__(self, tau):
        if self.closed_form:
            return g1_voigt(tau, self.params)
        tau = np.asarray(tau, dtype=float)
        if self.delays[0] >= 0:
            tau = np.abs(tau)
        return np.interp(tau, self.delays, self.values, left=0.0, right=0.0)


def _g1_cutoff_ns(gamma_hom, gamma_inhom):
    """Delay (ns) beyond which |g1|^2 < 1e-12."""
    # |g1|^2 = exp(-2 pi gh t - pi^2 gi^2 t^2 / (2 ln2)) = 1e-12
    target = 12 * math.log(10.0)
    a = math.pi**2 * gamma_inhom**2 / (2 * LN2)
    b = 2 * math.pi * gamma_hom
    if a == 0:
        return target / b
    return (-b + math.sqrt(b * b + 4 * a * target)) / (2 * a)


def coherence_time(g1: Union[G1Curve, VoigtParams], full_output: bool = False):
    """T2 = integral of |g1(tau)|^2 over all delays, in ns.

    Closed forms use adaptive quadrature truncated where |g1|^2 < 1e-12.
    Sampled curves use the trapezoid rule with a Richardson correction
    from the half-resolution grid; they must decay below 1e-6 at the grid
    edges. With ``full_output`` returns ``(t2, error_estimate)``.
    """
    if isinstance(g1, VoigtParams):
        g1 = G1Curve(params=g1)
    if g1.closed_form:
        gh, gi = g1.params.gamma_hom, g1.params.gamma_inhom
        cut = _g1_cutoff_ns(gh, gi)
        val, err = integrate.quad(
            lambda t: _g1_closed(t, gh, gi) ** 2, 0.0, cut, epsabs=0.0, epsrel=1e-10, limit=200
        )
        t2, err = 2.0 * val, 2.0 * err
    else:
        d_ns = g1.delays * 1e-3
        sq = g1.values**2
        one_sided = g1.delays[0] >= 0
        edges = [g1.values[-1]] if one_sided else [g1.values[0], g1.values[-1]]
        if max(abs(e) for e in edges) > 1e-6:
            raise TruncationError(
                f"sampled |g1| has not decayed below 1e-6 at the grid edge (edge value {max(map(abs, edges)):.3g})"
            )
        fine = integrate.trapezoid(sq, d_ns)
        coarse = integrate.trapezoid(sq[::2], d_ns[::2]) if d_ns.size >= 5 else fine
        t2 = fine + (fine - coarse) / 3.0
        err = abs(fine - coarse) / 3.0
        if one_sided:
            t2, err = 2 * t2, 2 * err
    return (t2, err) if full_output else t2


def fourier_limit(t1: float):
    """Fourier-limited (T2, linewidth) for radiative lifetime ``t1`` (ns).

    Returns ``(2*t1 [ns], 1/(pi*2*t1) [GHz])``.
    """
    if not t1 > 0:
        raise ValueError(f"t1 must be positive, got {t1}")
    t2_ft = 2.0 * t1
    return t2_ft, 1.0 / (math.pi * t2_ft)
