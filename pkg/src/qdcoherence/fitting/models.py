"""Model functions for the correlation, lifetime and lineshape fits.

Delays ``tau`` are in ps; timescales of the correlation models in ns.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from ..core import VoigtParams
from ..lineshape import _g1_closed, _voigt_shape

HBT_NAMES = ["a", "b", "tau0", "t_b", "c1", "c2", "c3", "t_c1", "t_c2", "t_c3"]


@dataclass(frozen=True)
class HbtFitParams:
    """Antibunching dip times three bunching factors.

    ``tau0`` in ps, ``t_b`` and ``t_c`` in ns.
    """

    a: float = 1.0
    b: float = 1.0
    tau0: float = 0.0
    t_b: float = 0.5
    c: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    t_c: Tuple[float, float, float] = (10.0, 30.0, 100.0)

    def __post_init__(self):
        if len(self.c) != 3 or len(self.t_c) != 3:
            raise ValueError("need exactly three bunching terms")
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "t_c", tuple(float(v) for v in self.t_c))

    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.tau0, self.t_b, *self.c, *self.t_c], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "HbtFitParams":
        v = [float(x) for x in v]
        return cls(v[0], v[1], v[2], v[3], tuple(v[4:7]), tuple(v[7:10]))

    def canonical(self) -> "HbtFitParams":
        """Bunching terms ordered by timescale, ties by amplitude."""
        order = sorted(range(3), key=lambda i: (self.t_c[i], self.c[i]))
        return replace(self, c=tuple(self.c[i] for i in order), t_c=tuple(self.t_c[i] for i in order))

    def without_bunching(self) -> "HbtFitParams":
        return replace(self, c=(0.0, 0.0, 0.0))


def canonical_order(v) -> list:
    """Index permutation that sorts a parameter vector's bunching terms."""
    order = sorted(range(3), key=lambda i: (v[7 + i], v[4 + i]))
    return [0, 1, 2, 3] + [4 + i for i in order] + [7 + i for i in order]


def hbt_vec(tau, v):
    """Vector form of :func:`hbt_model`; ``v`` ordered as ``HBT_NAMES``."""
    d = np.abs(np.asarray(tau, dtype=float) - v[2]) * 1e-3
    g = v[0] * (1.0 - v[1] * np.exp(-d / v[3]))
    for i in range(3):
        if v[4 + i] != 0.0:
            g = g * (1.0 + v[4 + i] * np.exp(-d / v[7 + i]))
    return g


def hbt_model(tau, p: HbtFitParams):
    """g2(tau) = a (1 - b e^{-|tau-tau0|/T_b}) prod_i (1 + c_i e^{-|tau-tau0|/T_c,i})."""
    return hbt_vec(tau, p.vector())


@dataclass(frozen=True)
class HomFitParams:
    """Base HBT parameters plus interferometer delay (ns), visibility and
    dip timescale (ns). ``t_dip=None`` ties the dip to ``base.t_b``."""

    base: HbtFitParams = field(default_factory=HbtFitParams)
    delta_t: float = 14.3
    v: float = 0.0
    t_dip: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if self.t_dip is not None and not self.t_dip > 0:
            raise ValueError("t_dip must be positive")

    @property
    def dip_time(self) -> float:
        return self.base.t_b if self.t_dip is None else self.t_dip


def hom_cross_vec(tau, v, delta_t_ps):
    tau = np.asarray(tau, dtype=float)
    return 0.25 * (hbt_vec(tau - delta_t_ps, v) + hbt_vec(tau + delta_t_ps, v) + 2.0 * hbt_vec(tau, v))


def hom_co_vec(tau, v, delta_t_ps, vis, t_dip):
    tau = np.asarray(tau, dtype=float)
    d = np.abs(tau - v[2]) * 1e-3
    return hom_cross_vec(tau, v, delta_t_ps) * (1.0 - vis * np.exp(-d / t_dip))


def hom_models(tau, p: HomFitParams, pol: str):
    """Cross: quarter-weighted sum of the HBT function at 0 and +-delta_t.
    Co: the cross curve times ``1 - v exp(-|tau - tau0| / t_dip)``."""
    v = p.base.vector()
    dt = p.delta_t * 1e3
    if pol == "cross":
        return hom_cross_vec(tau, v, dt)
    if pol == "co":
        return hom_co_vec(tau, v, dt, p.v, p.dip_time)
    raise ValueError(f"polarization must be 'co' or 'cross', got {pol!r}")


# --------------------------------------------------------------------------
# lifetime
# --------------------------------------------------------------------------

TCSPC_NAMES = ["t0", "tau_rise", "a1", "tau1", "a2", "tau2", "background"]


@dataclass(frozen=True)
class TcspcFitParams:
    """Times in ns; amplitudes in counts."""

    t0: float = 0.0
    tau_rise: float = 0.5
    a1: float = 1.0
    tau1: float = 1.7
    a2: float = 0.0
    tau2: float = 9.0
    background: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.t0, self.tau_rise, self.a1, self.tau1, self.a2, self.tau2, self.background])

    @classmethod
    def from_vector(cls, v) -> "TcspcFitParams":
        return cls(*[float(x) for x in v])


def tcspc_vec(t, v, rise_on: str = "both"):
    t = np.asarray(t, dtype=float)
    s = np.clip(t - v[0], 0.0, None)
    rise = 1.0 - np.exp(-s / v[1])
    fast = v[2] * np.exp(-s / v[3])
    slow = v[4] * np.exp(-s / v[5])
    if rise_on == "both":
        sig = rise * (fast + slow)
    elif rise_on == "fast":
        sig = rise * fast + np.where(t >= v[0], slow, 0.0)
    else:
        raise ValueError("rise_on must be 'both' or 'fast'")
    return v[6] + sig


def tcspc_model(t, p: TcspcFitParams, rise_on: str = "both"):
    """Background plus rising double-exponential decay starting at t0 (ns)."""
    return tcspc_vec(t, p.vector(), rise_on)


# --------------------------------------------------------------------------
# lineshape fits
# --------------------------------------------------------------------------

_MIN_WIDTH = 1e-12


def scan_vec(x, v):
    """v = [center, amplitude, offset, gamma_hom, gamma_inhom] (GHz)."""
    gh = max(v[3], 0.0)
    gi = max(v[4], 0.0)
    if gh == 0.0 and gi == 0.0:
        gh = _MIN_WIDTH
    x = np.asarray(x, dtype=float) - v[0]
    peak = float(_voigt_shape(0.0, gh, gi))
    return v[1] * _voigt_shape(x, gh, gi) / peak + v[2]


def mi_vec(tau, v):
    """v = [amplitude, gamma_hom, gamma_inhom]; tau in ps."""
    return v[0] * _g1_closed(np.asarray(tau, dtype=float) * 1e-3, max(v[1], 0.0), max(v[2], 0.0))


def voigt_from_scan(v) -> VoigtParams:
    return VoigtParams(max(v[3], 0.0), max(v[4], 0.0), v[0], v[1], v[2])
