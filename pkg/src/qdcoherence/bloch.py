"""Two-level optical Bloch equations driven by a single pulse.

Rotating frame, density-matrix elements ``rho_ee``, ``rho_gg`` and
``rho_eg = re + i*im``. Time in ns inside the solver; pulse durations in ps
at the interface.

The extra decay channel removes excited-state population at a rate that
follows the instantaneous drive, ``gamma_loss * Omega(t) / Omega_pi_peak``,
where ``Omega_pi_peak`` is the peak Rabi frequency of a
pi pulse of the same envelope. ``gamma_loss`` is therefore the loss rate at
the peak of a pi pulse and the damping grows with pulse area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numba
import numpy as np

from .core import FWHM_PER_SIGMA

__all__ = [
    "BlochState",
    "PulseConfig",
    "DecayConfig",
    "Trajectory",
    "IntegratorError",
    "NoMaximumError",
    "evolve",
    "rabi_curve",
    "prep_fidelity",
    "fidelity_of",
    "decay_for_fidelity",
    "fit_rabi",
    "with_area",
]


class IntegratorError(RuntimeError):
    """Step too coarse: population left [-1e-6, 1 + 1e-6]."""


class NoMaximumError(ValueError):
    """Rabi curve has no interior maximum."""


@dataclass(frozen=True)
class BlochState:
    population_e: float = 0.0
    coherence_re: float = 0.0
    coherence_im: float = 0.0
    population_g: Optional[float] = None

    def __post_init__(self):
        if self.population_g is None:
            object.__setattr__(self, "population_g", 1.0 - self.population_e)

    def as_array(self) -> np.ndarray:
        return np.array([self.population_e, self.population_g, self.coherence_re, self.coherence_im])

    @property
    def bloch_norm(self) -> float:
        w = self.population_e - self.population_g
        return math.sqrt(w * w + 4 * self.coherence_re**2 + 4 * self.coherence_im**2)


GROUND = BlochState()


@dataclass(frozen=True)
class PulseConfig:
    """``duration_fwhm`` in ps, ``area`` in rad, ``detuning`` in rad/s."""

    envelope: str = "gaussian"
    duration_fwhm: float = 10.0
    area: float = math.pi
    detuning: float = 0.0

    def __post_init__(self):
        if self.envelope not in ("gaussian", "square"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if not self.duration_fwhm > 0:
            raise ValueError("duration_fwhm must be positive")
        if self.area < 0:
            raise ValueError("area must be non-negative")


@dataclass(frozen=True)
class DecayConfig:
    """Rates in 1/ns."""

    gamma_rad: float = 0.0
    gamma_deph: float = 0.0
    gamma_loss: float = 0.0

    def __post_init__(self):
        if min(self.gamma_rad, self.gamma_deph, self.gamma_loss) < 0:
            raise ValueError("decay rates must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray  # ps
    population_e: np.ndarray
    population_g: np.ndarray
    coherence_re: np.ndarray
    coherence_im: np.ndarray

    @property
    def final(self) -> BlochState:
        return BlochState(
            float(self.population_e[-1]), float(self.coherence_re[-1]),
            float(self.coherence_im[-1]), float(self.population_g[-1]),
        )

    def __getitem__(self, i) -> BlochState:
        return BlochState(
            float(self.population_e[i]), float(self.coherence_re[i]),
            float(self.coherence_im[i]), float(self.population_g[i]),
        )

    def __len__(self):
        return self.t.size


# --------------------------------------------------------------------------
# step tables
# --------------------------------------------------------------------------


def _unit_envelope(envelope, fwhm_ns):
    """Unit-area envelope e(t) (1/ns) and its peak value."""
    if envelope == "gaussian":
        sigma = fwhm_ns / FWHM_PER_SIGMA
        norm = 1.0 / (sigma * math.sqrt(2 * math.pi))
        return (lambda t: norm * np.exp(-0.5 * (t / sigma) ** 2)), norm
    peak = 1.0 / fwhm_ns
    return (lambda t: np.where(np.abs(t) <= fwhm_ns / 2, peak, 0.0)), peak


@lru_cache(maxsize=64)
def _step_table(envelope, fwhm_ps, dt_ps):
    """Per-step sizes and envelope samples at (start, mid, end) of each step.

    The square pulse is integrated piecewise so its edges fall on step
    boundaries; each piece samples its own constant value.
    """
    fwhm = fwhm_ps * 1e-3
    dt = dt_ps * 1e-3
    env, peak = _unit_envelope(envelope, fwhm)
    t0, t1 = -4 * fwhm, 4 * fwhm
    if envelope == "gaussian":
        pieces = [(t0, t1, None)]
    else:
        pieces = [(t0, -fwhm / 2, 0.0), (-fwhm / 2, fwhm / 2, peak), (fwhm / 2, t1, 0.0)]
    hs, e0, em, e1, ts = [], [], [], [], [t0]
    for a, b, const in pieces:
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        h = (b - a) / n
        starts = a + h * np.arange(n)
        hs.append(np.full(n, h))
        if const is None:
            e0.append(env(starts))
            em.append(env(starts + h / 2))
            e1.append(env(starts + h))
        else:
            e0.append(np.full(n, const))
            em.append(np.full(n, const))
            e1.append(np.full(n, const))
        ts.append(starts + h)
    h = np.concatenate(hs)
    table = np.stack([np.concatenate(e0), np.concatenate(em), np.concatenate(e1)], axis=1) / peak
    times = np.concatenate([np.atleast_1d(x) for x in ts]) * 1e3
    return h, table, peak, times


@numba.njit(cache=True)
def _deriv(y, omega, loss, det, grad, gdeph):
    pe, pg, re, im = y[0], y[1], y[2], y[3]
    g2 = 0.5 * grad + gdeph + 0.5 * loss
    out = np.empty(4)
    out[0] = -omega * im - (grad + loss) * pe
    out[1] = omega * im + grad * pe
    out[2] = -det * im - g2 * re
    out[3] = det * re - 0.5 * omega * (pg - pe) - g2 * im
    return out


@numba.njit(cache=True)
def _rk4(y0, omega_peak, loss_peak, h, table, det, grad, gdeph, record):
    """Integrate each row of y0 with its own peak Rabi frequency/loss.

    Returns (final states, trajectory or empty, min population, max population).
    """
    n = y0.shape[0]
    ns = h.size
    traj = np.empty((ns + 1 if record else 0, n, 4))
    final = np.empty((n, 4))
    lo = 1.0
    hi = 0.0
    for j in range(n):
        y = y0[j].copy()
        if record:
            traj[0, j] = y
        om = omega_peak[j]
        lp = loss_peak[j]
        for k in range(ns):
            hk = h[k]
            e0, em, e1 = table[k, 0], table[k, 1], table[k, 2]
            k1 = _deriv(y, om * e0, lp * e0, det, grad, gdeph)
            k2 = _deriv(y + 0.5 * hk * k1, om * em, lp * em, det, grad, gdeph)
            k3 = _deriv(y + 0.5 * hk * k2, om * em, lp * em, det, grad, gdeph)
            k4 = _deriv(y + hk * k3, om * e1, lp * e1, det, grad, gdeph)
            y = y + hk / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if y[0] < lo:
                lo = y[0]
            if y[0] > hi:
                hi = y[0]
            if y[1] < lo:
                lo = y[1]
            if y[1] > hi:
                hi = y[1]
            if record:
                traj[k + 1, j] = y
        final[j] = y
    return final, traj, lo, hi


def _resolve_dt(pulse, dt):
    if dt is None:
        dt = pulse.duration_fwhm / 200.0
    if dt > pulse.duration_fwhm / 50.0 * (1 + 1e-12):
        raise ValueError(f"dt={dt} ps exceeds duration_fwhm/50 = {pulse.duration_fwhm / 50} ps")
    return float(dt)


def _run(states, areas, pulse, decay, dt, record):
    h, table, peak, times = _step_table(pulse.envelope, float(pulse.duration_fwhm), dt)
    areas = np.asarray(areas, dtype=float)
    # table is envelope / peak, so the peak Rabi frequency scales with area
    omega_peak = areas * peak
    loss_peak = decay.gamma_loss * areas / math.pi
    det = pulse.detuning * 1e-9
    final, traj, lo, hi = _rk4(
        np.ascontiguousarray(states, dtype=float), omega_peak, loss_peak, h, table,
        det, decay.gamma_rad, decay.gamma_deph, record,
    )
    if lo < -1e-6 or hi > 1 + 1e-6:
        raise IntegratorError(f"population excursion [{lo:.3g}, {hi:.3g}]; reduce dt")
    return final, traj, times


def evolve(s0: BlochState, pulse: PulseConfig, decay: DecayConfig, dt: Optional[float] = None) -> Trajectory:
    """Integrate the Bloch equations over ``[-4, 4] * duration_fwhm`` with
    fixed-step RK4; ``dt`` in ps, default ``duration_fwhm / 200``."""
    dt = _resolve_dt(pulse, dt)
    _, traj, times = _run(s0.as_array()[None, :], [pulse.area], pulse, decay, dt, True)
    y = traj[:, 0, :]
    return Trajectory(times, y[:, 0], y[:, 1], y[:, 2], y[:, 3])


def rabi_curve(areas, pulse: PulseConfig = PulseConfig(), decay: DecayConfig = DecayConfig(),
               dt: Optional[float] = None) -> np.ndarray:
    """Final excited population after one pulse for each area (rad).

    ``pulse.area`` is ignored; the envelope, duration and detuning are used.
    """
    areas = np.asarray(areas, dtype=float)
    if areas.size > 1 and np.any(np.diff(areas) < 0):
        raise ValueError("areas must be sorted ascending")
    if np.any(areas < 0):
        raise ValueError("areas must be non-negative")
    dt = _resolve_dt(pulse, dt)
    y0 = np.tile(GROUND.as_array(), (areas.size, 1))
    final, _, _ = _run(y0, areas, pulse, decay, dt, False)
    return final[:, 0]


def prep_fidelity(areas, populations) -> float:
    """Population at the first local maximum of a Rabi curve.

    The grid maximum is refined with a parabola through its neighbours.
    """
    x = np.asarray(areas, dtype=float)
    p = np.asarray(populations, dtype=float)
    for i in range(1, p.size - 1):
        if p[i] > p[i - 1] and p[i] >= p[i + 1]:
            break
    else:
        raise NoMaximumError("curve has no interior maximum")
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = p[i - 1], p[i], p[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    C = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
    if A < 0:
        xv = -B / (2 * A)
        if x0 <= xv <= x2:
            return float(np.clip(C - B * B / (4 * A), 0.0, 1.0))
    return float(np.clip(y1, 0.0, 1.0))


def fidelity_of(decay: DecayConfig, pulse: PulseConfig = PulseConfig(), n: int = 241) -> float:
    """prep_fidelity on a dense area grid covering the first maximum."""
    areas = np.linspace(0.0, 2.5 * math.pi, n)
    return prep_fidelity(areas, rabi_curve(areas, pulse, decay))


def decay_for_fidelity(target: float = 0.492, pulse: PulseConfig = PulseConfig(),
                       gamma_rad: float = 1 / 1.71, gamma_deph: float = 0.0) -> DecayConfig:
    """Decay configuration whose pi-pulse fidelity equals ``target``.

    Solves for ``gamma_loss`` with the other rates held fixed.
    """
    from scipy.optimize import brentq

    def f(gl):
        return fidelity_of(DecayConfig(gamma_rad, gamma_deph, gl), pulse) - target

    hi = 10.0
    while f(hi) > 0:
        hi *= 4
        if hi > 1e8:
            raise ValueError("cannot reach target fidelity")
    gl = brentq(f, 0.0, hi, xtol=1e-10, rtol=1e-10)
    return DecayConfig(gamma_rad, gamma_deph, gl)


def with_area(pulse: PulseConfig, area: float) -> PulseConfig:
    return replace(pulse, area=area)


RABI_NAMES = ["scale", "calib", "gamma_loss", "gamma_deph"]


def _rabi_forward(x, v, pulse, gamma_rad, dt):
    order = np.argsort(x, kind="stable")
    areas = np.clip(x[order] * v[1], 0.0, None)
    pops = rabi_curve(areas, pulse, DecayConfig(gamma_rad, max(v[3], 0.0), max(v[2], 0.0)), dt)
    out = np.empty_like(pops)
    out[order] = v[0] * pops
    return out


def fit_rabi(sqrt_power, intensity, pulse: PulseConfig = PulseConfig(), gamma_rad: float = 1 / 1.71,
             fit_deph: bool = False, weight=None, dt: Optional[float] = None):
    """Fit a pulsed Rabi curve with the Bloch solver as forward model.

    ``intensity = scale * rho_ee(calib * sqrt_power)``. ``gamma_loss`` is
    free, ``gamma_deph`` only with ``fit_deph``; ``gamma_rad`` is fixed.
    Derived ``fidelity`` (first-maximum population) carries a propagated
    error. Degenerate data give flags rather than an exception.
    """
    from .fitting.lm import nlls_fit, propagate

    x = np.asarray(sqrt_power, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if x.size < 10:
        raise ValueError("need at least 10 points")
    if dt is None:
        dt = pulse.duration_fwhm / 100.0
    xmax = float(x.max())
    if not xmax > 0:
        raise ValueError("sqrt_power must contain positive values")

    # coarse grid over calibration and loss; scale from linear least squares
    best = None
    for calib in np.linspace(0.5, 6.0, 45) * math.pi / xmax:
        for gl in np.concatenate([[0.0], np.geomspace(1.0, 3000.0, 12)]):
            m = _rabi_forward(x, np.array([1.0, calib, gl, 0.0]), pulse, gamma_rad, dt)
            mm = float(m @ m)
            if mm <= 0:
                continue
            s = float(m @ y) / mm
            sse = float(np.sum((y - s * m) ** 2))
            if best is None or sse < best[0]:
                best = (sse, np.array([max(s, 1e-12), calib, gl, 0.0]))
    p0 = best[1]
    if fit_deph:
        p0[3] = 0.1 * gamma_rad
    span = 10 * math.pi / xmax
    bounds = [(0.0, None), (0.0, span), (0.0, 1e5), (0.0, 1e4)]
    fixed = [False, False, False, not fit_deph]

    def model(xx, v):
        try:
            return _rabi_forward(xx, v, pulse, gamma_rad, dt)
        except IntegratorError:
            # step too stiff for this trial point; LM rejects non-finite steps
            return np.full(xx.shape, np.nan)

    fit = nlls_fit(model, x, y, p0, weight=weight, bounds=bounds, names=RABI_NAMES, fixed=fixed,
                   model_name="rabi", on_degenerate="flag")

    def fid(v):
        return fidelity_of(DecayConfig(gamma_rad, max(v[3], 0.0), max(v[2], 0.0)), pulse)

    try:
        f, s = propagate(fid, fit.values, fit.covariance)
        fit.derived["fidelity"] = {"value": f, "sigma": s}
    except NoMaximumError:
        fit.flags.append("no_maximum")
        fit.derived["fidelity"] = {"value": None, "sigma": None}
    fit.extra.update({"gamma_rad": gamma_rad, "envelope": pulse.envelope,
                      "duration_fwhm_ps": pulse.duration_fwhm})
    return fit
