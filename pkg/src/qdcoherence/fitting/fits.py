"""Experiment-level fits: HBT, HOM, TCSPC, resonance scan, Michelson
visibility.

Count data use Poisson weights ``1 / max(counts, 1)`` (scaled to g2 units
for histograms); visibility data are weighted uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from ..core import CoherenceSummary, FitResult, Histogram, VoigtParams
from ..correlator import convolve_irf
from ..lineshape import coherence_time, fourier_limit, voigt_fwhm
from .lm import DegenerateFitError, nlls_fit, propagate
from .models import (
    HBT_NAMES,
    TCSPC_NAMES,
    HbtFitParams,
    canonical_order,
    hbt_vec,
    hom_co_vec,
    hom_cross_vec,
    mi_vec,
    scan_vec,
    tcspc_vec,
)

__all__ = [
    "fit_hbt",
    "fit_hom",
    "fit_tcspc",
    "fit_scan",
    "fit_mi",
    "visibility",
    "VisibilityUndefinedError",
    "HomFit",
    "hbt_initial_guess",
]

LN2 = math.log(2.0)


class VisibilityUndefinedError(ZeroDivisionError):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _histogram_xyw(hist: Histogram):
    if hist.norm is None:
        raise ValueError("histogram must be normalized before fitting")
    tau = hist.tau
    g2 = hist.g2
    w = 1.0 / (hist.norm**2 * np.maximum(hist.counts, 1))
    return tau, g2, w


def _irf_wrapped(bare, irf_fwhm, centers, halfwidth):
    """Model ``(x, v) -> y`` that applies the IRF only near the kinks.

    Far from the centers the IRF changes the model by ~(sigma/T)^2 of the
    slowest curvature scale, below the statistical resolution of any
    realistic histogram.
    """
    if irf_fwhm <= 0:
        return bare

    def model(x, v):
        y = np.array(bare(x, v), dtype=float)
        hw = halfwidth(v)
        mask = np.zeros(x.shape, bool)
        for c in centers(v):
            mask |= np.abs(x - c) < hw
        if mask.any():
            y[mask] = convolve_irf(lambda t: bare(t, v), irf_fwhm)(x[mask])
        return y

    return model


def _smooth(y, n=5):
    k = np.ones(n) / n
    return np.convolve(y, k, mode="same")


def _permute(fit: FitResult, order) -> FitResult:
    fit.values = fit.values[order]
    fit.covariance = fit.covariance[np.ix_(order, order)]
    return fit


def _derived(fit: FitResult, name, fn):
    v, s = propagate(fn, fit.values, fit.covariance)
    fit.derived[name] = {"value": v, "sigma": s}
    return v, s


# --------------------------------------------------------------------------
# HBT
# --------------------------------------------------------------------------


def hbt_initial_guess(tau, g2, n_bunching: int = 3, side_delays: Sequence[float] = ()) -> HbtFitParams:
    """Deterministic start values for the HBT model.

    a from the far wings; tau0 at the smoothed minimum; T_b from the dip
    half-recovery delay; bunching terms from a non-negative exponential
    decomposition of the folded wing on a log-time grid, merged into at
    most ``n_bunching`` clusters.
    """
    tau = np.asarray(tau, float)
    g2 = np.asarray(g2, float)
    window = np.abs(tau).max()
    bin_ps = float(np.median(np.diff(tau))) if tau.size > 1 else 1.0
    far = np.abs(tau) >= 0.8 * window
    a0 = float(g2[far].mean()) if far.any() else float(np.median(g2))
    if not a0 > 0:
        a0 = 1.0

    sm = _smooth(g2, 5 if tau.size > 50 else 1)
    central = np.abs(tau) < min(20_000.0, window / 4)
    idx = np.flatnonzero(central)
    i_min = idx[np.argmin(sm[idx])]
    tau0 = float(tau[i_min])
    g_min = float(sm[i_min])
    d = np.abs(tau - tau0)
    near = d < 10_000.0
    g_peak = float(sm[near].max())
    half = 0.5 * (g_min + g_peak)
    rises = []
    for side in (1, -1):
        sel = np.flatnonzero((np.sign(tau - tau0) == side) & near)
        sel = sel[np.argsort(d[sel])]
        above = sel[sm[sel] >= half]
        if above.size:
            rises.append(d[above[0]])
    r = float(np.mean(rises)) if rises else 500.0
    t_b0 = float(np.clip(r / LN2 * 1e-3, max(bin_ps * 1e-3, 1e-3), 10.0))

    c0, tc0 = [], []
    if n_bunching > 0:
        dmin = max(5 * t_b0 * 1e3, 2 * bin_ps, 1000.0)
        mask = d >= dmin
        for sd in side_delays:
            mask &= np.abs(d - sd) > max(5 * t_b0 * 1e3, 2 * bin_ps)
        dd = d[mask] * 1e-3
        yy = g2[mask] / a0 - 1.0
        if dd.size > 10:
            edges = np.geomspace(dd.min(), dd.max() * (1 + 1e-9), 61)
            which = np.digitize(dd, edges) - 1
            xs, ys = [], []
            for k in range(60):
                sel = which == k
                if sel.any():
                    xs.append(dd[sel].mean())
                    ys.append(yy[sel].mean())
            xs, ys = np.array(xs), np.array(ys)
            grid = np.geomspace(max(2 * t_b0, 0.3), max(dd.max() / 2, 1.0), 40)
            basis = np.exp(-xs[:, None] / grid[None, :])
            amp, _ = nnls(basis, ys)
            clusters = []
            k = 0
            while k < amp.size:
                if amp[k] > 0:
                    j = k
                    while j + 1 < amp.size and amp[j + 1] > 0:
                        j += 1
                    a = amp[k : j + 1]
                    clusters.append([a.sum(), float(np.exp(np.sum(a * np.log(grid[k : j + 1])) / a.sum()))])
                    k = j + 1
                else:
                    k += 1
            clusters = [c for c in clusters if c[0] > 1e-3]
            while len(clusters) > n_bunching:
                gaps = [math.log(clusters[i + 1][1] / clusters[i][1]) for i in range(len(clusters) - 1)]
                i = int(np.argmin(gaps))
                c1, c2 = clusters[i], clusters[i + 1]
                s = c1[0] + c2[0]
                clusters[i : i + 2] = [[s, math.exp((c1[0] * math.log(c1[1]) + c2[0] * math.log(c2[1])) / s)]]
            for amp_i, t_i in clusters:
                c0.append(float(amp_i))
                tc0.append(float(t_i))
        while len(c0) < n_bunching:
            base = tc0[-1] * 4 if tc0 else 5.0
            c0.append(0.02)
            tc0.append(base)
    while len(c0) < 3:
        c0.append(0.0)
        tc0.append((tc0[-1] * 4) if tc0 else 5.0)

    bunch0 = float(np.prod([1 + c for c in c0]))
    b0 = float(np.clip(1.0 - g_min / (a0 * bunch0), 0.0, 1.0))
    return HbtFitParams(a0, b0, tau0, t_b0, tuple(c0[:3]), tuple(tc0[:3])).canonical()


def _hbt_bounds(tau):
    return [
        (0.0, None), (0.0, 1.0), (float(tau.min()), float(tau.max())), (1e-3, None),
        (0.0, None), (0.0, None), (0.0, None), (1e-3, None), (1e-3, None), (1e-3, None),
    ]


def _core_halfwidth(irf_fwhm):
    sigma = irf_fwhm / 2.3548200450309493
    return lambda v: 10 * sigma + 12 * v[3] * 1e3


def fit_hbt(hist: Histogram, irf_fwhm: float = 0.0, init: Optional[HbtFitParams] = None,
            n_bunching: int = 3) -> FitResult:
    """Fit the HBT model (convolved with a Gaussian IRF of FWHM
    ``irf_fwhm`` ps) to a normalized histogram.

    Derived: ``g2_raw0`` (convolved model at tau0) and ``g2_decon0`` (bare
    model at tau0), each with a propagated 1-sigma error.
    """
    tau, y, w = _histogram_xyw(hist)
    if init is None:
        init = hbt_initial_guess(tau, y, n_bunching)
    p0 = init.canonical().vector()
    fixed = np.zeros(10, bool)
    for i in range(n_bunching, 3):
        p0[4 + i] = 0.0
        fixed[4 + i] = fixed[7 + i] = True
    model = _irf_wrapped(hbt_vec, irf_fwhm, lambda v: [v[2]], _core_halfwidth(irf_fwhm))
    fit = nlls_fit(model, tau, y, p0, weight=w, bounds=_hbt_bounds(tau), names=HBT_NAMES,
                   fixed=fixed, model_name="hbt")
    _permute(fit, canonical_order(fit.values))
    _hbt_derived(fit, irf_fwhm)
    fit.extra["irf_fwhm_ps"] = irf_fwhm
    return fit


def _hbt_derived(fit, irf_fwhm):
    def bare0(v):
        return float(hbt_vec(v[2], v))

    def raw0(v):
        return float(convolve_irf(lambda t: hbt_vec(t, v), irf_fwhm)(np.array([v[2]]))[0])

    _derived(fit, "g2_decon0", bare0)
    _derived(fit, "g2_raw0", raw0)


# --------------------------------------------------------------------------
# HOM
# --------------------------------------------------------------------------


def visibility(g_par: float, g_perp: float, sigma_par: float = 0.0, sigma_perp: float = 0.0):
    """V = 1 - g_par(0) / g_perp(0) with quotient-rule error.

    Returns ``(V, sigma_V)``.
    """
    if not g_perp > 0 or (sigma_perp > 0 and g_perp <= sigma_perp):
        raise VisibilityUndefinedError(f"g_perp(0) = {g_perp} +- {sigma_perp} is consistent with zero")
    v = 1.0 - g_par / g_perp
    s = math.sqrt((sigma_par / g_perp) ** 2 + (g_par * sigma_perp / g_perp**2) ** 2)
    return v, s


HOM_CO_NAMES = HBT_NAMES + ["v", "t_dip"]


@dataclass
class HomFit:
    cross: FitResult
    co: FitResult
    derived: dict

    def to_fit_result(self) -> FitResult:
        names = [f"cross.{n}" for n in self.cross.names] + [f"co.{n}" for n in self.co.names]
        n1, n2 = len(self.cross.names), len(self.co.names)
        cov = np.zeros((n1 + n2, n1 + n2))
        cov[:n1, :n1] = self.cross.covariance
        cov[n1:, n1:] = self.co.covariance
        return FitResult(
            model="hom",
            names=names,
            values=np.concatenate([self.cross.values, self.co.values]),
            covariance=cov,
            chi2_red=0.5 * (self.cross.chi2_red + self.co.chi2_red),
            iterations=self.cross.iterations + self.co.iterations,
            converged=self.cross.converged and self.co.converged,
            derived=dict(self.derived),
            flags=[f"cross:{f}" for f in self.cross.flags] + [f"co:{f}" for f in self.co.flags],
            extra={"chi2_red_cross": self.cross.chi2_red, "chi2_red_co": self.co.chi2_red},
        )


def fit_hom(hist_co: Histogram, hist_cross: Histogram, irf_fwhm: float = 0.0,
            delta_t: float = 14.3, tie_dip: bool = False, n_bunching: int = 3) -> HomFit:
    """Fit the cross-polarized then the co-polarized HOM histogram.

    The co fit shares ``b``, ``tau0`` and ``t_b`` with the cross fit and has
    its own level and bunching terms. Zero-delay values for the visibility
    are evaluated with all bunching amplitudes set to zero.
    """
    dt_ps = delta_t * 1e3
    hw = _core_halfwidth(irf_fwhm)

    # cross
    tau, y, w = _histogram_xyw(hist_cross)
    init = hbt_initial_guess(tau, y, n_bunching, side_delays=(dt_ps,))
    g_center = float(_smooth(y)[np.argmin(np.abs(tau - init.tau0))])
    b0 = float(np.clip(2.0 - 2.0 * g_center / init.a, 0.0, 1.0))
    p0 = init.vector()
    p0[1] = b0
    fixed = np.zeros(10, bool)
    for i in range(n_bunching, 3):
        p0[4 + i] = 0.0
        fixed[4 + i] = fixed[7 + i] = True

    def cross_bare(x, v):
        return hom_cross_vec(x, v, dt_ps)

    centers = lambda v: [v[2], v[2] - dt_ps, v[2] + dt_ps]  # noqa: E731
    cross_model = _irf_wrapped(cross_bare, irf_fwhm, centers, hw)
    cross = nlls_fit(cross_model, tau, y, p0, weight=w, bounds=_hbt_bounds(tau), names=HBT_NAMES,
                     fixed=fixed, model_name="hom_cross")
    _permute(cross, canonical_order(cross.values))

    # co
    tau_c, y_c, w_c = _histogram_xyw(hist_co)
    base = cross.values.copy()
    g_perp_fit = float(cross_bare(np.array([base[2]]), base)[0])
    g_par_data = float(_smooth(y_c)[np.argmin(np.abs(tau_c - base[2]))])
    v0 = float(np.clip(1.0 - g_par_data / g_perp_fit, 0.0, 1.0)) if g_perp_fit > 0 else 0.5
    p0c = np.concatenate([base, [v0, base[3]]])
    fixed_c = np.zeros(12, bool)
    fixed_c[[1, 2, 3]] = True
    for i in range(n_bunching, 3):
        fixed_c[4 + i] = fixed_c[7 + i] = True
    if tie_dip:
        fixed_c[11] = True

    def co_bare(x, v):
        t_dip = v[3] if tie_dip else v[11]
        return hom_co_vec(x, v[:10], dt_ps, v[10], t_dip)

    co_model = _irf_wrapped(co_bare, irf_fwhm, centers, lambda v: hw(v) + 12 * v[11] * 1e3)
    bounds_c = _hbt_bounds(tau_c) + [(0.0, 1.0), (1e-3, None)]
    co = nlls_fit(co_model, tau_c, y_c, p0c, weight=w_c, bounds=bounds_c, names=HOM_CO_NAMES,
                  fixed=fixed_c, model_name="hom_co")
    order = canonical_order(co.values[:10]) + [10, 11]
    _permute(co, order)
    if tie_dip:
        co.values[11] = co.values[3]

    def zero_c(v):
        v = v.copy()
        v[4:7] = 0.0
        return v

    def perp_decon(v):
        return float(cross_bare(np.array([v[2]]), zero_c(v))[0])

    def perp_raw(v):
        vz = zero_c(v)
        return float(convolve_irf(lambda t: cross_bare(t, vz), irf_fwhm)(np.array([v[2]]))[0])

    def par_decon(v):
        return float(co_bare(np.array([v[2]]), zero_c(v))[0])

    def par_raw(v):
        vz = zero_c(v)
        return float(convolve_irf(lambda t: co_bare(t, vz), irf_fwhm)(np.array([v[2]]))[0])

    gp_d = _derived(cross, "g2_perp_decon0", perp_decon)
    gp_r = _derived(cross, "g2_perp_raw0", perp_raw)
    gq_d = _derived(co, "g2_par_decon0", par_decon)
    gq_r = _derived(co, "g2_par_raw0", par_raw)
    derived = {
        "g2_perp_decon0": cross.derived["g2_perp_decon0"],
        "g2_perp_raw0": cross.derived["g2_perp_raw0"],
        "g2_par_decon0": co.derived["g2_par_decon0"],
        "g2_par_raw0": co.derived["g2_par_raw0"],
    }
    for tag, (gq, gp) in {"decon": (gq_d, gp_d), "raw": (gq_r, gp_r)}.items():
        try:
            v, s = visibility(gq[0], gp[0], gq[1], gp[1])
            derived[f"V_{tag}"] = {"value": v, "sigma": s}
        except VisibilityUndefinedError:
            derived[f"V_{tag}"] = {"value": None, "sigma": None}
    t_dip = co.values[11]
    s_dip = cross.sigma("t_b") if tie_dip else co.sigma("t_dip")
    derived["dip_full_width"] = {"value": 2 * t_dip, "sigma": 2 * s_dip}
    derived["delta_t_ns"] = delta_t
    derived["irf_fwhm_ps"] = irf_fwhm
    return HomFit(cross, co, derived)


# --------------------------------------------------------------------------
# TCSPC
# --------------------------------------------------------------------------


def _tcspc_init(t, y):
    n_bg = max(3, t.size // 20)
    bg = float(np.median(y[:n_bg]))
    sm = _smooth(y, 3)
    ip = int(np.argmax(sm))
    peak = float(sm[ip] - bg)
    thresh = bg + 0.05 * peak
    above = np.flatnonzero(sm[: ip + 1] > thresh)
    t0 = float(t[above[0]]) if above.size else float(t[0])
    dt = float(np.median(np.diff(t)))
    t0 = max(float(t[0]), t0 - dt)
    tau_r = max((t[ip] - t0) / 3.0, dt)
    s = sm[ip:] - bg
    below = np.flatnonzero(s < peak / math.e)
    tau1 = float(t[ip + below[0]] - t[ip]) if below.size else (t[-1] - t[ip]) / 3
    tau1 = max(tau1, dt)
    tail = np.flatnonzero((s > 0) & (s < 0.02 * peak) & (y[ip:] > 10))
    a2, tau2 = 0.01 * peak, 5 * tau1
    if tail.size > 5:
        tt = t[ip + tail] - t0
        slope, icpt = np.polyfit(tt, np.log(s[tail]), 1)
        if slope < 0 and -1 / slope > 1.5 * tau1:
            tau2 = -1.0 / slope
            a2 = float(np.exp(icpt))
    a1 = max(peak * math.exp((t[ip] - t0) / tau1) - a2, peak)
    return np.array([t0, tau_r, a1, tau1, a2, tau2, max(bg, 0.0)])


def fit_tcspc(t, counts, rise_on: str = "both", init=None):
    """Fit a TCSPC decay (t in ns). Returns ``(FitResult, CoherenceSummary)``.

    Falls back to a single exponential (flag ``mono_exponential_fallback``)
    when the amplitude ratio ``a2/a1`` has a relative error above 100 % or
    the fast decay is shorter than two sampling intervals.
    """
    t = np.asarray(t, float)
    y = np.asarray(counts, float)
    w = 1.0 / np.maximum(y, 1.0)
    p0 = _tcspc_init(t, y) if init is None else np.asarray(init.vector(), float)
    bounds = [
        (float(t[0]) - 5.0, float(t[-1])), (1e-4, 50.0), (0.0, None), (1e-3, None),
        (0.0, None), (1e-3, None), (0.0, None),
    ]
    p0[0] = min(max(p0[0], bounds[0][0]), bounds[0][1])

    def model(x, v):
        return tcspc_vec(x, v, rise_on)

    fit = None
    try:
        fit = nlls_fit(model, t, y, p0, weight=w, bounds=bounds, names=TCSPC_NAMES, model_name="tcspc")
        if fit.values[5] < fit.values[3]:
            # fast/slow swapped
            _permute(fit, [0, 1, 4, 5, 2, 3, 6])
        a1, a2 = fit["a1"], fit["a2"]
        # a decay faster than two samples cannot be told apart from the rise
        identified = a1 > 0 and a2 > 0 and fit["tau1"] >= 2.0 * float(np.median(np.diff(t)))
        if identified:
            _, s_ratio = propagate(lambda v: v[4] / v[2], fit.values, fit.covariance)
            identified = s_ratio < a2 / a1 and not any(":" in f for f in fit.flags)
    except DegenerateFitError:
        identified = False
    if not identified:
        p1 = p0.copy()
        if fit is not None:
            v = fit.values
            dom = 2 if v[2] * v[3] >= v[4] * v[5] else 4
            p1 = np.array([v[0], v[1], v[dom], v[dom + 1], 0.0, p0[5], v[6]])
        p1[4] = 0.0
        fixed = np.array([False, False, False, False, True, True, False])
        fit = nlls_fit(model, t, y, p1, weight=w, bounds=bounds, names=TCSPC_NAMES, fixed=fixed,
                       model_name="tcspc")
        fit.flags.append("mono_exponential_fallback")
    tau1, s1 = fit["tau1"], fit.sigma("tau1")
    t2_ft, g_ft = fourier_limit(tau1)
    fit.derived["t1"] = {"value": tau1, "sigma": s1}
    fit.derived["t2_ft"] = {"value": t2_ft, "sigma": 2 * s1}
    fit.derived["gamma_ft"] = {"value": g_ft, "sigma": g_ft * s1 / tau1}
    fit.extra["rise_on"] = rise_on
    return fit, CoherenceSummary(t1=tau1, t2_ft=t2_ft, gamma_ft=g_ft)


# --------------------------------------------------------------------------
# Voigt fits
# --------------------------------------------------------------------------

_SPLITS = (0.0, 0.15, 0.35, 0.6, 0.85, 1.0)


def _split_width(total, frac):
    """(f_L, f_G) with Lorentzian share ``frac`` of an approximate total."""
    fl = frac * total
    # invert 0.5346 fL + sqrt(0.2166 fL^2 + fG^2) = total for fG
    r = total - 0.5346 * fl
    fg = math.sqrt(max(r * r - 0.2166 * fl * fl, 0.0))
    return fl, fg


def _voigt_summary(fit: FitResult, ih: int, ii: int):
    gh, gi = fit.values[ih], fit.values[ii]

    def fwhm(v):
        return voigt_fwhm(max(v[ih], 0.0), max(v[ii], 0.0)) if v[ih] > 0 or v[ii] > 0 else 0.0

    def t2(v):
        return coherence_time(VoigtParams(max(v[ih], 1e-12), max(v[ii], 0.0)))

    _derived(fit, "gamma_fwhm", fwhm)
    _derived(fit, "t2", t2)
    fit.derived["gamma_hom"] = {"value": float(gh), "sigma": fit.sigmas[ih]}
    fit.derived["gamma_inhom"] = {"value": float(gi), "sigma": fit.sigmas[ii]}
    return CoherenceSummary(
        gamma_fwhm=fit.derived["gamma_fwhm"]["value"], t2=fit.derived["t2"]["value"],
        gamma_inhom=float(gi), gamma_hom=float(gh),
    )


def fit_scan(x, counts, weights: str = "poisson"):
    """Voigt fit of a resonance scan (x in GHz).

    Returns ``(FitResult, CoherenceSummary)``; params ``center, amplitude,
    offset, gamma_hom, gamma_inhom``.
    """
    x = np.asarray(x, float)
    y = np.asarray(counts, float)
    w = 1.0 / np.maximum(y, 1.0) if weights == "poisson" else np.ones_like(y)
    sm = _smooth(y, 3)
    ip = int(np.argmax(sm))
    off = float(np.min(sm))
    amp = float(sm[ip] - off)
    half = off + amp / 2
    above = np.flatnonzero(sm >= half)
    total = max(float(x[above[-1]] - x[above[0]]), float(np.median(np.diff(x))))
    names = ["center", "amplitude", "offset", "gamma_hom", "gamma_inhom"]
    best = None
    for frac in _SPLITS:
        fl, fg = _split_width(total, frac)
        p = np.array([x[ip], amp, off, fl, fg])
        sse = float(np.sum(w * (y - scan_vec(x, p)) ** 2))
        if best is None or sse < best[0]:
            best = (sse, p)
    span = float(x.max() - x.min())
    bounds = [(float(x.min()), float(x.max())), (0.0, None), (None, None), (0.0, 10 * span), (0.0, 10 * span)]
    fit = nlls_fit(scan_vec, x, y, best[1], weight=w, bounds=bounds, names=names, model_name="scan")
    summary = _voigt_summary(fit, 3, 4)
    return fit, summary


def fit_mi(delays, vis):
    """Fit ``amplitude * |g1(tau)|`` of a Voigt spectrum to Michelson fringe
    visibilities (delays in ps). Returns ``(FitResult, CoherenceSummary)``."""
    tau = np.abs(np.asarray(delays, float))
    y = np.asarray(vis, float)
    order = np.argsort(tau)
    ts, ys = tau[order], y[order]
    amp0 = float(max(ys[0], 1e-3))
    below = np.flatnonzero(ys < amp0 / math.e)
    t_e = float(ts[below[0]]) if below.size else float(ts[-1])
    t_e = max(t_e, 1e-6)
    names = ["amplitude", "gamma_hom", "gamma_inhom"]
    best = None
    for frac in _SPLITS:
        # 1/e delay of the pure forms: Lorentz 1/(pi gh), Gauss 2 sqrt(ln2)/(pi gi)
        gh = frac / (math.pi * t_e * 1e-3)
        gi = (1 - frac) * 2 * math.sqrt(LN2) / (math.pi * t_e * 1e-3)
        p = np.array([amp0, gh, gi])
        sse = float(np.sum((y - mi_vec(tau, p)) ** 2))
        if best is None or sse < best[0]:
            best = (sse, p)
    bounds = [(0.0, 2.0), (0.0, None), (0.0, None)]
    fit = nlls_fit(mi_vec, tau, y, best[1], bounds=bounds, names=names, model_name="mi")
    summary = _voigt_summary(fit, 1, 2)
    return fit, summary
