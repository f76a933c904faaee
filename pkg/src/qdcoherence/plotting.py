"""Figures for the report path, rendered off-screen with the Agg canvas.

Every function takes the same data the CLI writes as CSV, plus an optional
fit, and saves one PNG. Nothing here touches the global pyplot state.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Optional

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .core import FitResult, Histogram
from .correlator import convolve_irf

__all__ = ["STYLE", "plot_histogram", "plot_hom", "plot_decay", "plot_scan", "plot_mi", "plot_rabi", "plot_report"]

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
WIDTH = 3.4  # single column, inches

STYLE = {
    "axes.labelsize": 9,
    "axes.linewidth": 0.8,
    "font.size": 8,
    "font.family": "serif",
    "mathtext.fontset": "stix",
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "lines.linewidth": 1.0,
    "lines.markersize": 2.5,
    "savefig.dpi": 200,
}

DATA = "#4d4d4d"
MODEL = "#c0392b"
ALT = "#2b8cbe"


@contextmanager
def _figure(path, ncols=1, height=None):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(WIDTH * ncols, height or WIDTH * GOLDEN))
        FigureCanvasAgg(fig)
        axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
        yield fig, axes if ncols > 1 else axes[0]
        fig.tight_layout()
        fig.savefig(path)


def _hbt_curve(fit: FitResult, tau):
    from .fitting.models import hbt_vec

    v = fit.values[:10]
    irf = float(fit.extra.get("irf_fwhm_ps", 0.0))
    return convolve_irf(lambda t: hbt_vec(t, v), irf)(tau), hbt_vec(tau, v)


def plot_histogram(hist: Histogram, path, fit: Optional[FitResult] = None, zoom_ns: float = 20.0):
    """Normalized g2 with optional HBT fit; full window and a zoom on zero."""
    tau_ns = hist.tau * 1e-3
    y = hist.g2 if hist.norm is not None else hist.counts
    with _figure(path, ncols=2) as (fig, (ax_full, ax_zoom)):
        for ax, lim in ((ax_full, None), (ax_zoom, zoom_ns)):
            sel = slice(None) if lim is None else np.abs(tau_ns) <= lim
            ax.plot(tau_ns[sel], y[sel], ".", color=DATA, ms=1.0, label="data")
            if fit is not None and fit.model == "hbt":
                conv, bare = _hbt_curve(fit, hist.tau[sel])
                ax.plot(tau_ns[sel], conv, color=MODEL, label="fit")
                if lim is not None:
                    ax.plot(tau_ns[sel], bare, "--", color=ALT, label="deconvolved")
            ax.set_xlabel(r"$\tau$ (ns)")
        ax_full.set_ylabel(r"$g^{(2)}(\tau)$" if hist.norm is not None else "counts")
        ax_zoom.legend(loc="lower right")


def plot_hom(hist_co: Histogram, hist_cross: Histogram, path, zoom_ns: float = 30.0):
    """Co- and cross-polarized HOM histograms on a common axis."""
    with _figure(path) as (fig, ax):
        for h, c, lab in ((hist_cross, ALT, r"$\perp$"), (hist_co, MODEL, r"$\parallel$")):
            t = h.tau * 1e-3
            sel = np.abs(t) <= zoom_ns
            ax.plot(t[sel], h.g2[sel], ".", color=c, ms=1.0, label=lab)
        ax.axhline(0.5, color=DATA, lw=0.5, ls=":")
        ax.set_xlabel(r"$\tau$ (ns)")
        ax.set_ylabel(r"$g^{(2)}(\tau)$")
        ax.legend()


def plot_decay(t_ns, counts, path, fit: Optional[FitResult] = None):
    from .fitting.models import tcspc_vec

    t_ns = np.asarray(t_ns, float)
    with _figure(path) as (fig, ax):
        ax.semilogy(t_ns, np.maximum(counts, 0.5), ".", color=DATA, label="data")
        if fit is not None:
            ax.semilogy(t_ns, tcspc_vec(t_ns, fit.values, fit.extra.get("rise_on", "both")), color=MODEL,
                        label=rf"$T_1$ = {fit['tau1']:.2f} ns")
        ax.set_xlabel("time (ns)")
        ax.set_ylabel("counts")
        ax.legend()


def plot_scan(x_ghz, counts, path, fit: Optional[FitResult] = None):
    from .fitting.models import scan_vec

    x = np.asarray(x_ghz, float)
    with _figure(path) as (fig, ax):
        ax.plot(x, counts, ".", color=DATA, label="data")
        if fit is not None:
            xf = np.linspace(x.min(), x.max(), 800)
            ax.plot(xf, scan_vec(xf, fit.values), color=MODEL, label="Voigt fit")
        ax.set_xlabel("detuning (GHz)")
        ax.set_ylabel("intensity (counts)")
        ax.legend()


def plot_mi(delays_ps, vis, path, fit: Optional[FitResult] = None):
    from .fitting.models import mi_vec

    d = np.asarray(delays_ps, float)
    with _figure(path) as (fig, ax):
        ax.plot(d, vis, "o", color=DATA, mfc="none", label="visibility")
        if fit is not None:
            df = np.linspace(0.0, np.abs(d).max(), 600)
            ax.plot(df, mi_vec(df, fit.values), color=MODEL, label=r"$|g^{(1)}|$ fit")
        ax.set_xlabel("delay (ps)")
        ax.set_ylabel("visibility")
        ax.set_ylim(0, 1.05)
        ax.legend()


def plot_rabi(sqrt_power, intensity, path, fit: Optional[FitResult] = None):
    x = np.asarray(sqrt_power, float)
    with _figure(path) as (fig, ax):
        ax.plot(x, intensity, "o", color=DATA, mfc="none", label="data")
        if fit is not None:
            from .bloch import PulseConfig, _rabi_forward

            pulse = PulseConfig(envelope=fit.extra.get("envelope", "gaussian"),
                                duration_fwhm=fit.extra.get("duration_fwhm_ps", 10.0))
            xf = np.linspace(0.0, x.max(), 300)
            yf = _rabi_forward(xf, fit.values, pulse, fit.extra.get("gamma_rad", 1 / 1.71),
                               pulse.duration_fwhm / 100.0)
            ax.plot(xf, yf, color=MODEL, label="Bloch fit")
        ax.set_xlabel(r"$\sqrt{P}$ (arb. u.)")
        ax.set_ylabel("intensity (counts)")
        ax.legend()


def plot_report(fits, path):
    """Homogeneous vs inhomogeneous width of every lineshape fit."""
    with _figure(path) as (fig, ax):
        for model, c, lab in (("mi", ALT, "AB (Michelson)"), ("scan", MODEL, "RF (scan)")):
            pts = [(f.derived["gamma_inhom"]["value"], f.derived["gamma_hom"]["value"])
                   for f in fits if f.model == model and "gamma_hom" in f.derived]
            if pts:
                x, y = np.array(pts).T
                ax.plot(x, y, "o", color=c, mfc="none", label=lab)
        ax.set_xlabel(r"$\Gamma_\mathrm{inhom}$ (GHz)")
        ax.set_ylabel(r"$\Gamma_\mathrm{hom}$ (GHz)")
        ax.legend()
