"""Start-multi-stop correlation histograms, normalization and IRF convolution."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numba
import numpy as np

from .core import FWHM_PER_SIGMA, Histogram, OrderingError, TagStream

__all__ = [
    "CorrelationRequest",
    "cross_correlate",
    "normalize",
    "convolve_irf",
    "default_workers",
    "NormalizationError",
]

THREADS_ENV = "QDCOHERENCE_THREADS"


class NormalizationError(ValueError):
    pass


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class CorrelationRequest:
    """Delays ``tau = t_b - t_a`` in ``[-window, window]`` (ps).

    Bins start at multiples of ``bin_width``: ``[k*w, (k+1)*w)`` for
    ``k = -window/w .. window/w``, i.e. ``2*window/w + 1`` bins.
    """

    channel_a: int = 0
    channel_b: int = 1
    bin_width: int = 50
    window: int = 500_000
    normalization_window: Tuple[int, int] = (400_000, 500_000)

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.window < 10 * self.bin_width:
            raise ValueError("window must be at least 10 bins")
        lo, hi = self.normalization_window
        if not 0 <= lo < hi:
            raise ValueError("normalization window must satisfy 0 <= lo < hi")

    @property
    def half_bins(self) -> int:
        return -(-self.window // self.bin_width)

    @property
    def tau_min(self) -> int:
        return -self.half_bins * self.bin_width

    @property
    def n_bins(self) -> int:
        return 2 * self.half_bins + 1


@numba.njit(cache=True)
def _correlate_range(a, b, i0, i1, tau_min, w, nbins, same, counts):
    nb = b.size
    tau_max = tau_min + nbins * w
    j0 = 0
    if i0 < a.size:
        lo = a[i0] + tau_min
        # binary search for the first partner
        l, r = 0, nb
        while l < r:
            m = (l + r) >> 1
            if b[m] < lo:
                l = m + 1
            else:
                r = m
        j0 = l
    for i in range(i0, i1):
        ai = a[i]
        lo = ai + tau_min
        while j0 < nb and b[j0] < lo:
            j0 += 1
        hi = ai + tau_max
        j = j0
        while j < nb and b[j] < hi:
            if not (same and j == i):
                counts[(b[j] - lo) // w] += 1
            j += 1


@numba.njit(parallel=True, cache=True)
def _correlate_chunks(a, b, tau_min, w, nbins, same, n_chunks):
    partial = np.zeros((n_chunks, nbins), dtype=np.int64)
    step = (a.size + n_chunks - 1) // n_chunks
    for c in numba.prange(n_chunks):
        i0 = min(c * step, a.size)
        i1 = min(i0 + step, a.size)
        _correlate_range(a, b, i0, i1, tau_min, w, nbins, same, partial[c])
    return partial.sum(axis=0)


def _check_sorted(x, name):
    if x.size > 1 and np.any(np.diff(x) < 0):
        raise OrderingError(f"channel {name} timestamps are not sorted")


def cross_correlate(tags: TagStream, req: CorrelationRequest = CorrelationRequest(),
                    workers: Optional[int] = None) -> Histogram:
    """Count every (a, b) pair with ``t_b - t_a`` inside the window.

    Exact pair counting with a two-pointer sweep; the a-stream is split into
    ``workers`` chunks whose integer histograms are summed, so the result
    does not depend on the worker count. For ``channel_a == channel_b`` a
    tag is not paired with itself.
    """
    a = np.ascontiguousarray(tags.channel(req.channel_a), dtype=np.int64)
    b = np.ascontiguousarray(tags.channel(req.channel_b), dtype=np.int64)
    _check_sorted(a, req.channel_a)
    _check_sorted(b, req.channel_b)
    workers = default_workers() if workers is None else max(1, int(workers))
    n_chunks = max(1, min(workers, a.size))
    numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))
    counts = _correlate_chunks(a, b, req.tau_min, req.bin_width, req.n_bins, req.channel_a == req.channel_b, n_chunks)
    meta = {
        "n_a": int(a.size),
        "n_b": int(b.size),
        "duration_ps": int(tags.duration_ps),
        "channel_a": req.channel_a,
        "channel_b": req.channel_b,
        "normalization_window": tuple(req.normalization_window),
    }
    return Histogram(req.bin_width, req.tau_min, counts, None, meta)


def normalize(hist: Histogram, method: str = "far_wing",
              window: Optional[Tuple[float, float]] = None) -> Histogram:
    """Attach the counts -> g2 scale.

    ``poisson_rate`` uses ``n_a * n_b * w / D``; ``far_wing`` uses the mean
    count over bins whose center satisfies ``lo <= |tau| <= hi`` (ps).
    """
    if method == "poisson_rate":
        try:
            n_a, n_b, dur = hist.meta["n_a"], hist.meta["n_b"], hist.meta["duration_ps"]
        except KeyError:
            raise NormalizationError("poisson_rate normalization needs stream metadata") from None
        expected = n_a * n_b * hist.bin_width / dur if dur > 0 else 0.0
    elif method == "far_wing":
        lo, hi = window if window is not None else hist.meta.get("normalization_window", (400_000, 500_000))
        at = np.abs(hist.tau)
        mask = (at >= lo) & (at <= hi)
        if not mask.any():
            raise NormalizationError(f"no bins inside normalization window [{lo}, {hi}] ps")
        expected = float(hist.counts[mask].mean())
    else:
        raise ValueError(f"unknown normalization method {method!r}")
    if not expected > 0:
        raise NormalizationError("normalization level is zero")
    meta = dict(hist.meta)
    meta["normalization"] = method
    return Histogram(hist.bin_width, hist.tau_min, hist.counts, 1.0 / expected, meta)


def _irf_grid(irf_fwhm, points_per_sigma, span_sigma):
    sigma = irf_fwhm / FWHM_PER_SIGMA
    n = int(points_per_sigma * span_sigma)
    s = sigma * np.arange(-n, n + 1) / points_per_sigma
    wts = np.exp(-0.5 * (s / sigma) ** 2)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    return s, wts / wts.sum()


def convolve_irf(model: Callable, irf_fwhm: float, points_per_sigma: int = 16,
                 span_sigma: float = 6.0) -> Callable:
    """Return ``tau -> (model * G)(tau)`` for a unit-area Gaussian of FWHM
    ``irf_fwhm`` (same units as tau). Zero width returns ``model`` itself."""
    if irf_fwhm < 0:
        raise ValueError("irf_fwhm must be non-negative")
    if irf_fwhm == 0:
        return model
    s, wts = _irf_grid(irf_fwhm, points_per_sigma, span_sigma)

    def convolved(tau):
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        out = np.empty(flat.size)
        chunk = max(1, 2_000_000 // s.size)
        for i in range(0, flat.size, chunk):
            t = flat[i : i + chunk]
            out[i : i + chunk] = np.asarray(model(t[:, None] - s[None, :])) @ wts
        return out.reshape(tau.shape) if tau.ndim else float(out[0])

    convolved.irf_fwhm = irf_fwhm
    return convolved


def irf_sigma_per_detector(irf_fwhm: float) -> float:
    """Per-detector Gaussian jitter giving a two-detector response of the
    given FWHM."""
    return irf_fwhm / (FWHM_PER_SIGMA * math.sqrt(2.0))
