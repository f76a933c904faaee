"""Kinetic Monte Carlo emitter simulation and detection model.

Event-driven (Gillespie) dynamics of a cw-pumped emitter whose pump is
gated by telegraph blinkers. Spectral diffusion is an Ornstein-Uhlenbeck
detuning sampled exactly at emission times. The time axis is cut into
fixed-length segments, each with its own RNG stream derived from the seed,
and the emitter state is carried across segment boundaries; because all
rates are memoryless the stitching is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numba
import numpy as np

from .core import Polarization, PhotonStream, TagStream, Transition, merge_streams

__all__ = [
    "Blinker",
    "SpectralDiffusion",
    "EmitterConfig",
    "DetectionConfig",
    "ResourceError",
    "simulate_stream",
    "apply_detection",
    "simulate_mi_visibility",
    "simulate_rf_scan",
    "simulate_hom",
    "MIResult",
    "HomSimulation",
    "load_config",
    "config_to_dict",
]

SEGMENT_NS = 1.0e6
MAX_EVENTS = 1e9


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Blinker:
    """Telegraph gate; ``on_rate`` is the off->on rate, ``off_rate`` the
    on->off rate (1/ns)."""

    on_rate: float
    off_rate: float

    def __post_init__(self):
        if self.on_rate <= 0 or self.off_rate < 0:
            raise ValueError("blinker needs on_rate > 0 and off_rate >= 0")

    @property
    def on_fraction(self) -> float:
        return self.on_rate / (self.on_rate + self.off_rate)

    @property
    def timescale(self) -> float:
        """Correlation time of the gate (ns)."""
        return 1.0 / (self.on_rate + self.off_rate)

    @property
    def amplitude(self) -> float:
        """Bunching amplitude ``off_rate / on_rate`` the gate imprints on g2."""
        return self.off_rate / self.on_rate

    @classmethod
    def from_bunching(cls, t_c: float, c: float) -> "Blinker":
        """Gate producing a bunching term ``1 + c exp(-|tau| / t_c)``."""
        on = 1.0 / (t_c * (1.0 + c))
        return cls(on, c * on)


@dataclass(frozen=True)
class SpectralDiffusion:
    """OU detuning: stationary std ``sigma`` (rad/s), ``corr_time`` (ns)."""

    sigma: float = 0.0
    corr_time: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.sigma > 0 and not self.corr_time > 0:
            raise ValueError("corr_time must be positive when sigma > 0")


@dataclass(frozen=True)
class EmitterConfig:
    t1_x: float = 1.71
    t1_xx: float = 0.85
    pump_rate: float = 0.3
    blinkers: Tuple[Blinker, ...] = ()
    spectral_diffusion: SpectralDiffusion = field(default_factory=SpectralDiffusion)
    pure_dephasing_rate: float = 0.0
    mode: str = "two_level"

    def __post_init__(self):
        if not (self.t1_x > 0 and self.t1_xx > 0):
            raise ValueError("lifetimes must be positive")
        if self.pump_rate < 0 or self.pure_dephasing_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.mode not in ("two_level", "cascade"):
            raise ValueError("mode must be 'two_level' or 'cascade'")
        object.__setattr__(self, "blinkers", tuple(self.blinkers))

    @property
    def t2_x(self) -> float:
        """Coherence time of the X line (ns)."""
        return 1.0 / (0.5 / self.t1_x + self.pure_dephasing_rate)


@dataclass(frozen=True)
class DetectionConfig:
    efficiency: float = 1.0
    jitter_sigma: float = 0.0
    dead_time: float = 0.0
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        if min(self.jitter_sigma, self.dead_time, self.dark_rate) < 0:
            raise ValueError("jitter, dead time and dark rate must be non-negative")


# --------------------------------------------------------------------------
# emitter kinetics
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _kmc(rng, t, t_end, level, gates, x, t_ou, pump, g_x, g_xx, on_r, off_r, sigma, theta,
         cascade, out_t, out_tr, out_det, n):
    """Advance until ``t_end`` or until the output buffer is nearly full.

    Levels: 0 = G, 1 = X, 2 = XX. Returns the updated state and a done
    flag; stopping early consumes no random numbers, so the continuation is
    identical to an uninterrupted run.
    """
    cap = out_t.size
    nb = gates.size
    while True:
        if n >= cap - 2:
            return t, level, x, t_ou, n, False
        all_on = True
        for k in range(nb):
            if gates[k] == 0:
                all_on = False
        r_pump = pump if (all_on and level == 0) else 0.0
        if level == 1:
            r_emit = g_x
        elif level == 2:
            r_emit = g_xx
        else:
            r_emit = 0.0
        total = r_pump + r_emit
        for k in range(nb):
            total += off_r[k] if gates[k] == 1 else on_r[k]
        if total <= 0.0:
            return t_end, level, x, t_ou, n, True
        dt = rng.exponential(1.0 / total)
        if t + dt >= t_end:
            return t_end, level, x, t_ou, n, True
        t += dt
        u = rng.random() * total
        if u < r_pump:
            level = 2 if cascade else 1
            continue
        u -= r_pump
        if u < r_emit:
            if sigma > 0.0:
                a = math.exp(-(t - t_ou) * theta)
                x = x * a + sigma * math.sqrt(max(1.0 - a * a, 0.0)) * rng.standard_normal()
                t_ou = t
            out_t[n] = t
            out_det[n] = x
            if level == 2:
                out_tr[n] = 1
                level = 1
            else:
                out_tr[n] = 0
                level = 0
            n += 1
            continue
        u -= r_emit
        for k in range(nb):
            r = off_r[k] if gates[k] == 1 else on_r[k]
            if u < r or k == nb - 1:
                gates[k] = 1 - gates[k]
                break
            u -= r


def _expected_events(cfg: EmitterConfig, duration_ns: float) -> float:
    rate = cfg.pump_rate + 1.0 / cfg.t1_x + (1.0 / cfg.t1_xx if cfg.mode == "cascade" else 0.0)
    rate += sum(b.on_rate + b.off_rate for b in cfg.blinkers)
    return rate * duration_ns


def simulate_stream(cfg: EmitterConfig, duration: float, seed: int = 0) -> PhotonStream:
    """Emitted photons over ``duration`` ns (times in ps).

    In cascade mode an XX photon whose X partner would fall after the end of
    the run is dropped, so both lines always carry the same count.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if _expected_events(cfg, duration) > MAX_EVENTS:
        raise ResourceError(f"expected event count {_expected_events(cfg, duration):.3g} exceeds {MAX_EVENTS:.0e}")
    n_seg = max(1, math.ceil(duration / SEGMENT_NS))
    seeds = np.random.SeedSequence(seed).spawn(n_seg + 1)
    init_rng = np.random.default_rng(seeds[0])

    nb = len(cfg.blinkers)
    on_r = np.array([b.on_rate for b in cfg.blinkers], dtype=float)
    off_r = np.array([b.off_rate for b in cfg.blinkers], dtype=float)
    gates = (init_rng.random(nb) < np.array([b.on_fraction for b in cfg.blinkers])).astype(np.int8)
    sd = cfg.spectral_diffusion
    sigma = sd.sigma * 1e-9  # rad/ns
    theta = 1.0 / sd.corr_time if sd.sigma > 0 else 0.0
    x = sigma * init_rng.standard_normal() if sigma > 0 else 0.0
    level, t_ou = 0, 0.0
    cascade = cfg.mode == "cascade"

    est = _expected_events(cfg, min(duration, SEGMENT_NS))
    cap = int(min(max(est, 1e3), 5e7)) + 16
    chunks_t, chunks_tr, chunks_det = [], [], []
    for s in range(n_seg):
        rng = np.random.default_rng(seeds[s + 1])
        t = s * SEGMENT_NS
        t_end = min((s + 1) * SEGMENT_NS, duration)
        done = False
        while not done:
            out_t = np.empty(cap)
            out_tr = np.empty(cap, np.int8)
            out_det = np.empty(cap)
            t, level, x, t_ou, n, done = _kmc(
                rng, t, t_end, level, gates, x, t_ou, cfg.pump_rate, 1.0 / cfg.t1_x, 1.0 / cfg.t1_xx,
                on_r, off_r, sigma, theta, cascade, out_t, out_tr, out_det, 0,
            )
            chunks_t.append(out_t[:n])
            chunks_tr.append(out_tr[:n])
            chunks_det.append(out_det[:n])
    t_all = np.concatenate(chunks_t) * 1e3
    tr = np.concatenate(chunks_tr)
    det = np.concatenate(chunks_det) * 1e9
    if cascade and level == 1 and tr.size and tr[-1] == Transition.XX:
        t_all, tr, det = t_all[:-1], tr[:-1], det[:-1]
    meta = {
        "t1_x": cfg.t1_x,
        "t1_xx": cfg.t1_xx,
        "pure_dephasing_rate": cfg.pure_dephasing_rate,
        "mode": cfg.mode,
        "seed": seed,
    }
    return PhotonStream(t_all, tr.astype(np.int8), det, np.full(tr.size, int(Polarization.H), np.int8),
                        duration * 1e3, meta)


# --------------------------------------------------------------------------
# detection
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.ones(t.size, dtype=np.bool_)
    last = -(1 << 62)
    for i in range(t.size):
        if t[i] - last < dead:
            keep[i] = False
        else:
            last = t[i]
    return keep


def apply_detection(photons: PhotonStream, det: DetectionConfig = DetectionConfig(),
                    routing: Union[str, np.ndarray] = "split", seed: int = 0,
                    n_channels: Optional[int] = None) -> TagStream:
    """Turn photons into detector clicks.

    ``routing``: ``"split"`` sends each photon to channel 0 or 1 at random
    (50:50 beam splitter), ``"by_transition"`` uses the transition code as
    channel, or an explicit integer array gives one channel per photon.
    Dead time is non-paralyzable and per channel.
    """
    n = len(photons)
    if n > 1 and np.any(np.diff(photons.t_emit) < 0):
        raise ValueError("photons must be sorted by emission time")
    r_thin, r_route, r_jit, r_dark = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))
    if isinstance(routing, str):
        if routing == "split":
            ch = r_route.integers(0, 2, n)
            n_ch = 2
        elif routing == "by_transition":
            ch = photons.transition.astype(np.int64)
            n_ch = max(2, int(ch.max()) + 1 if n else 2)
        else:
            raise ValueError(f"unknown routing {routing!r}")
    else:
        ch = np.asarray(routing, dtype=np.int64)
        if ch.shape != (n,):
            raise ValueError("explicit routing needs one channel per photon")
        n_ch = int(ch.max()) + 1 if n else 1
    if n_channels is not None:
        n_ch = int(n_channels)
    keep = r_thin.random(n) < det.efficiency
    t = photons.t_emit.astype(float)
    if det.jitter_sigma > 0:
        t = t + r_jit.normal(0.0, det.jitter_sigma, n)
    t = np.rint(t).astype(np.int64)
    dur = int(round(photons.duration_ps))
    keep &= (t >= 0) & (t < max(dur, 1))
    parts = []
    for c in range(n_ch):
        tc = t[keep & (ch == c)]
        if det.dark_rate > 0:
            k = r_dark.poisson(det.dark_rate * dur * 1e-3)
            tc = np.concatenate([tc, r_dark.integers(0, max(dur, 1), k)])
        tc = np.sort(tc, kind="stable")
        if det.dead_time > 0:
            tc = tc[_dead_time_mask(tc, det.dead_time)]
        parts.append((np.full(tc.size, c), tc))
    return merge_streams(parts, n_ch, dur)


# --------------------------------------------------------------------------
# Michelson visibility and resonance scan
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MIResult:
    delays: np.ndarray
    visibility: np.ndarray
    stderr: np.ndarray
    flags: Tuple[str, ...] = ()


def _ou_phase_step(x, phase, d, sigma, theta, rng):
    """Exact joint update of OU detuning and its integral over ``d``."""
    if sigma == 0 or d == 0:
        return x, phase
    a = math.exp(-theta * d)
    D = sigma * sigma * theta
    v_x = sigma * sigma * (1 - a * a)
    v_i = D / theta**3 * (2 * theta * d - 3 + 4 * a - a * a)
    c_xi = D / theta**2 * (1 - a) ** 2
    z1 = rng.standard_normal(x.size)
    z2 = rng.standard_normal(x.size)
    s_x = math.sqrt(max(v_x, 0.0))
    if s_x > 0:
        k = c_xi / s_x
        s_r = math.sqrt(max(v_i - k * k, 0.0))
    else:
        k, s_r = 0.0, math.sqrt(max(v_i, 0.0))
    new_phase = phase + x * (1 - a) / theta + k * z1 + s_r * z2
    return x * a + s_x * z1, new_phase


def simulate_mi_visibility(cfg: EmitterConfig, delays: Sequence[float], seed: int = 0,
                           n_traj: int = 20000, max_rel_err: float = 0.05) -> MIResult:
    """Monte Carlo fringe visibility ``|g1(tau)|`` at the given delays (ps).

    Each trajectory starts the OU detuning from its stationary law and
    accumulates the integrated detuning plus white pure-dephasing phase
    noise; the lifetime envelope ``exp(-tau / 2 T1)`` multiplies the phase
    average.
    """
    if cfg.mode != "two_level":
        raise ValueError("Michelson simulation needs a two_level emitter")
    d_ns = np.abs(np.asarray(delays, dtype=float)) * 1e-3
    order = np.argsort(d_ns, kind="stable")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sd = cfg.spectral_diffusion
    sigma = sd.sigma * 1e-9
    theta = 1.0 / sd.corr_time if sigma > 0 else 0.0
    x = sigma * rng.standard_normal(n_traj)
    phase = np.zeros(n_traj)
    gd = cfg.pure_dephasing_rate
    vis = np.empty(d_ns.size)
    err = np.empty(d_ns.size)
    prev = 0.0
    for i in order:
        d = d_ns[i] - prev
        x, phase = _ou_phase_step(x, phase, d, sigma, theta, rng)
        if gd > 0:
            phase = phase + math.sqrt(2 * gd * d) * rng.standard_normal(n_traj)
        prev = d_ns[i]
        c, s = np.cos(phase), np.sin(phase)
        mc, ms = c.mean(), s.mean()
        mag = math.hypot(mc, ms)
        env = math.exp(-d_ns[i] / (2 * cfg.t1_x))
        # delta method for |mean|; falls back to the per-component error near 0
        if mag > 0:
            var = ((mc / mag) ** 2 * c.var() + (ms / mag) ** 2 * s.var()) / n_traj
        else:
            var = (c.var() + s.var()) / n_traj
        vis[i] = env * mag
        err[i] = env * math.sqrt(var)
    flags = ()
    big = err > max_rel_err * np.maximum(vis, 1e-300)
    if np.any(big & (vis > 0.2 * vis.max())):
        flags = ("insufficient_samples",)
    return MIResult(np.asarray(delays, dtype=float), vis, err, flags)


def simulate_rf_scan(cfg: EmitterConfig, detunings: Sequence[float], seed: int = 0,
                     rabi: Optional[float] = None, n_samples: int = 4000,
                     counts_scale: float = 1e4, poisson: bool = False) -> np.ndarray:
    """Resonance-fluorescence scan (laser detunings in GHz).

    Steady-state two-level population ``1/2 * W / (1 + (Delta T2)^2 + W)``
    with ``W = Omega^2 T1 T2``, averaged over quasi-static OU detuning
    samples shared by all scan points. ``rabi`` (rad/ns) defaults to a weak
    drive with ``W = 0.01``. Intensities are scaled so that a line without
    spectral diffusion peaks at ``counts_scale`` (Poisson-sampled if
    ``poisson``).
    """
    if cfg.mode != "two_level":
        raise ValueError("resonance scan needs a two_level emitter")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t1, t2 = cfg.t1_x, cfg.t2_x
    if rabi is None:
        rabi = math.sqrt(0.01 / (t1 * t2))
    w_sat = rabi * rabi * t1 * t2
    sig = cfg.spectral_diffusion.sigma * 1e-9
    shifts = sig * rng.standard_normal(n_samples) if sig > 0 else np.zeros(1)
    delta = 2 * math.pi * np.asarray(detunings, dtype=float)[:, None] - shifts[None, :]
    pop = 0.5 * w_sat / (1.0 + (delta * t2) ** 2 + w_sat)
    y = counts_scale * pop.mean(axis=1) / (0.5 * w_sat / (1.0 + w_sat))
    if poisson:
        y = rng.poisson(y).astype(float)
    return y


# --------------------------------------------------------------------------
# HOM
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HomSimulation:
    tags: TagStream
    n_pairs: int
    mean_overlap: float
    flags: Tuple[str, ...] = ()


@numba.njit(cache=True)
def _pair_adjacent(arr, arm, window):
    """Pair time-adjacent photons from different arms that are each
    other's nearest neighbour and arrive within ``window``."""
    n = arr.size
    partner = -np.ones(n, dtype=np.int64)
    for i in range(n - 1):
        gap = arr[i + 1] - arr[i]
        if arm[i] == arm[i + 1] or gap >= window:
            continue
        if i > 0 and arr[i] - arr[i - 1] <= gap:
            continue
        if i + 2 < n and arr[i + 2] - arr[i + 1] < gap:
            continue
        partner[i] = i + 1
        partner[i + 1] = i
    return partner


def simulate_hom(photons: PhotonStream, delta_t: float = 14.3, polarization: str = "co",
                 det: DetectionConfig = DetectionConfig(), seed: int = 0,
                 t1: Optional[float] = None, t2: Optional[float] = None,
                 window: Optional[float] = None) -> HomSimulation:
    """Unbalanced Mach-Zehnder two-photon interference at the output splitter.

    Photons take the short or long (``+delta_t`` ns) arm at random. Two
    photons from different arms that are mutual nearest neighbours in
    arrival time and arrive within ``window`` ps (default ``10 T1``) meet at
    the output splitter; they leave through different
    ports with probability 1/2 for cross polarization and
    ``(1 - V_pair) / 2`` for co polarization, where
    ``V_pair = T2/(2 T1) exp(-|tau_d|/T1) / (1 + (dw T1)^2)``. Every other
    photon picks a port at random. Ports map to detector channels 0 and 1.
    """
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    if polarization not in ("co", "cross"):
        raise ValueError("polarization must be 'co' or 'cross'")
    meta = photons.meta
    t1 = float(meta.get("t1_x", 1.71) if t1 is None else t1)
    if t2 is None:
        t2 = 1.0 / (0.5 / t1 + float(meta.get("pure_dephasing_rate", 0.0)))
    win = 10 * t1 * 1e3 if window is None else float(window)
    flags = []
    if delta_t < 5 * t1:
        flags.append("overlap")

    r_arm, r_port, r_det = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    n = len(photons)
    arm = r_arm.integers(0, 2, n).astype(np.int8)
    arrival = photons.t_emit + arm * delta_t * 1e3
    order = np.argsort(arrival, kind="stable")
    arr = arrival[order]
    arm_s = arm[order]
    dw = photons.detuning[order] * 1e-9
    partner = _pair_adjacent(arr, arm_s, win)

    u_port = r_port.random(n)
    u_pair = r_port.random(n)
    port = (u_port < 0.5).astype(np.int64)
    first = np.flatnonzero((partner >= 0) & (np.arange(n) < partner))
    second = partner[first]
    tau_d = (arr[second] - arr[first]) * 1e-3
    if polarization == "co":
        v_pair = (t2 / (2 * t1)) * np.exp(-np.abs(tau_d) / t1) / (1.0 + ((dw[second] - dw[first]) * t1) ** 2)
    else:
        v_pair = np.zeros(first.size)
    p_split = 0.5 * (1.0 - v_pair)
    split = u_pair[first] < p_split
    port[second] = np.where(split, 1 - port[first], port[first])

    routed = PhotonStream(arr, photons.transition[order], photons.detuning[order],
                          photons.polarization[order], photons.duration_ps + delta_t * 1e3, dict(meta))
    tags = apply_detection(routed, det, port, seed=int(r_det.integers(0, 2**63 - 1)), n_channels=2)
    mean_v = float(v_pair.mean()) if v_pair.size else 0.0
    return HomSimulation(tags, int(first.size), mean_v, tuple(flags))


# --------------------------------------------------------------------------
# configuration documents
# --------------------------------------------------------------------------


def config_to_dict(cfg: EmitterConfig, det: Optional[DetectionConfig] = None) -> dict:
    out = {"emitter": asdict(cfg)}
    out["emitter"]["blinkers"] = [asdict(b) for b in cfg.blinkers]
    if det is not None:
        out["detection"] = asdict(det)
    return out


def _emitter_from_dict(d: dict) -> EmitterConfig:
    d = dict(d)
    d["blinkers"] = tuple(Blinker.from_bunching(b["t_c"], b["c"]) if "t_c" in b else Blinker(**b)
                          for b in d.get("blinkers", ()))
    if "spectral_diffusion" in d and d["spectral_diffusion"] is not None:
        d["spectral_diffusion"] = SpectralDiffusion(**d["spectral_diffusion"])
    else:
        d.pop("spectral_diffusion", None)
    return EmitterConfig(**d)


def load_config(source) -> Tuple[EmitterConfig, DetectionConfig, dict]:
    """Parse a JSON config ``{"emitter": {...}, "detection": {...}, ...}``.

    Blinkers are given either as ``{"on_rate", "off_rate"}`` or as the
    bunching they produce, ``{"t_c", "c"}``. ``source`` is a path or an
    already-decoded dict. Unknown top-level keys
    are returned untouched as the third element.
    """
    if isinstance(source, dict):
        doc = source
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if "emitter" not in doc:
        raise ValueError("config needs an 'emitter' section")
    try:
        cfg = _emitter_from_dict(doc["emitter"])
        det = DetectionConfig(**doc.get("detection", {}))
    except TypeError as exc:
        raise ValueError(f"bad config field: {exc}") from None
    rest = {k: v for k, v in doc.items() if k not in ("emitter", "detection")}
    return cfg, det, rest
