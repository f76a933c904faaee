"""
Shared data model and file formats.

Timestamps are integer picoseconds. Frequencies are GHz at every public
boundary; the simulator and Bloch solver work in angular units internally.

File formats
------------
tag CSV        ``# channels=<n> duration_ps=<d>`` then ``<channel>,<t_ps>`` lines
histogram CSV  ``# bin_width_ps=<w> tau_min_ps=<m> norm=<f>`` then
               ``<tau_ps>,<counts>,<g2>`` lines (tau is the bin center)
fit JSON       ``{model, params: {name: {value, sigma}}, covariance, chi2_red, converged}``
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

GHZ_TO_RAD_PER_NS = 2.0 * math.pi
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class FormatError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line: Optional[int] = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class OrderingError(FormatError):
    """Timestamps out of order within a channel."""


class Transition(enum.IntEnum):
    X = 0
    XX = 1
    Xplus = 2


class Polarization(enum.IntEnum):
    H = 0
    V = 1


def ghz_to_angular(f_ghz):
    """GHz -> rad/ns."""
    return f_ghz * GHZ_TO_RAD_PER_NS


def angular_to_ghz(w):
    """rad/ns -> GHz."""
    return w / GHZ_TO_RAD_PER_NS


# --------------------------------------------------------------------------
# time tags
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeTag:
    channel: int
    t: int


@dataclass(frozen=True, eq=False)
class TagStream:
    """Columnar stream of detector clicks, globally sorted by time.

    ``channels`` and ``t`` are parallel arrays; ``n_channels`` declares the
    channel set ``{0, ..., n_channels-1}``.
    """

    channels: np.ndarray
    t: np.ndarray
    n_channels: int
    duration_ps: int

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.int16)
        t = np.ascontiguousarray(self.t, dtype=np.int64)
        if ch.shape != t.shape or ch.ndim != 1:
            raise ValueError("channels and t must be 1-d arrays of equal length")
        if t.size:
            if t.min() < 0:
                raise ValueError("timestamps must be non-negative")
            if ch.min() < 0 or ch.max() >= self.n_channels:
                raise ValueError(f"channel outside declared set 0..{self.n_channels - 1}")
        ch.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "n_channels", int(self.n_channels))
        object.__setattr__(self, "duration_ps", int(self.duration_ps))

    @classmethod
    def from_tags(cls, tags, n_channels=None, duration_ps=None) -> "TagStream":
        tags = list(tags)
        ch = np.array([tg.channel for tg in tags], dtype=np.int16)
        t = np.array([tg.t for tg in tags], dtype=np.int64)
        if n_channels is None:
            n_channels = int(ch.max()) + 1 if ch.size else 1
        if duration_ps is None:
            duration_ps = int(t.max()) if t.size else 0
        return cls(ch, t, n_channels, duration_ps)

    def __len__(self):
        return self.t.size

    def __iter__(self) -> Iterator[TimeTag]:
        for c, t in zip(self.channels.tolist(), self.t.tolist()):
            yield TimeTag(c, t)

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.n_channels == other.n_channels
            and self.duration_ps == other.duration_ps
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.t, other.t)
        )

    def channel(self, c: int) -> np.ndarray:
        """Sorted timestamps of one channel."""
        return self.t[self.channels == c]

    def counts(self) -> dict:
        return {c: int(np.count_nonzero(self.channels == c)) for c in range(self.n_channels)}

    def check_sorted(self):
        for c in range(self.n_channels):
            tc = self.channel(c)
            if tc.size > 1 and np.any(np.diff(tc) < 0):
                raise OrderingError(f"channel {c} timestamps are not sorted")


def merge_streams(parts, n_channels, duration_ps) -> TagStream:
    """Concatenate (channels, t) parts and stable-sort by time, ties by channel."""
    ch = np.concatenate([np.asarray(p[0], dtype=np.int16) for p in parts]) if parts else np.zeros(0, np.int16)
    t = np.concatenate([np.asarray(p[1], dtype=np.int64) for p in parts]) if parts else np.zeros(0, np.int64)
    order = np.lexsort((ch, t))
    return TagStream(ch[order], t[order], n_channels, duration_ps)


def _parse_header(line: str, keys, path) -> dict:
    if not line.startswith("#"):
        raise FormatError("missing header line", 1, path)
    out = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise FormatError(f"bad header token {tok!r}", 1, path)
        k, v = tok.split("=", 1)
        out[k] = v
    missing = [k for k in keys if k not in out]
    if missing:
        raise FormatError(f"header missing {', '.join(missing)}", 1, path)
    return out


def read_tags(path) -> TagStream:
    """Read a tag CSV file.

    Raises FormatError (with line number) on malformed lines and
    OrderingError when a channel's timestamps decrease.
    """
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty file", 1, path)
        hd = _parse_header(header.strip(), ("channels", "duration_ps"), path)
        try:
            n_channels = int(hd["channels"])
            duration = int(hd["duration_ps"])
        except ValueError:
            raise FormatError("non-integer header value", 1, path) from None
        body = fh.read()

    lines = body.splitlines()
    if not lines:
        return TagStream(np.zeros(0, np.int16), np.zeros(0, np.int64), n_channels, duration)
    try:
        arr = np.loadtxt(lines, delimiter=",", dtype=np.int64, ndmin=2, comments="#")
    except ValueError:
        arr = None
    if arr is None or arr.shape[1] != 2:
        # slow path to locate the bad line
        for i, ln in enumerate(lines, start=2):
            if not ln.strip() or ln.startswith("#"):
                continue
            parts = ln.split(",")
            if len(parts) != 2:
                raise FormatError(f"expected '<channel>,<t_ps>', got {ln!r}", i, path)
            try:
                int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"non-integer field in {ln!r}", i, path) from None
        raise FormatError("malformed body", None, path)

    ch, t = arr[:, 0], arr[:, 1]
    lineno = np.array([i for i, ln in enumerate(lines, start=2) if ln.strip() and not ln.startswith("#")])
    bad = np.flatnonzero((ch < 0) | (ch >= n_channels))
    if bad.size:
        raise FormatError(f"channel {ch[bad[0]]} not in declared set", int(lineno[bad[0]]), path)
    bad = np.flatnonzero(t < 0)
    if bad.size:
        raise FormatError("negative timestamp", int(lineno[bad[0]]), path)
    for c in range(n_channels):
        idx = np.flatnonzero(ch == c)
        if idx.size > 1:
            dec = np.flatnonzero(np.diff(t[idx]) < 0)
            if dec.size:
                raise OrderingError(
                    f"channel {c} timestamp {t[idx[dec[0] + 1]]} precedes {t[idx[dec[0]]]}",
                    int(lineno[idx[dec[0] + 1]]),
                    path,
                )
    return TagStream(ch, t, n_channels, duration)


def write_tags(stream: TagStream, path) -> None:
    path = Path(path)
    stream.check_sorted()
    body = np.column_stack([stream.channels.astype(np.int64), stream.t])
    try:
        with open(path, "w") as fh:
            fh.write(f"# channels={stream.n_channels} duration_ps={stream.duration_ps}\n")
            if body.size:
                np.savetxt(fh, body, fmt="%d", delimiter=",")
    except OSError as exc:
        raise OSError(f"cannot write tag file {path}: {exc}") from exc


# --------------------------------------------------------------------------
# photons (pre-detection ground truth)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhotonRecord:
    t_emit: float
    transition: Transition
    detuning: float
    polarization: Polarization


@dataclass(frozen=True, eq=False)
class PhotonStream:
    """Columnar list of emitted photons.

    ``t_emit`` is in picoseconds (float), ``detuning`` in rad/s.
    """

    t_emit: np.ndarray
    transition: np.ndarray
    detuning: np.ndarray
    polarization: np.ndarray
    duration_ps: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t_emit.size

    def __getitem__(self, i) -> PhotonRecord:
        return PhotonRecord(
            float(self.t_emit[i]),
            Transition(int(self.transition[i])),
            float(self.detuning[i]),
            Polarization(int(self.polarization[i])),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def select(self, mask) -> "PhotonStream":
        return PhotonStream(
            self.t_emit[mask], self.transition[mask], self.detuning[mask],
            self.polarization[mask], self.duration_ps, dict(self.meta),
        )

    def count(self, transition: Transition) -> int:
        return int(np.count_nonzero(self.transition == int(transition)))


# --------------------------------------------------------------------------
# histograms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Histogram:
    """Delay histogram with bins ``[tau_min + k*w, tau_min + (k+1)*w)``.

    ``norm`` maps counts to g2 units (``g2 = counts * norm``); None until
    normalized.
    """

    bin_width: int
    tau_min: int
    counts: np.ndarray
    norm: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1:
            raise ValueError("counts must be 1-d")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.norm is not None and not self.norm > 0:
            raise ValueError("norm must be positive")
        object.__setattr__(self, "counts", c)

    @property
    def tau_max(self) -> int:
        return self.tau_min + self.counts.size * self.bin_width

    @property
    def edges(self) -> np.ndarray:
        return self.tau_min + self.bin_width * np.arange(self.counts.size + 1, dtype=np.int64)

    @property
    def tau(self) -> np.ndarray:
        """Bin centers in ps."""
        return self.tau_min + self.bin_width * (np.arange(self.counts.size) + 0.5)

    @property
    def g2(self) -> np.ndarray:
        if self.norm is None:
            raise ValueError("histogram is not normalized")
        return self.counts * self.norm

    def bin_index(self, tau) -> np.ndarray:
        return np.floor_divide(np.asarray(tau) - self.tau_min, self.bin_width)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.bin_width == other.bin_width
            and self.tau_min == other.tau_min
            and self.norm == other.norm
            and np.array_equal(self.counts, other.counts)
        )


def write_histogram(hist: Histogram, path) -> None:
    norm = hist.norm if hist.norm is not None else 0.0
    g2 = hist.counts * norm
    with open(path, "w") as fh:
        fh.write(f"# bin_width_ps={hist.bin_width} tau_min_ps={hist.tau_min} norm={norm!r}\n")
        for tau, n, g in zip(hist.tau.tolist(), hist.counts.tolist(), g2.tolist()):
            fh.write(f"{tau!r},{n},{g!r}\n")


def read_histogram(path) -> Histogram:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        if not header:
            raise FormatError("empty file", 1, path)
        hd = _parse_header(header.strip(), ("bin_width_ps", "tau_min_ps", "norm"), path)
        try:
            w = int(hd["bin_width_ps"])
            tmin = int(hd["tau_min_ps"])
            norm = float(hd["norm"])
        except ValueError:
            raise FormatError("bad header value", 1, path) from None
        counts = []
        for i, ln in enumerate(fh, start=2):
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split(",")
            if len(parts) != 3:
                raise FormatError(f"expected '<tau_ps>,<counts>,<g2>', got {ln!r}", i, path)
            try:
                counts.append(int(parts[1]))
            except ValueError:
                raise FormatError(f"non-integer count in {ln!r}", i, path) from None
    return Histogram(w, tmin, np.array(counts, dtype=np.int64), norm if norm > 0 else None)


# --------------------------------------------------------------------------
# lineshape / coherence records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class VoigtParams:
    """Voigt lineshape: Lorentzian FWHM ``gamma_hom`` and Gaussian FWHM
    ``gamma_inhom``, both GHz."""

    gamma_hom: float
    gamma_inhom: float
    center: float = 0.0
    amplitude: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.gamma_hom < 0 or self.gamma_inhom < 0:
            raise ValueError("Voigt widths must be non-negative")
        if self.gamma_hom == 0 and self.gamma_inhom == 0:
            raise DegenerateProfileError("both Voigt widths are zero")


class DegenerateProfileError(ValueError):
    pass


@dataclass(frozen=True)
class CoherenceSummary:
    gamma_fwhm: Optional[float] = None
    t2: Optional[float] = None
    gamma_inhom: Optional[float] = None
    gamma_hom: Optional[float] = None
    t1: Optional[float] = None
    gamma_ft: Optional[float] = None
    t2_ft: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# --------------------------------------------------------------------------
# fit results
# --------------------------------------------------------------------------


@dataclass
class FitResult:
    """Uniform output of every fit.

    ``derived`` holds quantities computed from the fitted parameters, each
    as ``{"value": v, "sigma": s}``; ``flags`` collects diagnostics such as
    ``"mono_exponential_fallback"`` or ``"at_bound:<name>"``.
    """

    model: str
    names: list
    values: np.ndarray
    covariance: np.ndarray
    chi2_red: float
    iterations: int = 0
    converged: bool = True
    grad_norm: float = 0.0
    derived: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def params(self) -> dict:
        return {n: (float(v), float(s)) for n, v, s in zip(self.names, self.values, self.sigmas)}

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def sigma(self, name) -> float:
        return float(self.sigmas[self.names.index(name)])

    def to_json_dict(self) -> dict:
        d = {
            "model": self.model,
            "params": {n: {"value": v, "sigma": s} for n, (v, s) in self.params.items()},
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "chi2_red": float(self.chi2_red),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        if self.derived:
            d["derived"] = {k: _jsonable(v) for k, v in self.derived.items()}
        if self.flags:
            d["flags"] = list(self.flags)
        if self.extra:
            d["extra"] = {k: _jsonable(v) for k, v in self.extra.items()}
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "FitResult":
        names = list(d["params"].keys())
        values = np.array([d["params"][n]["value"] for n in names], dtype=float)
        cov = np.array(d["covariance"], dtype=float).reshape(len(names), len(names))
        return cls(
            model=d["model"],
            names=names,
            values=values,
            covariance=cov,
            chi2_red=float(d["chi2_red"]),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d["converged"]),
            derived=dict(d.get("derived", {})),
            flags=list(d.get("flags", [])),
            extra=dict(d.get("extra", {})),
        )


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def fit_to_json(fit: FitResult, extra: Optional[dict] = None) -> str:
    d = fit.to_json_dict()
    if extra:
        d.update(extra)
    return json.dumps(d, indent=2, sort_keys=False)


def write_fit(fit: FitResult, path, extra: Optional[dict] = None) -> None:
    Path(path).write_text(fit_to_json(fit, extra) + "\n")


def read_fit(path) -> FitResult:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.lineno, path) from None
    for key in ("model", "params", "covariance", "chi2_red", "converged"):
        if key not in d:
            raise FormatError(f"fit file missing key {key!r}", None, path)
    return FitResult.from_json_dict(d)
