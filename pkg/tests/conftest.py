import numpy as np
import pytest

from qdcoherence.core import TagStream, merge_streams

# (number, title, passed, detail) for every test marked ``acceptance``
ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    ACCEPTANCE.append((number, title, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title, ok, detail in sorted(ACCEPTANCE):
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f" ({detail})" if detail else ""))


def poisson_tags(rate_per_ns: float, duration_ns: float, n_channels: int = 2, seed: int = 0) -> TagStream:
    """Independent Poisson clicks on each channel, integer ps."""
    rng = np.random.default_rng(seed)
    dur_ps = int(duration_ns * 1000)
    parts = []
    for c in range(n_channels):
        k = rng.poisson(rate_per_ns * duration_ns)
        parts.append((np.full(k, c), np.sort(rng.integers(0, dur_ps, k))))
    return merge_streams(parts, n_channels, dur_ps)


def brute_force_counts(a, b, tau_min, w, n_bins, same=False):
    """O(N^2) reference histogram of t_b - t_a."""
    counts = np.zeros(n_bins, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    for i0 in range(0, a.size, 512):
        d = b[None, :] - a[i0 : i0 + 512, None]
        k = np.floor_divide(d - tau_min, w)
        ok = (k >= 0) & (k < n_bins)
        if same:
            idx = np.arange(i0, min(i0 + 512, a.size))
            ok[np.arange(idx.size), idx] = False
        counts += np.bincount(k[ok], minlength=n_bins)
    return counts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
