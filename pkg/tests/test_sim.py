import json
import math

import numpy as np
import pytest

from qdcoherence.core import PhotonStream, Transition
from qdcoherence.correlator import CorrelationRequest, cross_correlate, normalize
from qdcoherence.fitting import fit_scan
from qdcoherence.sim import (
    Blinker,
    DetectionConfig,
    EmitterConfig,
    ResourceError,
    SpectralDiffusion,
    apply_detection,
    config_to_dict,
    load_config,
    simulate_hom,
    simulate_mi_visibility,
    simulate_rf_scan,
    simulate_stream,
)


def test_config_validation():
    with pytest.raises(ValueError):
        EmitterConfig(t1_x=0.0)
    with pytest.raises(ValueError):
        EmitterConfig(mode="three_level")
    with pytest.raises(ValueError):
        DetectionConfig(efficiency=0.0)
    with pytest.raises(ValueError):
        Blinker(0.0, 1.0)
    with pytest.raises(ValueError):
        SpectralDiffusion(sigma=1.0, corr_time=0.0)


def test_blinker_from_bunching():
    b = Blinker.from_bunching(24.0, 0.2)
    assert b.timescale == pytest.approx(24.0)
    assert b.amplitude == pytest.approx(0.2)
    assert b.on_fraction == pytest.approx(1 / 1.2)


def test_emission_rate_matches_steady_state():
    cfg = EmitterConfig(pump_rate=0.5)
    s = simulate_stream(cfg, 2e6, seed=1)
    rate = len(s) / 2e6
    assert rate == pytest.approx(1 / (1 / 0.5 + 1.71), rel=0.01)
    assert np.all(np.diff(s.t_emit) >= 0)
    assert s.meta["t1_x"] == 1.71 and s.meta["seed"] == 1


def test_same_seed_same_stream_and_segments_continue():
    cfg = EmitterConfig(pump_rate=0.4, blinkers=(Blinker.from_bunching(30.0, 0.3),))
    a = simulate_stream(cfg, 2.5e6, seed=3)
    b = simulate_stream(cfg, 2.5e6, seed=3)
    c = simulate_stream(cfg, 2.5e6, seed=4)
    assert np.array_equal(a.t_emit, b.t_emit)
    assert not np.array_equal(a.t_emit[:100], c.t_emit[:100])
    # no gap or pile-up at the 1 ms segment joins
    counts = np.histogram(a.t_emit, bins=25, range=(0, 2.5e9))[0]
    assert counts.min() > 0.9 * counts.mean()


def test_cascade_pairs():
    s = simulate_stream(EmitterConfig(mode="cascade", pump_rate=0.5), 2e5, seed=2)
    assert s.count(Transition.X) == s.count(Transition.XX)
    assert s.transition[0] == Transition.XX and s.transition[-1] == Transition.X
    assert np.all(s.transition[0::2] == Transition.XX)


def test_resource_limit():
    with pytest.raises(ResourceError):
        simulate_stream(EmitterConfig(pump_rate=10.0), 1e9)


def test_blinker_imprints_bunching():
    cfg = EmitterConfig(pump_rate=0.5, blinkers=(Blinker.from_bunching(20.0, 0.5),))
    tags = apply_detection(simulate_stream(cfg, 5e6, seed=5), seed=5)
    h = normalize(cross_correlate(tags, CorrelationRequest(0, 1, 1000, 500_000)))
    sel = (h.tau > 6_000) & (h.tau < 8_000)
    assert h.g2[sel].mean() == pytest.approx(1 + 0.5 * math.exp(-7 / 20), abs=0.05)


def test_detection_efficiency_and_routing():
    s = simulate_stream(EmitterConfig(pump_rate=0.5), 1e6, seed=6)
    tags = apply_detection(s, DetectionConfig(efficiency=0.25), seed=1)
    assert len(tags) == pytest.approx(0.25 * len(s), rel=0.02)
    assert len(tags.channel(0)) == pytest.approx(len(tags.channel(1)), rel=0.03)
    c = simulate_stream(EmitterConfig(mode="cascade", pump_rate=0.5), 1e5, seed=6)
    by = apply_detection(c, routing="by_transition")
    assert len(by.channel(Transition.X)) == c.count(Transition.X)
    with pytest.raises(ValueError):
        apply_detection(s, routing=np.zeros(3, int))


def test_dead_time_and_dark_counts():
    s = simulate_stream(EmitterConfig(pump_rate=0.5), 2e5, seed=7)
    tags = apply_detection(s, DetectionConfig(dead_time=5000.0), seed=1)
    for c in (0, 1):
        assert np.diff(tags.channel(c)).min() >= 5000
    empty = s.select(np.zeros(len(s), bool))
    dark = apply_detection(empty, DetectionConfig(dark_rate=1e-3), seed=2)
    assert len(dark) == pytest.approx(2 * 1e-3 * 2e5, rel=0.15)


def test_jitter_width():
    # photons 10 ns apart: 50 ps jitter cannot reorder them or push them out
    n = 20000
    s = PhotonStream(10_000.0 * (np.arange(n) + 1), np.zeros(n), np.zeros(n), np.zeros(n), 10_000.0 * (n + 2))
    tags = apply_detection(s, DetectionConfig(jitter_sigma=50.0), np.zeros(n, int), seed=3)
    d = tags.t - s.t_emit
    assert len(tags) == n
    assert np.std(d) == pytest.approx(50.0, rel=0.03)
    assert abs(np.mean(d)) < 2.0


def test_mi_visibility_white_dephasing():
    cfg = EmitterConfig(pure_dephasing_rate=0.3)
    d = np.array([0.0, 500.0, 1500.0, 3000.0])
    r = simulate_mi_visibility(cfg, d, seed=1, n_traj=40000)
    ref = np.exp(-d * 1e-3 / (2 * 1.71) - 0.3 * d * 1e-3)
    assert np.all(np.abs(r.visibility - ref) < 4 * r.stderr + 1e-12)
    assert r.visibility[0] == 1.0 and r.flags == ()


def test_mi_visibility_ou_closed_form():
    sigma, tc = 3e9, 0.2  # rad/s, ns
    cfg = EmitterConfig(spectral_diffusion=SpectralDiffusion(sigma, tc))
    d = np.linspace(0, 1500, 7)
    r = simulate_mi_visibility(cfg, d, seed=2, n_traj=40000)
    s, th, t = sigma * 1e-9, 1 / tc, d * 1e-3
    ref = np.exp(-t / (2 * 1.71)) * np.exp(-(s**2) * (th * t - 1 + np.exp(-th * t)) / th**2)
    assert np.all(np.abs(r.visibility - ref) < 4 * r.stderr + 2e-3)


def test_mi_flags_noisy_estimate():
    cfg = EmitterConfig(spectral_diffusion=SpectralDiffusion(3e9, 1e3))
    r = simulate_mi_visibility(cfg, [0.0, 400.0, 800.0], seed=3, n_traj=100, max_rel_err=0.01)
    assert "insufficient_samples" in r.flags


def test_rf_scan_lorentzian_width():
    cfg = EmitterConfig()
    x = np.linspace(-1.5, 1.5, 301)
    y = simulate_rf_scan(cfg, x, seed=1)
    assert y.max() == pytest.approx(1e4, rel=1e-3)
    fwhm_ghz = 2 * math.sqrt(1.01) / cfg.t2_x / (2 * math.pi)
    above = x[y >= y.max() / 2]
    assert above[-1] - above[0] == pytest.approx(fwhm_ghz, abs=0.02)


def test_rf_scan_inhomogeneous_width():
    sig = 2 * math.pi * 1.3e9  # 1.3 GHz standard deviation
    cfg = EmitterConfig(spectral_diffusion=SpectralDiffusion(sig, 1e6))
    x = np.linspace(-12, 12, 241)
    y = simulate_rf_scan(cfg, x, seed=2, n_samples=20000, poisson=True)
    fit, s = fit_scan(x, y)
    assert fit["gamma_inhom"] == pytest.approx(2.3548 * 1.3, rel=0.05)


def test_hom_pairs_and_flags():
    s = simulate_stream(EmitterConfig(pump_rate=0.5), 2e5, seed=9)
    h = simulate_hom(s, 14.3, "co", seed=1)
    assert h.n_pairs > 0 and 0 < h.mean_overlap <= 1
    assert simulate_hom(s, 2.0, "cross", seed=1).flags == ("overlap",)
    assert simulate_hom(s, 14.3, "cross", seed=1).mean_overlap == 0.0
    with pytest.raises(ValueError):
        simulate_hom(s, 14.3, "diagonal")


def test_config_round_trip(tmp_path):
    cfg = EmitterConfig(pump_rate=0.2, blinkers=(Blinker(0.1, 0.03),),
                        spectral_diffusion=SpectralDiffusion(1e9, 5.0), mode="cascade")
    det = DetectionConfig(0.5, 20.0, 30.0, 1e-4)
    p = tmp_path / "c.json"
    p.write_text(json.dumps({**config_to_dict(cfg, det), "note": "x"}))
    cfg2, det2, rest = load_config(p)
    assert cfg2 == cfg and det2 == det and rest == {"note": "x"}


def test_config_bunching_form_and_errors():
    cfg, _, _ = load_config({"emitter": {"blinkers": [{"t_c": 24.0, "c": 0.2}]}})
    assert cfg.blinkers[0] == Blinker.from_bunching(24.0, 0.2)
    with pytest.raises(ValueError):
        load_config({"detection": {}})
    with pytest.raises(ValueError):
        load_config({"emitter": {"t1": 1.0}})
