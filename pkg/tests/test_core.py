import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdcoherence.core import (
    CoherenceSummary,
    FitResult,
    FormatError,
    Histogram,
    OrderingError,
    PhotonStream,
    TagStream,
    TimeTag,
    Transition,
    VoigtParams,
    angular_to_ghz,
    ghz_to_angular,
    merge_streams,
    read_fit,
    read_histogram,
    read_tags,
    write_fit,
    write_histogram,
    write_tags,
)


def test_read_minimal_file(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# channels=2 duration_ps=1000\n0,100\n1,250\n")
    s = read_tags(p)
    assert list(s) == [TimeTag(0, 100), TimeTag(1, 250)]
    assert s.n_channels == 2 and s.duration_ps == 1000


def test_read_empty_stream(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# channels=2 duration_ps=0\n")
    s = read_tags(p)
    assert len(s) == 0 and s.duration_ps == 0


def test_unsorted_file_names_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# channels=1 duration_ps=1000\n0,200\n0,100\n")
    with pytest.raises(OrderingError) as exc:
        read_tags(p)
    # the second data line
    assert exc.value.line == 3


def test_malformed_line_reports_number(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# channels=2 duration_ps=1000\n0,100\n0;x\n")
    with pytest.raises(FormatError) as exc:
        read_tags(p)
    assert exc.value.line == 3


def test_channel_outside_header_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# channels=1 duration_ps=1000\n3,100\n")
    with pytest.raises(FormatError):
        read_tags(p)


def test_roundtrip_random_tags(tmp_path, rng):
    parts = [(np.full(5000, c), np.sort(rng.integers(0, 10**9, 5000))) for c in range(2)]
    s = merge_streams(parts, 2, 10**9)
    write_tags(s, tmp_path / "r.csv")
    assert read_tags(tmp_path / "r.csv") == s


def test_roundtrip_empty(tmp_path):
    s = TagStream(np.zeros(0), np.zeros(0), 2, 0)
    write_tags(s, tmp_path / "e.csv")
    assert read_tags(tmp_path / "e.csv") == s


def test_roundtrip_large_timestamps(tmp_path):
    t = np.array([10**13 - 7, 10**13 - 3, 10**13 + 1, 2**53 + 1], dtype=np.int64)
    s = TagStream(np.zeros(4), t, 1, int(t[-1]) + 1)
    write_tags(s, tmp_path / "big.csv")
    back = read_tags(tmp_path / "big.csv")
    assert back.t.tolist() == t.tolist()


def test_write_to_missing_directory_has_path(tmp_path):
    s = TagStream(np.zeros(1), np.array([5]), 1, 10)
    with pytest.raises(OSError) as exc:
        write_tags(s, tmp_path / "nope" / "x.csv")
    assert "nope" in str(exc.value)


def test_tagstream_validation():
    with pytest.raises(ValueError):
        TagStream(np.array([0]), np.array([-1]), 1, 10)
    with pytest.raises(ValueError):
        TagStream(np.array([2]), np.array([1]), 2, 10)


def test_tagstream_is_immutable():
    s = TagStream(np.array([0, 1]), np.array([1, 2]), 2, 10)
    with pytest.raises(ValueError):
        s.t[0] = 5


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2**62)), max_size=60))
def test_roundtrip_property(tmp_path_factory, tags):
    tags = sorted(tags, key=lambda x: (x[1], x[0]))
    s = TagStream.from_tags([TimeTag(c, t) for c, t in tags], n_channels=4)
    p = tmp_path_factory.mktemp("rt") / "p.csv"
    write_tags(s, p)
    assert read_tags(p) == s


def test_histogram_geometry():
    h = Histogram(10, -50, np.zeros(11, dtype=np.int64))
    assert h.tau_max == 60
    assert h.edges[0] == -50 and h.edges[-1] == 60
    assert np.allclose(h.tau, np.arange(-45, 65, 10))
    assert h.bin_index(np.array([-50, -41, 0, 59])).tolist() == [0, 0, 5, 10]


def test_histogram_roundtrip(tmp_path, rng):
    h = Histogram(50, -1000, rng.integers(0, 100, 41), 1 / 37.0)
    write_histogram(h, tmp_path / "h.csv")
    assert read_histogram(tmp_path / "h.csv") == h


def test_histogram_file_rows(tmp_path):
    h = Histogram(10, -20, np.array([1, 2, 3, 4]), 0.5)
    write_histogram(h, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "# bin_width_ps=10 tau_min_ps=-20 norm=0.5"
    assert lines[1] == "-15.0,1,0.5"


def test_fit_roundtrip(tmp_path):
    f = FitResult("custom", ["a", "b"], np.array([1.5, -2.0]), np.array([[0.04, 0.01], [0.01, 0.09]]), 1.1,
                  iterations=7, derived={"x": {"value": 3.0, "sigma": 0.1}}, flags=["at_bound:b"])
    write_fit(f, tmp_path / "f.json")
    d = json.loads((tmp_path / "f.json").read_text())
    assert d["params"]["a"] == {"value": 1.5, "sigma": pytest.approx(0.2)}
    g = read_fit(tmp_path / "f.json")
    assert g.names == f.names and np.array_equal(g.values, f.values)
    assert np.array_equal(g.covariance, f.covariance)
    assert g.derived == f.derived and g.flags == f.flags


def test_read_fit_missing_key(tmp_path):
    (tmp_path / "f.json").write_text('{"model": "x"}')
    with pytest.raises(FormatError):
        read_fit(tmp_path / "f.json")


def test_voigt_params_validation():
    with pytest.raises(ValueError):
        VoigtParams(0.0, 0.0)
    with pytest.raises(ValueError):
        VoigtParams(-1.0, 1.0)


def test_unit_conversion_roundtrip():
    assert ghz_to_angular(1.0) == pytest.approx(2 * np.pi)  # rad/ns
    assert angular_to_ghz(ghz_to_angular(3.28)) == pytest.approx(3.28, rel=1e-15)


def test_photon_stream_selection():
    s = PhotonStream(np.array([1.0, 2.0, 3.0]), np.array([0, 1, 0]), np.zeros(3), np.zeros(3), 10.0)
    assert s.count(Transition.X) == 2
    assert len(s.select(s.transition == 1)) == 1
    assert s[1].transition is Transition.XX


def test_coherence_summary_as_dict():
    c = CoherenceSummary(t1=1.71, t2_ft=3.42, gamma_ft=0.0931)
    assert c.as_dict()["t2"] is None and c.as_dict()["t1"] == 1.71
