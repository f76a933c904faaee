import matplotlib
import numpy as np

from qdcoherence.core import FitResult, Histogram
from qdcoherence.plotting import plot_hom, plot_rabi


def _png_ok(path):
    data = path.read_bytes()
    return data[:8] == b"\x89PNG\r\n\x1a\n" and len(data) > 5000


def test_plot_hom(tmp_path):
    tau = np.arange(-100, 101)
    h = Histogram(500, -50_000, np.full(201, 100) - 50 * (np.abs(tau) < 3), 0.01)
    plot_hom(h, h, tmp_path / "hom.png")
    assert _png_ok(tmp_path / "hom.png")


def test_plot_rabi_with_fit(tmp_path):
    fit = FitResult("rabi", ["scale", "calib", "gamma_loss", "gamma_deph"], np.array([100.0, 1.0, 10.0, 0.0]),
                    np.zeros((4, 4)), 1.0, extra={"gamma_rad": 1 / 1.71, "envelope": "gaussian",
                                                  "duration_fwhm_ps": 10.0})
    x = np.linspace(0, 6, 20)
    plot_rabi(x, 100 * np.sin(x / 2) ** 2, tmp_path / "rabi.png", fit)
    assert _png_ok(tmp_path / "rabi.png")


def test_plotting_leaves_global_backend_alone():
    before = matplotlib.get_backend()
    import qdcoherence.plotting  # noqa: F401

    assert matplotlib.get_backend() == before
