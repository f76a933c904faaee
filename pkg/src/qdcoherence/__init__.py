"""Quantum-emitter coherence workbench.

Simulates single-emitter photon streams and extracts coherence figures
(g2 dips, HOM visibility, Voigt widths, T2) from measured or simulated data.
"""

import numba as _numba

# the bundled TBB is often too old; prefer OpenMP, then the portable layer
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
