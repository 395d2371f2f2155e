"""phasekit: simulate, filter, and evaluate noisy InSAR interferograms.

Core pieces: grid types and phase algebra (grid), .igrd raster I/O and PNG
rendering (raster), a scene/noise simulator (simulate), Boxcar/Goldstein
baselines (filters), a hand-rolled differentiable patch network (mdn), the
generative filter built on it (geninsar), and the evaluation metric suite
(metrics). The `phasekit` CLI wires them into reproducible pipelines.
"""

__version__ = "0.1.0"

from .grid import (
    CoherenceMap,
    ComplexField,
    Patch,
    PhaseImage,
    UnwrappedImage,
    extract_patch,
    pad_reflect,
    phase_to_phasor,
    phasor_to_phase,
    wrap,
)
from .raster import RasterHeader, read_raster, render_png, write_raster

__all__ = [
    "CoherenceMap",
    "ComplexField",
    "Patch",
    "PhaseImage",
    "RasterHeader",
    "UnwrappedImage",
    "__version__",
    "extract_patch",
    "pad_reflect",
    "phase_to_phasor",
    "phasor_to_phase",
    "read_raster",
    "render_png",
    "wrap",
    "write_raster",
]
