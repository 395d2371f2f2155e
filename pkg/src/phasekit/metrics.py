"""Evaluation suite: residue detection, RRP, phase/coherence RMSE, cosine error.

A residue is a 2x2 pixel loop whose wrapped phase differences, summed
clockwise, come to +/-2 pi. Counts of those loops before and after
filtering drive the residue reduction percentage.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidValue, NoResiduesToReduce
from .grid import CoherenceMap, PhaseImage, wrap

# wrapped-curl sums are 2*pi multiples up to float error; anything farther
# from an integer than this indicates a broken wrap
_CHARGE_TOL = 1e-3


@dataclass(frozen=True)
class ResidueMap:
    """(H-1) x (W-1) grid of loop charges in {-1, 0, +1}."""

    charges: np.ndarray

    @property
    def height(self):
        return self.charges.shape[0]

    @property
    def width(self):
        return self.charges.shape[1]


def residue_map(p: PhaseImage) -> ResidueMap:
    """Charge of every 2x2 loop: clockwise wrapped-difference sum over 2 pi."""
    if p.height < 2 or p.width < 2:
        raise InvalidValue(f"residue map needs at least 2x2 pixels, got {p.height}x{p.width}")
    theta = p.data.astype(np.float64)
    d_top = wrap(theta[:-1, 1:] - theta[:-1, :-1])      # (r,c)   -> (r,c+1)
    d_right = wrap(theta[1:, 1:] - theta[:-1, 1:])      # (r,c+1) -> (r+1,c+1)
    d_bottom = wrap(theta[1:, :-1] - theta[1:, 1:])     # (r+1,c+1) -> (r+1,c)
    d_left = wrap(theta[:-1, :-1] - theta[1:, :-1])     # (r+1,c) -> (r,c)
    curl = (d_top + d_right + d_bottom + d_left) / (2.0 * np.pi)
    charges = np.rint(curl)
    if np.any(np.abs(curl - charges) > _CHARGE_TOL):
        raise InvalidValue("wrapped curl is not a 2*pi multiple within tolerance")
    return ResidueMap(charges.astype(np.int8))


def count_residues(m: ResidueMap) -> int:
    """Nonzero charges, counted individually (no +/- cancellation)."""
    return int(np.count_nonzero(m.charges))


def rrp(noisy: PhaseImage, filtered: PhaseImage) -> float:
    """Residue Reduction Percentage; negative if filtering added residues."""
    _check_dims(noisy, filtered)
    n_noisy = count_residues(residue_map(noisy))
    if n_noisy == 0:
        raise NoResiduesToReduce("noisy input has no residues")
    n_filtered = count_residues(residue_map(filtered))
    return 100.0 * (n_noisy - n_filtered) / n_noisy


def _check_dims(a, b):
    if (a.height, a.width) != (b.height, b.width):
        raise InvalidValue(f"dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}")


def phase_rmse(truth: PhaseImage, filtered: PhaseImage) -> float:
    """RMSE of the wrapped difference, in radians."""
    _check_dims(truth, filtered)
    diff = wrap(truth.data.astype(np.float64) - filtered.data.astype(np.float64))
    return float(np.sqrt(np.mean(diff**2, dtype=np.float64)))


def coherence_rmse(truth: CoherenceMap, estimated: CoherenceMap) -> float:
    _check_dims(truth, estimated)
    diff = truth.data.astype(np.float64) - estimated.data.astype(np.float64)
    return float(np.sqrt(np.mean(diff**2, dtype=np.float64)))


def phase_cosine_error(truth: PhaseImage, filtered: PhaseImage) -> float:
    """Mean of (1 - cos(wrapped difference)) / 2; in [0, 1]."""
    _check_dims(truth, filtered)
    diff = wrap(truth.data.astype(np.float64) - filtered.data.astype(np.float64))
    return float(np.mean(0.5 * (1.0 - np.cos(diff)), dtype=np.float64))


@dataclass(frozen=True)
class EvalReport:
    phase_rmse: float
    coherence_rmse: float | None
    rrp: float
    pce: float
    residues_before: int
    residues_after: int
    wall_time: float = 0.0
    label: str = ""

    CSV_HEADER = "label,phase_rmse,coherence_rmse,rrp,pce,residues_before,residues_after,wall_time"

    def csv_row(self) -> str:
        coh = "" if self.coherence_rmse is None else f"{self.coherence_rmse:.6f}"
        return (f"{self.label},{self.phase_rmse:.6f},{coh},{self.rrp:.4f},{self.pce:.6f},"
                f"{self.residues_before},{self.residues_after},{self.wall_time:.3f}")

    def pretty(self) -> str:
        coh = "N/A" if self.coherence_rmse is None else f"{self.coherence_rmse:.4f}"
        return (f"{self.label or 'image'}: phase RMSE {self.phase_rmse:.4f} rad, "
                f"coherence RMSE {coh}, RRP {self.rrp:.2f}%, PCE {self.pce:.5f}, "
                f"residues {self.residues_before} -> {self.residues_after}"
                + (f", {self.wall_time:.3f} s" if self.wall_time else ""))


def evaluate(truth_phase: PhaseImage, truth_coh: CoherenceMap, noisy_phase: PhaseImage,
             filtered_phase: PhaseImage, est_coh: CoherenceMap | None = None, *,
             wall_time: float = 0.0, label: str = "") -> EvalReport:
    """Assemble the full metric set for one image.

    est_coh is optional; methods that output only phase report no
    coherence RMSE.
    """
    _check_dims(truth_phase, noisy_phase)
    _check_dims(truth_phase, filtered_phase)
    _check_dims(truth_phase, truth_coh)
    if est_coh is not None:
        _check_dims(truth_phase, est_coh)
    return EvalReport(
        phase_rmse=phase_rmse(truth_phase, filtered_phase),
        coherence_rmse=None if est_coh is None else coherence_rmse(truth_coh, est_coh),
        rrp=rrp(noisy_phase, filtered_phase),
        pce=phase_cosine_error(truth_phase, filtered_phase),
        residues_before=count_residues(residue_map(noisy_phase)),
        residues_after=count_residues(residue_map(filtered_phase)),
        wall_time=wall_time,
        label=label,
    )


def summarize(reports: list[EvalReport], label: str = "mean±std") -> str:
    """One Table-style summary row: mean±std of each metric across images."""
    if not reports:
        raise InvalidValue("no reports to summarize")

    def ms(values):
        arr = np.asarray(values, dtype=np.float64)
        return f"{arr.mean():.4f}±{arr.std():.4f}"

    cohs = [r.coherence_rmse for r in reports if r.coherence_rmse is not None]
    coh = ms(cohs) if cohs else "N/A"
    return (f"{label}: phase RMSE {ms([r.phase_rmse for r in reports])} rad, "
            f"coherence RMSE {coh}, RRP {ms([r.rrp for r in reports])}%, "
            f"PCE {ms([r.pce for r in reports])}, "
            f"time {ms([r.wall_time for r in reports])} s")


def write_csv(reports: list[EvalReport], fh: io.TextIOBase) -> None:
    fh.write(EvalReport.CSV_HEADER + "\n")
    for r in reports:
        fh.write(r.csv_row() + "\n")
