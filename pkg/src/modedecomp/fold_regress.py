"""Regression kernel: warp, demodulate, fold into one period, bin-average.

The canonical regression backend is the partitioning estimate: the folded
unit interval is split into ``B`` equal bins and each bin takes the mean of
the responses that fall in it. A pluggable callable with the same signature
can replace it for experimentation, but every shipped code path uses
:func:`partition_regress`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AmplitudeTooSmall,
    DecompositionError,
    EmptyInput,
    GridMismatch,
    LengthMismatch,
    NonFinite,
    SinZeroBand,
)
from .signal_model import (
    PhasePrior,
    SampledSignal,
    ShapeTable,
    make_shape,
)

__all__ = [
    "FoldedSamples",
    "RegressionBackend",
    "unwarp_samples",
    "demodulate",
    "fold",
    "partition_regress",
    "center_shape",
]

AMPLITUDE_FLOOR = 1e-8

# A regression backend maps folded samples and a bin count to a shape table.
RegressionBackend = Callable[["FoldedSamples", int], ShapeTable]


@dataclass(frozen=True)
class FoldedSamples:
    """Folded phase positions in [0, 1) with their responses."""

    xs: np.ndarray
    ys: np.ndarray

    def __len__(self) -> int:
        return int(self.xs.size)


def unwarp_samples(residual: SampledSignal, prior: PhasePrior):
    """Re-index residual samples by phase and divide out the amplitude.

    Returns ``(vs, ys)`` with ``vs = p(t_l)`` and ``ys = r(t_l) / q(t_l)``.
    No explicit phase inverse is computed; the samples are simply re-indexed.
    """
    if len(prior) != len(residual):
        raise GridMismatch("prior and residual are on different grids")
    q = prior.amplitude
    if np.any(np.abs(q) < AMPLITUDE_FLOOR):
        raise AmplitudeTooSmall(
            f"amplitude magnitude below {AMPLITUDE_FLOOR:g}")
    return prior.phase.copy(), residual.values / q


def carrier(prior: PhasePrior, n: int, kind: str) -> np.ndarray:
    """Demodulation carrier ``cos/sin(2*pi*n*p/N)`` sampled on the grid."""
    if kind not in ("cos", "sin"):
        raise DecompositionError(f"unknown carrier kind {kind!r}")
    if kind == "sin" and n == 0:
        raise SinZeroBand("sine carrier vanishes identically at band 0")
    if prior.fundamental is None:
        raise DecompositionError("prior fundamental required for demodulation")
    angle = 2.0 * np.pi * n * prior.phase / prior.fundamental
    return np.cos(angle) if kind == "cos" else np.sin(angle)


def demodulate(residual: SampledSignal, prior: PhasePrior, n: int, kind: str):
    """Multiply the residual by the band-``n`` carrier, re-indexed by phase.

    Unlike :func:`unwarp_samples` there is no amplitude division; the
    demodulated sweeps operate with unit amplitude.
    """
    if len(prior) != len(residual):
        raise GridMismatch("prior and residual are on different grids")
    g = carrier(prior, n, kind)
    return prior.phase.copy(), g * residual.values


def fold(vs: Sequence[float], ys: Sequence[float]) -> FoldedSamples:
    """Map warped positions into one period: ``(v, y) -> (mod(v, 1), y)``."""
    v = np.asarray(vs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if v.shape != y.shape or v.ndim != 1:
        raise LengthMismatch("vs and ys must be 1-d and equal length")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(y))):
        raise NonFinite("folded samples must be finite")
    x = np.mod(v, 1.0)
    # guard the mod rounding up to 1.0 for tiny negative v
    x = np.where(x >= 1.0, x - 1.0, x)
    return FoldedSamples(x, y.copy())


def partition_regress(samples: FoldedSamples, bins: int) -> ShapeTable:
    """Partitioning estimate: per-bin mean of the responses.

    Bin ``j`` covers ``[j/B, (j+1)/B)``. Empty bins are filled by periodic
    linear interpolation between the nearest non-empty bins on each side, so
    the returned table is total. Bin means are reproducible to 1e-12 under
    reordering of the samples (summation-order effects stay below that).
    """
    nb = int(bins)
    if nb < 2:
        raise LengthMismatch("bin count must be at least 2")
    if len(samples) == 0:
        raise EmptyInput("cannot regress zero samples")
    idx = np.clip((samples.xs * nb).astype(np.int64), 0, nb - 1)
    counts = np.bincount(idx, minlength=nb)
    sums = np.bincount(idx, weights=samples.ys, minlength=nb)
    occupied = counts > 0
    means = np.zeros(nb)
    means[occupied] = sums[occupied] / counts[occupied]
    if not occupied.all():
        centers = (np.arange(nb) + 0.5) / nb
        means[~occupied] = np.interp(
            centers[~occupied], centers[occupied], means[occupied], period=1.0)
    return make_shape(means)


def center_shape(shape: ShapeTable) -> ShapeTable:
    """Subtract the bin mean; idempotent."""
    return make_shape(shape.bins - np.mean(shape.bins))
