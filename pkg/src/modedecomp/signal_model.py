"""Core data types: sampled signals, phase priors, shape tables, mode estimates.

All types are frozen dataclasses holding read-only numpy arrays, so instances
can be shared freely between threads. Operations are pure functions that
return new objects.

Conventions
-----------
* Time grids live in ``[0, 1]``.
* Phases are exchanged in cycles (``p = N * phi``); angles pick up their
  ``2*pi`` factor only inside trigonometric evaluation.
* A shape table stores one period of a periodic waveform on ``B`` uniform
  bins over ``[0, 1)``; its ``l2norm`` is the root-mean-square of the bin
  values, i.e. the L2 norm of the piecewise-constant function on the unit
  interval.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AmplitudeTooSmall,
    BandOutOfRange,
    DecompositionError,
    DuplicateTime,
    GridMismatch,
    LengthMismatch,
    NonFinite,
    NonMonotonePhase,
    OutOfDomain,
    SinZeroBand,
)

__all__ = [
    "SampledSignal",
    "PhasePrior",
    "ShapeTable",
    "MimfEstimate",
    "make_signal",
    "make_prior",
    "make_shape",
    "zero_shape",
    "add_shapes",
    "scale_shape",
    "signal_norm",
    "round_fundamental",
    "with_fundamental",
    "sort_components",
    "eval_shape",
    "make_estimate",
    "normalize_estimate",
    "reconstruct_mimf",
]


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def signal_norm(values) -> float:
    """Discrete L2 norm: root-mean-square over samples (uniform weight 1/L)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(v * v)))


@dataclass(frozen=True)
class SampledSignal:
    """A real-valued series sampled at strictly increasing times in [0, 1].

    Use :func:`make_signal` to construct validated instances; the raw
    constructor is reserved for internal fast paths that already guarantee
    the invariants. Arrays become read-only on construction so instances
    are safe to share.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def l2norm(self) -> float:
        return signal_norm(self.values)


def make_signal(times: Sequence[float], values: Sequence[float]) -> SampledSignal:
    """Validate and canonicalize a sampled signal.

    Samples are sorted by time; duplicate times are rejected rather than
    merged because downstream regression bins would double-count them.

    Raises
    ------
    LengthMismatch, NonFinite, DuplicateTime, OutOfDomain
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or v.ndim != 1 or t.size != v.size:
        raise LengthMismatch("times and values must be 1-d sequences of equal length")
    if t.size < 2:
        raise LengthMismatch("a signal needs at least 2 samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise NonFinite("times and values must be finite")
    if t.min() < 0.0 or t.max() > 1.0:
        raise OutOfDomain("times must lie within [0, 1]")
    order = np.argsort(t, kind="stable")
    t = t[order]
    v = v[order]
    if np.any(np.diff(t) == 0.0):
        raise DuplicateTime("duplicate sample times are not allowed")
    return SampledSignal(_readonly(t), _readonly(v))


@dataclass(frozen=True)
class PhasePrior:
    """One component's phase samples in cycles, with an optional amplitude.

    ``fundamental`` is the rounded average cycle rate; it is derived from the
    grid by :func:`round_fundamental` and is ``None`` until computed.
    """

    phase: np.ndarray
    amplitude: np.ndarray
    fundamental: int | None = None

    def __post_init__(self):
        self.phase.setflags(write=False)
        self.amplitude.setflags(write=False)

    def __len__(self) -> int:
        return int(self.phase.size)


def make_prior(phase: Sequence[float], amplitude: Sequence[float] | None = None,
               fundamental: int | None = None) -> PhasePrior:
    """Validate a phase prior (phase strictly increasing, amplitude positive)."""
    p = np.asarray(phase, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise LengthMismatch("phase must be a 1-d sequence with at least 2 samples")
    if not np.all(np.isfinite(p)):
        raise NonFinite("phase must be finite")
    if np.any(np.diff(p) <= 0.0):
        raise NonMonotonePhase("phase must be strictly increasing")
    if amplitude is None:
        q = np.ones_like(p)
    else:
        q = np.asarray(amplitude, dtype=float)
        if q.shape != p.shape:
            raise LengthMismatch("amplitude must match the phase length")
        if not np.all(np.isfinite(q)):
            raise NonFinite("amplitude must be finite")
        if np.any(q <= 0.0):
            raise AmplitudeTooSmall("amplitude must be strictly positive")
    if fundamental is not None and fundamental < 1:
        raise OutOfDomain("fundamental must be a positive integer")
    return PhasePrior(_readonly(p), _readonly(q), fundamental)


def round_fundamental(prior: PhasePrior, grid: Sequence[float]) -> int:
    """Nearest integer to the grid-average of the discrete phase derivative.

    The derivative is taken by central finite differences on the grid, with
    one-sided differences at the endpoints.
    """
    t = np.asarray(grid, dtype=float)
    p = prior.phase
    if t.size != p.size:
        raise GridMismatch("grid length does not match the prior")
    if t.size < 2:
        raise LengthMismatch("grid needs at least 2 points")
    deriv = np.gradient(p, t)
    if np.any(deriv <= 0.0):
        raise NonMonotonePhase("discrete phase derivative must be positive")
    n = int(round(float(np.mean(deriv))))
    if n < 1:
        raise DecompositionError("average cycle rate rounds below 1")
    return n


def with_fundamental(prior: PhasePrior, grid: Sequence[float]) -> PhasePrior:
    """Return a copy of ``prior`` with its fundamental computed and stored."""
    return replace(prior, fundamental=round_fundamental(prior, grid))


def sort_components(priors: Sequence[PhasePrior]):
    """Order priors by ascending fundamental, stably.

    Returns ``(sorted_priors, permutation)`` where ``permutation[i]`` is the
    input index of the i-th sorted prior, so callers can map outputs back.
    """
    for k, prior in enumerate(priors):
        if prior.fundamental is None:
            raise DecompositionError(f"prior {k} has no fundamental; "
                                     "call with_fundamental first")
    order = sorted(range(len(priors)), key=lambda k: (priors[k].fundamental, k))
    return [priors[k] for k in order], list(order)


@dataclass(frozen=True)
class ShapeTable:
    """One period of a periodic waveform tabulated on B uniform bins."""

    bins: np.ndarray
    l2norm: float

    def __post_init__(self):
        self.bins.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.bins.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.bins))


def make_shape(bins: Sequence[float]) -> ShapeTable:
    b = np.asarray(bins, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise LengthMismatch("a shape table needs at least 2 bins")
    if not np.all(np.isfinite(b)):
        raise NonFinite("shape bins must be finite")
    return ShapeTable(_readonly(b), signal_norm(b))


def zero_shape(bins: int) -> ShapeTable:
    return make_shape(np.zeros(int(bins)))


def add_shapes(a: ShapeTable, b: ShapeTable) -> ShapeTable:
    if a.size != b.size:
        raise LengthMismatch("shape tables have different bin counts")
    return make_shape(a.bins + b.bins)


def scale_shape(shape: ShapeTable, factor: float) -> ShapeTable:
    return make_shape(shape.bins * float(factor))


def eval_shape(shape: ShapeTable, v):
    """Evaluate the periodic table at fractional position ``mod(v, 1)``.

    Linear interpolation between bin centers with periodic wrap; exact bin
    values at bin centers. Accepts scalars or arrays.
    """
    bins = shape.bins
    nb = bins.size
    x = np.mod(np.asarray(v, dtype=float), 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    x = np.where(x >= 1.0, x - 1.0, x)
    u = x * nb - 0.5
    j = np.floor(u)
    w = u - j
    j0 = np.mod(j.astype(np.int64), nb)
    j1 = (j0 + 1) % nb
    out = (1.0 - w) * bins[j0] + w * bins[j1]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MimfEstimate:
    """Band-indexed shape accumulators and coefficients for one component.

    ``cos_shapes``/``sin_shapes`` hold the accumulated products
    (coefficient times unit shape) unless ``normalized`` is set, in which
    case they are unit-norm shapes and the coefficients carry the scale.
    The sine map never has a band-0 entry.
    """

    bandwidth: int
    cos_shapes: Mapping[int, ShapeTable]
    sin_shapes: Mapping[int, ShapeTable]
    cos_coeffs: Mapping[int, float]
    sin_coeffs: Mapping[int, float]
    mode: SampledSignal | None = None
    normalized: bool = False


def make_estimate(bandwidth: int,
                  cos_shapes: Mapping[int, ShapeTable],
                  sin_shapes: Mapping[int, ShapeTable],
                  cos_coeffs: Mapping[int, float] | None = None,
                  sin_coeffs: Mapping[int, float] | None = None,
                  mode: SampledSignal | None = None,
                  normalized: bool = False) -> MimfEstimate:
    """Validate band indices and assemble an estimate.

    When coefficients are omitted they default to the L2 norms of the stored
    tables (the product-table convention).
    """
    m0 = int(bandwidth)
    if m0 < 0:
        raise BandOutOfRange("bandwidth must be nonnegative")
    for n in cos_shapes:
        if abs(n) > m0:
            raise BandOutOfRange(f"cos band {n} outside [-{m0}, {m0}]")
    for n in sin_shapes:
        if n == 0:
            raise SinZeroBand("sine shapes have no band-0 entry")
        if abs(n) > m0:
            raise BandOutOfRange(f"sin band {n} outside [-{m0}, {m0}]")
    if cos_coeffs is None:
        cos_coeffs = {n: s.l2norm for n, s in cos_shapes.items()}
    if sin_coeffs is None:
        sin_coeffs = {n: s.l2norm for n, s in sin_shapes.items()}
    return MimfEstimate(m0, dict(cos_shapes), dict(sin_shapes),
                        dict(cos_coeffs), dict(sin_coeffs), mode, normalized)


def normalize_estimate(est: MimfEstimate) -> MimfEstimate:
    """Split each accumulated product into a nonnegative coefficient and a
    unit-norm shape; zero accumulators yield coefficient 0 and a zero shape."""
    if est.normalized:
        return est

    def split(shapes):
        out_s, out_c = {}, {}
        for n, s in shapes.items():
            norm = s.l2norm
            if norm > 0.0:
                out_s[n] = scale_shape(s, 1.0 / norm)
                out_c[n] = norm
            else:
                out_s[n] = zero_shape(s.size)
                out_c[n] = 0.0
        return out_s, out_c

    cos_s, cos_c = split(est.cos_shapes)
    sin_s, sin_c = split(est.sin_shapes)
    return MimfEstimate(est.bandwidth, cos_s, sin_s, cos_c, sin_c,
                        est.mode, normalized=True)


def _band_product(est: MimfEstimate, n: int, kind: str) -> ShapeTable | None:
    shapes = est.cos_shapes if kind == "cos" else est.sin_shapes
    if n not in shapes:
        return None
    table = shapes[n]
    if est.normalized:
        coeffs = est.cos_coeffs if kind == "cos" else est.sin_coeffs
        table = scale_shape(table, coeffs.get(n, 0.0))
    return table


def reconstruct_mimf(est: MimfEstimate, prior: PhasePrior,
                     grid: Sequence[float]) -> SampledSignal:
    """Evaluate the band sum at the prior's phase samples.

    Each band ``n`` contributes ``carrier(n*p/N) * shape(p)`` where the
    carrier is a cosine or sine of ``2*pi*n*p/N`` cycles and the shape is
    evaluated at the phase position ``p`` (cycles).
    """
    t = np.asarray(grid, dtype=float)
    if t.size != len(prior):
        raise GridMismatch("grid length does not match the prior")
    p = prior.phase
    needs_carrier = any(n != 0 for n in est.cos_shapes) or bool(est.sin_shapes)
    if needs_carrier and prior.fundamental is None:
        raise DecompositionError("prior fundamental required for banded "
                                 "reconstruction; call with_fundamental")
    total = np.zeros_like(p)
    for n in sorted(est.cos_shapes):
        table = _band_product(est, n, "cos")
        if table is None or table.l2norm == 0.0:
            continue
        carrier = 1.0 if n == 0 else np.cos(2.0 * np.pi * n * p / prior.fundamental)
        total = total + carrier * eval_shape(table, p)
    for n in sorted(est.sin_shapes):
        table = _band_product(est, n, "sin")
        if table is None or table.l2norm == 0.0:
            continue
        carrier = np.sin(2.0 * np.pi * n * p / prior.fundamental)
        total = total + carrier * eval_shape(table, p)
    return SampledSignal(_readonly(t), _readonly(total))
