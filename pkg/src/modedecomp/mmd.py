"""Multiresolution mode decomposition: band-demodulated recursive regression.

The outer loop visits bands in the interleaved order 0, +1, -1, ..., +M0,
-M0. For each band a demodulated regression pass (cosine carrier always,
sine carrier only for |n| > 0) estimates the band's shape increment per
component, updates that component's accumulator and mode, and chains the
residual. Band accumulators are the identifiable products: coefficient times
unit shape. Normalization at the end splits each accumulator into a
nonnegative coefficient (its L2 norm) and a unit-norm shape.

Relative to a plain generalized-mode run, the multiresolution loop costs a
factor of order ``J2 * M0`` more regressions; no attempt is made to optimize
that away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BandOutOfRange,
    DecompositionError,
    GridMismatch,
    OutOfDomain,
    SinZeroBand,
)
from .fold_regress import (
    RegressionBackend,
    carrier,
    center_shape,
    demodulate,
    fold,
    partition_regress,
)
from .gmd import DecompositionReport, StopReason, _check_scheme
from .signal_model import (
    MimfEstimate,
    PhasePrior,
    SampledSignal,
    add_shapes,
    eval_shape,
    make_estimate,
    reconstruct_mimf,
    scale_shape,
    signal_norm,
    sort_components,
    with_fundamental,
    zero_shape,
)

__all__ = [
    "MmdConfig",
    "MmdResult",
    "band_order",
    "modified_rdbr",
    "mmd_decompose",
    "ell_band_approx",
    "band_residual",
]


@dataclass(frozen=True)
class MmdConfig:
    """Knobs for the multiresolution loop.

    ``m0`` is the bandwidth; ``eps1`` stops the outer loop on the relative
    residual, ``eps2`` stops each inner demodulated pass; ``j1``/``j2`` cap
    the outer/inner iteration counts; ``bins`` is the regression bin count.
    """

    m0: int = 10
    eps1: float = 1e-6
    eps2: float = 1e-6
    j1: int = 200
    j2: int = 10
    bins: int = 200
    scheme: str = "gauss_seidel"

    def validate(self) -> None:
        if self.m0 < 0:
            raise OutOfDomain("m0 must be nonnegative")
        if not (0.0 < self.eps1 < 1.0 and 0.0 < self.eps2 < 1.0):
            raise OutOfDomain("eps1 and eps2 must lie in (0, 1)")
        if self.j1 < 1 or self.j2 < 1:
            raise OutOfDomain("j1 and j2 must be at least 1")
        if self.bins < 2:
            raise OutOfDomain("bins must be at least 2")
        _check_scheme(self.scheme)


@dataclass(frozen=True)
class MmdResult:
    estimates: list[MimfEstimate]
    residual: SampledSignal
    report: DecompositionReport
    fundamentals: list[int]


def band_order(m0: int) -> list[int]:
    """Interleaved band visit order 0, +1, -1, ..., +m0, -m0."""
    order = [0]
    for n in range(1, m0 + 1):
        order.extend((n, -n))
    return order


def modified_rdbr(residual: SampledSignal, priors: Sequence[PhasePrior],
                  n: int, kind: str, eps2: float = 1e-6, max_iters: int = 10,
                  bins: int = 200, scheme: str = "gauss_seidel",
                  backend: RegressionBackend = partition_regress):
    """Demodulated regression pass for one band.

    For band 0 the regressed increment itself is the mode increment; for
    |n| > 0 the mode increment is ``2 * carrier * increment`` and the stored
    shape increment is doubled, so the accumulator tracks the full product
    of coefficient and shape.

    Returns ``(shape_increments, mode_increments, residual)`` where the shape
    increments are per-component tables accumulated over the inner sweeps and
    the mode increments are :class:`SampledSignal` values.
    """
    _check_scheme(scheme)
    if kind == "sin" and n == 0:
        raise SinZeroBand("sine demodulation is undefined at band 0")

    t = residual.times
    L = len(residual)
    k_total = len(priors)
    scale = signal_norm(residual.values)
    denom = scale if scale > 0.0 else 1.0

    shape_acc = [zero_shape(bins) for _ in range(k_total)]
    mode_acc = [np.zeros(L) for _ in range(k_total)]
    r = residual
    eps0, eps1v, eps2v = 2.0, 1.0, 1.0
    j = 0
    while (j < max_iters and eps1v > eps2 and eps2v > eps2
           and abs(eps1v - eps0) > eps2):
        cur = r
        pending: list[np.ndarray] = []
        inc_norms: list[float] = []
        for k, prior in enumerate(priors):
            source = cur if scheme == "gauss_seidel" else r
            vs, ys = demodulate(source, prior, n, kind)
            raw = center_shape(backend(fold(vs, ys), bins))
            if n == 0:
                f_inc = eval_shape(raw, prior.phase)
                stored = raw
            else:
                g = carrier(prior, n, kind)
                f_inc = 2.0 * g * eval_shape(raw, prior.phase)
                stored = scale_shape(raw, 2.0)
            shape_acc[k] = add_shapes(shape_acc[k], stored)
            mode_acc[k] = mode_acc[k] + f_inc
            inc_norms.append(stored.l2norm)
            if scheme == "gauss_seidel":
                cur = SampledSignal(t, cur.values - f_inc)
            else:
                pending.append(f_inc)
        if scheme == "jacobi":
            cur = SampledSignal(t, r.values - np.sum(pending, axis=0))
        r = cur
        eps0 = eps1v
        eps1v = signal_norm(r.values) / denom
        eps2v = max(inc_norms) / denom
        j += 1

    modes = [SampledSignal(t, acc) for acc in mode_acc]
    return shape_acc, modes, r


def mmd_decompose(signal: SampledSignal, priors: Sequence[PhasePrior],
                  cfg: MmdConfig,
                  backend: RegressionBackend = partition_regress) -> MmdResult:
    """Run the full multiresolution loop and normalize the accumulators.

    The outer loop ends the first time the relative residual drops to
    ``cfg.eps1``, fails to improve by more than ``cfg.eps1``, or ``cfg.j1``
    iterations have run. Components in the result follow the caller's prior
    order.
    """
    cfg.validate()
    if len(priors) == 0:
        raise DecompositionError("at least one phase prior is required")

    t = signal.times
    resolved = [p if p.fundamental is not None else with_fundamental(p, t)
                for p in priors]
    sorted_priors, order = sort_components(resolved)
    k_total = len(sorted_priors)
    L = len(signal)

    scale = signal.l2norm
    denom = scale if scale > 0.0 else 1.0

    bands = band_order(cfg.m0)
    cos_acc = [{b: zero_shape(cfg.bins) for b in bands} for _ in range(k_total)]
    sin_acc = [{b: zero_shape(cfg.bins) for b in bands if b != 0}
               for _ in range(k_total)]
    mode_acc = [np.zeros(L) for _ in range(k_total)]

    r = signal
    best = 1.0
    norms_r: list[float] = []
    norms_s: list[float] = []
    reason = StopReason.MAX_ITER
    iterations = 0
    for _ in range(cfg.j1):
        sweep_inc = 0.0
        for b in bands:
            shapes, modes, r = modified_rdbr(
                r, sorted_priors, b, "cos", cfg.eps2, cfg.j2, cfg.bins,
                cfg.scheme, backend)
            for k in range(k_total):
                cos_acc[k][b] = add_shapes(cos_acc[k][b], shapes[k])
                mode_acc[k] += modes[k].values
                sweep_inc = max(sweep_inc, shapes[k].l2norm / denom)
            if abs(b) > 0:
                shapes, modes, r = modified_rdbr(
                    r, sorted_priors, b, "sin", cfg.eps2, cfg.j2, cfg.bins,
                    cfg.scheme, backend)
                for k in range(k_total):
                    sin_acc[k][b] = add_shapes(sin_acc[k][b], shapes[k])
                    mode_acc[k] += modes[k].values
                    sweep_inc = max(sweep_inc, shapes[k].l2norm / denom)
        iterations += 1
        rel = signal_norm(r.values) / denom
        norms_r.append(rel)
        norms_s.append(sweep_inc)
        if rel <= cfg.eps1:
            reason = StopReason.RESIDUAL_SMALL
            break
        if rel >= best - cfg.eps1:
            reason = StopReason.STALLED
            break
        best = rel

    report = DecompositionReport(tuple(norms_r), tuple(norms_s), reason,
                                 iterations)

    estimates_sorted = []
    for k, prior in enumerate(sorted_priors):
        est = make_estimate(
            cfg.m0,
            cos_shapes=cos_acc[k],
            sin_shapes=sin_acc[k],
            mode=SampledSignal(t, mode_acc[k]),
        )
        estimates_sorted.append(est)

    estimates: list[MimfEstimate] = [None] * k_total  # type: ignore[list-item]
    fundamentals = [0] * k_total
    for pos, src in enumerate(order):
        estimates[src] = estimates_sorted[pos]
        fundamentals[src] = int(sorted_priors[pos].fundamental)
    return MmdResult(estimates, r, report, fundamentals)


def ell_band_approx(est: MimfEstimate, prior: PhasePrior, ell: int,
                    grid: Sequence[float]) -> SampledSignal:
    """Reconstruct using only the bands with |n| <= ell."""
    if not 0 <= ell <= est.bandwidth:
        raise BandOutOfRange(f"ell must lie in [0, {est.bandwidth}]")
    truncated = make_estimate(
        est.bandwidth,
        cos_shapes={b: s for b, s in est.cos_shapes.items() if abs(b) <= ell},
        sin_shapes={b: s for b, s in est.sin_shapes.items() if abs(b) <= ell},
        cos_coeffs={b: c for b, c in est.cos_coeffs.items() if abs(b) <= ell},
        sin_coeffs={b: c for b, c in est.sin_coeffs.items() if abs(b) <= ell},
        normalized=est.normalized,
    )
    return reconstruct_mimf(truncated, prior, grid)


def band_residual(signal: SampledSignal, est: MimfEstimate, prior: PhasePrior,
                  ell: int, grid: Sequence[float]) -> SampledSignal:
    """Component-attributed signal minus its ell-banded reconstruction."""
    t = np.asarray(grid, dtype=float)
    if len(signal) != t.size:
        raise GridMismatch("signal and grid lengths differ")
    approx = ell_band_approx(est, prior, ell, grid)
    return SampledSignal(signal.times, signal.values - approx.values)
