"""CSV/JSON serialization and the command-line surface.

Subcommands
-----------
``synth``     generate the built-in benchmark (or a spec-file signal) plus
              exact phase priors and ground truth.
``gmd``       decompose a signal into single-shape modes.
``mmd``       decompose a signal into band-structured modes.
``diagnose``  phase differentiation statistics or residual autocorrelation.

All CSV files carry a header row, UTF-8 text, '.' decimals and floats at 17
significant digits so a write/read round trip is lossless. Exit codes: 0 on
success, 1 on validation or usage errors, 2 on I/O failures.

The environment variable ``MMD_THREADS`` caps internal parallelism; the
current implementation evaluates everything on one thread, so any positive
value is accepted and recorded in reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .diagnostics import WellDiffStats, autocorrelation, partition_counts, well_diff_stats
from .errors import DecompositionError, IoError, NonMonotonePhase, ParseError
from .gmd import GmdResult, gmd_decompose
from .mmd import MmdConfig, MmdResult, mmd_decompose
from .signal_model import (
    PhasePrior,
    SampledSignal,
    ShapeTable,
    make_prior,
    make_shape,
    make_signal,
    scale_shape,
)
from .synth import (
    RNG_IDENTITY,
    BandSpec,
    ComponentSpec,
    add_noise,
    ecg_like_shape,
    gen_example_4_1,
    gen_mimf,
    sample_grid,
)

__all__ = [
    "RunConfig",
    "read_signal_csv",
    "read_phases_csv",
    "write_signal_csv",
    "write_shape_csv",
    "write_decomposition",
    "write_report",
    "max_threads",
    "main",
]

_FLOAT_FMT = "{:.17g}"


def max_threads() -> int:
    """Thread cap from MMD_THREADS; the implementation is single-threaded,
    so this only validates and records the setting."""
    raw = os.environ.get("MMD_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise DecompositionError(f"MMD_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DecompositionError("MMD_THREADS must be at least 1")
    return value


@dataclass(frozen=True)
class RunConfig:
    """Run parameters recorded in every JSON report.

    The path fields describe where a run read and wrote; they are excluded
    from the serialized config so reports stay byte-identical across reruns
    into different directories.
    """

    m0: int = 10
    eps1: float = 1e-6
    eps2: float = 1e-6
    j1: int = 200
    j2: int = 10
    bins: int = 200
    scheme: str = "gauss_seidel"
    grid: str = "uniform"
    seed: int | None = None
    input_path: str | None = None
    output_path: str | None = None


# ---------------------------------------------------------------------------
# CSV / JSON primitives

def _fmt(x: float) -> str:
    return _FLOAT_FMT.format(float(x))


def _write_table(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            rows = len(columns[0])
            for i in range(rows):
                fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_table(path: Path) -> tuple[list[str], np.ndarray]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    width = len(header)
    data = np.empty((len(lines) - 1, width))
    for ln_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != width:
            raise ParseError(f"{path}:{ln_no}: expected {width} columns, "
                             f"got {len(parts)}")
        try:
            data[ln_no - 2] = [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(f"{path}:{ln_no}: {exc}") from exc
    return header, data


def write_signal_csv(path, signal: SampledSignal) -> None:
    _write_table(Path(path), ["t", "value"], [signal.times, signal.values])


def read_signal_csv(path) -> SampledSignal:
    header, data = _read_table(Path(path))
    if header[:2] != ["t", "value"] or len(header) != 2:
        raise ParseError(f"{path}: expected header 't,value'")
    return make_signal(data[:, 0], data[:, 1])


def write_phases_csv(path, times: np.ndarray, priors: list[PhasePrior],
                     with_amplitude: bool = True) -> None:
    k_total = len(priors)
    header = ["t"] + [f"p{k + 1}" for k in range(k_total)]
    cols = [np.asarray(times, dtype=float)] + [p.phase for p in priors]
    if with_amplitude:
        header += [f"q{k + 1}" for k in range(k_total)]
        cols += [p.amplitude for p in priors]
    _write_table(Path(path), header, cols)


def read_phases_csv(path) -> tuple[np.ndarray, list[PhasePrior]]:
    """Parse a phase-prior file: column t, then p1..pK, optionally q1..qK."""
    header, data = _read_table(Path(path))
    if not header or header[0] != "t":
        raise ParseError(f"{path}: first column must be 't'")
    p_cols = [i for i, name in enumerate(header) if name.startswith("p")]
    q_cols = [i for i, name in enumerate(header) if name.startswith("q")]
    if not p_cols:
        raise ParseError(f"{path}: no phase columns (p1, p2, ...)")
    if q_cols and len(q_cols) != len(p_cols):
        raise ParseError(f"{path}: amplitude columns must match phase columns")
    if data.shape[0] < 2:
        raise ParseError(f"{path}: need at least 2 rows")
    times = data[:, 0]
    priors = []
    for which, col in enumerate(p_cols):
        phase = data[:, col]
        if np.any(np.diff(phase) <= 0.0):
            raise NonMonotonePhase(
                f"{path}: column {header[col]} is not strictly increasing")
        amplitude = data[:, q_cols[which]] if q_cols else None
        priors.append(make_prior(phase, amplitude))
    return times, priors


def write_shape_csv(path, shape: ShapeTable) -> None:
    centers = (np.arange(shape.size) + 0.5) / shape.size
    _write_table(Path(path), ["x", "value"], [centers, shape.bins])


def read_shape_csv(path) -> ShapeTable:
    header, data = _read_table(Path(path))
    if header != ["x", "value"]:
        raise ParseError(f"{path}: expected header 'x,value'")
    return make_shape(data[:, 1])


def read_coefficients_csv(path) -> dict:
    """Coefficient rows keyed by (component, band) -> (a_n, b_n)."""
    header, data = _read_table(Path(path))
    if header != ["k", "n", "a_n", "b_n"]:
        raise ParseError(f"{path}: expected header 'k,n,a_n,b_n'")
    return {(int(row[0]), int(row[1])): (row[2], row[3]) for row in data}


def _report_payload(report, stats: WellDiffStats | None,
                    config: RunConfig) -> dict:
    recorded = asdict(config)
    recorded.pop("input_path")
    recorded.pop("output_path")
    return {
        "residual_norms": list(report.residual_norms),
        "shape_increment_norms": list(report.shape_increment_norms),
        "stop_reason": report.stop_reason.value,
        "iterations": report.iterations,
        "gamma": None if stats is None else stats.gamma,
        "beta": None if stats is None else stats.beta,
        "contraction_bound": None if stats is None else stats.contraction_bound,
        "seed": config.seed,
        "config": recorded,
        "rng": RNG_IDENTITY,
        "threads": max_threads(),
    }


def write_report(directory, report, stats: WellDiffStats | None = None,
                 config: RunConfig | None = None) -> Path:
    """Serialize the run report as canonical JSON; returns the file path."""
    path = Path(directory) / "report.json"
    payload = _report_payload(report, stats, config or RunConfig())
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_report(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_decomposition(directory, result, stats: WellDiffStats | None = None,
                        config: RunConfig | None = None) -> None:
    """Write modes, shapes, coefficients, residual and the JSON report."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    config = config or RunConfig()

    if isinstance(result, GmdResult):
        for k, (mode, shape) in enumerate(zip(result.modes, result.shapes), 1):
            write_signal_csv(out / f"mode_{k}.csv", mode)
            write_shape_csv(out / f"shape_{k}.csv", shape)
    elif isinstance(result, MmdResult):
        rows_k, rows_n, rows_a, rows_b = [], [], [], []
        for k, est in enumerate(result.estimates, 1):
            write_signal_csv(out / f"mode_{k}.csv", est.mode)
            for n in range(-est.bandwidth, est.bandwidth + 1):
                if n in est.cos_shapes:
                    write_shape_csv(out / f"shape_c{n}_k{k}.csv",
                                    est.cos_shapes[n])
                if n in est.sin_shapes:
                    write_shape_csv(out / f"shape_s{n}_k{k}.csv",
                                    est.sin_shapes[n])
                rows_k.append(float(k))
                rows_n.append(float(n))
                rows_a.append(est.cos_coeffs.get(n, 0.0))
                rows_b.append(est.sin_coeffs.get(n, 0.0))
        _write_table(out / "coefficients.csv", ["k", "n", "a_n", "b_n"],
                     [np.array(rows_k), np.array(rows_n),
                      np.array(rows_a), np.array(rows_b)])
    else:
        raise DecompositionError(f"unknown result type {type(result)!r}")

    write_signal_csv(out / "residual.csv", result.residual)
    write_report(out, result.report, stats, config)


# ---------------------------------------------------------------------------
# synth spec files

def _shape_from_json(obj) -> ShapeTable:
    if "variant" in obj:
        return ecg_like_shape(int(obj.get("bins", 1024)), int(obj["variant"]))
    if "values" in obj:
        return make_shape(np.asarray(obj["values"], dtype=float))
    raise ParseError("shape object needs 'variant' or 'values'")


def _component_from_json(obj) -> ComponentSpec:
    try:
        fundamental = int(obj["fundamental"])
    except KeyError as exc:
        raise ParseError("component needs a 'fundamental'") from exc
    wig = obj.get("phase_wiggle", {}) or {}
    w_kind = wig.get("kind", "none")
    w_amp = float(wig.get("amp", 0.0))
    if w_kind == "sin":
        phase = lambda t: t + w_amp * np.sin(2.0 * np.pi * t)  # noqa: E731
    elif w_kind == "cos":
        phase = lambda t: t + w_amp * np.cos(2.0 * np.pi * t)  # noqa: E731
    elif w_kind == "none":
        phase = lambda t: np.asarray(t, dtype=float)  # noqa: E731
    else:
        raise ParseError(f"unknown phase_wiggle kind {w_kind!r}")
    amp = obj.get("amplitude", {}) or {}
    const = float(amp.get("const", 1.0))
    cos1 = float(amp.get("cos1", 0.0))
    sin1 = float(amp.get("sin1", 0.0))
    shape = _shape_from_json(obj.get("shape", {"variant": 1}))
    scale = float(obj.get("scale", 1.0))
    shape = scale_shape(shape, scale)

    def amplitude(t, _c=const, _a=cos1, _b=sin1, _p=phase):
        u = _p(np.asarray(t, dtype=float))
        return _c + _a * np.cos(2.0 * np.pi * u) + _b * np.sin(2.0 * np.pi * u)

    bands = {0: BandSpec(const, 0.0, shape, None)}
    if cos1 != 0.0 or sin1 != 0.0:
        bands[1] = BandSpec(cos1, sin1, shape, shape)
    return ComponentSpec(amplitude=amplitude, phase=phase,
                         fundamental=fundamental, shape=shape, bands=bands)


def _synth_from_spec(path, length: int, grid_mode: str, seed: int):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    comps = obj.get("components")
    if not isinstance(comps, list) or not comps:
        raise ParseError(f"{path}: 'components' must be a non-empty list")
    specs = [_component_from_json(c) for c in comps]
    t = sample_grid(length, grid_mode, seed)
    modes = [gen_mimf(spec, t) for spec in specs]
    total = make_signal(t, np.sum([m.values for m in modes], axis=0))
    priors = [
        make_prior(spec.fundamental * spec.phase(t),
                   amplitude=np.broadcast_to(
                       np.asarray(spec.amplitude(t), dtype=float), t.shape))
        for spec in specs
    ]
    return t, total, modes, priors


# ---------------------------------------------------------------------------
# command-line surface

class _UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep usage failures at exit code 1
        raise _UsageError(message, self.format_usage())


def _build_parser() -> _Parser:
    parser = _Parser(prog="modedecomp",
                     description="Decompose oscillatory series into "
                                 "multiresolution modes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic signal")
    group = p_synth.add_mutually_exclusive_group(required=True)
    group.add_argument("--example", choices=["ex4_1"],
                       help="built-in two-component benchmark")
    group.add_argument("--spec", help="JSON component spec file")
    p_synth.add_argument("--samples", type=int, default=16384)
    p_synth.add_argument("--noise-var", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--grid", choices=["uniform", "iid"], default="uniform")
    p_synth.add_argument("--out", required=True)

    p_gmd = sub.add_parser("gmd", help="single-shape decomposition")
    p_gmd.add_argument("--signal", required=True)
    p_gmd.add_argument("--phases", required=True)
    p_gmd.add_argument("--eps", type=float, default=1e-6)
    p_gmd.add_argument("--max-iter", type=int, default=200)
    p_gmd.add_argument("--bins", type=int, default=200)
    p_gmd.add_argument("--scheme", choices=["gauss_seidel", "jacobi"],
                       default="gauss_seidel")
    p_gmd.add_argument("--out", required=True)

    p_mmd = sub.add_parser("mmd", help="multiresolution decomposition")
    p_mmd.add_argument("--signal", required=True)
    p_mmd.add_argument("--phases", required=True)
    p_mmd.add_argument("--m0", type=int, default=10)
    p_mmd.add_argument("--eps1", type=float, default=1e-6)
    p_mmd.add_argument("--eps2", type=float, default=1e-6)
    p_mmd.add_argument("--j1", type=int, default=200)
    p_mmd.add_argument("--j2", type=int, default=10)
    p_mmd.add_argument("--bins", type=int, default=200)
    p_mmd.add_argument("--scheme", choices=["gauss_seidel", "jacobi"],
                       default="gauss_seidel")
    p_mmd.add_argument("--out", required=True)

    p_diag = sub.add_parser("diagnose", help="phase or residual diagnostics")
    p_diag.add_argument("--phases")
    p_diag.add_argument("--h", type=float, default=0.05,
                        help="cell side for phase statistics (1/h integer)")
    p_diag.add_argument("--m-bound", type=float, default=1.0)
    p_diag.add_argument("--residual")
    p_diag.add_argument("--max-lag", type=int, default=100)
    p_diag.add_argument("--out", required=True)
    return parser


def _load_inputs(signal_path, phases_path):
    signal = read_signal_csv(signal_path)
    times, priors = read_phases_csv(phases_path)
    if times.size != len(signal) or not np.array_equal(times, signal.times):
        raise DecompositionError(
            "phases file is on a different grid than the signal")
    return signal, priors


def _phase_stats(priors, times, step: float = 0.05,
                 m_bound: float = 1.0) -> WellDiffStats | None:
    try:
        return well_diff_stats(partition_counts(priors, times, step), m_bound)
    except DecompositionError:
        return None


def _cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth_dir = out / "truth"
    truth_dir.mkdir(exist_ok=True)
    grid_mode = "iid_uniform" if args.grid == "iid" else "uniform"
    if args.example == "ex4_1":
        ex = gen_example_4_1(args.samples, args.noise_var, args.seed, grid_mode)
        write_signal_csv(out / "signal.csv", ex.signal)
        write_phases_csv(out / "phases.csv", ex.signal.times, list(ex.priors))
        write_signal_csv(truth_dir / "clean.csv", ex.clean)
        for k, (comp, est) in enumerate(zip(ex.components, ex.truth), 1):
            write_signal_csv(truth_dir / f"mode_{k}.csv", comp)
            for n, table in sorted(est.cos_shapes.items()):
                write_shape_csv(truth_dir / f"shape_c{n}_k{k}.csv", table)
            for n, table in sorted(est.sin_shapes.items()):
                write_shape_csv(truth_dir / f"shape_s{n}_k{k}.csv", table)
        meta = {"example": "ex4_1", "samples": args.samples,
                "noise_var": args.noise_var, "seed": args.seed,
                "grid": args.grid, "rng": RNG_IDENTITY}
    else:
        t, total, modes, priors = _synth_from_spec(
            args.spec, args.samples, grid_mode, args.seed)
        noisy = add_noise(total, args.noise_var, args.seed)
        write_signal_csv(out / "signal.csv", noisy)
        write_phases_csv(out / "phases.csv", t, priors)
        write_signal_csv(truth_dir / "clean.csv", total)
        for k, mode in enumerate(modes, 1):
            write_signal_csv(truth_dir / f"mode_{k}.csv", mode)
        meta = {"spec": str(args.spec), "samples": args.samples,
                "noise_var": args.noise_var, "seed": args.seed,
                "grid": args.grid, "rng": RNG_IDENTITY}
    (out / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _cmd_gmd(args) -> int:
    signal, priors = _load_inputs(args.signal, args.phases)
    result = gmd_decompose(signal, priors, eps=args.eps,
                           max_iters=args.max_iter, bins=args.bins,
                           scheme=args.scheme)
    config = RunConfig(m0=0, eps1=args.eps, eps2=args.eps, j1=args.max_iter,
                       j2=1, bins=args.bins, scheme=args.scheme,
                       input_path=args.signal, output_path=args.out)
    stats = _phase_stats(priors, signal.times)
    write_decomposition(args.out, result, stats, config)
    return 0


def _cmd_mmd(args) -> int:
    signal, priors = _load_inputs(args.signal, args.phases)
    cfg = MmdConfig(m0=args.m0, eps1=args.eps1, eps2=args.eps2, j1=args.j1,
                    j2=args.j2, bins=args.bins, scheme=args.scheme)
    result = mmd_decompose(signal, priors, cfg)
    config = RunConfig(m0=args.m0, eps1=args.eps1, eps2=args.eps2, j1=args.j1,
                       j2=args.j2, bins=args.bins, scheme=args.scheme,
                       input_path=args.signal, output_path=args.out)
    stats = _phase_stats(priors, signal.times)
    write_decomposition(args.out, result, stats, config)
    return 0


def _cmd_diagnose(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if (args.phases is None) == (args.residual is None):
        raise DecompositionError("diagnose needs exactly one of --phases "
                                 "or --residual")
    if args.phases is not None:
        times, priors = read_phases_csv(args.phases)
        stats = well_diff_stats(
            partition_counts(priors, times, args.h), args.m_bound)
        payload = {
            "h": stats.step,
            "gamma": stats.gamma,
            "beta": stats.beta,
            "beta_per_pair": {f"{i + 1},{j + 1}": b
                              for (i, j), b in stats.beta_per_pair.items()},
            "contraction_bound": stats.contraction_bound,
            "well_differentiated": stats.well_differentiated,
            "marginals": stats.counts_single.tolist(),
        }
        (out / "well_diff.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    else:
        residual = read_signal_csv(args.residual)
        rho = autocorrelation(residual, args.max_lag)
        _write_table(out / "autocorrelation.csv", ["lag", "rho"],
                     [np.arange(rho.size, dtype=float), rho])
    return 0


def main(argv=None) -> int:
    """CLI entry point; returns the exit code instead of raising SystemExit."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc.usage, file=sys.stderr, end="")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help lands here with code 0
        return int(exc.code or 0)
    try:
        max_threads()  # validate the environment cap early
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "gmd":
            return _cmd_gmd(args)
        if args.command == "mmd":
            return _cmd_mmd(args)
        if args.command == "diagnose":
            return _cmd_diagnose(args)
        raise DecompositionError(f"unknown command {args.command!r}")
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DecompositionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
