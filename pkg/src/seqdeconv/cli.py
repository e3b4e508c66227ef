"""Command-line interface: persisted streaming estimation and the simulation study.

Exit codes: 0 success, 1 usage error, 2 malformed input, 3 degenerate state.

State file
    JSON object holding the sufficient statistic (``version``, ``layout``,
    ``p`` or ``h``/``w``, ``n``, ``num_re``, ``num_im``, ``delta``) plus the
    averaged statistic (``average``), the variance accumulators
    (``variance``) and the first operator's eigenvalues (``reference_d_re``,
    ``reference_d_im``, ``kernels_identical``).

Observation streams
    NDJSON, one object per line: ``{"kernel": [...], "y": [...]}`` or
    ``{"d_re": [...], "d_im": [...], "y": [...]}``. With ``--binary``, a
    sequence of little-endian frames ``u32 tag (=1), u32 p, p x f64 kernel,
    p x f64 y``.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import os
import struct
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import accumulator as acc
from .baselines import AveragedStat, b_bar, init_average, ridge_estimate, ridge_weights, update_average
from .errors import DegenerateStateError, DimensionError
from .estimators import EstimatorSpec, estimate
from .noise_variance import ConsistentVariance, TailVariance
from .simlab import ExperimentConfig, run_experiment
from .spectral import SpectralBasis, diagonalize, from_spectral, to_spectral

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3
BINARY_TAG_KERNEL = 1
ESTIMATORS = ("main", "soft", "tp", "li", "mono", "ridge-avg")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- state file ---------------------------------------------------------------

class StreamState:
    """Everything the CLI persists between invocations."""

    def __init__(self, suf, avg, cons, tail, reference_d=None, kernels_identical=True):
        self.suf = suf
        self.avg = avg
        self.cons = cons
        self.tail = tail
        self.reference_d = reference_d
        self.kernels_identical = kernels_identical

    @classmethod
    def empty(cls, basis: SpectralBasis) -> "StreamState":
        return cls(acc.init(basis), init_average(basis), ConsistentVariance(basis.p), TailVariance())

    def ingest(self, d: np.ndarray, y: np.ndarray) -> None:
        basis = self.suf.basis
        x = to_spectral(basis, y)
        self.suf = acc.update(self.suf, d, x)
        self.avg = update_average(self.avg, d, x)
        self.cons.add(y)
        self.tail.add(d, x)
        if self.reference_d is None:
            self.reference_d = d.copy()
        elif self.kernels_identical and not np.array_equal(d, self.reference_d):
            self.kernels_identical = False

    def to_dict(self) -> dict:
        d = self.suf.to_dict()
        d["average"] = self.avg.to_dict()
        d["variance"] = {"consistent": self.cons.to_dict(), "tail": self.tail.to_dict()}
        ref = self.reference_d
        d["reference_d_re"] = None if ref is None else ref.real.tolist()
        d["reference_d_im"] = None if ref is None else ref.imag.tolist()
        d["kernels_identical"] = self.kernels_identical
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StreamState":
        suf = acc.SufStat.from_dict(d)
        basis = suf.basis
        avg = AveragedStat.from_dict(basis, d["average"])
        cons = ConsistentVariance.from_dict(basis.p, d["variance"]["consistent"])
        tail = TailVariance.from_dict(d["variance"]["tail"])
        ref = None
        if d.get("reference_d_re") is not None:
            ref = np.asarray(d["reference_d_re"], float) + 1j * np.asarray(d["reference_d_im"], float)
        return cls(suf, avg, cons, tail, ref, bool(d.get("kernels_identical", True)))


def _load_state(path: Path) -> StreamState:
    try:
        return StreamState.from_dict(json.loads(path.read_text()))
    except FileNotFoundError:
        raise CliError(f"state file {path} does not exist; run 'init' first", EXIT_USAGE)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"state file {path} is not a valid state: {exc}", EXIT_INPUT)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@contextmanager
def _locked(path: Path):
    lock = path.with_name(path.name + ".lock")
    with open(lock, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


# -- observation parsing --------------------------------------------------------

def _vector(values, p: int, what: str) -> np.ndarray:
    a = np.asarray(values, dtype=float).reshape(-1)
    if a.shape != (p,):
        raise ValueError(f"{what} has {a.size} values, expected {p}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")
    return a


def _parse_record(rec, basis: SpectralBasis) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(rec, dict) or "y" not in rec:
        raise ValueError("record must be an object with a 'y' array")
    y = _vector(rec["y"], basis.p, "y")
    if "kernel" in rec:
        d = diagonalize(basis, _vector(rec["kernel"], basis.p, "kernel"))
    elif "d_re" in rec and "d_im" in rec:
        d = _vector(rec["d_re"], basis.p, "d_re") + 1j * _vector(rec["d_im"], basis.p, "d_im")
    else:
        raise ValueError("record needs 'kernel' or both 'd_re' and 'd_im'")
    return d, y


def _iter_ndjson(stream, basis):
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            yield _parse_record(json.loads(line), basis)
        except (ValueError, TypeError, DimensionError) as exc:
            raise CliError(f"line {lineno}: {exc}", EXIT_INPUT)


def _iter_binary(data: bytes, basis):
    head = struct.Struct("<II")
    pos, rec = 0, 0
    while pos < len(data):
        rec += 1
        if pos + head.size > len(data):
            raise CliError(f"record {rec}: truncated header", EXIT_INPUT)
        tag, p = head.unpack_from(data, pos)
        pos += head.size
        if tag != BINARY_TAG_KERNEL:
            raise CliError(f"record {rec}: unknown tag {tag}", EXIT_INPUT)
        if p != basis.p:
            raise CliError(f"record {rec}: p={p}, expected {basis.p}", EXIT_INPUT)
        size = 2 * 8 * p
        if pos + size > len(data):
            raise CliError(f"record {rec}: truncated payload", EXIT_INPUT)
        arr = np.frombuffer(data, dtype="<f8", count=2 * p, offset=pos)
        pos += size
        try:
            kernel, y = _vector(arr[:p], p, "kernel"), _vector(arr[p:], p, "y")
        except ValueError as exc:
            raise CliError(f"record {rec}: {exc}", EXIT_INPUT)
        yield diagonalize(basis, kernel), y


def encode_binary_record(kernel, y) -> bytes:
    """Frame one observation in the ``--binary`` wire format."""
    kernel = np.asarray(kernel, dtype="<f8").ravel()
    y = np.asarray(y, dtype="<f8").ravel()
    if kernel.size != y.size:
        raise ValueError("kernel and y lengths differ")
    return struct.pack("<II", BINARY_TAG_KERNEL, kernel.size) + kernel.tobytes() + y.tobytes()


# -- commands -----------------------------------------------------------------

def _parse_shape(text: str) -> SpectralBasis:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
        return SpectralBasis.two_d(h, w)
    except ValueError:
        raise CliError(f"--shape must look like HxW, got {text!r}", EXIT_USAGE)


def cmd_init(args) -> int:
    path = Path(args.state)
    if path.exists() and not args.force:
        raise CliError(f"{path} exists; pass --force to overwrite", EXIT_USAGE)
    if args.shape:
        basis = _parse_shape(args.shape)
    elif args.p is not None and args.p >= 1:
        basis = SpectralBasis.one_d(args.p)
    else:
        raise CliError("give --p (positive) or --shape HxW", EXIT_USAGE)
    _atomic_write(path, json.dumps(StreamState.empty(basis).to_dict()))
    print(f"initialized {path} with p={basis.p}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    path = Path(args.state)
    with _locked(path):
        state = _load_state(path)
        basis = state.suf.basis
        if args.binary:
            data = sys.stdin.buffer.read() if args.input == "-" else Path(args.input).read_bytes()
            records = _iter_binary(data, basis)
        else:
            fh = sys.stdin if args.input == "-" else open(args.input)
            records = _iter_ndjson(fh, basis)
        count = 0
        try:
            for d, y in records:
                state.ingest(d, y)
                count += 1
        finally:
            if not args.binary and args.input != "-":
                fh.close()
        _atomic_write(path, json.dumps(state.to_dict()))
    print(f"processed {count} observations; n={state.suf.n}")
    return EXIT_OK


def _resolve_epsilon(args, state: StreamState) -> tuple[float, str, str | None]:
    if args.epsilon is not None:
        if args.epsilon < 0:
            raise CliError("--epsilon must be nonnegative", EXIT_USAGE)
        return args.epsilon, "given", None
    if args.epsilon_mode == "consistent":
        try:
            var = state.cons.estimate()
        except ValueError as exc:
            raise CliError(str(exc), EXIT_DEGENERATE)
        note = None if state.kernels_identical else "upper bound: kernels varied across the stream"
        return float(np.sqrt(var)), "consistent", note
    if args.epsilon_mode == "tail":
        try:
            var = state.tail.estimate()
        except ValueError as exc:
            raise CliError(str(exc), EXIT_DEGENERATE)
        return float(np.sqrt(var)), "tail", "conservative: positively biased"
    raise CliError("give --epsilon or --epsilon-mode", EXIT_USAGE)


def build_report(state: StreamState, args) -> dict:
    suf = state.suf
    if suf.n == 0:
        raise CliError("state holds no observations", EXIT_DEGENERATE)
    if not np.any(suf.delta > 0):
        raise CliError("no identified components: every delta is zero", EXIT_DEGENERATE)
    eps, source, note = _resolve_epsilon(args, state)
    b = acc.b_statistic(suf)
    try:
        gn = acc.gamma_n(suf, eps)
    except DegenerateStateError:
        gn = None
    om = acc.omega_sq(suf)

    if args.estimator == "ridge-avg":
        theta, tau = ridge_estimate(state.avg, args.tau)
        lam = ridge_weights(state.avg, tau)
        _, imag = from_spectral(suf.basis, lam * b_bar(state.avg))
        tuning = {"tau": tau}
        n_zeroed = int(np.count_nonzero(lam == 0))
    else:
        spec = EstimatorSpec(args.estimator, gamma=args.gamma, tau=args.tau)
        est = estimate(suf, spec, eps)
        theta, imag, tuning, n_zeroed = est.theta_hat, est.imag_residual, est.tuning, est.n_zeroed
    report = {
        "estimator": args.estimator,
        "n": suf.n,
        "epsilon": eps,
        "epsilon_source": source,
    }
    if note:
        report["epsilon_note"] = note
    report["tuning"] = {k: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for k, v in tuning.items()}
    report["diagnostics"] = {
        "gamma_n": gn,
        "omega_sq": float(om),
        "n_zeroed": n_zeroed,
        "imag_residual": float(imag),
    }
    report["theta_hat"] = [float(v) for v in theta]
    return report


def cmd_estimate(args) -> int:
    if args.epsilon is None and args.epsilon_mode is None:
        raise CliError("give --epsilon or --epsilon-mode", EXIT_USAGE)
    state = _load_state(Path(args.state))
    report = build_report(state, args)
    if args.format == "json":
        text = json.dumps(report) + "\n"
    else:
        text = "index,theta_hat\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(report["theta_hat"]))
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_write(Path(args.out), text)
    return EXIT_OK


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise CliError(f"invalid integer list {text!r}", EXIT_USAGE)
    if not vals or any(v < 1 for v in vals) or list(vals) != sorted(set(vals)):
        raise CliError(f"--n must be strictly increasing positive integers, got {text!r}", EXIT_USAGE)
    return vals


def _estimator_entries(text: str):
    out = []
    for name in (v.strip() for v in text.split(",") if v.strip()):
        if name in ("ridge", "oracle"):
            out.append(name)
        elif name in ("main", "soft", "tp", "li", "mono"):
            out.append(EstimatorSpec(name))
        else:
            raise CliError(f"unknown estimator {name!r}", EXIT_USAGE)
    return tuple(out)


def svg_plot(theta: np.ndarray, theta_hat: np.ndarray, title: str, width=480, height=240) -> str:
    """Minimal SVG line plot of a signal (black) against an estimate (red)."""
    lo = float(min(theta.min(), theta_hat.min()))
    hi = float(max(theta.max(), theta_hat.max()))
    span = hi - lo if hi > lo else 1.0
    pad = 20

    def points(v):
        xs = pad + np.arange(v.size) * (width - 2 * pad) / max(v.size - 1, 1)
        ys = height - pad - (v - lo) * (height - 2 * pad) / span
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))

    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<text x="{pad}" y="14" font-family="sans-serif" font-size="12">{title}</text>\n'
        f'<polyline fill="none" stroke="black" stroke-width="1" points="{points(theta)}"/>\n'
        f'<polyline fill="none" stroke="red" stroke-width="1" points="{points(theta_hat)}"/>\n'
        "</svg>\n"
    )


def cmd_simulate(args) -> int:
    signals = tuple(s.strip() for s in args.signal.split(",")) if args.signal != "both" else ("smooth", "peaked")
    for s in signals:
        if s not in ("smooth", "peaked"):
            raise CliError(f"unknown signal {s!r}", EXIT_USAGE)
    try:
        cfg = ExperimentConfig(
            p=args.p, snr=args.snr, n_grid=_int_list(args.n), reps=args.reps, seed=args.seed,
            signals=signals, estimators=_estimator_entries(args.estimators),
            workers=args.workers, keep_snapshots=args.svg is not None,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    table = run_experiment(cfg)
    text = table.to_csv()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_write(Path(args.out), text)
    if args.svg is not None:
        out = Path(args.svg)
        out.mkdir(parents=True, exist_ok=True)
        for (kind, n, label), th in sorted(table.snapshots.items()):
            (out / f"{kind}_n{n}_{label}.svg").write_text(
                svg_plot(table.thetas[kind], th, f"{kind}, n={n}, {label}")
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqdeconv", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="create an empty state file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--p", type=int)
    g.add_argument("--shape", help="2D layout HxW")
    p.add_argument("--state", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("ingest", help="fold observations into the state")
    p.add_argument("--state", required=True)
    p.add_argument("--input", default="-", help="NDJSON file, or '-' for stdin")
    p.add_argument("--binary", action="store_true", help="input uses the binary frame format")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="write an estimate report")
    p.add_argument("--state", required=True)
    p.add_argument("--estimator", choices=ESTIMATORS, default="main")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--epsilon-mode", choices=("consistent", "tail"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="run the RR simulation study")
    p.add_argument("--signal", default="both", help="smooth, peaked, or both")
    p.add_argument("--n", default="50,100,200,300")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=256)
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--estimators", default="main,ridge")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--svg", help="directory for per-(n, estimator) SVG plots")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"seqdeconv: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"seqdeconv: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
