"""Command-line interface.

Subcommands: sample, mvsample, net, recursion, gausrec, compare, fit, pit.
Exit status is 0 on success, 1 on usage/configuration/input errors and 2 on
numerical failures.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import secrets
import sys
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import __version__
from .errors import DeepStableError, EmptyInputError, NumericalError, ParseError
from .netsim import NetworkConfig, forward_conditional, forward_network
from .recursion import RecursionResult, gamma_recursion, gaussian_variance_recursion, sigma_recursion
from .spectral import DiscreteSpectralMeasure, multivariate_cf, sample_multivariate
from .stable import StableParams, sample_stable, stable_cdf
from .stats import ecf_distance, fit_gaussian, fit_stable_mle, ks_two_sample, pit_histogram
from .streams import KINDS, UniformStream

log = logging.getLogger("deepstable")

DEFAULT_SEED = 20200101
_FMT = "%.17g"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# flag types; messages name the offending flag via argparse


def _alpha(text):
    v = float(text)
    if not (math.isfinite(v) and 0 < v <= 2):
        raise argparse.ArgumentTypeError(f"must lie in (0, 2], got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _seed(text):
    if text == "random":
        return secrets.randbits(63)
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"must be a 64-bit unsigned integer or 'random', got {text}")
    return v


def _matrix(text):
    """'a,b;c,d' -> rows separated by ';', the k inputs by ','. '-0.5,1.0' is I=1, k=2."""
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a numeric matrix: {text!r}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise argparse.ArgumentTypeError(f"rows must be non-empty and equal length: {text!r}")
    return np.array(rows)


def _vector(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a numeric vector: {text!r}") from None


def _units(text):
    out = [int(v) for v in text.split(",")]
    if min(out) < 1:
        raise argparse.ArgumentTypeError("unit indices are 1-based")
    return out


def _tgrid(text):
    """'lo,hi,m' -> m evenly spaced values per axis."""
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("t-grid must be 'lo,hi,count'")
    return float(parts[0]), float(parts[1]), int(parts[2])


# ---------------------------------------------------------------------------
# I/O


def _read_array(path, fmt=None):
    """Values and non-finite count of a CSV (one value per line) or raw f64 file."""
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix in (".bin", ".f64") else "csv")
    try:
        if fmt == "bin":
            raw = path.read_bytes()
            if len(raw) % 8:
                raise ParseError(f"{path}: size {len(raw)} is not a multiple of 8 bytes")
            values = np.frombuffer(raw, dtype="<f8").astype(float)
        else:
            values = []
            with path.open("r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    text = line.strip()
                    if not text:
                        continue
                    try:
                        values.append(float(text))
                    except ValueError:
                        if lineno == 1:  # header
                            continue
                        raise ParseError(f"{path}:{lineno}: not a number: {text!r}",
                                         line=lineno) from None
            values = np.array(values, dtype=float)
    except OSError as exc:
        raise OSError(f"cannot read input file {path}: {exc.strerror or exc}") from exc
    finite = np.isfinite(values)
    nonfinite = int(values.size - np.count_nonzero(finite))
    values = values[finite]
    if values.size == 0:
        raise EmptyInputError(f"{path}: no finite values")
    if nonfinite:
        log.warning("%s: dropped %d non-finite values", path, nonfinite)
    return values, nonfinite


def ingest_array(path, fmt=None) -> np.ndarray:
    """Finite values of a flat parameter array, in file order.

    ``fmt`` is "csv" (one value per line, optional header) or "bin" (raw
    little-endian float64); inferred from the suffix when omitted.
    """
    return _read_array(path, fmt)[0]


def _read_matrix(path, k, fmt=None):
    """Samples written by :func:`write_samples`, shape (rows, k)."""
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix in (".bin", ".f64") else "csv")
    if fmt == "bin":
        return np.fromfile(path, dtype="<f8").reshape(-1, k)
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_samples(path, values, fmt="csv"):
    """CSV (header x1..xk, 17 significant digits) or row-major little-endian float64."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if fmt == "bin":
        Path(path).write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
        return
    header = ",".join(f"x{i + 1}" for i in range(values.shape[1]))
    np.savetxt(path, values, fmt=_FMT, delimiter=",", header=header, comments="")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def _stream(args):
    return UniformStream(args.stream, args.seed)


def cmd_sample(args):
    x = sample_stable(StableParams(args.alpha, args.sigma), _stream(args), args.n)
    write_samples(args.out, x, args.format)


def cmd_mvsample(args):
    try:
        text = Path(args.measure).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read measure file {args.measure}: {exc.strerror}") from exc
    m = DiscreteSpectralMeasure.from_json(text)
    write_samples(args.out, sample_multivariate(m, args.alpha, _stream(args), args.n), args.format)


def cmd_net(args):
    X = args.x
    cfg = NetworkConfig.build(args.alpha, args.sw, args.sb, X.shape[0], args.depth, args.width,
                              args.activation)
    layer = args.layer or args.depth
    if args.mode == "conditional":
        out = forward_conditional(cfg, X, _stream(args), layer, args.repeats)
        values = out.values
    else:
        out = forward_network(cfg, X, _stream(args), layer, args.units, args.repeats)
        values = out.values.reshape(-1, X.shape[1])
    if out.n_flagged:
        log.warning("%d repeats contained non-finite values", out.n_flagged)
    write_samples(args.out, values, args.format)


def cmd_recursion(args):
    X = args.x
    mode = args.mode or ("sigma" if X.shape[1] == 1 else "gamma")
    if mode == "sigma":
        if X.shape[1] != 1:
            raise UsageError("--mode sigma takes a single input (one column in --x)")
        res = sigma_recursion(args.alpha, args.sw, args.sb, X[:, 0], args.activation,
                              args.depth, args.M, _stream(args))
    else:
        res = gamma_recursion(args.alpha, args.sw, args.sb, X, args.activation,
                              args.depth, args.M, _stream(args))
    write_json(args.out, res.to_dict())


def cmd_gausrec(args):
    if args.x.size != args.xp.size:
        raise UsageError("--x and --xp must have the same length")
    res = gaussian_variance_recursion(args.sw2, args.sb2, args.x, args.xp, args.activation,
                                      args.depth, args.quad_points)
    if args.format == "json":
        write_json(args.out, res.to_dict())
    else:
        table = np.column_stack([np.arange(1, len(res.q_x) + 1), res.q_x, res.q_xp, res.c, res.rho])
        np.savetxt(args.out, table, fmt=_FMT, delimiter=",", header="layer,q_x,q_xp,c,rho",
                   comments="")


def cmd_compare(args):
    try:
        rec = RecursionResult.from_dict(json.loads(Path(args.recursion).read_text(encoding="utf-8")))
    except OSError as exc:
        raise OSError(f"cannot read recursion file {args.recursion}: {exc.strerror}") from exc
    layer = args.layer or rec.depth
    if not 1 <= layer <= rec.depth:
        raise UsageError(f"--layer must lie in 1..{rec.depth}, got {layer}")
    if rec.mode == "sigma":
        measure = DiscreteSpectralMeasure([[1.0]], [rec.scales[layer - 1] ** rec.alpha])
    else:
        measure = rec.measures[layer - 1]
    k = measure.dim
    try:
        net = _read_matrix(args.net, k)
    except OSError as exc:
        raise OSError(f"cannot read network samples {args.net}: {exc.strerror}") from exc
    if net.shape[1] != k:
        raise UsageError(f"network samples have {net.shape[1]} columns, recursion has dimension {k}")
    n = args.n or net.shape[0]
    limit = sample_multivariate(measure, rec.alpha, _stream(args), n)
    lo, hi, m = args.tgrid
    axis = np.linspace(lo, hi, m)
    grid = [np.array(t) for t in itertools.product(axis, repeat=k)]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("metric,marginal,t,value\n")
        for r in range(k):
            d = ks_two_sample(net[:, r], limit[:, r])
            fh.write(f"ks,{r + 1},,{_FMT % d}\n")
        for t in grid:
            d = ecf_distance(net, lambda s: multivariate_cf(measure, rec.alpha, s), [t])
            tt = ";".join(_FMT % v for v in t)
            fh.write(f"ecf,,{tt},{_FMT % d}\n")


def cmd_fit(args):
    values, nonfinite = _read_array(args.input, args.format)
    mu, sd = fit_gaussian(values)
    report = fit_stable_mle(values)
    write_json(args.out, {"n": int(values.size), "nonfinite": nonfinite,
                          "stable": report.to_dict(), "gaussian": {"mean": mu, "std": sd}})


def cmd_pit(args):
    values, _ = _read_array(args.input, args.format)
    if args.model == "gaussian":
        mu, sd = fit_gaussian(values)
        cdf = lambda v: norm.cdf(v, mu, sd)  # noqa: E731
    else:
        if args.alpha is not None and args.sigma is not None:
            params = StableParams(args.alpha, args.sigma)
        else:
            params = fit_stable_mle(values).params
        cdf = lambda v: stable_cdf(params, v)  # noqa: E731
    hist = pit_histogram(values, cdf, args.bins)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("bin_low,bin_high,count,expected\n")
        for lo, hi, c, e in hist.rows():
            fh.write(f"{_FMT % lo},{_FMT % hi},{c},{_FMT % e}\n")
    log.info("chi2 = %.6g, p = %.6g", hist.chi2, hist.pvalue)


def build_parser():
    p = _Parser(prog="deepstable", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(sp, stream=True):
        sp.add_argument("--out", required=True, help="output path")
        if stream:
            sp.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                            help=f"64-bit seed or 'random' (default {DEFAULT_SEED})")
            sp.add_argument("--stream", choices=KINDS, default="pseudo")

    s = sub.add_parser("sample", help="scalar St(alpha, sigma) draws")
    s.add_argument("--alpha", type=_alpha, required=True)
    s.add_argument("--sigma", type=_positive_float, default=1.0)
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--format", choices=("csv", "bin"), default="csv")
    common(s)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("mvsample", help="draws from a discrete spectral measure (JSON)")
    s.add_argument("--measure", required=True)
    s.add_argument("--alpha", type=_alpha, required=True)
    s.add_argument("--n", type=_positive_int, required=True)
    s.add_argument("--format", choices=("csv", "bin"), default="csv")
    common(s)
    s.set_defaults(func=cmd_mvsample)

    def net_params(sp):
        sp.add_argument("--alpha", type=_alpha, required=True)
        sp.add_argument("--sw", type=_positive_float, default=1.0, help="weight scale")
        sp.add_argument("--sb", type=_positive_float, default=1.0, help="bias scale")
        sp.add_argument("--x", type=_matrix, required=True,
                        help="I x k inputs: rows ';'-separated, inputs ','-separated")
        sp.add_argument("--activation", choices=("tanh", "relu", "identity"), default="tanh")
        sp.add_argument("--depth", type=_positive_int, required=True)

    s = sub.add_parser("net", help="finite-width network samples")
    net_params(s)
    s.add_argument("--width", type=_positive_int, required=True)
    s.add_argument("--layer", type=_positive_int, default=None, help="default: depth")
    s.add_argument("--units", type=_units, default=[1])
    s.add_argument("--repeats", type=_positive_int, required=True)
    s.add_argument("--mode", choices=("network", "conditional"), default="network")
    s.add_argument("--format", choices=("csv", "bin"), default="csv")
    common(s)
    s.set_defaults(func=cmd_net)

    s = sub.add_parser("recursion", help="infinite-width scale / spectral-measure recursion")
    net_params(s)
    s.add_argument("--M", type=_positive_int, default=1000, help="Monte-Carlo samples per layer")
    s.add_argument("--mode", choices=("sigma", "gamma"), default=None,
                   help="default: sigma for one input, gamma otherwise")
    common(s)
    s.set_defaults(func=cmd_recursion)

    s = sub.add_parser("gausrec", help="Gaussian variance/correlation recursion")
    s.add_argument("--sw2", type=_positive_float, required=True, help="weight variance")
    s.add_argument("--sb2", type=_nonneg_float, required=True, help="bias variance")
    s.add_argument("--x", type=_vector, required=True)
    s.add_argument("--xp", type=_vector, required=True)
    s.add_argument("--activation", choices=("tanh", "relu", "identity"), default="tanh")
    s.add_argument("--depth", type=_positive_int, required=True)
    s.add_argument("--quad-points", type=_positive_int, default=64)
    s.add_argument("--format", choices=("csv", "json"), default="json")
    common(s, stream=False)
    s.set_defaults(func=cmd_gausrec)

    s = sub.add_parser("compare", help="network samples vs limit law of a recursion")
    s.add_argument("--net", required=True, help="samples from 'net' (csv or bin)")
    s.add_argument("--recursion", required=True, help="JSON from 'recursion'")
    s.add_argument("--n", type=_positive_int, default=None,
                   help="limit draws (default: as many as network samples)")
    s.add_argument("--layer", type=_positive_int, default=None,
                   help="recursion layer to compare against (default: last)")
    s.add_argument("--tgrid", type=_tgrid, default=(-2.0, 2.0, 5), help="'lo,hi,count' per axis")
    common(s)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("fit", help="stable MLE and Gaussian fit of a flat array")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("csv", "bin"), default=None)
    common(s, stream=False)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("pit", help="probability-integral-transform histogram")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("csv", "bin"), default=None)
    s.add_argument("--model", choices=("stable", "gaussian"), default="stable")
    s.add_argument("--alpha", type=_alpha, default=None)
    s.add_argument("--sigma", type=_positive_float, default=None)
    s.add_argument("--bins", type=_positive_int, default=50)
    common(s, stream=False)
    s.set_defaults(func=cmd_pit)
    return p


_VALUE_FLAGS = ("--x", "--xp", "--tgrid")


def _glue_negative_values(argv):
    """Turn ``--x -0.5,1`` into ``--x=-0.5,1`` so argparse does not read a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_glue_negative_values(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, DeepStableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
