"""Finite-width fully connected networks with iid stable weights and biases.

Layer 1 is f_i(x) = sum_j w_ij x_j + b_i and deeper layers are
f_i(x) = n^(-1/alpha) sum_j w_ij phi(f_j(x)) + b_i, all parameters iid
St(alpha, sigma_w) / St(alpha, sigma_b).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError, ParameterDomainError, ShapeError
from .spectral import DiscreteSpectralMeasure
from .stable import StableParams, cms_transform, sample_stable
from .streams import UniformStream

THREADS_ENV = "STABLE_LIMITS_THREADS"
#: fraction of repeats allowed to contain non-finite values before a run fails
MAX_FLAGGED_FRACTION = 1e-3
_CHUNK = 32


# ---------------------------------------------------------------------------
# activations


@dataclass(frozen=True)
class Envelope:
    """Witness (a, b, beta, gamma) for |phi(s)| <= (a + b |s|^beta)^gamma."""

    a: float
    b: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class ActivationSpec:
    id: str
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    envelope: Envelope | None = None

    def __call__(self, s):
        return self.fn(s)


def _relu(s):
    return np.maximum(s, 0.0)


def _identity(s):
    return np.asarray(s, dtype=float)


TANH = ActivationSpec("tanh", np.tanh, Envelope(1.0, 1.0, 1.0, 0.45))
# Shipped with the tightest witness valid for every alpha <= 2; they still fail
# the check because their growth is linear.
RELU = ActivationSpec("relu", _relu, Envelope(1.0, 1.0, 1.0, 0.45))
IDENTITY = ActivationSpec("identity", _identity, Envelope(1.0, 1.0, 1.0, 0.45))
ACTIVATIONS = {a.id: a for a in (TANH, RELU, IDENTITY)}


def get_activation(name: str) -> ActivationSpec:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ParameterDomainError(
            f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass(frozen=True)
class EnvelopeReport:
    accepted: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.accepted


# the documented grid {0, +-10^j, j=-3..3}, extended to +-1e300 so that
# polynomial growth above |s|^(beta*gamma) cannot hide behind a large ``a``
_ENVELOPE_GRID = np.concatenate([[0.0], 10.0 ** np.arange(-3, 301), -(10.0 ** np.arange(-3, 301))])


_SLOPE_TOL = 1e-6


def _growth_rate(activation):
    """Largest log-log slope of |phi| between |s| = 1e200 and 1e300, over both signs."""
    lo, hi = 1e200, 1e300
    s = np.array([lo, hi, -lo, -hi])
    with np.errstate(all="ignore"):
        log_phi = np.log(np.abs(np.asarray(activation(s), dtype=float)))
    slopes = (log_phi[[1, 3]] - log_phi[[0, 2]]) / math.log(hi / lo)
    slopes = slopes[np.isfinite(slopes)]
    return float(slopes.max()) if slopes.size else 0.0


def validate_envelope(activation: ActivationSpec, alpha: float) -> EnvelopeReport:
    """Check the envelope witness of ``activation`` for stability index ``alpha``.

    Accepts iff a, b > 0, gamma < 1/alpha, beta < 1/gamma, the bound holds on
    the verification grid and |phi| grows no faster than |s|^(beta gamma) at
    the far end of it. Rejections are reported, not raised.
    """
    env = activation.envelope
    if env is None:
        return EnvelopeReport(False, ("no envelope witness supplied",))
    bad = []
    if not (env.a > 0 and env.b > 0 and env.beta > 0 and env.gamma > 0):
        bad.append("witness parameters a, b, beta, gamma must be positive")
    if not env.gamma < 1.0 / alpha:
        bad.append(f"gamma < 1/alpha fails ({env.gamma} >= {1.0 / alpha:.6g})")
    if env.gamma > 0 and not env.beta < 1.0 / env.gamma:
        bad.append(f"beta < 1/gamma fails ({env.beta} >= {1.0 / env.gamma:.6g})")
    if not bad:
        s = _ENVELOPE_GRID
        with np.errstate(all="ignore"):
            phi = np.abs(np.asarray(activation(s), dtype=float))
            log_phi = np.log(phi)
            log_abs_s = np.log(np.abs(s))
            log_env = env.gamma * np.logaddexp(math.log(env.a),
                                               math.log(env.b) + env.beta * log_abs_s)
        fails = ~np.isfinite(phi) | (log_phi > log_env + 1e-12)
        if np.any(fails):
            worst = s[np.argmax(fails)]
            bad.append(f"|phi(s)| exceeds (a + b|s|^beta)^gamma, first at s = {worst:g}")
        else:
            # a large ``a`` or ``b`` can push the crossing past the largest double;
            # the log-log growth rate at the far end of the grid still exposes it
            slope = _growth_rate(activation)
            if slope > env.beta * env.gamma + _SLOPE_TOL:
                bad.append(f"|phi| grows like |s|^{slope:.3g}, faster than the envelope's "
                           f"|s|^{env.beta * env.gamma:.3g}")
    return EnvelopeReport(not bad, tuple(bad))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    depth: int
    width: int
    weight_params: StableParams
    bias_params: StableParams
    activation: ActivationSpec = TANH

    def __post_init__(self):
        for name in ("input_dim", "depth", "width"):
            if int(getattr(self, name)) < 1:
                raise ParameterDomainError(f"{name} must be a positive integer")
        if self.weight_params.alpha != self.bias_params.alpha:
            raise ConfigurationError("weights and biases must share one alpha")
        report = validate_envelope(self.activation, self.alpha)
        if not report:
            raise ConfigurationError(
                f"activation {self.activation.id!r} rejected: {'; '.join(report.violations)}",
                report)

    @property
    def alpha(self) -> float:
        return self.weight_params.alpha

    @classmethod
    def build(cls, alpha, sigma_w, sigma_b, input_dim, depth, width, activation="tanh"):
        act = get_activation(activation) if isinstance(activation, str) else activation
        return cls(input_dim, depth, width, StableParams(alpha, sigma_w),
                   StableParams(alpha, sigma_b), act)


def as_input_batch(inputs, input_dim: int | None = None) -> np.ndarray:
    """Coerce to an I x k float matrix (a 1-D array is a single input)."""
    X = np.array(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] < 1 or X.shape[0] < 1:
        raise ShapeError(f"inputs must be an I x k matrix, got shape {X.shape}")
    if input_dim is not None and X.shape[0] != input_dim:
        raise ShapeError(f"inputs have {X.shape[0]} rows, network expects {input_dim}")
    if not np.all(np.isfinite(X)):
        raise ParameterDomainError("inputs must be finite")
    return X


@dataclass
class NetworkSamples:
    """Simulated outputs plus a per-repeat flag for non-finite intermediates."""

    values: np.ndarray
    flagged: np.ndarray

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flagged))


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def _run_chunks(fn, repeats, workers, chunk=_CHUNK):
    """Apply fn(chunk_index, size) over fixed-size chunks; order-stable."""
    jobs = [(i, min(chunk, repeats - i * chunk)) for i in range(-(-repeats // chunk))]
    workers = resolve_workers(workers)
    if workers == 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _propagate(config, X, stream, layer, final_rows):
    """Pre-activations of ``layer`` for a batch; weights are drawn and dropped per layer.

    Returns (F of shape (B, final_rows, k), per-repeat non-finite flags).
    ``stream`` yields one uniform batch per layer for weights then biases.
    """
    B = stream.batch
    n = config.width
    rows = n if layer > 1 else final_rows
    W = sample_stable(config.weight_params, stream.sub, B * rows * X.shape[0]).reshape(B, rows, -1)
    b = sample_stable(config.bias_params, stream.sub, B * rows).reshape(B, rows, 1)
    with np.errstate(invalid="ignore", over="ignore"):
        F = W @ X + b
    flags = ~np.isfinite(F).all(axis=(1, 2))
    scale = n ** (-1.0 / config.alpha)
    for l in range(2, layer + 1):
        rows = n if l < layer else final_rows
        H = config.activation(F)
        W = sample_stable(config.weight_params, stream.sub, B * rows * n).reshape(B, rows, n)
        b = sample_stable(config.bias_params, stream.sub, B * rows).reshape(B, rows, 1)
        with np.errstate(invalid="ignore", over="ignore"):
            F = scale * (W @ H) + b
        flags |= ~np.isfinite(F).all(axis=(1, 2)) | ~np.isfinite(H).all(axis=(1, 2))
    return F, flags


@dataclass
class _ChunkStream:
    sub: UniformStream
    batch: int


def _check_flags(flagged, repeats):
    if np.count_nonzero(flagged) > MAX_FLAGGED_FRACTION * repeats:
        raise NumericalError(
            f"{np.count_nonzero(flagged)} of {repeats} repeats hit non-finite values",
            {"flagged": int(np.count_nonzero(flagged)), "repeats": repeats})


def forward_network(config: NetworkConfig, inputs, stream: UniformStream, layer: int | None = None,
                    units: Sequence[int] = (1,), repeats: int = 1,
                    workers: int | None = None) -> NetworkSamples:
    """Simulate ``repeats`` independent networks with explicit weights.

    Returns samples of shape (repeats, len(units), k) for the pre-activations
    f_i^(layer) of the requested 1-based ``units`` at the k inputs. Indices
    beyond the width are allowed (extra iid units of the same layer).
    Repeats are processed in fixed chunks with child streams, so results do
    not depend on ``workers``.
    """
    X = as_input_batch(inputs, config.input_dim)
    layer = config.depth if layer is None else int(layer)
    if not 1 <= layer <= config.depth:
        raise ParameterDomainError(f"layer must lie in 1..{config.depth}, got {layer}")
    units = np.asarray(units, dtype=int).ravel()
    if units.size == 0 or units.min() < 1:
        raise ParameterDomainError("units must be a non-empty list of 1-based indices")
    uniq, pos = np.unique(units, return_inverse=True)
    repeats = int(repeats)
    if repeats < 1:
        raise ParameterDomainError("repeats must be positive")

    def run(ci, size):
        F, flags = _propagate(config, X, _ChunkStream(stream.spawn(ci), size), layer, uniq.size)
        return F[:, pos, :], flags

    parts = _run_chunks(run, repeats, workers)
    values = np.concatenate([p[0] for p in parts])
    flagged = np.concatenate([p[1] for p in parts])
    _check_flags(flagged, repeats)
    return NetworkSamples(values, flagged)


def conditional_scale(config: NetworkConfig, prev_layer) -> float:
    """Scale of a unit's law given the previous layer's pre-activations (k = 1)."""
    a = config.alpha
    h = np.abs(config.activation(np.asarray(prev_layer, dtype=float).ravel())) ** a
    return float((config.weight_params.sigma**a * h.sum() / config.width
                  + config.bias_params.sigma**a) ** (1.0 / a))


def conditional_measure(config: NetworkConfig, prev_layer) -> DiscreteSpectralMeasure:
    """Spectral measure of a unit's law given previous-layer pre-activations of shape (n, k).

    ||sigma_b 1||^a delta_{1/||1||} + 1/n sum_j ||sigma_w phi(f_j)||^a delta_{phi(f_j)/||phi(f_j)||};
    units with phi(f_j) = 0 contribute nothing.
    """
    a = config.alpha
    F = np.asarray(prev_layer, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    k = F.shape[1]
    bias = DiscreteSpectralMeasure(np.full((1, k), 1.0 / math.sqrt(k)),
                                   [config.bias_params.sigma**a * k ** (a / 2.0)])
    data = DiscreteSpectralMeasure.from_vectors(config.activation(F),
                                                config.weight_params.sigma**a / config.width,
                                                a, dim=k)
    return bias.combine(data) if len(data) else bias


def _conditional_atoms(config, F):
    """Unmerged atoms of :func:`conditional_measure` for a batch F of shape (B, n, k)."""
    a = config.alpha
    B, n, k = F.shape
    H = config.activation(F)
    norms = np.linalg.norm(H, axis=2)
    safe = np.where(norms > 0, norms, 1.0)
    s = np.concatenate([np.full((B, 1, k), 1.0 / math.sqrt(k)), H / safe[..., None]], axis=1)
    w = np.concatenate([np.full((B, 1), config.bias_params.sigma**a * k ** (a / 2.0)),
                        config.weight_params.sigma**a * norms**a / n], axis=1)
    return s, w


def forward_conditional(config: NetworkConfig, inputs, stream: UniformStream,
                        layer: int | None = None, repeats: int = 1,
                        workers: int | None = None) -> NetworkSamples:
    """Simulate one unit of ``layer`` per repeat from its exact conditional law.

    The previous layer is simulated at full width, then the unit is drawn from
    St(alpha, conditional scale) (k = 1) or from St_k(alpha, conditional
    measure) (k > 1). Values have shape (repeats, k). At layer 1 this is
    :func:`forward_network` for unit 1.
    """
    X = as_input_batch(inputs, config.input_dim)
    layer = config.depth if layer is None else int(layer)
    if layer == 1:
        out = forward_network(config, X, stream, 1, (1,), repeats, workers)
        return NetworkSamples(out.values[:, 0, :], out.flagged)
    if not 2 <= layer <= config.depth:
        raise ParameterDomainError(f"layer must lie in 1..{config.depth}, got {layer}")
    repeats = int(repeats)
    if repeats < 1:
        raise ParameterDomainError("repeats must be positive")
    k = X.shape[1]
    a = config.alpha

    def run(ci, size):
        cs = _ChunkStream(stream.spawn(ci), size)
        F, flags = _propagate(config, X, cs, layer - 1, config.width)
        out = np.empty((size, k))
        if k == 1:
            h = np.abs(config.activation(F[:, :, 0])) ** a
            scales = (config.weight_params.sigma**a * h.sum(axis=1) / config.width
                      + config.bias_params.sigma**a) ** (1.0 / a)
            out[:, 0] = scales * cms_transform(a, cs.sub.uniform(size, 2))
        else:
            # batched form of sample_multivariate over each repeat's symmetrized
            # conditional measure; zero-weight atoms (phi = 0) add nothing
            s, w = _conditional_atoms(config, F)
            s = np.concatenate([s, -s], axis=1)
            w = np.concatenate([w, w], axis=1) / 2.0
            loadings = w[..., None] ** (1.0 / a) * s
            u = cs.sub.uniform(size, 2 * w.shape[1]).reshape(size, -1, 2)
            out[:] = np.einsum("bj,bjk->bk", cms_transform(a, u), loadings)
        flags |= ~np.isfinite(out).all(axis=1)
        return out, flags

    parts = _run_chunks(run, repeats, workers)
    values = np.concatenate([p[0] for p in parts])
    flagged = np.concatenate([p[1] for p in parts])
    _check_flags(flagged, repeats)
    return NetworkSamples(values, flagged)
