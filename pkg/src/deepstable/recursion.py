"""Infinite-width limits: layer recursions for the limiting stable law.

* :func:`sigma_recursion` -- scale sigma(l) of the limit St(alpha, sigma(l)) for one input;
* :func:`gamma_recursion` -- Monte-Carlo discrete spectral measures for k inputs;
* :func:`gaussian_variance_recursion` -- Gaussian (alpha = 2) variance/correlation
  propagation by Gauss-Hermite quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError, ParameterDomainError
from .netsim import as_input_batch, get_activation, validate_envelope
from .spectral import DiscreteSpectralMeasure, marginal_scale, sample_multivariate, symmetrize
from .stable import StableParams, sample_stable
from .streams import UniformStream

#: data atoms lighter than this fraction of the total mass are dropped
PRUNE_FRACTION = 1e-15
_FD_STEP = 1e-4


@dataclass
class RecursionResult:
    """Per-layer output of a limit recursion (layers are 1-based in serialization).

    ``stderr[l]`` is the Monte-Carlo standard error of the layer's own moment
    estimate, mapped to the scale; ``accumulated_stderr[l]`` adds the error
    inherited from earlier layers through a finite-difference sensitivity.
    In gamma mode both hold one entry per input coordinate.
    """

    mode: str
    alpha: float
    sigma_w: float
    sigma_b: float
    mc_samples: int
    stream: dict
    scales: list = field(default_factory=list)
    measures: list = field(default_factory=list)
    stderr: list = field(default_factory=list)
    accumulated_stderr: list = field(default_factory=list)
    sampling_cost: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.stderr)

    def marginal_scales(self, l: int) -> np.ndarray:
        """Per-coordinate limit scales at layer ``l`` (1-based)."""
        if self.mode == "sigma":
            return np.array([self.scales[l - 1]])
        m = self.measures[l - 1]
        return np.array([marginal_scale(m, self.alpha, r + 1) for r in range(m.dim)])

    def to_dict(self) -> dict:
        layers = []
        for i in range(self.depth):
            entry = {"layer": i + 1}
            if self.mode == "sigma":
                entry["sigma"] = self.scales[i]
            else:
                entry["measure"] = self.measures[i].to_dict()
            layers.append(entry)
        return {
            "mode": self.mode,
            "alpha": self.alpha,
            "sigma_w": self.sigma_w,
            "sigma_b": self.sigma_b,
            "layers": layers,
            "M": self.mc_samples,
            "seed": self.stream.get("seed"),
            "kind": self.stream.get("kind"),
            "stderr": _tolist(self.stderr),
            "accumulated_stderr": _tolist(self.accumulated_stderr),
            "sampling_cost": list(self.sampling_cost),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecursionResult":
        out = cls(d["mode"], d["alpha"], d["sigma_w"], d["sigma_b"], d["M"],
                  {"seed": d.get("seed"), "kind": d.get("kind")},
                  stderr=d.get("stderr", []),
                  accumulated_stderr=d.get("accumulated_stderr", []),
                  sampling_cost=d.get("sampling_cost", []))
        for entry in d["layers"]:
            if out.mode == "sigma":
                out.scales.append(entry["sigma"])
            else:
                out.measures.append(DiscreteSpectralMeasure.from_dict(entry["measure"]))
        return out


def _tolist(xs):
    return [x.tolist() if isinstance(x, np.ndarray) else x for x in xs]


def _activation(activation, alpha):
    act = get_activation(activation) if isinstance(activation, str) else activation
    report = validate_envelope(act, alpha)
    if not report:
        raise ConfigurationError(
            f"activation {act.id!r} rejected: {'; '.join(report.violations)}", report)
    return act


def _scale_from_moment(alpha, sigma_w, sigma_b, moment):
    return (sigma_b**alpha + sigma_w**alpha * moment) ** (1.0 / alpha)


def _moment_stats(act, f, alpha, sigma_w, sigma_b):
    """Scale estimate, its standard error, and d(scale)/d(input scale) for draws f.

    ``f`` holds draws from a law with some scale s; the sensitivity is with
    respect to s, computed by rescaling the same draws (common random numbers).
    """
    g = np.abs(act(f)) ** alpha
    m = float(np.mean(g))
    se_m = float(np.std(g, ddof=1) / math.sqrt(g.size)) if g.size > 1 else 0.0
    scale = _scale_from_moment(alpha, sigma_w, sigma_b, m)
    se = sigma_w**alpha * scale ** (1.0 - alpha) / alpha * se_m
    up = _scale_from_moment(alpha, sigma_w, sigma_b, np.mean(np.abs(act(f * (1 + _FD_STEP))) ** alpha))
    dn = _scale_from_moment(alpha, sigma_w, sigma_b, np.mean(np.abs(act(f * (1 - _FD_STEP))) ** alpha))
    return scale, se, (up - dn) / (2.0 * _FD_STEP)


def sigma_recursion(alpha: float, sigma_w: float, sigma_b: float, x, activation, depth: int,
                    mc_samples: int, stream: UniformStream) -> RecursionResult:
    """Scales sigma(1..depth) of the single-input infinite-width limit.

    sigma(1) = (sigma_b^a + sigma_w^a sum_j |x_j|^a)^(1/a) exactly; deeper layers
    replace E|phi(f)|^a, f ~ St(a, sigma(l-1)), by an average over
    ``mc_samples`` draws from an independent child stream per layer.
    """
    w = StableParams(alpha, sigma_w)
    StableParams(alpha, sigma_b)
    act = _activation(activation, alpha)
    x = np.asarray(x, dtype=float).ravel()
    depth, M = int(depth), int(mc_samples)
    if depth < 1 or M < 2:
        raise ParameterDomainError("depth must be >= 1 and mc_samples >= 2")
    a = w.alpha
    res = RecursionResult("sigma", a, float(sigma_w), float(sigma_b), M, stream.describe())
    res.scales.append(float(_scale_from_moment(a, sigma_w, sigma_b, np.sum(np.abs(x) ** a))))
    res.stderr.append(0.0)
    res.accumulated_stderr.append(0.0)
    res.sampling_cost.append(0)
    unit = StableParams(a, 1.0)
    for l in range(2, depth + 1):
        f = res.scales[-1] * sample_stable(unit, stream.spawn(l), M)
        scale, se, sens = _moment_stats(act, f, a, sigma_w, sigma_b)
        acc = se + abs(sens) * res.accumulated_stderr[-1]
        res.scales.append(float(scale))
        res.stderr.append(float(se))
        res.accumulated_stderr.append(float(acc))
        res.sampling_cost.append(M)
    return res


def _bias_atom(alpha, sigma_b, k):
    return DiscreteSpectralMeasure(np.full((1, k), 1.0 / math.sqrt(k)),
                                   [sigma_b**alpha * k ** (alpha / 2.0)])


def _prune(measure):
    if len(measure) == 0:
        return measure
    keep = measure.weights >= PRUNE_FRACTION * measure.total_mass
    return DiscreteSpectralMeasure(measure.directions[keep], measure.weights[keep])


def gamma_recursion(alpha: float, sigma_w: float, sigma_b: float, inputs, activation,
                    depth: int, mc_samples: int, stream: UniformStream) -> RecursionResult:
    """Discrete spectral measures of the k-input infinite-width limit, layers 1..depth.

    Layer 1 is exact: a bias atom (1/|1|, sigma_b^a |1|^a) plus one atom
    (x_j/|x_j|, sigma_w^a |x_j|^a) per non-zero row x_j of the I x k input
    matrix. Each deeper layer draws ``mc_samples`` vectors f_m from the previous
    measure and puts mass sigma_w^a |phi(f_m)|^a / M at phi(f_m)/|phi(f_m)|,
    skipping f_m with phi(f_m) = 0.
    """
    w = StableParams(alpha, sigma_w)
    StableParams(alpha, sigma_b)
    act = _activation(activation, alpha)
    X = as_input_batch(inputs)
    depth, M = int(depth), int(mc_samples)
    if depth < 1 or M < 2:
        raise ParameterDomainError("depth must be >= 1 and mc_samples >= 2")
    a = w.alpha
    k = X.shape[1]
    bias = _bias_atom(a, sigma_b, k)
    first = DiscreteSpectralMeasure.from_vectors(X, sigma_w**a, a, dim=k)
    res = RecursionResult("gamma", a, float(sigma_w), float(sigma_b), M, stream.describe())
    res.measures.append(bias.combine(first) if len(first) else bias)
    res.stderr.append(np.zeros(k))
    res.accumulated_stderr.append(np.zeros(k))
    res.sampling_cost.append(0)
    for l in range(2, depth + 1):
        prev = res.measures[-1]
        f = sample_multivariate(prev, a, stream.spawn(l), M)
        data = _prune(DiscreteSpectralMeasure.from_vectors(act(f), sigma_w**a / M, a, dim=k))
        res.measures.append(bias.combine(data) if len(data) else bias)
        se = np.empty(k)
        sens = np.empty(k)
        for r in range(k):
            _, se[r], sens[r] = _moment_stats(act, f[:, r], a, sigma_w, sigma_b)
        res.stderr.append(se)
        res.accumulated_stderr.append(se + np.abs(sens) * res.accumulated_stderr[-1])
        res.sampling_cost.append(M * len(symmetrize(prev)) * k)
    return res


@dataclass
class GaussianRecursion:
    """Per-layer variances q_x, q_x', covariance c and correlation rho (index 0 is layer 1)."""

    q_x: np.ndarray
    q_xp: np.ndarray
    c: np.ndarray
    rho: np.ndarray

    def to_dict(self) -> dict:
        return {"layers": [{"layer": i + 1, "q_x": float(self.q_x[i]), "q_xp": float(self.q_xp[i]),
                            "c": float(self.c[i]), "rho": float(self.rho[i])}
                           for i in range(len(self.q_x))]}


def gaussian_variance_recursion(sigma_w2: float, sigma_b2: float, x, x_prime, activation,
                                depth: int, quad_points: int = 64) -> GaussianRecursion:
    """Variance/covariance propagation for Gaussian weights and biases.

    q(1) = sigma_b2 + sigma_w2 |x|^2, c(1) = sigma_b2 + sigma_w2 <x, x'>, then
    q(l) = sigma_b2 + sigma_w2 E[phi(sqrt(q) z)^2] and
    c(l) = sigma_b2 + sigma_w2 E[phi(sqrt(q_x) z) phi(sqrt(q_x') (rho z + sqrt(1 - rho^2) z'))]
    with z, z' iid N(0, 1), evaluated on a tensor Gauss-Hermite grid.

    For tanh the integrand has poles near the real axis once q is a few units,
    so 64 points give about 1e-4 relative accuracy; 256 points reach 1e-9.
    """
    if int(quad_points) < 16:
        raise ParameterDomainError(f"quad_points must be >= 16, got {quad_points}")
    if not (sigma_w2 > 0 and sigma_b2 >= 0):
        raise ParameterDomainError("need sigma_w2 > 0 and sigma_b2 >= 0")
    act = get_activation(activation) if isinstance(activation, str) else activation
    x = np.asarray(x, dtype=float).ravel()
    xp = np.asarray(x_prime, dtype=float).ravel()
    nodes, weights = np.polynomial.hermite.hermgauss(int(quad_points))
    z = math.sqrt(2.0) * nodes
    wq = weights / math.sqrt(math.pi)
    depth = int(depth)

    q = np.empty(depth)
    qp = np.empty(depth)
    c = np.empty(depth)
    rho = np.empty(depth)
    q[0] = sigma_b2 + sigma_w2 * x @ x
    qp[0] = sigma_b2 + sigma_w2 * xp @ xp
    c[0] = sigma_b2 + sigma_w2 * x @ xp
    for l in range(depth):
        if l > 0:
            r = min(1.0, max(-1.0, rho[l - 1]))
            u = act(math.sqrt(q[l - 1]) * z)
            up = act(math.sqrt(qp[l - 1]) * z)
            q[l] = sigma_b2 + sigma_w2 * wq @ u**2
            qp[l] = sigma_b2 + sigma_w2 * wq @ up**2
            v = act(math.sqrt(qp[l - 1]) * (r * z[:, None] + math.sqrt(1.0 - r * r) * z[None, :]))
            c[l] = sigma_b2 + sigma_w2 * (wq * u) @ v @ wq
        if not (np.isfinite(q[l]) and np.isfinite(qp[l]) and q[l] > 0 and qp[l] > 0
                and np.isfinite(c[l])):
            raise NumericalError(f"variance recursion broke down at layer {l + 1}",
                                 {"layer": l + 1, "q_x": q[l], "q_xp": qp[l], "c": c[l]})
        rho[l] = c[l] / math.sqrt(q[l] * qp[l])
    return GaussianRecursion(q, qp, c, rho)
