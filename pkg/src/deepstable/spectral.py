"""Discrete spectral measures and the multivariate symmetric stable laws they define.

A measure sum_j gamma_j delta_{s_j} on the unit sphere gives the law St_k(alpha, Gamma)
with characteristic function exp(-sum_j gamma_j |t . s_j|^alpha).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, ParameterDomainError, ShapeError
from .stable import StableParams, cms_transform
from .streams import UniformStream

#: directions closer than this (Euclidean, ~ angular for unit vectors) are merged
MERGE_TOL = 1e-10
_UNIT_TOL = 1e-12


def _merge(directions, weights, tol=MERGE_TOL):
    """Sum weights of coincident directions, keeping first-occurrence order."""
    if len(weights) < 2:
        return directions, weights
    keys = np.round(directions / tol).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    if first.size == len(weights):
        return directions, weights
    summed = np.bincount(inverse, weights=weights, minlength=first.size)
    order = np.argsort(first, kind="stable")
    return directions[first[order]], summed[order]


@dataclass(frozen=True, eq=False)
class DiscreteSpectralMeasure:
    """Finite measure sum_j w_j delta_{s_j} on the sphere S^{k-1}.

    ``directions`` has shape (J, k) with unit rows and ``weights`` shape (J,)
    with positive entries. Zero weights are dropped and near-coincident
    directions merged at construction. Instances are immutable.
    """

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.array(self.directions, dtype=float, ndmin=2)
        w = np.array(self.weights, dtype=float).ravel()
        if s.ndim != 2 or s.shape[0] != w.size:
            raise ShapeError(f"need (J, k) directions and J weights, got {s.shape} and {w.shape}")
        if s.shape[1] < 1:
            raise ShapeError("dimension k must be positive")
        if not (np.all(np.isfinite(w)) and np.all(w >= 0)):
            raise ParameterDomainError("atom weights must be finite and non-negative")
        keep = w > 0
        s, w = s[keep], w[keep]
        if w.size and np.max(np.abs(np.linalg.norm(s, axis=1) - 1.0)) > _UNIT_TOL:
            raise ParameterDomainError("atom directions must be unit vectors")
        s, w = _merge(s, w)
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_vectors(cls, vectors, scale: float = 1.0, alpha: float = 1.0, dim=None):
        """Atoms (v / |v|, scale * |v|^alpha) for each row v; zero rows are skipped."""
        v = np.array(vectors, dtype=float, ndmin=2)
        if v.size == 0:
            return cls(np.empty((0, dim or v.shape[-1])), np.empty(0))
        norms = np.linalg.norm(v, axis=1)
        nz = norms > 0
        return cls(v[nz] / norms[nz, None], scale * norms[nz] ** alpha)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return self.weights.size

    def combine(self, other: "DiscreteSpectralMeasure") -> "DiscreteSpectralMeasure":
        if other.dim != self.dim:
            raise ShapeError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return DiscreteSpectralMeasure(np.vstack([self.directions, other.directions]),
                                       np.concatenate([self.weights, other.weights]))

    def to_dict(self) -> dict:
        return {"dim": self.dim,
                "atoms": [{"s": s.tolist(), "w": float(w)}
                          for s, w in zip(self.directions, self.weights)]}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteSpectralMeasure":
        k = int(d["dim"])
        atoms = d["atoms"]
        s = np.array([a["s"] for a in atoms], dtype=float).reshape(len(atoms), k)
        w = np.array([a["w"] for a in atoms], dtype=float)
        return cls(s, w)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscreteSpectralMeasure":
        return cls.from_dict(json.loads(text))


def symmetrize(measure: DiscreteSpectralMeasure) -> DiscreteSpectralMeasure:
    """Split every atom (s, w) into (s, w/2) and (-s, w/2), merging coincident directions."""
    half = 0.5 * measure.weights
    return DiscreteSpectralMeasure(np.vstack([measure.directions, -measure.directions]),
                                   np.concatenate([half, half]))


def _as_t(measure, t):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = t.reshape(1)
    if t.shape[-1] != measure.dim:
        raise ShapeError(f"t has dimension {t.shape[-1]}, measure has {measure.dim}")
    return t


def multivariate_cf(measure: DiscreteSpectralMeasure, alpha: float, t):
    """exp(-sum_j w_j |t . s_j|^alpha) for one vector t or a stack of shape (..., k)."""
    StableParams(alpha)
    t = _as_t(measure, t)
    proj = np.abs(t @ measure.directions.T) ** alpha
    out = np.exp(-(proj @ measure.weights))
    return float(out) if out.ndim == 0 else out


def _sample_atoms(directions, weights, alpha, stream, count, chunk_elems=2_000_000):
    """sum_j w_j^(1/alpha) Z_j s_j with iid standard Z_j, for ``count`` draws.

    Uniforms are consumed per draw as one point of dimension 2J.
    """
    J, k = directions.shape
    loadings = (weights ** (1.0 / alpha))[:, None] * directions  # (J, k)
    out = np.empty((count, k))
    step = max(1, chunk_elems // max(J, 1))
    for i in range(0, count, step):
        m = min(step, count - i)
        u = stream.uniform(m, 2 * J).reshape(m, J, 2)
        out[i:i + m] = cms_transform(alpha, u) @ loadings
    return out


def sample_multivariate(measure: DiscreteSpectralMeasure, alpha: float,
                        stream: UniformStream, count: int) -> np.ndarray:
    """Draw ``count`` vectors from St_k(alpha, measure), shape (count, k).

    The measure is symmetrized first; cost is linear in the atom count.
    """
    StableParams(alpha)
    if len(measure) == 0:
        raise DegenerateDataError("cannot sample from a measure with no atoms")
    count = int(count)
    if count < 0:
        raise ParameterDomainError(f"count must be non-negative, got {count}")
    sym = symmetrize(measure)
    return _sample_atoms(sym.directions, sym.weights, alpha, stream, count)


def projected_scale(measure: DiscreteSpectralMeasure, alpha: float, u) -> float:
    """Scale of the scalar law u . X for X ~ St_k(alpha, measure)."""
    u = _as_t(measure, u)
    return float(np.sum(measure.weights * np.abs(measure.directions @ u) ** alpha) ** (1.0 / alpha))


def marginal_scale(measure: DiscreteSpectralMeasure, alpha: float, r: int) -> float:
    """Scale of coordinate ``r`` (1-based); 0 if every atom is orthogonal to it."""
    if not 1 <= int(r) <= measure.dim:
        raise ShapeError(f"coordinate index {r} outside 1..{measure.dim}")
    StableParams(alpha)
    col = measure.directions[:, int(r) - 1]
    return float(np.sum(measure.weights * np.abs(col) ** alpha) ** (1.0 / alpha))
