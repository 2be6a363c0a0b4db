"""Uniform random streams on the open unit interval.

Every sampler in the package consumes uniforms through a :class:`UniformStream`
so that pseudo-random and scrambled low-discrepancy (Sobol) draws are
interchangeable. Values never touch 0 or 1.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import qmc

from .errors import ParameterDomainError, ShapeError

PSEUDO = "pseudo"
SOBOL = "sobol"
KINDS = (PSEUDO, SOBOL)

# raw u in [0, 1) is mapped to u * (1 - 2 eps) + eps
_EPS = 2.0**-53
_SEED_LIMIT = 2**64


class UniformStream:
    """Reproducible source of uniforms in (0, 1).

    Parameters
    ----------
    kind : {"pseudo", "sobol"}
        Pseudo-random (PCG64) or scrambled Sobol points.
    seed : int
        Non-negative 64-bit seed.
    dimension : int, optional
        Point dimension of a Sobol stream. Fixed by the first draw if omitted.
        Ignored for pseudo-random streams.

    Streams hold mutable generator state: give each worker its own stream,
    typically via :meth:`spawn`.
    """

    def __init__(self, kind: str = PSEUDO, seed: int = 0, dimension: int | None = None,
                 _key: tuple[int, ...] = ()):
        if kind not in KINDS:
            raise ParameterDomainError(f"stream kind must be one of {KINDS}, got {kind!r}")
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ParameterDomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if dimension is not None and int(dimension) < 1:
            raise ParameterDomainError(f"dimension must be positive, got {dimension}")
        self.kind = kind
        self.seed = seed
        self.dimension = None if dimension is None else int(dimension)
        self.key = tuple(_key)
        self._seq = np.random.SeedSequence(seed, spawn_key=self.key)
        self._rng = np.random.Generator(np.random.PCG64(self._seq)) if kind == PSEUDO else None
        self._engine = None

    def __repr__(self):
        return f"UniformStream(kind={self.kind!r}, seed={self.seed}, key={self.key})"

    def spawn(self, index: int, dimension: int | None = None) -> "UniformStream":
        """Independent child stream identified by ``index``.

        Children depend only on (kind, seed, key path), never on how many
        values the parent has produced.
        """
        return UniformStream(self.kind, self.seed, dimension, _key=self.key + (int(index),))

    def _sobol(self, dim):
        if self.dimension is None:
            self.dimension = dim
        if dim != self.dimension:
            raise ShapeError(
                f"low-discrepancy stream has dimension {self.dimension}, requested {dim}")
        if self._engine is None:
            rng = np.random.Generator(np.random.PCG64(self._seq))
            try:
                self._engine = qmc.Sobol(dim, scramble=True, rng=rng)
            except TypeError:  # scipy < 1.15
                self._engine = qmc.Sobol(dim, scramble=True, seed=rng)
        return self._engine

    def uniform(self, count: int, dim: int = 1) -> np.ndarray:
        """Array of shape (count, dim) with entries strictly inside (0, 1).

        For Sobol streams each row is one point of the sequence.
        """
        count = int(count)
        dim = int(dim)
        if count < 0 or dim < 1:
            raise ShapeError(f"invalid uniform request ({count}, {dim})")
        if count == 0:
            return np.empty((0, dim))
        if self.kind == PSEUDO:
            raw = self._rng.random((count, dim))
        else:
            with warnings.catch_warnings():
                # balance warnings for non power-of-two batch sizes
                warnings.simplefilter("ignore", UserWarning)
                raw = self._sobol(dim).random(count)
        return raw * (1.0 - 2.0 * _EPS) + _EPS

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed}
