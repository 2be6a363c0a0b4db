"""Symmetric centered alpha-stable laws St(alpha, sigma).

St(alpha, sigma) has characteristic function exp(-sigma**alpha * |t|**alpha).
alpha = 2 is N(0, 2 sigma^2) and alpha = 1 is Cauchy with scale sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gammaln, ndtr

from .errors import (
    DegenerateDataError,
    EmptyInputError,
    MomentDivergenceError,
    NumericalError,
    ParameterDomainError,
    UnsupportedRangeError,
)
from .streams import UniformStream

#: smallest alpha (exclusive) for which density/CDF evaluation is supported
MIN_DENSITY_ALPHA = 0.5

# exp(-t**alpha) < 1e-16 beyond t**alpha = 36.8
_CF_CUTOFF = 36.8
# standardized |x| beyond which the tail series replaces quadrature
TAIL_SWITCH = 10.0
_TABLE_STEP = 1.0 / 200.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class StableParams:
    """Stability index ``alpha`` in (0, 2] and scale ``sigma`` > 0."""

    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        a, s = float(self.alpha), float(self.sigma)
        if not (math.isfinite(a) and 0.0 < a <= 2.0):
            raise ParameterDomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (math.isfinite(s) and s > 0.0):
            raise ParameterDomainError(f"sigma must be positive and finite, got {self.sigma}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "sigma", s)


def cms_transform(alpha: float, u: np.ndarray) -> np.ndarray:
    """Map uniforms of shape (..., 2) to standard St(alpha, 1) variates.

    Chambers-Mallows-Stuck, symmetric case: V = pi (u0 - 1/2) is uniform on
    (-pi/2, pi/2) and W = -log(u1) is standard exponential.
    """
    v = np.pi * (u[..., 0] - 0.5)
    if alpha == 1.0:
        return np.tan(v)
    w = -np.log(u[..., 1])
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha))


def sample_stable(params: StableParams, stream: UniformStream, count: int) -> np.ndarray:
    """Draw ``count`` iid St(alpha, sigma) variates.

    Each variate consumes one (V, W) pair, i.e. two uniforms (one point of a
    2-dimensional low-discrepancy stream).
    """
    count = int(count)
    if count < 0:
        raise ParameterDomainError(f"count must be non-negative, got {count}")
    if count == 0:
        return np.empty(0)
    return params.sigma * cms_transform(params.alpha, stream.uniform(count, 2))


def stable_cf(params: StableParams, t):
    """Characteristic function exp(-(sigma |t|)^alpha); real since the law is symmetric."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.abs(params.sigma * t) ** params.alpha)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Fourier inversion


def _t_max(alpha):
    return _CF_CUTOFF ** (1.0 / alpha)


@lru_cache(maxsize=32)
def _panel_nodes(alpha, z_max):
    """Gauss-Legendre nodes/weights on [0, t_max].

    Panels are graded geometrically towards t = 0, where exp(-t**alpha) is not
    smooth, and are at most 4 pi / z_max wide further out so that each holds
    at most two periods of cos(t z).
    """
    t_max = _t_max(alpha)
    h = min(1.0, 4.0 * np.pi / max(z_max, 1e-12))
    head = [0.0] + [2.0**-j for j in range(50, 0, -1)]
    head = [b for b in head if b < min(h, t_max)]
    body = np.arange(min(h, t_max), t_max, h)
    edges = np.unique(np.concatenate([head, body, [t_max]]))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return t, w * np.exp(-t**alpha)


def _fourier_standard(z, alpha, chunk=64):
    """Quadrature of the inversion integrals for St(alpha, 1) at z >= 0.

    Returns (pdf, d pdf / dz, cdf) arrays.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    t, w = _panel_nodes(alpha, float(np.max(np.abs(z))) if z.size else 1.0)
    pdf = np.empty_like(z)
    dpdf = np.empty_like(z)
    cdf = np.empty_like(z)
    for i in range(0, z.size, chunk):
        zz = z[i:i + chunk, None]
        tz = t[None, :] * zz
        c, s = np.cos(tz), np.sin(tz)
        pdf[i:i + chunk] = c @ w
        dpdf[i:i + chunk] = -(s * t) @ w
        cdf[i:i + chunk] = (s / t) @ w
    return pdf / np.pi, dpdf / np.pi, 0.5 + cdf / np.pi


def _series_terms(z, alpha, kmax=80, log=False):
    """Tail expansion of the density and survival function for z > 0.

    pdf(z) = 1/pi sum_k (-1)^(k+1) Gamma(alpha k + 1)/k! sin(k pi alpha/2) z^(-alpha k - 1)
    Convergent for alpha < 1, asymptotic for alpha > 1; the asymptotic sum is
    cut before its smallest term. With ``log=True`` both are returned as logs,
    which stay finite where the values themselves underflow.
    """
    z = np.asarray(z, dtype=float)
    k = np.arange(1, kmax + 1, dtype=float)[:, None]
    logz = np.log(z)[None, :]
    sign = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(k * np.pi * alpha / 2.0)
    log_mag_pdf = gammaln(alpha * k + 1.0) - gammaln(k + 1.0) - (alpha * k + 1.0) * logz
    log_mag_sf = gammaln(alpha * k) - gammaln(k + 1.0) - alpha * k * logz
    growing = np.diff(log_mag_pdf, axis=0) > 0
    keep = np.vstack([np.ones((1, z.size), bool), np.cumsum(growing, axis=0) == 0])
    # sums relative to the leading term
    rel_pdf = np.sum(np.where(keep, sign * np.exp(log_mag_pdf - log_mag_pdf[:1]), 0.0), axis=0)
    rel_sf = np.sum(np.where(keep, sign * np.exp(log_mag_sf - log_mag_sf[:1]), 0.0), axis=0)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (log_mag_pdf[0] + np.log(rel_pdf) - math.log(math.pi),
                    log_mag_sf[0] + np.log(rel_sf) - math.log(math.pi))
    return np.exp(log_mag_pdf[0]) * rel_pdf / np.pi, np.exp(log_mag_sf[0]) * rel_sf / np.pi


class _StandardTable:
    """Hermite interpolants of the St(alpha, 1) density and CDF on [0, 10]."""

    def __init__(self, alpha):
        self.alpha = alpha
        z = np.linspace(0.0, TAIL_SWITCH, int(round(TAIL_SWITCH / _TABLE_STEP)) + 1)
        pdf, dpdf, cdf = _fourier_standard(z, alpha)
        cdf[0] = 0.5
        s_pdf, s_sf = _series_terms(np.array([TAIL_SWITCH]), alpha)
        self.switch_check = {
            "alpha": alpha,
            "z": TAIL_SWITCH,
            "pdf_quadrature": float(pdf[-1]),
            "pdf_series": float(s_pdf[0]),
            "sf_quadrature": float(1.0 - cdf[-1]),
            "sf_series": float(s_sf[0]),
        }
        ok_pdf = abs(pdf[-1] - s_pdf[0]) <= 1e-6 * abs(s_pdf[0]) + 1e-11
        ok_sf = abs(1.0 - cdf[-1] - s_sf[0]) <= 1e-6 * abs(s_sf[0]) + 1e-11
        if not (ok_pdf and ok_sf and np.all(np.isfinite(pdf)) and np.all(pdf >= -1e-14)):
            raise NumericalError("inversion quadrature disagrees with the tail series "
                                 "at the switch point", self.switch_check)
        self.pdf_spline = CubicHermiteSpline(z, pdf, dpdf)
        self.cdf_spline = CubicHermiteSpline(z, cdf, pdf)

    def pdf(self, z):
        out = np.empty_like(z)
        inner = z <= TAIL_SWITCH
        out[inner] = self.pdf_spline(z[inner])
        if not inner.all():
            out[~inner] = _series_terms(z[~inner], self.alpha)[0]
        return np.maximum(out, 0.0)

    def sf(self, z):
        out = np.empty_like(z)
        inner = z <= TAIL_SWITCH
        out[inner] = 1.0 - self.cdf_spline(z[inner])
        if not inner.all():
            out[~inner] = _series_terms(z[~inner], self.alpha)[1]
        return np.clip(out, 0.0, 0.5)


@lru_cache(maxsize=64)
def _table(alpha):
    return _StandardTable(alpha)


def _check_density_alpha(alpha):
    if alpha <= MIN_DENSITY_ALPHA:
        raise UnsupportedRangeError(
            f"density/CDF evaluation requires alpha > {MIN_DENSITY_ALPHA}, got {alpha}")


def standard_pdf(z, alpha):
    """Density of St(alpha, 1) at ``z`` (array)."""
    _check_density_alpha(alpha)
    z = np.abs(np.asarray(z, dtype=float))
    if alpha == 2.0:
        return np.exp(-0.25 * z * z) / (2.0 * math.sqrt(math.pi))
    if alpha == 1.0:
        return 1.0 / (np.pi * (1.0 + z * z))
    flat = z.ravel()
    return _table(alpha).pdf(flat).reshape(z.shape)


def standard_cdf(z, alpha):
    """CDF of St(alpha, 1) at ``z`` (array); exactly 1/2 at 0 and odd-symmetric about it."""
    _check_density_alpha(alpha)
    z = np.asarray(z, dtype=float)
    if alpha == 2.0:
        return ndtr(z / math.sqrt(2.0))
    if alpha == 1.0:
        return 0.5 + np.arctan(z) / np.pi
    flat = z.ravel()
    sf = _table(alpha).sf(np.abs(flat))
    return np.where(flat > 0, 1.0 - sf, sf).reshape(z.shape)


def stable_pdf(params: StableParams, x):
    """Density of St(alpha, sigma), via Fourier inversion of the characteristic function.

    Supported for alpha in (0.5, 2]. Raises :class:`NumericalError` if the
    quadrature fails its consistency check against the tail expansion.
    """
    x = np.asarray(x, dtype=float)
    out = standard_pdf(x / params.sigma, params.alpha) / params.sigma
    return float(out) if out.ndim == 0 else out


def stable_cdf(params: StableParams, x):
    """CDF of St(alpha, sigma). Same range and failure modes as :func:`stable_pdf`."""
    x = np.asarray(x, dtype=float)
    out = standard_cdf(x / params.sigma, params.alpha)
    return float(out) if out.ndim == 0 else out


def _standard_logpdf(z, alpha):
    z = np.abs(z)
    if alpha == 2.0:
        return -0.25 * z * z - math.log(2.0 * math.sqrt(math.pi))
    if alpha == 1.0:
        big = z > 1.0
        zz = np.where(big, z, 1.0)
        return np.where(big, -2.0 * np.log(zz) - np.log1p(zz**-2.0),
                        -np.log1p(np.minimum(z, 1.0) ** 2)) - math.log(math.pi)
    out = np.empty_like(z)
    inner = z <= TAIL_SWITCH
    with np.errstate(divide="ignore"):
        out[inner] = np.log(_table(alpha).pdf(z[inner]))
    if not inner.all():
        out[~inner] = _series_terms(z[~inner], alpha, log=True)[0]
    return out


def stable_logpdf(params: StableParams, x):
    """Elementwise log density, finite far beyond where the density underflows."""
    _check_density_alpha(params.alpha)
    z = np.asarray(x, dtype=float) / params.sigma
    out = _standard_logpdf(z.ravel(), params.alpha).reshape(z.shape) - math.log(params.sigma)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# moments and scale recovery


def _moment_constant(alpha, p):
    if p <= 0 or not math.isfinite(p):
        raise ParameterDomainError(f"moment order p must be positive, got {p}")
    if alpha == 2.0:
        # Gaussian: every absolute moment is finite
        return 2.0**p * math.gamma((1.0 + p) / 2.0) / math.sqrt(math.pi)
    if p >= alpha:
        raise MomentDivergenceError(
            f"E|S|^p is infinite for p >= alpha (p={p}, alpha={alpha})")
    return (2.0**p * math.gamma((1.0 + p) / 2.0) * math.gamma(1.0 - p / alpha)
            / (math.sqrt(math.pi) * math.gamma(1.0 - p / 2.0)))


def frac_abs_moment(params: StableParams, p: float) -> float:
    """E|S|^p for S ~ St(alpha, sigma), finite for 0 < p < alpha."""
    return params.sigma**p * _moment_constant(params.alpha, float(p))


def estimate_scale(samples, alpha: float, p: float | None = None) -> float:
    """Fractional-moment estimate of sigma from iid St(alpha, sigma) samples.

    Inverts E|S|^p = C(p, alpha) sigma^p with p = alpha / 2 by default.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptyInputError("cannot estimate a scale from no samples")
    StableParams(alpha)
    p = alpha / 2.0 if p is None else float(p)
    c = _moment_constant(alpha, p)
    m = np.mean(np.abs(x) ** p)
    if not m > 0:
        raise DegenerateDataError("all samples are zero; scale estimate would be 0")
    return float((m / c) ** (1.0 / p))
