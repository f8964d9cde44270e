"""Seedable, splittable random streams and the exact samplers the estimators use.

A stream is identified by a master seed plus a hierarchical label path
(e.g. chain / replicate / step).  Splitting is value-based: a child stream
is fully determined by ``(seed, path)`` and is independent of how much the
parent has been consumed, so concurrent tasks get schedule-independent
results.  The bit generator is Philox (counter based), whose output is
reproducible across platforms for a fixed numpy version.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ParameterError

__all__ = [
    "RngStream",
    "sample_dirichlet",
    "sample_beta",
    "sample_binomial",
    "sample_categorical",
    "sample_truncated_normal",
]

# Interval probability mass below which truncated-normal sampling degenerates
# to clamping at the nearer bound.
_TRUNCNORM_MIN_MASS = 1e-300


def _label_words(label) -> tuple[int, ...]:
    """Map a label (int or str) to spawn-key words, stable across platforms."""
    if isinstance(label, (int, np.integer)):
        payload = b"i:" + str(int(label)).encode()
    elif isinstance(label, str):
        payload = b"s:" + label.encode()
    else:
        raise TypeError(f"stream labels must be int or str, got {type(label).__name__}")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return (
        int.from_bytes(digest[:4], "little"),
        int.from_bytes(digest[4:], "little"),
    )


class RngStream:
    """A random stream addressed by (master seed, label path)."""

    __slots__ = ("seed", "path", "_generator")

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(path)
        key = ()
        for label in self.path:
            key = key + _label_words(label)
        self._generator = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=key))
        )

    def split(self, *labels) -> "RngStream":
        """Child stream at ``path + labels``; independent of this stream's state."""
        return RngStream(self.seed, self.path + labels)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path!r})"


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


def sample_dirichlet(alpha, rng) -> np.ndarray:
    """Draw from Dirichlet(alpha); the final axis of ``alpha`` is the simplex axis.

    Batched shapes are supported by drawing gammas and normalizing, which is
    the standard exact construction.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 0 or np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise ParameterError("Dirichlet parameters must be finite and positive")
    g = _gen(rng).standard_gamma(alpha)
    total = g.sum(axis=-1, keepdims=True)
    # Gamma(a>=tiny) draws are positive a.s.; guard the pathological underflow.
    total[total == 0.0] = 1.0
    out = g / total
    if alpha.ndim == 1 and alpha.size == 1:
        out = np.ones_like(out)
    return out


def sample_beta(a, b, rng) -> np.ndarray | float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ParameterError("Beta parameters must be positive")
    return _gen(rng).beta(a, b)


def sample_binomial(n, p, rng) -> np.ndarray | int:
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    if np.any(n < 0):
        raise ParameterError("binomial size must be non-negative")
    if np.any(p < 0) or np.any(p > 1):
        raise ParameterError("binomial probability must lie in [0, 1]")
    return _gen(rng).binomial(n, p)


def sample_categorical(probs, rng, size=None) -> np.ndarray | int:
    """Draw category indices from a probability vector."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or np.any(probs < 0):
        raise ParameterError("categorical probabilities must be a non-negative vector")
    total = probs.sum()
    if not np.isfinite(total) or total <= 0:
        raise ParameterError("categorical probabilities must have positive total")
    return _gen(rng).choice(probs.size, size=size, p=probs / total)


def sample_truncated_normal(mean, sd, lo, hi, rng) -> np.ndarray | float:
    """Inverse-CDF draw from Normal(mean, sd^2) truncated to [lo, hi].

    When the interval carries essentially no mass (< 1e-300) the draw is
    clamped to the nearer bound and a RuntimeWarning is emitted.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd <= 0):
        raise ParameterError("sd must be positive")
    if np.any(np.asarray(lo) >= np.asarray(hi)):
        raise ParameterError("require lo < hi")
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    cdf_a = ndtr(a)
    cdf_b = ndtr(b)
    mass = cdf_b - cdf_a
    u = _gen(rng).uniform(size=mean.shape if mean.shape else None)
    degenerate = mass < _TRUNCNORM_MIN_MASS
    if np.any(degenerate):
        import warnings

        warnings.warn(
            "truncated-normal interval mass underflow; clamping to the nearer bound",
            RuntimeWarning,
            stacklevel=2,
        )
        nearer = np.where(np.asarray(a) > 0, lo, hi)
        safe_mass = np.where(degenerate, 1.0, mass)
        x = mean + sd * ndtri(np.clip(cdf_a + u * safe_mass, 1e-320, 1 - 1e-16))
        return np.where(degenerate, nearer, np.clip(x, lo, hi))
    x = mean + sd * ndtri(np.clip(cdf_a + u * mass, 1e-320, 1 - 1e-16))
    return np.clip(x, lo, hi)
