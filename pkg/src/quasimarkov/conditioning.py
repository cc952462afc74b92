"""Finite-dimensional Gaussian conditioning and disintegration.

For ``X ~ N(0, Q)`` split into coordinates ``I1`` and ``I2``, the law of
``X_2`` given ``X_1 = x_1`` is ``N(A x_1, S)`` with

    A = Q21 Q11^+,    S = Q22 - Q21 Q11^+ Q12,

where ``^+`` is the pseudo-inverse (eigenvalues below ``1e-10`` times the
largest are treated as zero).  Sampling ``x_1 ~ N(0, Q11)`` and
``x_2 = A x_1 + y`` with ``y ~ N(0, S)`` reproduces ``N(0, Q)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .streams import as_generator

__all__ = [
    "GaussianSplitting",
    "ConditionalLaw",
    "condition",
    "rkhs_norm",
    "disintegration_sample",
    "gaussian_sample",
    "PINV_RTOL",
]

PINV_RTOL = 1e-10


def _psd_eigh(q: np.ndarray, rtol: float = PINV_RTOL):
    w, v = np.linalg.eigh(q)
    top = w.max() if w.size else 0.0
    keep = w > rtol * top if top > 0 else np.zeros(w.shape, dtype=bool)
    return w, v, keep


def _pinv_psd(q: np.ndarray, rtol: float = PINV_RTOL) -> tuple[np.ndarray, int]:
    if q.size == 0:
        return np.zeros(q.shape), 0
    w, v, keep = _psd_eigh(q, rtol)
    vk = v[:, keep]
    return (vk / w[keep]) @ vk.T, int(keep.sum())


def _psd_sqrt(q: np.ndarray) -> np.ndarray:
    # factor R with R R^T = q, tolerant of rank deficiency
    if q.size == 0:
        return np.zeros(q.shape)
    w, v = np.linalg.eigh(q)
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class GaussianSplitting:
    """Covariance ``Q`` with a partition of its indices into ``I1`` and ``I2``.

    Indices are 0-based.
    """

    covariance: np.ndarray
    first: tuple[int, ...]
    second: tuple[int, ...]

    def __post_init__(self):
        q = np.array(self.covariance, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValidationError("covariance must be a square matrix")
        if not np.all(np.isfinite(q)):
            raise ValidationError("covariance entries must be finite")
        n = q.shape[0]
        scale = max(1.0, float(np.max(np.abs(q)))) if n else 1.0
        if n and np.max(np.abs(q - q.T)) > 1e-12 * scale:
            raise ValidationError("covariance must be symmetric")
        q = 0.5 * (q + q.T)
        if n and np.linalg.eigvalsh(q).min() < -1e-10 * max(np.trace(q), 1e-300):
            raise ValidationError("covariance must be positive semidefinite")
        first = tuple(int(i) for i in self.first)
        second = tuple(int(i) for i in self.second)
        both = first + second
        if len(set(both)) != len(both) or sorted(both) != list(range(n)):
            raise ValidationError("I1 and I2 must be disjoint and cover all indices")
        q.setflags(write=False)
        object.__setattr__(self, "covariance", q)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)

    @classmethod
    def from_indices(cls, covariance, first: Sequence[int]) -> "GaussianSplitting":
        """Splitting with ``I2`` the complement of ``first``."""
        n = np.asarray(covariance).shape[0]
        first = tuple(int(i) for i in first)
        if any(i < 0 or i >= n for i in first):
            raise ValidationError("indices out of range")
        second = tuple(i for i in range(n) if i not in set(first))
        return cls(covariance, first, second)

    @property
    def dimension(self) -> int:
        return self.covariance.shape[0]

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return self.covariance[np.ix_(list(rows), list(cols))]

    @property
    def q11(self) -> np.ndarray:
        return self.block(self.first, self.first)

    @property
    def q12(self) -> np.ndarray:
        return self.block(self.first, self.second)

    @property
    def q21(self) -> np.ndarray:
        return self.block(self.second, self.first)

    @property
    def q22(self) -> np.ndarray:
        return self.block(self.second, self.second)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "covariance": self.covariance.tolist(),
            "I1": list(self.first),
            "I2": list(self.second),
        }


@dataclass(frozen=True, eq=False)
class ConditionalLaw:
    """Law of ``X_2`` given ``X_1``: ``N(mean_operator @ x_1, conditional_covariance)``.

    ``rank`` is the numerical rank of ``Q11``.
    """

    mean_operator: np.ndarray
    conditional_covariance: np.ndarray
    rank: int

    def mean(self, x1) -> np.ndarray:
        """Conditional mean for one value (vector) or a batch (rows)."""
        x1 = np.asarray(x1, dtype=float)
        return x1 @ self.mean_operator.T

    def to_dict(self) -> dict:
        return {
            "mean_operator": self.mean_operator.tolist(),
            "conditional_covariance": self.conditional_covariance.tolist(),
            "rank": self.rank,
        }


def condition(split: GaussianSplitting, rtol: float = PINV_RTOL) -> ConditionalLaw:
    """Conditional mean operator and covariance of ``X_2`` given ``X_1``."""
    pinv, rank = _pinv_psd(split.q11, rtol)
    mean_op = split.q21 @ pinv
    cond = split.q22 - mean_op @ split.q12
    cond = 0.5 * (cond + cond.T)
    return ConditionalLaw(mean_op, cond, rank)


def rkhs_norm(split, v, rtol: float = PINV_RTOL, range_tol: float = 1e-8) -> float:
    """Squared Cameron-Martin norm ``<v, Q^+ v>``, or ``inf`` off the range of Q.

    ``split`` may be a :class:`GaussianSplitting` or a covariance matrix.
    """
    q = split.covariance if isinstance(split, GaussianSplitting) else np.asarray(split, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != (q.shape[0],):
        raise ValidationError("vector length must match the covariance dimension")
    w, vec, keep = _psd_eigh(q, rtol)
    coef = vec.T @ v
    resid = np.sqrt(max(float(np.sum(coef[~keep] ** 2)), 0.0))
    if resid > range_tol * max(np.linalg.norm(v), 1e-300):
        return float("inf")
    return float(np.sum(coef[keep] ** 2 / w[keep]))


def gaussian_sample(covariance, n_samples: int, seed) -> np.ndarray:
    """Direct samples of ``N(0, Q)`` (rows), via a PSD square root."""
    q = np.asarray(covariance, dtype=float)
    rng = as_generator(seed)
    z = rng.standard_normal((int(n_samples), q.shape[0]))
    return z @ _psd_sqrt(q).T


def disintegration_sample(split: GaussianSplitting, law: ConditionalLaw, n_samples: int, seed) -> np.ndarray:
    """Sample ``N(0, Q)`` through the disintegration: first ``x_1``, then ``x_2 | x_1``.

    Returns an ``(n_samples, n)`` array in the original index order.
    """
    if isinstance(n_samples, bool) or int(n_samples) != n_samples or n_samples < 0:
        raise ValidationError("n_samples must be a non-negative integer")
    n_samples = int(n_samples)
    rng = as_generator(seed)
    out = np.empty((n_samples, split.dimension))
    if n_samples == 0:
        return out
    x1 = rng.standard_normal((n_samples, len(split.first))) @ _psd_sqrt(split.q11).T
    y = rng.standard_normal((n_samples, len(split.second))) @ _psd_sqrt(law.conditional_covariance).T
    out[:, list(split.first)] = x1
    out[:, list(split.second)] = law.mean(x1) + y
    return out
