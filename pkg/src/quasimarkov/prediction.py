"""Finite-section linear prediction and interpolation for stationary sequences.

Window convention: index 1 is the most recent past value, so a window of
length L is ordered ``(w_{-1}, w_{-2}, ..., w_{-L})``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InsufficientPath, LengthMismatch, SingularToeplitz, ValidationError
from .spectral import CovarianceSequence
from .streams import as_generator

__all__ = [
    "PredictionSolution",
    "InterpolationSolution",
    "levinson",
    "conditional_mean",
    "interpolate_two_sided",
    "ma1_two_sided_path",
    "w0_recovery_partial_sum",
    "w0_recovery_residual",
    "w0_recovery_mse",
    "KAPPA_THRESHOLD",
]

KAPPA_THRESHOLD = 1.0 - 1e-12


def _as_cov(cov) -> CovarianceSequence:
    return cov if isinstance(cov, CovarianceSequence) else CovarianceSequence(np.asarray(cov, dtype=float))


@dataclass(frozen=True, eq=False)
class PredictionSolution:
    """One-step predictor of ``w_0`` from ``w_{-1}..w_{-L}``.

    Attributes
    ----------
    order : int
    coefficients : ndarray, shape (L,)
        ``a_1..a_L``; the prediction is ``sum_j a_j w_{-j}``.
    innovation_variance : float
        ``sigma2_L = C_0 - sum_j a_j C_j``.
    reflection_coefficients : ndarray, shape (L,)
    variances : ndarray, shape (L + 1,)
        ``sigma2_0..sigma2_L`` along the recursion.
    """

    order: int
    coefficients: np.ndarray
    innovation_variance: float
    reflection_coefficients: np.ndarray
    variances: np.ndarray

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": self.coefficients.tolist(),
            "innovation_variance": float(self.innovation_variance),
            "reflection_coefficients": self.reflection_coefficients.tolist(),
        }


@dataclass(frozen=True, eq=False)
class InterpolationSolution:
    """Best linear estimate of ``w_0`` from ``w_{-N..-1}`` and ``w_{1..N}``.

    ``coefficients`` are ordered ``b_{-N}, ..., b_{-1}, b_1, ..., b_N``.
    """

    window: int
    coefficients: np.ndarray
    error_variance: float

    @property
    def past(self) -> np.ndarray:
        return self.coefficients[: self.window]

    @property
    def future(self) -> np.ndarray:
        return self.coefficients[self.window :]

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "coefficients": self.coefficients.tolist(),
            "error_variance": float(self.error_variance),
        }


def levinson(cov, order: int) -> PredictionSolution:
    """Levinson-Durbin recursion for the Yule-Walker system ``T_L a = (C_1..C_L)``.

    Raises
    ------
    SingularToeplitz
        If ``C_0 <= 0`` or some reflection coefficient reaches ``1 - 1e-12``.
    """
    cov = _as_cov(cov)
    if isinstance(order, bool) or int(order) != order or order < 0:
        raise ValidationError("order must be a non-negative integer")
    order = int(order)
    if order > cov.max_lag:
        raise ValidationError(f"order {order} exceeds max_lag {cov.max_lag}")
    c = cov.lags
    if not c[0] > 0:
        raise SingularToeplitz("C_0 must be positive")
    a = np.zeros(0)
    kappas = np.empty(order)
    variances = np.empty(order + 1)
    err = c[0]
    variances[0] = err
    for k in range(1, order + 1):
        kappa = (c[k] - a @ c[k - 1 : 0 : -1]) / err if k > 1 else c[1] / err
        if abs(kappa) >= KAPPA_THRESHOLD:
            raise SingularToeplitz(
                f"reflection coefficient |kappa_{k}| = {abs(kappa):.15f} reached the singularity threshold"
            )
        a = np.concatenate([a - kappa * a[::-1], [kappa]])
        err = err * (1.0 - kappa * kappa)
        kappas[k - 1] = kappa
        variances[k] = err
    return PredictionSolution(order, a, float(err), kappas, variances)


def conditional_mean(sol: PredictionSolution, past_window) -> np.ndarray | float:
    """Predicted ``w_0`` given ``(w_{-1}, ..., w_{-L})`` along the last axis."""
    w = np.asarray(past_window, dtype=float)
    if w.shape[-1:] != (sol.order,):
        raise LengthMismatch(f"window length {w.shape[-1] if w.ndim else 0} != predictor order {sol.order}")
    out = w @ sol.coefficients
    return float(out) if np.ndim(out) == 0 else out


def interpolate_two_sided(cov, window: int) -> InterpolationSolution:
    """Condition ``W_0`` on ``W_{+-1}..W_{+-N}`` by a dense positive-definite solve.

    Raises
    ------
    SingularToeplitz
        If the ``2N x 2N`` neighbour covariance is not positive definite.
    """
    cov = _as_cov(cov)
    if isinstance(window, bool) or int(window) != window or window < 1:
        raise ValidationError("window must be a positive integer")
    n = int(window)
    if 2 * n > cov.max_lag:
        raise ValidationError(f"two-sided window {n} needs max_lag >= {2 * n}")
    full = cov.toeplitz(2 * n)
    idx = np.r_[0:n, n + 1 : 2 * n + 1]
    q11 = full[np.ix_(idx, idx)]
    q12 = full[idx, n]
    try:
        factor = linalg.cho_factor(q11, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularToeplitz(f"neighbour covariance of window {n} is not positive definite") from exc
    b = linalg.cho_solve(factor, q12, check_finite=False)
    err = float(cov.lags[0] - q12 @ b)
    return InterpolationSolution(n, b, max(err, 0.0))


# ---------------------------------------------------------------------------
# unit-root MA(1): W_n = xi_n + xi_{n+1}


def ma1_two_sided_path(xi) -> np.ndarray:
    """``W_{-K..K}`` from ``xi_{-K..K+1}`` (last axis of length 2K + 2)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] < 2 or xi.shape[-1] % 2:
        raise InsufficientPath("xi must have even length 2K + 2 (K >= 0)")
    return xi[..., :-1] + xi[..., 1:]


def _check_two_sided(w: np.ndarray, n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError("N must be a positive integer")
    if w.shape[-1] % 2 == 0:
        raise InsufficientPath("two-sided path must have odd length 2K + 1 centred on W_0")
    k = w.shape[-1] // 2
    if n > k:
        raise InsufficientPath(f"path covers W_-{k}..W_{k}, need N <= {k}, got {n}")
    return k


def w0_recovery_partial_sum(w, n: int):
    """Estimate ``W_0`` from its neighbours.

    ``-(1/N) sum_{n=1}^{N} (-1)^n (N + 1 - n) (W_n + W_{-n})``, computed along the
    last axis of ``w = (W_{-K}, ..., W_K)``.
    """
    w = np.asarray(w, dtype=float)
    k = _check_two_sided(w, n)
    m = np.arange(1, n + 1)
    weights = -((-1.0) ** m) * (n + 1 - m) / n
    out = (w[..., k + m] + w[..., k - m]) @ weights
    return float(out) if np.ndim(out) == 0 else out


def w0_recovery_residual(xi, n: int):
    """Closed form of ``estimator - W_0`` in terms of the innovations.

    Equals ``-(1/N) sum_{n=1}^{N} (-1)^n (xi_{n+1} + xi_{-n})`` for
    ``xi = (xi_{-K}, ..., xi_{K+1})``; a sum of 2N independent terms, so its
    variance is ``2/N`` for standard normal innovations.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] % 2:
        raise InsufficientPath("xi must have even length 2K + 2")
    k = xi.shape[-1] // 2 - 1
    if isinstance(n, bool) or int(n) != n or n < 1 or n > k:
        raise InsufficientPath(f"need 1 <= N <= {k}")
    m = np.arange(1, n + 1)
    sign = (-1.0) ** m
    out = -((xi[..., k + m + 1] + xi[..., k - m]) @ sign) / n
    return float(out) if np.ndim(out) == 0 else out


def w0_recovery_mse(n: int, n_paths: int, seed, batch: int = 50) -> dict:
    """Monte Carlo mean squared error of the partial-sum estimator.

    Innovations are standard normal; paths are drawn in batches from one
    generator so the result depends only on ``seed``.
    """
    rng = as_generator(seed)
    sq = []
    for start in range(0, n_paths, batch):
        size = min(batch, n_paths - start)
        xi = rng.standard_normal((size, 2 * n + 2))
        w = ma1_two_sided_path(xi)
        est = w0_recovery_partial_sum(w, n)
        sq.append((est - w[:, n]) ** 2)
    sq = np.concatenate(sq) if sq else np.empty(0)
    return {
        "N": n,
        "n_paths": n_paths,
        "mse": float(sq.mean()) if sq.size else float("nan"),
        "theory": 2.0 / n,
        "stderr": float(sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else float("nan"),
    }
