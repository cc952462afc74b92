"""Stationary Gaussian noise paths, the one-step conditional kernel, and the
shift subcoupling of two one-step laws.

Paths are stored oldest first: ``values = (w_{-L+1}, ..., w_0)``.  The one-step
kernel draws ``w_1 ~ N(m_L(w), sigma2_L)`` where ``m_L`` is the order-L linear
predictor, then drops the oldest value and appends ``w_1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg, signal, special, stats

from .errors import EmbeddingFailure, EmptyInterval, ValidationError, WindowTooShort
from .prediction import PredictionSolution, levinson
from .spectral import CovarianceSequence, SpectralModel, covariance_from_spectrum
from .streams import as_generator

__all__ = [
    "NoisePath",
    "GaussianStepKernel",
    "SubcouplingSpec",
    "sample_stationary",
    "sample_stationary_paths",
    "step",
    "iterate",
    "subcoupling",
    "gaussian_subcoupling",
    "tv_gaussian",
    "CHOLESKY_MAX",
    "DEFAULT_WINDOW",
]

CHOLESKY_MAX = 4096
_CHOLESKY_FALLBACK_MAX = 8192
DEFAULT_WINDOW = 256
_EMBED_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Finite noise past ``(w_{-L+1}, ..., w_0)``, oldest first."""

    values: np.ndarray
    model_tag: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 1:
            raise ValidationError("noise path needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValidationError("noise path entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def window(self) -> int:
        return self.values.size

    def recent(self, order: int) -> np.ndarray:
        """``(w_0, w_{-1}, ..., w_{-order+1})``: most recent first."""
        if order > self.window:
            raise WindowTooShort(f"path window {self.window} shorter than required {order}")
        return self.values[::-1][:order].copy()

    def concat_shift(self, new_values) -> "NoisePath":
        """Append ``new_values`` and drop as many of the oldest values."""
        new = np.atleast_1d(np.asarray(new_values, dtype=float))
        joined = np.concatenate([self.values, new])[new.size :]
        return NoisePath(joined, self.model_tag)

    def to_dict(self) -> dict:
        return {"window": self.window, "model": self.model_tag, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class GaussianStepKernel:
    """``w_1 | past ~ N(sum_j a_j w_{1-j}, sigma2)`` with a finite window.

    ``sigma2`` is the order-L innovation variance, so iterating the kernel from
    a stationary start reproduces the order-L autoregressive approximation
    exactly; for Markov sequences of order <= L it is exact.
    """

    prediction: PredictionSolution
    sigma2: float
    model_tag: str = ""
    covariance: CovarianceSequence | None = None

    def __post_init__(self):
        if not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise ValidationError("step kernel needs a positive innovation variance (degenerate noise)")

    @property
    def order(self) -> int:
        return self.prediction.order

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    @classmethod
    def from_covariance(cls, cov: CovarianceSequence, order: int, model_tag: str = "") -> "GaussianStepKernel":
        sol = levinson(cov, order)
        return cls(sol, sol.innovation_variance, model_tag, CovarianceSequence(cov.lags[: order + 1]))

    @classmethod
    def from_model(cls, model: SpectralModel, order: int = DEFAULT_WINDOW) -> "GaussianStepKernel":
        if model.family == "white":
            order = min(order, 1)
        cov = covariance_from_spectrum(model, order)
        return cls.from_covariance(cov, order, model.describe())

    def stationary_covariance(self, max_lag: int) -> CovarianceSequence:
        """Lags of the kernel's own stationary regime (the order-L autoregression).

        They agree with the source covariance up to lag L and continue by the
        Yule-Walker recursion beyond it.
        """
        if self.covariance is None:
            raise ValidationError("kernel was built without its source covariance")
        a = self.prediction.coefficients
        c = np.zeros(max(max_lag, a.size) + 1)
        c[: a.size + 1] = self.covariance.lags[: a.size + 1]
        for k in range(a.size + 1, c.size):
            c[k] = a @ c[k - a.size : k][::-1]
        return CovarianceSequence(c[: max_lag + 1])

    def mean(self, path) -> float | np.ndarray:
        """Conditional mean given a path (or a batch of chronological rows)."""
        vals = path.values if isinstance(path, NoisePath) else np.asarray(path, dtype=float)
        if vals.shape[-1] < self.order:
            raise WindowTooShort(f"path window {vals.shape[-1]} shorter than kernel order {self.order}")
        if self.order == 0:
            return 0.0 if vals.ndim == 1 else np.zeros(vals.shape[0])
        recent = vals[..., ::-1][..., : self.order]
        out = recent @ self.prediction.coefficients
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"model": self.model_tag, "sigma2": self.sigma2, "prediction": self.prediction.to_dict()}


# ---------------------------------------------------------------------------
# stationary sampling


def _cholesky_factor(cov: CovarianceSequence, n: int) -> np.ndarray:
    return linalg.cholesky(cov.toeplitz(n - 1), lower=True, check_finite=False)


def sample_stationary_paths(
    model: SpectralModel | CovarianceSequence, length: int, n_paths: int, seed, method: str = "auto"
) -> tuple[np.ndarray, str]:
    """Exact draws of ``N(0, T_n)``, one path per row.

    Uses a Cholesky factor for ``length <= 4096`` and circulant embedding
    above, falling back to Cholesky when the embedding has eigenvalues below
    ``-1e-8 C_0``.  Returns the samples and the method used.
    """
    if isinstance(length, bool) or int(length) != length or length < 1:
        raise ValidationError("length must be a positive integer")
    n = int(length)
    rng = as_generator(seed)
    get_cov = (lambda m: covariance_from_spectrum(model, m)) if isinstance(model, SpectralModel) else None
    if get_cov is None:
        if model.max_lag < n - 1:
            raise ValidationError("covariance sequence too short for the requested length")
        base = model
        get_cov = lambda m: CovarianceSequence(base.lags[: m + 1]) if m <= base.max_lag else None  # noqa: E731
    cov = get_cov(n - 1)
    if not cov.lags[0] > 0:
        raise ValidationError("degenerate noise: C_0 must be positive")
    use_chol = method == "cholesky" or (method == "auto" and n <= CHOLESKY_MAX)
    if not use_chol:
        size = max(2 * (n - 1), 1)
        for attempt in range(3):
            c = cov.lags if attempt == 0 else get_cov(size // 2)
            if c is None:
                break
            c = c.lags if isinstance(c, CovarianceSequence) else c
            half = size // 2
            emb = np.concatenate([c[: half + 1], c[1:half][::-1]]) if size > 1 else c[:1]
            lam = np.fft.fft(emb).real
            if lam.min() >= -_EMBED_TOL * c[0]:
                lam = np.clip(lam, 0.0, None)
                z = rng.standard_normal((n_paths, size)) + 1j * rng.standard_normal((n_paths, size))
                y = np.fft.fft(np.sqrt(lam / size) * z, axis=-1)
                return y.real[:, :n], "circulant"
            size = 1 << int(np.ceil(np.log2(2 * size)))
        if n > _CHOLESKY_FALLBACK_MAX:
            raise EmbeddingFailure(f"circulant embedding is not non-negative and length {n} is too long for Cholesky")
    try:
        factor = _cholesky_factor(cov, n)
    except linalg.LinAlgError as exc:
        raise EmbeddingFailure("Toeplitz covariance is not positive definite") from exc
    z = rng.standard_normal((n_paths, n))
    return z @ factor.T, "cholesky"


def sample_stationary(model: SpectralModel, length: int, seed, method: str = "auto") -> NoisePath:
    """One exact stationary path of the given length."""
    vals, _ = sample_stationary_paths(model, length, 1, seed, method)
    tag = model.describe() if isinstance(model, SpectralModel) else ""
    return NoisePath(vals[0], tag)


# ---------------------------------------------------------------------------
# stepping


def step(kernel: GaussianStepKernel, path: NoisePath, seed) -> NoisePath:
    """Draw ``w_1`` from the kernel and return the shifted, extended path."""
    if path.window < kernel.order:
        raise WindowTooShort(f"path window {path.window} shorter than kernel order {kernel.order}")
    rng = as_generator(seed)
    w1 = kernel.mean(path) + kernel.sigma * rng.standard_normal()
    return path.concat_shift([w1])


def _filter_state(coef: np.ndarray, recent: np.ndarray) -> np.ndarray:
    # lfilter state for y_t = sum_i a_i y_{t-i} + x_t given y_{-1}, y_{-2}, ... (rows)
    order = coef.size
    zi = np.empty(recent.shape[:-1] + (order,))
    for m in range(order):
        zi[..., m] = recent[..., : order - m] @ coef[m:]
    return zi


def iterate(kernel: GaussianStepKernel, past, n_steps: int, seed=None, innovations=None) -> np.ndarray:
    """Run the kernel forward ``n_steps`` times.

    Parameters
    ----------
    past : NoisePath or array
        Chronological noise past; a 2-D array gives one path per row.
    innovations : array, optional
        Standard normal draws of shape ``(..., n_steps)``; drawn from ``seed``
        when omitted.

    Returns
    -------
    ndarray
        The new values ``w_1..w_T`` (per row for batched input).
    """
    vals = past.values if isinstance(past, NoisePath) else np.asarray(past, dtype=float)
    if vals.shape[-1] < kernel.order:
        raise WindowTooShort(f"path window {vals.shape[-1]} shorter than kernel order {kernel.order}")
    if innovations is None:
        rng = as_generator(seed)
        innovations = rng.standard_normal(vals.shape[:-1] + (int(n_steps),))
    x = kernel.sigma * np.asarray(innovations, dtype=float)
    if kernel.order == 0:
        return x
    a = kernel.prediction.coefficients
    recent = vals[..., ::-1][..., : kernel.order]
    zi = _filter_state(a, recent)
    den = np.concatenate([[1.0], -a])
    out, _ = signal.lfilter([1.0], den, x, axis=-1, zi=zi)
    return out


# ---------------------------------------------------------------------------
# coupling


def tv_gaussian(mean1, mean2, sigma2) -> float | np.ndarray:
    """Total variation between ``N(mean1, sigma2)`` and ``N(mean2, sigma2)``.

    ``1 - 2 Phi(-|mean1 - mean2| / (2 sigma))``.
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(~(sigma2 > 0)):
        raise ValidationError("sigma2 must be positive")
    u = np.abs(np.asarray(mean1, dtype=float) - np.asarray(mean2, dtype=float)) / (2.0 * np.sqrt(2.0 * sigma2))
    out = special.erf(u)
    return float(out) if np.ndim(out) == 0 else out


def _overlap_mass(shift, sigma) -> float:
    return float(special.erfc(abs(shift) / (2.0 * np.sqrt(2.0) * sigma)))


@dataclass(frozen=True)
class SubcouplingSpec:
    """Shift subcoupling of ``N(m, sigma^2)`` with itself.

    The coupled pair is ``(z, z + shift)`` with ``z`` distributed according to
    ``min{D(z), D(z + shift)}`` restricted to ``B(x, r)``, where ``D`` is the
    one-step density.  ``mass`` is the unrestricted overlap
    ``2 Phi(-|shift| / (2 sigma))``; ``restricted_mass`` is the total mass of
    the coupling actually sampled.
    """

    x: float
    y: float
    radius: float
    shift: float
    mean: float
    sigma: float
    mass: float
    restricted_mass: float

    def density(self, z) -> np.ndarray:
        """``min{D(z), D(z + shift)}`` (unrestricted)."""
        z = np.asarray(z, dtype=float)
        d0 = stats.norm.pdf(z, self.mean, self.sigma)
        d1 = stats.norm.pdf(z + self.shift, self.mean, self.sigma)
        return np.minimum(d0, d1)

    def _pieces(self):
        # min-density = N(mean) on one side of c, N(mean - shift) on the other
        m, d, s = self.mean, self.shift, self.sigma
        lo, hi = self.x - self.radius, self.x + self.radius
        c = m - d / 2.0
        if d >= 0:
            parts = [(m, lo, min(hi, c)), (m - d, max(lo, c), hi)]
        else:
            parts = [(m - d, lo, min(hi, c)), (m, max(lo, c), hi)]
        out = []
        for loc, a, b in parts:
            mass = stats.norm.cdf(b, loc, s) - stats.norm.cdf(a, loc, s) if b > a else 0.0
            out.append((loc, a, b, max(float(mass), 0.0)))
        return out

    def sample(self, n: int, seed) -> np.ndarray:
        """``(n, 2)`` pairs from the normalised restricted coupling; column 2 = column 1 + shift."""
        rng = as_generator(seed)
        if self.shift == 0.0:
            parts = [(self.mean, self.x - self.radius, self.x + self.radius, 1.0)]
        else:
            parts = self._pieces()
        masses = np.array([p[3] for p in parts])
        if masses.sum() <= 0:
            raise ValidationError("restricted subcoupling has zero mass")
        which = rng.choice(len(parts), size=int(n), p=masses / masses.sum())
        z = np.empty(int(n))
        for i, (loc, a, b, _) in enumerate(parts):
            sel = which == i
            k = int(sel.sum())
            if k:
                z[sel] = stats.truncnorm.rvs(
                    (a - loc) / self.sigma, (b - loc) / self.sigma, loc=loc, scale=self.sigma,
                    size=k, random_state=rng,
                )
        return np.column_stack([z, z + self.shift])

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "radius": self.radius,
            "shift": self.shift,
            "mean": self.mean,
            "sigma": self.sigma,
            "mass": self.mass,
            "restricted_mass": self.restricted_mass,
        }


def _check_interval(iv, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in iv)
    except (TypeError, ValueError) as exc:
        raise EmptyInterval(f"{name} must be an interval (lo, hi)") from exc
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise EmptyInterval(f"{name} = ({lo}, {hi}) is empty")
    return lo, hi


def gaussian_subcoupling(mean: float, sigma2: float, U: Sequence[float], V: Sequence[float]) -> SubcouplingSpec:
    """Shift subcoupling for the one-step law ``N(mean, sigma2)`` between intervals U and V."""
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    u0, u1 = _check_interval(U, "U")
    v0, v1 = _check_interval(V, "V")
    x, y = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    r = min(0.5 * (u1 - u0), 0.5 * (v1 - v0))
    sigma = float(np.sqrt(sigma2))
    d = y - x
    spec = SubcouplingSpec(x, y, r, d, float(mean), sigma, _overlap_mass(d, sigma), 0.0)
    if d == 0.0:
        rest = float(stats.norm.cdf(x + r, mean, sigma) - stats.norm.cdf(x - r, mean, sigma))
    else:
        rest = float(sum(p[3] for p in spec._pieces()))
    return SubcouplingSpec(x, y, r, d, float(mean), sigma, spec.mass, rest)


def subcoupling(kernel: GaussianStepKernel, path: NoisePath, U, V) -> SubcouplingSpec:
    """Subcoupling of the one-step kernel at ``path`` restricted to U and V."""
    return gaussian_subcoupling(float(kernel.mean(path)), kernel.sigma2, U, V)
