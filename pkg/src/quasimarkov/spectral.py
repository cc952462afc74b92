"""Spectral measures of stationary Gaussian sequences and their classification.

Convention: the covariance of a stationary sequence with spectral measure
``mu`` on [-pi, pi] is

    C_n = (1/2pi) * int e^{inx} mu(dx).

A :class:`SpectralModel` is an absolutely continuous part ``f(x) dx`` plus an
optional list of symmetric atoms.  All integrals of even functions are taken
over [0, pi] and doubled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from ._polylog import power_law_density
from .errors import (
    Inconclusive,
    NonIntegrableDensity,
    NumericFailure,
    QuadratureFailure,
    ValidationError,
)
from .quadrature import (
    CONVERGENT,
    DEFAULT_LEVELS,
    DIVERGENT,
    RefinementRule,
    integrate,
)

__all__ = [
    "Trilean",
    "SpectralModel",
    "CovarianceSequence",
    "NoiseClassification",
    "LevelTrace",
    "covariance_from_spectrum",
    "szego_variance",
    "quasi_markov_test",
    "off_white_test",
    "classify",
    "interpolation_variance",
    "FAMILIES",
]

FAMILIES = ("white", "ar1", "ma1", "power_law", "custom")

_CHUNK = 1 << 18
_SYM_TOL = 1e-12
_SAMPLE_POINTS = 1 << 14
LOG_FLOOR = -50.0


class Trilean(str, Enum):
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class SpectralModel:
    """Spectral measure ``f(x) dx + atoms`` on [-pi, pi].

    Use the constructors :meth:`white`, :meth:`ar1`, :meth:`ma1`,
    :meth:`power_law` and :meth:`custom` rather than instantiating directly.

    Attributes
    ----------
    family : str
        One of ``white``, ``ar1``, ``ma1``, ``power_law``, ``custom``.
    scale : float
        Positive multiplier applied to the base density.
    alpha, beta : float or None
        Family parameters (AR(1) coefficient; power-law exponent).
    table_x, table_f : tuple of float
        Uniform grid on [-pi, pi] and density samples (custom family only).
    declared_singular : tuple of float
        Extra points where f vanishes or blows up (custom family).
    atoms : tuple of (location, mass)
        Point masses of the singular part; must be symmetric under x -> -x.
    """

    family: str
    scale: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    table_x: tuple[float, ...] | None = None
    table_f: tuple[float, ...] | None = None
    declared_singular: tuple[float, ...] = ()
    atoms: tuple[tuple[float, float], ...] = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    # -- construction -----------------------------------------------------
    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown spectral family {self.family!r}; expected one of {FAMILIES}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValidationError("scale must be a positive finite number")
        if self.family == "ar1":
            if self.alpha is None or not (-1.0 < self.alpha < 1.0):
                raise ValidationError("ar1 requires |alpha| < 1")
        if self.family == "power_law":
            if self.beta is None or not (0.5 < self.beta <= 1.0):
                raise ValidationError("power_law requires 1/2 < beta <= 1")
        if self.family == "custom":
            self._validate_table()
        for s in self.declared_singular:
            if not (-np.pi - 1e-12 <= s <= np.pi + 1e-12):
                raise ValidationError("singular points must lie in [-pi, pi]")
        self._validate_atoms()

    def _validate_table(self):
        if self.table_x is None or self.table_f is None:
            raise ValidationError("custom density needs table_x and table_f")
        x = np.asarray(self.table_x)
        f = np.asarray(self.table_f)
        if x.shape != f.shape or x.size < 3:
            raise ValidationError("custom table needs matching x and f arrays with at least 3 samples")
        if abs(x[0] + np.pi) > 1e-9 or abs(x[-1] - np.pi) > 1e-9:
            raise ValidationError("custom table grid must span [-pi, pi]")
        dx = np.diff(x)
        if np.any(dx <= 0) or np.ptp(dx) > 1e-9 * np.mean(dx) + 1e-12:
            raise ValidationError("custom table grid must be uniform and increasing")
        if np.any(~np.isfinite(f)) or np.any(f < 0):
            raise ValidationError("custom density samples must be finite and non-negative")
        if np.max(np.abs(f - f[::-1])) > _SYM_TOL * max(1.0, float(np.max(f))):
            raise ValidationError("custom density must be even: f(-x) = f(x)")
        if not np.any(f > 0):
            raise ValidationError("custom density is identically zero")

    def _validate_atoms(self):
        atoms = list(self.atoms)
        for loc, mass in atoms:
            if not (-np.pi - 1e-12 <= loc <= np.pi + 1e-12):
                raise ValidationError("atom locations must lie in [-pi, pi]")
            if not (mass >= 0 and np.isfinite(mass)):
                raise ValidationError("atom masses must be non-negative")
        for loc, mass in atoms:
            if abs(abs(loc) - np.pi) < 1e-12 or loc == 0.0:
                continue
            if not any(abs(l2 + loc) < 1e-12 and abs(m2 - mass) < 1e-12 for l2, m2 in atoms):
                raise ValidationError("atoms must be symmetric: each (x, m) needs a partner (-x, m)")

    @classmethod
    def white(cls, c: float = 1.0) -> "SpectralModel":
        return cls("white", scale=float(c))

    @classmethod
    def ar1(cls, alpha: float, scale: float = 1.0) -> "SpectralModel":
        return cls("ar1", scale=float(scale), alpha=float(alpha))

    @classmethod
    def ma1(cls, scale: float = 1.0) -> "SpectralModel":
        """``f(x) = 2(1 + cos x)``, the law of ``xi_n + xi_{n+1}``."""
        return cls("ma1", scale=float(scale))

    @classmethod
    def power_law(cls, beta: float, scale: float = 1.0) -> "SpectralModel":
        """Law of ``sum_{k>=1} k**-beta xi_{n-k}``; density ``|Li_beta(e^{ix})|**2``."""
        return cls("power_law", scale=float(scale), beta=float(beta))

    @classmethod
    def custom(
        cls, x: Sequence[float], f: Sequence[float], singular_points: Sequence[float] = (), scale: float = 1.0
    ) -> "SpectralModel":
        """Piecewise-linear density through samples on a uniform grid of [-pi, pi].

        Grid knots where the sample is zero are added to the singular points.
        """
        xa = np.asarray(x, dtype=float)
        fa = np.asarray(f, dtype=float)
        extra = list(singular_points)
        if xa.shape == fa.shape:
            extra += list(xa[fa == 0.0])
        return cls(
            "custom",
            scale=float(scale),
            table_x=_as_float_tuple(xa),
            table_f=_as_float_tuple(fa),
            declared_singular=tuple(sorted({float(s) for s in extra})),
        )

    def scaled(self, c: float) -> "SpectralModel":
        """Model for ``c * mu`` (density and atoms scaled by ``c``)."""
        if not (c > 0 and np.isfinite(c)):
            raise ValidationError("scale factor must be positive")
        atoms = tuple((loc, mass * c) for loc, mass in self.atoms)
        return replace(self, scale=self.scale * c, atoms=atoms)

    def with_atoms(self, atoms: Sequence[tuple[float, float]], mirror: bool = False) -> "SpectralModel":
        """Add point masses; with ``mirror`` each (x, m) also adds (-x, m)."""
        out = list(self.atoms)
        for loc, mass in atoms:
            out.append((float(loc), float(mass)))
            if mirror and loc != 0.0 and abs(abs(loc) - np.pi) >= 1e-12:
                out.append((-float(loc), float(mass)))
        return replace(self, atoms=tuple(out))

    # -- evaluation -------------------------------------------------------
    def _base_density(self, x: np.ndarray) -> np.ndarray:
        fam = self.family
        if fam == "white":
            return np.ones_like(x)
        if fam == "ar1":
            a = self.alpha
            return (1.0 - a * a) / (1.0 + a * a - 2.0 * a * np.cos(x))
        if fam == "ma1":
            # 2(1 + cos x) written without cancellation near x = pi
            return 4.0 * np.cos(0.5 * x) ** 2
        if fam == "power_law":
            return power_law_density(self.beta, x)
        return np.interp(x, self._table_x, self._table_f)

    @property
    def _table_x(self) -> np.ndarray:
        if "tx" not in self._cache:
            self._cache["tx"] = np.asarray(self.table_x, dtype=float)
            self._cache["tf"] = np.asarray(self.table_f, dtype=float)
        return self._cache["tx"]

    @property
    def _table_f(self) -> np.ndarray:
        self._table_x
        return self._cache["tf"]

    def density(self, x) -> np.ndarray:
        """Evaluate f at points of [-pi, pi] (vectorised, evaluated in chunks)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        for start in range(0, flat.size, _CHUNK):
            sl = slice(start, start + _CHUNK)
            out[sl] = self._base_density(flat[sl])
        return self.scale * out.reshape(x.shape)

    __call__ = density

    @property
    def singular_points(self) -> tuple[float, ...]:
        """Points in [-pi, pi] where f vanishes or is unbounded (symmetric)."""
        pts = set()
        if self.family == "ma1":
            pts |= {-np.pi, np.pi}
        elif self.family == "power_law":
            pts.add(0.0)
        for s in self.declared_singular:
            pts |= {float(s), -float(s)}
        return tuple(sorted(pts))

    @property
    def half_singular_points(self) -> tuple[float, ...]:
        """Singular points folded onto [0, pi]."""
        return tuple(sorted({abs(s) for s in self.singular_points}))

    @property
    def has_poles(self) -> bool:
        """True when the density is unbounded near some point."""
        if self.family == "power_law":
            return True
        return False

    def singular_orders(self) -> dict[float, float]:
        """Exponent ``g`` with ``log f(x) ~ g log|x - s|`` at each point of [0, pi].

        Exact for the builtin families; estimated from the local log-log slope
        for custom densities (rounded to 0 when below 0.05 in magnitude).
        """
        if "orders" in self._cache:
            return self._cache["orders"]
        orders: dict[float, float] = {}
        if self.family == "ma1":
            orders[np.pi] = 2.0
        elif self.family == "power_law":
            orders[0.0] = 2.0 * self.beta - 2.0
        for s in self.half_singular_points:
            if s in orders:
                continue
            sign = 1.0 if s < np.pi else -1.0
            h1, h2 = 1e-4, 1e-6
            f1, f2 = self.density(np.array([s + sign * h1, s + sign * h2]))
            if f1 > 0 and f2 > 0:
                g = (math.log(f1) - math.log(f2)) / (math.log(h1) - math.log(h2))
                orders[s] = 0.0 if abs(g) < 0.05 else g
            else:
                orders[s] = 0.0
        self._cache["orders"] = orders
        return orders

    # -- serialization ----------------------------------------------------
    def to_config(self) -> dict[str, Any]:
        cfg: dict[str, Any] = {"family": self.family, "scale": self.scale}
        if self.alpha is not None:
            cfg["alpha"] = self.alpha
        if self.beta is not None:
            cfg["beta"] = self.beta
        if self.family == "custom":
            cfg["table"] = {"x": list(self.table_x), "f": list(self.table_f)}
            cfg["singular_points"] = list(self.declared_singular)
        if self.atoms:
            cfg["atoms"] = [list(a) for a in self.atoms]
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "SpectralModel":
        if not isinstance(cfg, Mapping):
            raise ValidationError("model spec must be a JSON object")
        known = {"family", "scale", "alpha", "beta", "table", "singular_points", "atoms", "c"}
        unknown = set(cfg) - known
        if unknown:
            raise ValidationError(f"unknown model fields: {sorted(unknown)}")
        fam = cfg.get("family")
        try:
            scale = float(cfg.get("scale", cfg.get("c", 1.0)))
            if fam == "white":
                model = cls.white(scale)
            elif fam == "ar1":
                if "alpha" not in cfg:
                    raise ValidationError("ar1 model needs 'alpha'")
                model = cls.ar1(float(cfg["alpha"]), scale)
            elif fam == "ma1":
                model = cls.ma1(scale)
            elif fam == "power_law":
                if "beta" not in cfg:
                    raise ValidationError("power_law model needs 'beta'")
                model = cls.power_law(float(cfg["beta"]), scale)
            elif fam == "custom":
                table = cfg.get("table")
                if not isinstance(table, Mapping) or "x" not in table or "f" not in table:
                    raise ValidationError("custom model needs table {'x': [...], 'f': [...]}")
                model = cls.custom(table["x"], table["f"], cfg.get("singular_points", ()), scale)
            else:
                raise ValidationError(f"unknown spectral family {fam!r}")
            atoms = cfg.get("atoms", ())
            if atoms:
                model = model.with_atoms([(float(a[0]), float(a[1])) for a in atoms])
        except (TypeError, IndexError) as exc:
            raise ValidationError(f"malformed model spec: {exc}") from exc
        return model

    def describe(self) -> str:
        if self.family == "ar1":
            core = f"ar1(alpha={self.alpha:g})"
        elif self.family == "power_law":
            core = f"power_law(beta={self.beta:g})"
        else:
            core = self.family
        if self.scale != 1.0:
            core = f"{self.scale:g}*{core}"
        return core + (f" + {len(self.atoms)} atoms" if self.atoms else "")


# ---------------------------------------------------------------------------
# covariance


@dataclass(frozen=True, eq=False)
class CovarianceSequence:
    """Lags ``C_0..C_N`` of a stationary sequence."""

    lags: np.ndarray

    def __post_init__(self):
        c = np.array(self.lags, dtype=float).ravel()
        if c.size == 0:
            raise ValidationError("covariance sequence needs at least C_0")
        if np.any(~np.isfinite(c)):
            raise ValidationError("covariance lags must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "lags", c)

    @property
    def max_lag(self) -> int:
        return self.lags.size - 1

    def __len__(self) -> int:
        return self.lags.size

    def __getitem__(self, n):
        return self.lags[n]

    def toeplitz(self, order: int | None = None) -> np.ndarray:
        """``(order + 1) x (order + 1)`` symmetric Toeplitz matrix ``[C_|i-j|]``."""
        from scipy.linalg import toeplitz

        m = self.max_lag if order is None else int(order)
        if m > self.max_lag:
            raise ValidationError(f"order {m} exceeds max_lag {self.max_lag}")
        return toeplitz(self.lags[: m + 1])

    def is_positive_semidefinite(self, order: int | None = None, rtol: float = 1e-8) -> bool:
        m = min(self.max_lag, 64) if order is None else int(order)
        eig = np.linalg.eigvalsh(self.toeplitz(m))
        return bool(eig.min() >= -rtol * abs(self.lags[0]))

    def to_dict(self) -> dict:
        return {"max_lag": self.max_lag, "lags": self.lags.tolist()}


def _atom_covariance(model: SpectralModel, n: np.ndarray) -> np.ndarray:
    out = np.zeros(n.shape)
    for loc, mass in model.atoms:
        out += mass * np.cos(n * loc) / (2.0 * np.pi)
    return out


def _cov_table(model: SpectralModel, max_lag: int) -> np.ndarray:
    # exact integral of the piecewise-linear interpolant against cos(nx) on [0, pi]
    x = model._table_x
    f = model._table_f
    keep = x >= -1e-12
    x, f = np.maximum(x[keep], 0.0), f[keep]
    if x[0] > 0:
        x = np.concatenate([[0.0], x])
        f = np.concatenate([[float(model._base_density(np.array([0.0]))[0])], f])
    x0, x1, f0, f1 = x[:-1], x[1:], f[:-1], f[1:]
    slope = (f1 - f0) / (x1 - x0)
    out = np.empty(max_lag + 1)
    out[0] = np.sum(0.5 * (f0 + f1) * (x1 - x0))
    for start in range(1, max_lag + 1, 256):
        n = np.arange(start, min(start + 256, max_lag + 1), dtype=float)[:, None]
        # int (f0 + s (t - x0)) cos(n t) dt
        prim1 = f1 * np.sin(n * x1) / n + slope * np.cos(n * x1) / n**2
        prim0 = f0 * np.sin(n * x0) / n + slope * np.cos(n * x0) / n**2
        out[start : start + n.shape[0]] = np.sum(prim1 - prim0, axis=1)
    return model.scale * out / np.pi


def _cov_periodic(model: SpectralModel, max_lag: int, tol: float) -> np.ndarray | None:
    # periodic trapezoid rule: exponentially convergent for smooth periodic f
    m = 64
    while m < 4 * (max_lag + 1):
        m *= 2
    prev = None
    while m <= 1 << 22:
        x = 2.0 * np.pi * np.arange(m) / m
        x = np.where(x > np.pi, x - 2.0 * np.pi, x)
        c = np.fft.rfft(model.density(x)).real[: max_lag + 1] / m
        if prev is not None and np.max(np.abs(c - prev[: max_lag + 1])) <= 0.1 * tol:
            return c
        prev = c
        m *= 2
    return None


def _cosine_moments(g: np.ndarray, x: np.ndarray, max_lag: int) -> np.ndarray:
    # sum_j g_j cos(n x_j) for n = 0..max_lag by the Chebyshev recurrence
    out = np.empty(max_lag + 1)
    c_prev = np.ones_like(x)
    out[0] = g.sum()
    if max_lag == 0:
        return out
    c_cur = np.cos(x)
    two_cos = 2.0 * c_cur
    out[1] = g @ c_cur
    for n in range(2, max_lag + 1):
        c_prev, c_cur = c_cur, two_cos * c_cur - c_prev
        out[n] = g @ c_cur
    return out


def _cov_adaptive(model: SpectralModel, max_lag: int, tol: float) -> np.ndarray:
    half_sing = model.half_singular_points
    probe = np.unique(np.linspace(0, max_lag, min(max_lag + 1, 9)).round().astype(int))
    width = min(np.pi / 2, 1.0 / (max_lag + 1))

    def integrand(x):
        return model.density(x)[None, :] * np.cos(np.outer(probe, x))

    res = integrate(
        integrand, 0.0, np.pi, singular_points=half_sing, cap_width=width,
        max_width=4.0 * np.pi / (max_lag + 1), tol=min(1e-12, tol),
    )
    if not res.converged or not np.all(np.isfinite(res.value)):
        raise NonIntegrableDensity(
            f"adaptive quadrature for the covariance of {model.describe()} did not converge"
        )
    if max_lag < 16:
        full = np.empty(max_lag + 1)
        full[probe] = res.value
        if probe.size == max_lag + 1:
            return full / np.pi
    # reuse the refined rule for every lag; cross-check on the probe lags
    x, w = res.nodes, res.weights
    out = _cosine_moments(model.density(x) * w, x, max_lag)
    if np.max(np.abs(out[probe] - res.value)) > tol * np.pi:
        raise NonIntegrableDensity("composite covariance rule disagrees with the adaptive probe lags")
    return out / np.pi


def covariance_from_spectrum(model: SpectralModel, max_lag: int, tol: float = 1e-10) -> CovarianceSequence:
    """Covariance lags ``C_0..C_max_lag`` of the spectral model.

    Parameters
    ----------
    model : SpectralModel
    max_lag : int
        Largest lag N >= 0.
    tol : float
        Absolute accuracy target per lag.

    Raises
    ------
    NonIntegrableDensity
        If the adaptive quadrature does not converge.
    """
    if isinstance(max_lag, bool) or int(max_lag) != max_lag or max_lag < 0:
        raise ValidationError("max_lag must be a non-negative integer")
    max_lag = int(max_lag)
    key = ("cov", max_lag, tol)
    if key in model._cache:
        return model._cache[key]
    n = np.arange(max_lag + 1)
    if model.family == "white":
        dens = np.where(n == 0, model.scale, 0.0)
    elif model.family == "custom":
        dens = _cov_table(model, max_lag)
    else:
        dens = None
        if not model.has_poles:
            dens = _cov_periodic(model, max_lag, tol)
        if dens is None:
            dens = _cov_adaptive(model, max_lag, tol)
    cov = CovarianceSequence(dens + _atom_covariance(model, n))
    model._cache[key] = cov
    return cov


# ---------------------------------------------------------------------------
# level-set traces


@dataclass
class LevelTrace:
    """Partial quantities computed on {f > eps_k} for eps_k = 2**-k."""

    levels: list[int]
    values: list[float]
    verdict: str = "inconclusive"
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "values": [float(v) for v in self.values],
            "verdict": self.verdict,
            "reason": self.reason,
        }


def _sample_grid(model: SpectralModel) -> tuple[np.ndarray, np.ndarray]:
    if "grid" not in model._cache:
        x = np.linspace(0.0, np.pi, _SAMPLE_POINTS + 1)
        x = np.unique(np.concatenate([x, model.half_singular_points]))
        with np.errstate(all="ignore"):
            f = model.density(x)
        model._cache["grid"] = (x, f)
    return model._cache["grid"]


def _bisect_boundary(model: SpectralModel, lo: np.ndarray, hi: np.ndarray, eps: float, lo_bad: np.ndarray):
    # lo/hi bracket a crossing of f = eps; lo_bad says which side is in {f <= eps}
    lo, hi = lo.copy(), hi.copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        with np.errstate(all="ignore"):
            bad_mid = model.density(mid) <= eps
        move_lo = bad_mid == lo_bad
        lo = np.where(move_lo, mid, lo)
        hi = np.where(move_lo, hi, mid)
    return 0.5 * (lo + hi)


def _sublevel_set(model: SpectralModel, eps: float) -> list[tuple[float, float]]:
    """Intervals of [0, pi] where f <= eps, located by sampling and bisection."""
    x, f = _sample_grid(model)
    bad = f <= eps
    if not bad.any():
        return []
    change = np.nonzero(bad[1:] != bad[:-1])[0]
    edges = np.empty(0)
    if change.size:
        edges = _bisect_boundary(model, x[change], x[change + 1], eps, bad[change])
    cuts = [0.0] + list(edges) + [np.pi]
    # segment i between cuts[i] and cuts[i+1] is bad iff the first sample in it is bad
    starts = np.concatenate([[0], change + 1])
    out = []
    for i, j in enumerate(starts):
        if bad[j]:
            out.append((float(cuts[i]), float(cuts[i + 1])))
    return out


def _complement(intervals, lo=0.0, hi=np.pi):
    out = []
    cur = lo
    for a, b in intervals:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if cur < hi:
        out.append((cur, hi))
    return out


def _integrate_over(model: SpectralModel, func, intervals, what: str) -> float:
    total = 0.0
    for a, b in intervals:
        if b - a <= 0:
            continue
        sing = [s for s in model.half_singular_points if a <= s <= b]
        res = integrate(func, a, b, singular_points=sing)
        if not res.converged:
            raise QuadratureFailure(f"quadrature of {what} on [{a:.6g}, {b:.6g}] did not converge")
        total += float(res.value)
    return total


def _safe_log(f):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(f)


def _safe_reciprocal(f):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(np.isinf(f), 0.0, 1.0 / f)


# ---------------------------------------------------------------------------
# Szego variance


def _log_integral(model: SpectralModel) -> float:
    """(1/2pi) int log f over the whole circle, by singular-aware quadrature."""
    res = integrate(lambda x: _safe_log(model.density(x)), 0.0, np.pi, singular_points=model.half_singular_points)
    if not res.converged or not np.isfinite(res.value):
        if np.isfinite(res.value) or res.value == -np.inf:
            raise QuadratureFailure(f"log-density quadrature for {model.describe()} did not converge")
    return float(res.value) / np.pi


def szego_trace(model: SpectralModel, levels=DEFAULT_LEVELS, rule: RefinementRule | None = None) -> LevelTrace:
    """Truncated log-integrals ``(1/2pi) int log max(f, eps_k)``."""
    rule = rule or RefinementRule()
    key = ("szego_trace", tuple(levels), rule)
    if key in model._cache:
        return model._cache[key]
    values = []
    full = None
    for k in levels:
        eps = 2.0 ** -k
        bad = _sublevel_set(model, eps)
        if not bad:
            if full is None:
                full = _log_integral(model)
            values.append(full)
            continue
        good = _complement(bad)
        part = _integrate_over(model, lambda x: _safe_log(model.density(x)), good, "log f")
        measure = sum(b - a for a, b in bad)
        values.append((part + measure * math.log(eps)) / np.pi)
    verdict, reason = rule.assess(values)
    trace = LevelTrace(list(levels), values, verdict, reason)
    model._cache[key] = trace
    return trace


def szego_variance(model: SpectralModel, *, return_trace: bool = False):
    """One-step prediction variance ``exp((1/2pi) int log f)``.

    Atoms are ignored.  The truncated trace of :func:`szego_trace` is used to
    detect a log-integral diverging to -inf (returning 0); otherwise the value
    comes from a direct quadrature that resolves the singular points.  Values
    below ``exp(-50)`` are reported as 0.

    Raises
    ------
    QuadratureFailure
        If the direct quadrature does not converge.
    """
    trace = szego_trace(model)
    if trace.verdict == DIVERGENT or min(trace.values) < LOG_FLOOR:
        value = 0.0
    else:
        log_int = _log_integral(model)
        value = 0.0 if log_int < LOG_FLOOR else math.exp(log_int)
    return (value, trace) if return_trace else value


# ---------------------------------------------------------------------------
# quasi-Markov test


@dataclass
class QuasiMarkovResult:
    verdict: Trilean
    reciprocal_integral: float | None
    trace: LevelTrace
    excluded_measure: LevelTrace
    reason: str

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reciprocal_integral": self.reciprocal_integral,
            "trace": self.trace.to_dict(),
            "excluded_measure": self.excluded_measure.to_dict(),
            "reason": self.reason,
        }


def quasi_markov_test(
    model: SpectralModel, levels=DEFAULT_LEVELS, rule: RefinementRule | None = None
) -> QuasiMarkovResult:
    """Decide whether f > 0 a.e. and ``int 1/f < inf``.

    The partial integrals ``(1/2pi) int_{f > eps_k} 1/f`` and the measure of
    ``{f <= eps_k}`` are traced over the refinement levels; ``reciprocal_integral``
    carries ``(1/2pi) int 1/f`` when the verdict is yes.
    """
    rule = rule or RefinementRule()
    key = ("qm", tuple(levels), rule)
    if key in model._cache:
        return model._cache[key]
    values, measures = [], []
    failure = None
    for k in levels:
        eps = 2.0 ** -k
        bad = _sublevel_set(model, eps)
        try:
            part = _integrate_over(model, lambda x: _safe_reciprocal(model.density(x)), _complement(bad), "1/f")
        except NumericFailure as exc:
            failure = str(exc)
            break
        values.append(part / np.pi)
        measures.append(sum(b - a for a, b in bad) / np.pi)
    lv = list(levels)[: len(values)]
    verdict, reason = rule.assess(values) if failure is None else ("inconclusive", failure)
    trace = LevelTrace(lv, values, verdict, reason)
    m_verdict, m_reason = rule.assess(measures)
    mtrace = LevelTrace(lv, measures, m_verdict, m_reason)
    recip = None
    if measures and m_verdict == CONVERGENT and measures[-1] > 1e-9:
        out = Trilean.NO
        why = "density vanishes on a set of positive measure"
    elif verdict == DIVERGENT:
        out = Trilean.NO
        why = "partial integrals of 1/f diverge: " + reason
    elif verdict == CONVERGENT:
        out = Trilean.YES
        why = "partial integrals of 1/f converge: " + reason
        recip = values[-1]
        try:
            direct = _integrate_over(model, lambda x: _safe_reciprocal(model.density(x)), [(0.0, np.pi)], "1/f")
            if np.isfinite(direct) and abs(direct / np.pi - recip) <= 1e-3 * abs(recip):
                recip = direct / np.pi
        except NumericFailure:
            pass
    else:
        out = Trilean.INCONCLUSIVE
        why = reason
    result = QuasiMarkovResult(out, recip, trace, mtrace, why)
    model._cache[key] = result
    return result


def interpolation_variance(model: SpectralModel) -> float:
    """Two-sided interpolation error variance ``((1/2pi) int 1/f)**-1``.

    Returns 0 when the integral diverges (W_0 is then a limit of its
    neighbours).

    Raises
    ------
    Inconclusive
        If the quasi-Markov refinement rule cannot decide.
    """
    qm = quasi_markov_test(model)
    if qm.verdict == Trilean.YES:
        return 1.0 / qm.reciprocal_integral
    if qm.verdict == Trilean.NO:
        return 0.0
    raise Inconclusive("cannot decide integrability of 1/f: " + qm.reason)


# ---------------------------------------------------------------------------
# off-white test


def log_density_fourier(model: SpectralModel, n_max: int, oversample: int = 8) -> np.ndarray:
    """Fourier coefficients ``(1/2pi) int log f(x) e^{-inx} dx`` for n = 0..n_max.

    Logarithmic singularities ``g log|x - s|`` at singular points are removed
    before the FFT and their coefficients ``-g e^{-ins} / (2|n|)`` added back
    exactly; the smooth remainder is sampled on a midpoint grid with
    ``oversample * n_max`` points (power of two).
    """
    m = 1 << 12
    while m < oversample * max(int(n_max), 1):
        m *= 2
    h = 2.0 * np.pi / m
    half = (np.arange(m // 2) + 0.5) * h  # positive half of the symmetric grid
    orders = {s: g for s, g in model.singular_orders().items() if g != 0.0}
    psi_half = np.empty(half.size)
    for start in range(0, half.size, _CHUNK):
        xs = half[start : start + _CHUNK]
        val = _safe_log(model.density(xs))
        for s, g in orders.items():
            val -= g * _safe_log(np.abs(2.0 * np.sin(0.5 * (xs - s))))
            if 0.0 < s < np.pi:
                val -= g * _safe_log(np.abs(2.0 * np.sin(0.5 * (xs + s))))
        psi_half[start : start + _CHUNK] = val
    if not np.all(np.isfinite(psi_half)):
        raise QuadratureFailure("log-density is not finite on the Fourier grid")
    psi = np.concatenate([psi_half[::-1], psi_half])  # grid x_j = -pi + (j + 1/2) h
    n = np.arange(n_max + 1)
    c = np.fft.rfft(psi)[: n_max + 1] / m
    c = (c * np.exp(1j * n * (np.pi - 0.5 * h))).real
    nn = np.maximum(n[1:], 1).astype(float)
    for s, g in orders.items():
        if 0.0 < s < np.pi:
            c[1:] += -g * np.cos(nn * s) / nn
        else:
            c[1:] += -g * np.cos(nn * s) / (2.0 * nn)
    return c


@dataclass
class OffWhiteResult:
    verdict: Trilean
    trace: LevelTrace
    reason: str

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "trace": self.trace.to_dict(), "reason": self.reason}


def off_white_test(
    model: SpectralModel, cutoffs: Sequence[int] | None = None, rule: RefinementRule | None = None
) -> OffWhiteResult:
    """Test ``log f`` for finite ``H^{1/2}`` seminorm.

    Computes ``s_N = sum_{|n| <= N} |n| |phi_n|**2`` with ``phi = log f`` at each
    cutoff N (default ``2**4 .. 2**20``) and applies the refinement rule.
    """
    rule = rule or RefinementRule()
    cutoffs = [2**k for k in DEFAULT_LEVELS] if cutoffs is None else sorted(int(c) for c in cutoffs)
    if not cutoffs or cutoffs[0] < 1:
        raise ValidationError("cutoffs must be positive integers")
    key = ("ow", tuple(cutoffs), rule)
    if key in model._cache:
        return model._cache[key]
    empty = LevelTrace(list(cutoffs), [], "inconclusive", "")
    if model.atoms:
        result = OffWhiteResult(Trilean.NO, empty, "spectral measure has atoms")
    else:
        x, f = _sample_grid(model)
        zero_frac = float(np.mean(f <= 0))
        if zero_frac > 2.0 / x.size:
            result = OffWhiteResult(Trilean.NO, empty, "density vanishes on a set of positive measure")
        else:
            try:
                c = log_density_fourier(model, cutoffs[-1])
                n = np.arange(c.size)
                partial = np.cumsum(2.0 * n * c**2)
                values = [float(partial[N]) for N in cutoffs]
                verdict, reason = rule.assess(values)
                trace = LevelTrace(list(cutoffs), values, verdict, reason)
                if verdict == CONVERGENT:
                    result = OffWhiteResult(Trilean.YES, trace, "seminorm stabilises: " + reason)
                elif verdict == DIVERGENT:
                    result = OffWhiteResult(Trilean.NO, trace, "seminorm diverges: " + reason)
                else:
                    result = OffWhiteResult(Trilean.INCONCLUSIVE, trace, reason)
            except NumericFailure as exc:
                result = OffWhiteResult(Trilean.INCONCLUSIVE, empty, str(exc))
    model._cache[key] = result
    return result


# ---------------------------------------------------------------------------
# classification


@dataclass
class NoiseClassification:
    ergodic: bool
    sigma2: float | None
    degenerate: bool | None
    quasi_markov: Trilean
    off_white: Trilean
    diagnostics: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ergodic": self.ergodic,
            "sigma2": self.sigma2,
            "degenerate": self.degenerate,
            "quasi_markov": self.quasi_markov.value,
            "off_white": self.off_white.value,
            "reasons": dict(self.reasons),
            "diagnostics": self.diagnostics,
        }


def classify(model: SpectralModel, off_white_cutoffs: Sequence[int] | None = None) -> NoiseClassification:
    """Ergodicity, Szego variance, quasi-Markov and off-white verdicts.

    Ergodicity is read from the declared atoms (no atoms means ergodic).
    Numeric failures become inconclusive entries with a reason.
    """
    reasons: dict[str, str] = {}
    diagnostics: dict[str, Any] = {"model": model.to_config()}
    ergodic = not any(mass > 0 for _, mass in model.atoms)
    reasons["ergodic"] = "no atoms declared" if ergodic else "spectral measure has atoms"

    sigma2: float | None
    try:
        sigma2, strace = szego_variance(model, return_trace=True)
        diagnostics["log_integral_trace"] = strace.to_dict()
        degenerate: bool | None = sigma2 == 0.0
    except NumericFailure as exc:
        sigma2, degenerate = None, None
        reasons["sigma2"] = str(exc)

    qm = quasi_markov_test(model)
    qm_verdict = qm.verdict
    reasons["quasi_markov"] = qm.reason
    diagnostics["quasi_markov"] = qm.to_dict()

    ow = off_white_test(model, off_white_cutoffs)
    ow_verdict = ow.verdict
    reasons["off_white"] = ow.reason
    diagnostics["off_white"] = ow.to_dict()

    if degenerate:
        if qm_verdict != Trilean.NO:
            reasons["quasi_markov"] = "degenerate noise (sigma2 = 0) cannot be quasi-Markov"
        qm_verdict = Trilean.NO
    if ow_verdict == Trilean.YES and qm_verdict != Trilean.YES:
        if qm_verdict == Trilean.INCONCLUSIVE:
            qm_verdict = Trilean.YES
            reasons["quasi_markov"] = "implied by the off-white verdict; " + qm.reason
        else:
            ow_verdict = Trilean.INCONCLUSIVE
            reasons["off_white"] = "seminorm test said yes but the quasi-Markov test said no"
    return NoiseClassification(ergodic, sigma2, degenerate, qm_verdict, ow_verdict, diagnostics, reasons)
