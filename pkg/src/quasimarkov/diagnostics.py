"""Numeric witnesses for regularity properties of skew-product systems.

* :func:`malliavin_check` - invertibility of ``M = (dPhi/dw)(dPhi/dw)^T``;
* :func:`strong_feller_probe` - histogram total-variation distance between
  solution laws started from nearby states with a shared noise past;
* :func:`irreducibility_probe` - hit frequencies of target sets;
* :func:`ultrafeller_counterexample_tv` - a kernel on [0, 1] that is strong
  Feller but not continuous in total variation at 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DimensionTooHigh, QuadratureFailure, ValidationError
from .quadrature import adaptive_gauss_legendre
from .skew import SkewSystem, UpdateMap, _coerce_past, _run_states, make_update
from .streams import SeedStreams

__all__ = [
    "MalliavinReport",
    "malliavin_check",
    "StrongFellerReport",
    "strong_feller_probe",
    "histogram_tv",
    "IrreducibilityReport",
    "irreducibility_probe",
    "UltraFellerCurve",
    "ultrafeller_normalisation",
    "ultrafeller_tv",
    "ultrafeller_counterexample_tv",
    "ultrafeller_pf",
    "SINGULAR_THRESHOLD",
]

SINGULAR_THRESHOLD = 1e-8
MAX_STATE_DIM = 3


# ---------------------------------------------------------------------------
# Malliavin covariance


@dataclass
class MalliavinReport:
    """Per-probe Malliavin matrices and their conditioning."""

    probes: list[tuple[list[float], list[float]]]
    matrices: list[np.ndarray]
    determinants: list[float]
    min_singular_values: list[float]
    singular: list[bool]
    method: str
    fd_step: float
    analytic_max_rel_error: float | None = None

    @property
    def any_singular(self) -> bool:
        return any(self.singular)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "fd_step": self.fd_step,
            "probes": [{"x": x, "w": w} for x, w in self.probes],
            "matrices": [m.tolist() for m in self.matrices],
            "determinants": self.determinants,
            "min_singular_values": self.min_singular_values,
            "singular": self.singular,
            "analytic_max_rel_error": self.analytic_max_rel_error,
        }


def noise_jacobian_fd(update: UpdateMap, x, w, fd_step: float = 1e-5) -> np.ndarray:
    """Central-difference ``dPhi/dw`` as a ``(state_dim, noise_dim)`` matrix."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    cols = []
    for k in range(w.size):
        e = np.zeros_like(w)
        e[k] = fd_step
        cols.append((update.phi0(x, w + e) - update.phi0(x, w - e)) / (2.0 * fd_step))
    return np.column_stack(cols)


def malliavin_check(update, probes: Sequence[tuple[Any, Any]], fd_step: float = 1e-5) -> MalliavinReport:
    """Malliavin covariance ``M_ij = sum_k dPhi_i/dw_k dPhi_j/dw_k`` at each probe.

    Parameters
    ----------
    update : UpdateMap or spec
        The map ``Phi(x, w)``.
    probes : sequence of (x, w)
        States and noise values (scalars or vectors).
    fd_step : float
        Central-difference step.

    Probes whose smallest singular value of ``M`` is below ``1e-8`` are
    flagged.  When the map provides analytic derivatives the largest relative
    discrepancy with the finite differences is reported.
    """
    if not isinstance(update, UpdateMap):
        update = make_update(update)
    if not fd_step > 0:
        raise ValidationError("fd_step must be positive")
    mats, dets, mins, flags, used = [], [], [], [], []
    worst = None
    for x, w in probes:
        jac = noise_jacobian_fd(update, x, w, fd_step)
        m = jac @ jac.T
        sv = np.linalg.svd(m, compute_uv=False)
        mats.append(m)
        dets.append(float(np.linalg.det(m)))
        mins.append(float(sv.min()))
        flags.append(bool(sv.min() < SINGULAR_THRESHOLD))
        used.append((np.atleast_1d(x).astype(float).tolist(), np.atleast_1d(w).astype(float).tolist()))
        exact = update.dphi_dw(x, w)
        if exact is not None:
            err = float(np.max(np.abs(jac - exact) / np.maximum(np.abs(exact), 1.0)))
            worst = err if worst is None else max(worst, err)
    return MalliavinReport(used, mats, dets, mins, flags, "central-difference", fd_step, worst)


# ---------------------------------------------------------------------------
# histogram total variation


def _edges(samples: Sequence[np.ndarray], bins: int) -> list[np.ndarray]:
    pooled = np.concatenate([s.reshape(s.shape[0], -1) for s in samples], axis=0)
    out = []
    for j in range(pooled.shape[1]):
        lo, hi = float(pooled[:, j].min()), float(pooled[:, j].max())
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        out.append(np.linspace(lo, hi, bins + 1))
    return out


def _counts(samples: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    s = samples.reshape(samples.shape[0], -1)
    counts, _ = np.histogramdd(s, bins=edges)
    return counts.ravel()


def _discrete_counts(samples: np.ndarray, categories: np.ndarray) -> np.ndarray:
    s = samples.reshape(samples.shape[0], -1)
    idx = {tuple(c): i for i, c in enumerate(categories)}
    out = np.zeros(len(categories))
    keys, counts = np.unique(s, axis=0, return_counts=True)
    for k, c in zip(keys, counts):
        out[idx[tuple(k)]] += c
    return out


def histogram_tv(a, b, bins: int | None = None, edges=None, discrete: bool = False) -> float:
    """Half the L1 distance between the histograms of two samples.

    Continuous samples use ``bins`` equal-width cells per dimension (default
    ``ceil(n**(1/3))``) over the pooled range, so refining ``bins`` by an
    integer factor nests the partitions.  With ``discrete`` each distinct
    value is its own cell.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    if discrete:
        cats = np.unique(np.concatenate([a, b]), axis=0)
        pa, pb = _discrete_counts(a, cats), _discrete_counts(b, cats)
    else:
        if edges is None:
            nb = bins or int(math.ceil(a.shape[0] ** (1.0 / 3.0)))
            edges = _edges([a, b], nb)
        pa, pb = _counts(a, edges), _counts(b, edges)
    return 0.5 * float(np.sum(np.abs(pa / pa.sum() - pb / pb.sum())))


# ---------------------------------------------------------------------------
# strong Feller probe


@dataclass
class StrongFellerReport:
    pairs: list[tuple[float, float]]
    tv: list[float]
    ci_low: list[float]
    ci_high: list[float]
    lipschitz: float | None
    horizon: int
    n_samples: int
    bins: int | None
    observable: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "tv": self.tv,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "lipschitz": self.lipschitz,
            "horizon": self.horizon,
            "n_samples": self.n_samples,
            "bins": self.bins,
            "observable": self.observable,
            "seed": self.seed,
        }


def _frozen_past(sys: SkewSystem, noise_past, streams: SeedStreams) -> np.ndarray:
    if noise_past is None:
        return np.asarray(sys.stationary_past(1, streams.rng("past"))[0])
    return _coerce_past(sys, noise_past)


def _observable(states: np.ndarray, noise: np.ndarray, horizon: int, observable: str) -> np.ndarray:
    x = states[:, horizon].astype(float)
    if observable == "state":
        return x[:, None]
    return np.column_stack([x, noise[:, -1].astype(float)])


def strong_feller_probe(
    sys: SkewSystem,
    pairs: Sequence[tuple[float, float]],
    horizon: int = 1,
    n_samples: int = 100_000,
    bins: int | None = None,
    seed: int = 0,
    noise_past=None,
    observable: str = "state",
    n_boot: int = 200,
) -> StrongFellerReport:
    """Histogram estimates of ``TV(S_m(x, w), S_m(y, w))`` for each pair.

    The noise past ``w`` is frozen (drawn once from the stationary law unless
    given).  Both starts are driven by the same ``n_samples`` noise futures, so
    a pair ``(x, x)`` gives exactly 0.  ``observable`` is ``"state"`` (law of
    ``x_m``) or ``"state_noise"`` (joint law of ``(x_m, w_m)``).  Confidence
    intervals come from ``n_boot`` multinomial resamples of the two
    histograms; ``lipschitz`` is the least-squares slope through the origin
    of TV against ``|x - y|``.
    """
    if sys.state_dim > MAX_STATE_DIM:
        raise DimensionTooHigh(f"histogram TV supports at most {MAX_STATE_DIM} state dimensions")
    if observable not in ("state", "state_noise"):
        raise ValidationError("observable must be 'state' or 'state_noise'")
    if isinstance(horizon, bool) or int(horizon) != horizon or horizon < 0:
        raise ValidationError("horizon must be a non-negative integer")
    if int(n_samples) < 2:
        raise ValidationError("n_samples must be at least 2")
    horizon, n_samples = int(horizon), int(n_samples)
    streams = SeedStreams(seed)
    past = _frozen_past(sys, noise_past, streams)
    pasts = np.broadcast_to(past, (n_samples, past.shape[-1]))
    future = sys.noise_future(np.asarray(pasts), horizon, streams.rng("future"))
    full = np.concatenate([np.asarray(pasts).astype(future.dtype), future], axis=-1)
    discrete = sys.update.discrete
    dtype = np.int8 if discrete else float
    boot_rng = streams.rng("bootstrap")
    nb = bins or int(math.ceil(n_samples ** (1.0 / 3.0)))
    tvs, lows, highs = [], [], []
    for x, y in pairs:
        if x == y:
            tvs.append(0.0)
            lows.append(0.0)
            highs.append(0.0)
            continue
        sx = _run_states(sys, np.full(n_samples, x, dtype=dtype), full, past.shape[-1])
        sy = _run_states(sys, np.full(n_samples, y, dtype=dtype), full, past.shape[-1])
        ox = _observable(sx, full, horizon, observable)
        oy = _observable(sy, full, horizon, observable)
        if discrete:
            cats = np.unique(np.concatenate([ox, oy]), axis=0)
            cx, cy = _discrete_counts(ox, cats), _discrete_counts(oy, cats)
        else:
            edges = _edges([ox, oy], nb)
            cx, cy = _counts(ox, edges), _counts(oy, edges)
        px, py = cx / cx.sum(), cy / cy.sum()
        tv = 0.5 * float(np.sum(np.abs(px - py)))
        bx = boot_rng.multinomial(n_samples, px, size=n_boot) / n_samples
        by = boot_rng.multinomial(n_samples, py, size=n_boot) / n_samples
        btv = 0.5 * np.sum(np.abs(bx - by), axis=1)
        tvs.append(tv)
        lows.append(float(np.quantile(btv, 0.025)))
        highs.append(float(np.quantile(btv, 0.975)))
    d = np.array([abs(float(x) - float(y)) for x, y in pairs])
    t = np.array(tvs)
    lip = float(d @ t / (d @ d)) if np.any(d > 0) else None
    return StrongFellerReport(
        [(float(x), float(y)) for x, y in pairs], tvs, lows, highs, lip, horizon, n_samples,
        None if discrete else nb, observable, int(seed),
    )


# ---------------------------------------------------------------------------
# irreducibility probe


@dataclass
class IrreducibilityReport:
    rows: list[dict] = field(default_factory=list)
    horizon: int = 1
    n_samples: int = 0
    seed: int = 0

    def frequency(self, start, target) -> float:
        for r in self.rows:
            if r["start"] == start and r["target"] == target:
                return r["frequency"]
        raise KeyError((start, target))

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "n_samples": self.n_samples, "seed": self.seed, "rows": self.rows}


def _target_hits(values: np.ndarray, target, discrete: bool) -> np.ndarray:
    if discrete:
        states = np.atleast_1d(np.asarray(target))
        return np.isin(values, states)
    try:
        lo, hi = (float(v) for v in target)
    except (TypeError, ValueError) as exc:
        raise ValidationError("continuous targets must be open intervals (lo, hi)") from exc
    if not lo < hi:
        raise ValidationError("target interval is empty")
    return (values > lo) & (values < hi)


def irreducibility_probe(
    sys: SkewSystem,
    starts: Sequence,
    targets: Sequence,
    horizon: int = 1,
    n_samples: int = 10_000,
    seed: int = 0,
    noise_past=None,
) -> IrreducibilityReport:
    """Empirical ``P(x_n in A)`` from each start with a frozen noise past.

    Zero frequencies carry the one-sided 95% upper bound ``3 / n_samples``;
    they never prove that a target is unreachable.
    """
    if sys.state_dim > MAX_STATE_DIM:
        raise DimensionTooHigh(f"probe supports at most {MAX_STATE_DIM} state dimensions")
    if isinstance(horizon, bool) or int(horizon) != horizon or horizon < 0:
        raise ValidationError("horizon must be a non-negative integer")
    horizon, n_samples = int(horizon), int(n_samples)
    if n_samples < 1:
        raise ValidationError("n_samples must be positive")
    streams = SeedStreams(seed)
    past = _frozen_past(sys, noise_past, streams)
    pasts = np.broadcast_to(past, (n_samples, past.shape[-1]))
    future = sys.noise_future(np.asarray(pasts), horizon, streams.rng("future"))
    full = np.concatenate([np.asarray(pasts).astype(future.dtype), future], axis=-1)
    discrete = sys.update.discrete
    dtype = np.int8 if discrete else float
    report = IrreducibilityReport(horizon=horizon, n_samples=n_samples, seed=int(seed))
    for x0 in starts:
        states = _run_states(sys, np.full(n_samples, x0, dtype=dtype), full, past.shape[-1])
        final = states[:, horizon]
        for target in targets:
            hits = int(np.count_nonzero(_target_hits(final, target, discrete)))
            freq = hits / n_samples
            tgt = list(np.atleast_1d(target).tolist()) if discrete else [float(v) for v in target]
            report.rows.append({
                "start": x0.item() if hasattr(x0, "item") else x0,
                "target": tgt,
                "hits": hits,
                "frequency": freq,
                "upper_bound_if_zero": 3.0 / n_samples if hits == 0 else None,
                "reached": hits > 0,
            })
    return report


# ---------------------------------------------------------------------------
# strong Feller but not ultra Feller: P(x, dy) = c(x)(1 + sin(y/x)) dy on [0, 1]

_MIN_X = 1e-6


def ultrafeller_normalisation(x: float) -> float:
    """``c(x) = 1 / int_0^1 (1 + sin(y/x)) dy = 1 / (1 + x (1 - cos(1/x)))``."""
    x = float(x)
    if not 0.0 < x <= 1.0:
        raise ValidationError("x must lie in (0, 1]")
    return 1.0 / (1.0 + x * (1.0 - math.cos(1.0 / x)))


def _sign_changes(x: float, c: float) -> np.ndarray:
    # roots in (0, 1) of c (1 + sin(y/x)) = 1, i.e. sin(y/x) = 1/c - 1
    s0 = 1.0 / c - 1.0
    if abs(s0) > 1.0:
        return np.empty(0)
    base = math.asin(s0)
    kmax = int(math.ceil(1.0 / (2.0 * math.pi * x))) + 1
    k = np.arange(-1, kmax + 1)
    roots = np.concatenate([x * (base + 2.0 * math.pi * k), x * (math.pi - base + 2.0 * math.pi * k)])
    return np.sort(roots[(roots > 0.0) & (roots < 1.0)])


def ultrafeller_tv(x: float) -> tuple[float, float]:
    """``int_0^1 |c(x)(1 + sin(y/x)) - 1| dy`` and its quadrature error estimate.

    The integrand is split at its sign changes and panels are at most
    ``x / 10`` wide.

    Raises
    ------
    QuadratureFailure
        For ``x < 1e-6`` (oscillation budget) or if the quadrature does not converge.
    """
    x = float(x)
    if not 0.0 < x <= 1.0:
        raise ValidationError("x must lie in (0, 1]")
    if x < _MIN_X:
        raise QuadratureFailure(f"x = {x:g} is below the oscillation budget ({_MIN_X:g})", rule="oscillation-budget")
    c = ultrafeller_normalisation(x)
    roots = _sign_changes(x, c)
    # integrate chunk by chunk so memory stays bounded as x shrinks
    cuts = np.linspace(0.0, 1.0, max(1, int(math.ceil(1e-3 / x))) + 1)
    value, error = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        res = adaptive_gauss_legendre(
            lambda y: np.abs(c * (1.0 + np.sin(y / x)) - 1.0), lo, hi,
            breakpoints=roots[(roots > lo) & (roots < hi)], max_width=x / 10.0,
        )
        if not res.converged:
            raise QuadratureFailure(f"oscillatory TV quadrature did not converge at x = {x:g}")
        value += res.value
        error += res.error
    return float(value), float(error)


def ultrafeller_pf(x: float, a: float = 0.0, b: float = 0.5) -> float:
    """``P f(x)`` for ``f`` the indicator of ``[a, b]``; ``P f(0) = b - a``."""
    x = float(x)
    if not 0.0 <= a <= b <= 1.0:
        raise ValidationError("need 0 <= a <= b <= 1")
    if x == 0.0:
        return b - a
    c = ultrafeller_normalisation(x)
    return c * ((b - a) + x * (math.cos(a / x) - math.cos(b / x)))


@dataclass
class UltraFellerCurve:
    x: list[float]
    tv: list[float]
    error: list[float]
    normalisation: list[float]
    pf: list[float]
    pf_at_zero: float
    limit: float = 2.0 / math.pi

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "tv": self.tv,
            "error": self.error,
            "normalisation": self.normalisation,
            "pf": self.pf,
            "pf_at_zero": self.pf_at_zero,
            "limit": self.limit,
        }

    def rows(self):
        for x, tv, err in zip(self.x, self.tv, self.error):
            yield {"x": x, "tv": tv, "ci_low": tv - err, "ci_high": tv + err}


def ultrafeller_counterexample_tv(xs: Sequence[float]) -> UltraFellerCurve:
    """TV distance ``||P(x, .) - P(0, .)||`` (L1 convention) along ``xs``.

    With this convention the distance tends to ``2/pi`` as ``x -> 0`` while
    ``P f(x) -> P f(0)`` for the bounded test function ``f = 1_[0, 1/2]``.
    """
    tvs, errs, cs, pfs = [], [], [], []
    for x in xs:
        tv, err = ultrafeller_tv(x)
        tvs.append(tv)
        errs.append(err)
        cs.append(ultrafeller_normalisation(x))
        pfs.append(ultrafeller_pf(x))
    return UltraFellerCurve([float(x) for x in xs], tvs, errs, cs, pfs, ultrafeller_pf(0.0))
