"""Adaptive quadrature on [a, b] with declared endpoint singularities, plus the
refinement-trace decision rule shared by the spectral tests.

Integrands are vectorised: ``func(x)`` receives a 1-D array of abscissae and
returns an array whose *last* axis matches ``x``.  Leading axes (for example
one row per covariance lag) are integrated simultaneously and share the
panel refinement, which is driven by the worst row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureFailure

__all__ = [
    "QuadratureResult",
    "adaptive_gauss_legendre",
    "tanh_sinh",
    "integrate",
    "RefinementRule",
    "DEFAULT_LEVELS",
    "CONVERGENT",
    "DIVERGENT",
    "INCONCLUSIVE",
]

_GL_ORDER = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)

PANEL_TOL = 1e-12
MAX_DEPTH = 24
_MAX_ACTIVE_PANELS = 400_000


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray | float
    error: float
    panels: int
    converged: bool
    # composite rule actually used (abscissae, weights)
    nodes: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        nodes = weights = None
        if self.nodes is not None and other.nodes is not None:
            nodes = np.concatenate([self.nodes, other.nodes])
            weights = np.concatenate([self.weights, other.weights])
        return QuadratureResult(
            value=self.value + other.value,
            error=self.error + other.error,
            panels=self.panels + other.panels,
            converged=self.converged and other.converged,
            nodes=nodes,
            weights=weights,
        )


def _zero_result(shape=()) -> QuadratureResult:
    return QuadratureResult(np.zeros(shape) if shape else 0.0, 0.0, 0, True, np.empty(0), np.empty(0))


def _gl_rule(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    w = half[:, None] * _GL_W[None, :]
    return x.ravel(), w.ravel()


def _gl_panels(func, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    fx = np.asarray(func(x.ravel()), dtype=float)
    fx = fx.reshape(fx.shape[:-1] + (lo.size, _GL_ORDER))
    return (fx @ _GL_W) * half


def _worst(a: np.ndarray) -> np.ndarray:
    # reduce leading (integrand) axes, keep the panel axis
    return a if a.ndim == 1 else a.reshape(-1, a.shape[-1]).max(axis=0)


def adaptive_gauss_legendre(
    func,
    a: float,
    b: float,
    *,
    breakpoints=(),
    tol: float = PANEL_TOL,
    max_depth: int = MAX_DEPTH,
    max_width: float | None = None,
) -> QuadratureResult:
    """Globally vectorised adaptive 20-point Gauss-Legendre quadrature.

    A panel is accepted when its two halves agree with the whole-panel rule to
    ``max(tol, tol * |panel|)``; otherwise it is bisected, up to ``max_depth``
    levels.  Panels that hit the depth limit are accepted and the result is
    flagged as not converged.
    """
    if not b > a:
        return _zero_result()
    edges = [a, b] + [p for p in breakpoints if a < p < b]
    edges = np.unique(np.asarray(edges, dtype=float))
    if max_width is not None and max_width > 0:
        pieces = []
        for lo_e, hi_e in zip(edges[:-1], edges[1:]):
            m = max(1, int(np.ceil((hi_e - lo_e) / max_width)))
            pieces.append(np.linspace(lo_e, hi_e, m + 1)[:-1])
        pieces.append(edges[-1:])
        edges = np.concatenate(pieces)
    lo, hi = edges[:-1], edges[1:]
    whole = _gl_panels(func, lo, hi)
    depth = np.zeros(lo.size, dtype=int)
    total = np.zeros(whole.shape[:-1])
    err = 0.0
    converged = True
    panels = 0
    acc_lo: list[np.ndarray] = []
    acc_hi: list[np.ndarray] = []
    while lo.size:
        mid = 0.5 * (lo + hi)
        halves = _gl_panels(func, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        p = lo.size
        left, right = halves[..., :p], halves[..., p:]
        refined = left + right
        diff = _worst(np.abs(refined - whole))
        scale = _worst(np.abs(refined))
        ok = diff <= np.maximum(tol, tol * scale)
        at_limit = depth + 1 >= max_depth
        if np.any(~np.isfinite(diff)):
            ok = ok | ~np.isfinite(diff)
            converged = False
        accept = ok | at_limit
        if np.any(at_limit & ~ok):
            converged = False
        keep = ~accept
        if 2 * np.count_nonzero(keep) > _MAX_ACTIVE_PANELS:
            accept[:] = True
            keep[:] = False
            converged = False
        total = total + refined[..., accept].sum(axis=-1)
        err += float(np.sum(diff[accept & np.isfinite(diff)]))
        panels += int(np.count_nonzero(accept))
        acc_lo += [lo[accept], mid[accept]]
        acc_hi += [mid[accept], hi[accept]]
        lo, hi, mid = lo[keep], hi[keep], mid[keep]
        whole = np.concatenate([left[..., keep], right[..., keep]], axis=-1)
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    value = total if total.ndim else float(total)
    nodes, weights = _gl_rule(np.concatenate(acc_lo), np.concatenate(acc_hi))
    return QuadratureResult(value, err, panels, converged, nodes, weights)


def _tanh_sinh_rule(a: float, b: float, singular_end: str, h: float, t_max: float = 6.0):
    t = np.arange(-t_max, t_max + 0.5 * h, h)
    u = 0.5 * np.pi * np.sinh(t)
    length = b - a
    weight = h * 0.5 * length * (0.5 * np.pi * np.cosh(t)) / np.cosh(u) ** 2
    # offsets measured from the nearer endpoint avoid cancellation near it
    near_a = t < 0
    off_a = length / (1.0 + np.exp(-2.0 * u[near_a]))
    off_b = length / (1.0 + np.exp(2.0 * u[~near_a]))
    x = np.concatenate([a + off_a, b - off_b])
    off = np.concatenate([off_a, np.full(off_b.size, np.inf)]) if singular_end == "a" else \
        np.concatenate([np.full(off_a.size, np.inf), off_b])
    s = a if singular_end == "a" else b
    floor = max(abs(s) * 4e-15, 1e-250)
    keep = (off >= floor) & (weight > 0)
    return x[keep], weight[keep]


def tanh_sinh(
    func, a: float, b: float, *, singular_end: str = "a", tol: float = PANEL_TOL, max_level: int = 9
) -> QuadratureResult:
    """Double-exponential quadrature for a panel with one singular endpoint.

    Nodes closer to the singular endpoint than the floating-point resolution
    of that endpoint are dropped; their weight is below 1e-14 of the panel.
    """
    if singular_end not in ("a", "b"):
        raise ValueError("singular_end must be 'a' or 'b'")
    if not b > a:
        return _zero_result()
    prev = None
    value = None
    for level in range(max_level + 1):
        h = 2.0 ** -level
        x, w = _tanh_sinh_rule(a, b, singular_end, h)
        fx = np.asarray(func(x), dtype=float)
        value = fx @ w
        out = value if np.ndim(value) else float(value)
        if prev is not None:
            diff = float(np.max(np.abs(value - prev)))
            scale = float(np.max(np.abs(value)))
            if not np.isfinite(diff):
                return QuadratureResult(out, np.inf, 1, False, x, w)
            if diff <= max(tol, tol * scale) and level >= 3:
                return QuadratureResult(out, diff, 1, True, x, w)
        prev = value
    diff = float(np.max(np.abs(value - prev))) if prev is not None else np.inf
    return QuadratureResult(out, diff, 1, False, x, w)


def integrate(
    func,
    a: float,
    b: float,
    *,
    singular_points=(),
    breakpoints=(),
    tol: float = PANEL_TOL,
    max_depth: int = MAX_DEPTH,
    cap_width: float | None = None,
    max_width: float | None = None,
) -> QuadratureResult:
    """Integrate over [a, b], refining dyadically toward ``singular_points``.

    The interval is split at every singular point.  The panel touching a
    singular point is integrated with the tanh-sinh rule (which absorbs
    algebraic and logarithmic endpoint singularities); the remainder uses
    adaptive Gauss-Legendre.
    """
    sing = sorted({float(p) for p in singular_points if a <= p <= b})
    edges = sorted({float(a), float(b), *sing})
    result = None
    inner_lo: list[float] = []
    inner_hi: list[float] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sl, sr = lo in sing, hi in sing
        width = (hi - lo) / (4.0 if (sl and sr) else 2.0)
        if cap_width is not None:
            width = min(width, cap_width)
        lo_in, hi_in = lo, hi
        if sl:
            part = tanh_sinh(func, lo, lo + width, singular_end="a", tol=tol)
            result = part if result is None else result + part
            lo_in = lo + width
        if sr:
            part = tanh_sinh(func, hi - width, hi, singular_end="b", tol=tol)
            result = part if result is None else result + part
            hi_in = hi - width
        inner_lo.append(lo_in)
        inner_hi.append(hi_in)
    for lo_in, hi_in in zip(inner_lo, inner_hi):
        part = adaptive_gauss_legendre(
            func, lo_in, hi_in, breakpoints=breakpoints, tol=tol, max_depth=max_depth, max_width=max_width
        )
        result = part if result is None else result + part
    return result if result is not None else _zero_result()


def require_converged(result: QuadratureResult, what: str) -> QuadratureResult:
    if not result.converged:
        raise QuadratureFailure(f"quadrature for {what} did not converge (error estimate {result.error:.3g})")
    return result


# refinement levels k: density cutoffs eps_k = 2**-k, Fourier cutoffs N = 2**k
DEFAULT_LEVELS = tuple(range(4, 21))

CONVERGENT = "convergent"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RefinementRule:
    """Decide whether a refinement trace converges, diverges, or neither.

    * convergent: the last three values agree within ``rel_tol`` (relative to
      the largest of them, with an ``abs_tol`` floor for traces sitting at 0);
    * divergent: some value exceeds ``blowup`` in magnitude, or over the last
      ``window`` increments every increment has the same sign and none shrinks
      by more than the factor ``1 - slack`` relative to the previous one;
    * inconclusive otherwise.

    The slack lets logarithmic divergence (increments tending to a positive
    constant from above) register as divergence.
    """

    rel_tol: float = 1e-4
    abs_tol: float = 1e-12
    blowup: float = 1e8
    window: int = 5
    slack: float = 0.1

    def assess(self, values) -> tuple[str, str]:
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return INCONCLUSIVE, "empty trace"
        if np.any(~np.isfinite(v)) or np.any(np.abs(v) > self.blowup):
            return DIVERGENT, f"trace exceeds {self.blowup:g}"
        if v.size >= 3:
            last = v[-3:]
            spread = last.max() - last.min()
            if spread <= self.rel_tol * np.abs(last).max() + self.abs_tol:
                return CONVERGENT, f"last three values agree within relative {self.rel_tol:g}"
        if v.size >= self.window + 1:
            d = np.diff(v[-(self.window + 1):])
            same_sign = np.all(d > 0) or np.all(d < 0)
            mags = np.abs(d)
            if same_sign and np.all(mags[1:] >= (1.0 - self.slack) * mags[:-1]):
                return DIVERGENT, (
                    f"increments over the last {self.window} levels do not decay "
                    f"(each >= {1 - self.slack:g} x the previous)"
                )
        return INCONCLUSIVE, "neither the convergence nor the divergence rule triggered"
