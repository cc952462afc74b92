"""Skew-product dynamics driven by a noise process.

One transition first draws the next noise value ``w'`` from the noise kernel
and then updates the state, ``x' = Phi(x, w')``, where ``Phi`` may look at the
most recent noise values ``(w'_0, w'_{-1}, ...)``.  The noise does not depend on
the state, so a whole noise future can be drawn first and the state recursion
run afterwards; the result is identical in law to alternating the two.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import signal, stats

from .errors import BlockTooLong, ValidationError, WindowTooShort
from .noise import GaussianStepKernel, NoisePath, iterate, sample_stationary_paths
from .spectral import SpectralModel
from .streams import SeedStreams, as_generator

__all__ = [
    "UpdateMap",
    "Linear",
    "Doubling",
    "BinaryExample",
    "Table",
    "Additive",
    "Frozen",
    "AdditiveSine",
    "make_update",
    "BernoulliKernel",
    "SkewSystem",
    "Trajectory",
    "TrajectoryEnsemble",
    "EmpiricalMeasure",
    "evolve",
    "evolve_ensemble",
    "krylov_bogoliubov",
    "krylov_bogoliubov_ensemble",
    "BlockLaw",
    "binary_example_blocks",
    "block_tv",
    "two_point_motion",
    "MAX_BLOCK",
]

MAX_BLOCK = 20
_PATH_BLOCK = 1024


# ---------------------------------------------------------------------------
# update maps


class UpdateMap:
    """State update ``x' = Phi(x, w)``.

    ``__call__(x, w_recent)`` is the simulation form: ``x`` holds one scalar
    state per path and ``w_recent[..., j]`` is the noise value ``j`` steps
    before the newest one.  ``phi0(x, w)`` is the vector form used for
    derivatives, with ``x`` of length ``state_dim`` and ``w`` of length
    ``noise_dim``.
    """

    tag = ""
    noise_window = 1
    discrete = False
    state_dim = 1
    noise_dim = 1

    def __call__(self, x, w_recent):
        w = np.asarray(w_recent, dtype=float)[..., 0]
        return self.phi0_scalar(np.asarray(x, dtype=float), w)

    def phi0_scalar(self, x, w):
        raise NotImplementedError

    def phi0(self, x, w) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return np.atleast_1d(self.phi0_scalar(x[0], w[0]))

    def dphi_dw(self, x, w) -> np.ndarray | None:
        """Analytic ``d Phi / d w`` as a ``(state_dim, noise_dim)`` matrix, if known."""
        return None

    def params(self) -> dict[str, Any]:
        return {}

    def to_config(self) -> dict[str, Any]:
        return {"tag": self.tag, **self.params()}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class Linear(UpdateMap):
    """``x' = a x + b w``; ``a`` and ``b`` may be matrices for the vector form."""

    tag = "linear"

    def __init__(self, a=0.5, b=1.0):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a.ndim == 0 and self.b.ndim == 0:
            self.state_dim = self.noise_dim = 1
        else:
            a2 = np.atleast_2d(self.a)
            b2 = self.b.reshape(a2.shape[0], -1) if self.b.ndim < 2 else self.b
            if a2.shape[0] != a2.shape[1] or b2.shape[0] != a2.shape[0]:
                raise ValidationError("linear map needs square a and b with matching rows")
            self.a, self.b = a2, b2
            self.state_dim, self.noise_dim = b2.shape
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValidationError("linear map coefficients must be finite")

    @property
    def scalar(self) -> bool:
        return self.a.ndim == 0

    def phi0_scalar(self, x, w):
        if not self.scalar:
            raise ValidationError("matrix linear maps have no scalar simulation form")
        return float(self.a) * x + float(self.b) * w

    def phi0(self, x, w):
        if self.scalar:
            return super().phi0(x, w)
        return self.a @ np.asarray(x, dtype=float) + self.b @ np.asarray(w, dtype=float)

    def dphi_dw(self, x, w):
        return np.atleast_2d(self.b).astype(float).copy()

    def params(self):
        return {"a": self.a.tolist(), "b": self.b.tolist()}


class Doubling(UpdateMap):
    """``x' = (2x + b w) mod 1``."""

    tag = "doubling"

    def __init__(self, b=1.0):
        self.b = float(b)

    def phi0_scalar(self, x, w):
        return np.mod(2.0 * x + self.b * w, 1.0)

    def dphi_dw(self, x, w):
        return np.array([[self.b]])

    def params(self):
        return {"b": self.b}


class Additive(UpdateMap):
    """``x' = x + w``."""

    tag = "additive"

    def phi0_scalar(self, x, w):
        return x + w

    def dphi_dw(self, x, w):
        return np.array([[1.0]])


class Frozen(UpdateMap):
    """``x' = x`` (noise ignored)."""

    tag = "frozen"

    def phi0_scalar(self, x, w):
        return x + 0.0 * w

    def dphi_dw(self, x, w):
        return np.array([[0.0]])


class AdditiveSine(UpdateMap):
    """``x' = x + sin(w)``."""

    tag = "additive_sine"

    def phi0_scalar(self, x, w):
        return x + np.sin(w)

    def dphi_dw(self, x, w):
        return np.array([[np.cos(np.atleast_1d(w)[0])]])


class BinaryExample(UpdateMap):
    """State in {0, 1}: ``x' = w_0`` if ``x = w_{-1}``, else ``1 - w_0``.

    Here ``w_0`` is the newly drawn bit and ``w_{-1}`` the previous one, so
    ``x XOR w`` never changes along a trajectory.
    """

    tag = "binary_example"
    noise_window = 2
    discrete = True

    def __call__(self, x, w_recent):
        w = np.asarray(w_recent).astype(np.int8)
        x = np.asarray(x).astype(np.int8)
        w0, wm1 = w[..., 0], w[..., 1]
        return np.where(x == wm1, w0, 1 - w0).astype(np.int8)


class Table(UpdateMap):
    """Finite-state map ``x' = table[x, w_0]`` for binary noise."""

    tag = "table"
    discrete = True

    def __init__(self, table):
        t = np.asarray(table)
        if t.ndim != 2 or t.shape[1] != 2 or not np.issubdtype(t.dtype, np.integer):
            raise ValidationError("table must be an integer array of shape (n_states, 2)")
        if t.min() < 0 or t.max() >= t.shape[0]:
            raise ValidationError("table entries must be valid state indices")
        self.table = t.astype(np.int64)

    def __call__(self, x, w_recent):
        w0 = np.asarray(w_recent)[..., 0].astype(np.int64)
        return self.table[np.asarray(x).astype(np.int64), w0]

    def params(self):
        return {"table": self.table.tolist()}


_REGISTRY: dict[str, Callable[..., UpdateMap]] = {
    "linear": Linear,
    "doubling": Doubling,
    "binary_example": BinaryExample,
    "table": Table,
    "additive": Additive,
    "frozen": Frozen,
    "additive_sine": AdditiveSine,
}


def make_update(spec: Mapping[str, Any] | str) -> UpdateMap:
    """Build an update map from ``{"tag": ..., **params}`` or a bare tag."""
    if isinstance(spec, str):
        spec = {"tag": spec}
    if not isinstance(spec, Mapping) or "tag" not in spec:
        raise ValidationError("update spec needs a 'tag'")
    tag = spec["tag"]
    if tag not in _REGISTRY:
        raise ValidationError(f"unknown update tag {tag!r}; expected one of {sorted(_REGISTRY)}")
    params = {k: v for k, v in spec.items() if k != "tag"}
    try:
        return _REGISTRY[tag](**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for update {tag!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# noise kernels


@dataclass(frozen=True)
class BernoulliKernel:
    """I.i.d. bits with ``P(0) = p`` and ``P(1) = 1 - p``."""

    p: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValidationError("Bernoulli parameter must satisfy 0 < p < 1")

    order = 0

    def draw(self, shape, rng) -> np.ndarray:
        return (rng.random(shape) >= self.p).astype(np.int8)

    def to_dict(self) -> dict:
        return {"kind": "bernoulli", "p": self.p}


NoiseKernel = GaussianStepKernel | BernoulliKernel


@dataclass(frozen=True, eq=False)
class SkewSystem:
    """Update map plus noise kernel.

    ``window`` is the number of past noise values carried along; it must cover
    both the noise kernel order and the update map's look-back.
    """

    update: UpdateMap
    noise: Any
    window: int = 0

    def __post_init__(self):
        if not isinstance(self.noise, (GaussianStepKernel, BernoulliKernel)):
            raise ValidationError("noise must be a GaussianStepKernel or BernoulliKernel")
        if self.update.discrete and not isinstance(self.noise, BernoulliKernel):
            raise ValidationError(f"update {self.update.tag!r} needs Bernoulli noise")
        need = max(self.update.noise_window, getattr(self.noise, "order", 0), 1)
        if self.window == 0:
            object.__setattr__(self, "window", need)
        elif self.window < need:
            raise WindowTooShort(f"window {self.window} smaller than required {need}")
        if self.update.state_dim != 1:
            raise ValidationError("simulation supports scalar states only")

    @property
    def state_dim(self) -> int:
        return 1

    @classmethod
    def binary_example(cls, p: float) -> "SkewSystem":
        return cls(BinaryExample(), BernoulliKernel(p), 2)

    @classmethod
    def gaussian(cls, update: UpdateMap, model: SpectralModel, window: int = 1) -> "SkewSystem":
        kernel = GaussianStepKernel.from_model(model, window)
        return cls(update, kernel, max(window, 1))

    def noise_future(self, past: np.ndarray, horizon: int, rng) -> np.ndarray:
        """Draw ``w_1..w_T`` given chronological pasts (one per row)."""
        if isinstance(self.noise, BernoulliKernel):
            return self.noise.draw(past.shape[:-1] + (horizon,), rng)
        return iterate(self.noise, past, horizon, innovations=rng.standard_normal(past.shape[:-1] + (horizon,)))

    def stationary_past(self, n_paths: int, rng) -> np.ndarray:
        """Chronological noise pasts drawn from the stationary noise law."""
        if isinstance(self.noise, BernoulliKernel):
            return self.noise.draw((n_paths, self.window), rng)
        kernel = self.noise
        if kernel.order == 0:
            return kernel.sigma * rng.standard_normal((n_paths, self.window))
        vals, _ = sample_stationary_paths(kernel.stationary_covariance(self.window - 1), self.window, n_paths, rng)
        return vals

    def to_dict(self) -> dict:
        noise = self.noise.to_dict() if hasattr(self.noise, "to_dict") else {}
        return {"update": self.update.to_config(), "noise": noise, "window": self.window}


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``x_0..x_T`` and the noise values ``w_1..w_T`` that drove them."""

    states: np.ndarray
    noise: np.ndarray

    @property
    def horizon(self) -> int:
        return self.states.shape[-1] - 1

    def to_rows(self):
        for t, x in enumerate(self.states):
            yield {"time": t, "state": x.item() if hasattr(x, "item") else x}


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """``n_paths x (T + 1)`` states; ``noise`` holds the pasts and futures used."""

    states: np.ndarray
    noise: np.ndarray
    seed: int
    stream: str

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1] - 1

    def to_rows(self):
        for i in range(self.n_paths):
            for t in range(self.states.shape[1]):
                yield {"time": t, "path": i, "state": self.states[i, t].item()}


def _run_states(sys: SkewSystem, x0: np.ndarray, full_noise: np.ndarray, past_len: int) -> np.ndarray:
    # full_noise rows: chronological past (past_len values) then w_1..w_T
    horizon = full_noise.shape[-1] - past_len
    upd = sys.update
    if isinstance(upd, Linear) and upd.scalar:
        a, b = float(upd.a), float(upd.b)
        w = full_noise[..., past_len:]
        if horizon == 0:
            return x0[..., None].astype(float)
        zi = (a * x0)[..., None]
        out, _ = signal.lfilter([b], [1.0, -a], w, axis=-1, zi=zi)
        return np.concatenate([x0[..., None], out], axis=-1)
    k = upd.noise_window
    dtype = np.int8 if upd.discrete else float
    states = np.empty(x0.shape + (horizon + 1,), dtype=dtype)
    states[..., 0] = x0
    x = x0
    for t in range(horizon):
        j = past_len + t  # index of w_{t+1}
        recent = full_noise[..., j - k + 1 : j + 1][..., ::-1]
        x = upd(x, recent)
        states[..., t + 1] = x
    return states


def _coerce_past(sys: SkewSystem, noise_init) -> np.ndarray:
    vals = noise_init.values if isinstance(noise_init, NoisePath) else np.asarray(noise_init, dtype=float)
    if vals.shape[-1] < sys.window:
        raise WindowTooShort(f"noise past of length {vals.shape[-1]} shorter than system window {sys.window}")
    if isinstance(sys.noise, BernoulliKernel):
        if not np.all((vals == 0) | (vals == 1)):
            raise ValidationError("Bernoulli noise past must contain only 0 and 1")
        return vals.astype(np.int8)
    return vals


def _check_horizon(horizon) -> int:
    if isinstance(horizon, bool) or int(horizon) != horizon or horizon < 0:
        raise ValidationError("horizon must be a non-negative integer")
    return int(horizon)


def evolve(sys: SkewSystem, x0, noise_init, horizon: int, seed) -> Trajectory:
    """Simulate ``x_0..x_T`` from a state and a noise past."""
    horizon = _check_horizon(horizon)
    rng = as_generator(seed)
    past = _coerce_past(sys, noise_init)
    future = sys.noise_future(past, horizon, rng)
    full = np.concatenate([past.astype(future.dtype), future])
    x0a = np.asarray(x0, dtype=np.int8 if sys.update.discrete else float)
    if sys.update.discrete and x0a not in (0, 1) and not isinstance(sys.update, Table):
        raise ValidationError("binary state must be 0 or 1")
    states = _run_states(sys, x0a, full, past.shape[-1])
    return Trajectory(states, future)


def evolve_ensemble(
    sys: SkewSystem, x0, horizon: int, n_paths: int, seed: int, noise_init=None, stream: str = "ensemble"
) -> TrajectoryEnsemble:
    """Simulate many independent paths.

    Paths are processed in blocks of 1024; block ``i`` draws from stream
    ``(stream, i)`` of ``SeedStreams(seed)``.  ``noise_init`` may be a single
    past shared by all paths, one past per path, or ``None`` for stationary
    pasts.  ``x0`` is a scalar or one value per path; the string ``"noise"``
    starts each path at its newest noise value (the aligned set of the binary
    example).
    """
    horizon = _check_horizon(horizon)
    if isinstance(n_paths, bool) or int(n_paths) != n_paths or n_paths < 1:
        raise ValidationError("n_paths must be a positive integer")
    streams = SeedStreams(seed)
    blocks_states, blocks_noise = [], []
    for bi, start in enumerate(range(0, n_paths, _PATH_BLOCK)):
        size = min(_PATH_BLOCK, n_paths - start)
        rng = streams.rng(stream, bi)
        if noise_init is None:
            past = sys.stationary_past(size, rng)
            if isinstance(sys.noise, BernoulliKernel):
                past = past.astype(np.int8)
        else:
            p = _coerce_past(sys, noise_init)
            past = np.broadcast_to(p, (size, p.shape[-1])) if p.ndim == 1 else p[start : start + size]
        future = sys.noise_future(np.asarray(past), horizon, rng)
        full = np.concatenate([np.asarray(past).astype(future.dtype), future], axis=-1)
        if isinstance(x0, str):
            if x0 not in ("noise", "anti"):
                raise ValidationError("x0 string must be 'noise' or 'anti'")
            xs = full[:, past.shape[-1] - 1]
            xs = 1 - xs if x0 == "anti" else xs
        else:
            xa = np.asarray(x0)
            xs = np.broadcast_to(xa, (size,)) if xa.ndim == 0 else xa[start : start + size]
        xs = np.asarray(xs, dtype=np.int8 if sys.update.discrete else float)
        blocks_states.append(_run_states(sys, xs, full, past.shape[-1]))
        blocks_noise.append(full)
    return TrajectoryEnsemble(np.concatenate(blocks_states), np.concatenate(blocks_noise), int(seed), stream)


# ---------------------------------------------------------------------------
# Krylov-Bogoliubov averaging


@dataclass
class EmpiricalMeasure:
    """Histogram of time-averaged state occupation.

    ``edges`` is None for discrete states, in which case ``support`` lists the
    states and ``probabilities`` their frequencies.
    """

    probabilities: np.ndarray
    edges: np.ndarray | None
    support: np.ndarray | None
    n: int
    doublings: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "probabilities": self.probabilities.tolist(),
            "edges": None if self.edges is None else self.edges.tolist(),
            "support": None if self.support is None else self.support.tolist(),
            "doublings": self.doublings,
        }


def ks_statistic(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of ``samples`` and ``cdf``."""
    return float(stats.kstest(np.asarray(samples, dtype=float).ravel(), cdf).statistic)


def _measure(values: np.ndarray, bins, discrete: bool, reference_cdf, n_doublings: int) -> EmpiricalMeasure:
    n = values.size
    if discrete:
        support = np.unique(values) if not isinstance(bins, (list, tuple, np.ndarray)) else np.asarray(bins)
        probs = np.array([np.mean(values == s) for s in support])
        edges = None
    else:
        counts, edges = np.histogram(values, bins=bins)
        probs = counts / max(n, 1)
        support = None
    doublings = []
    m = n
    sizes = []
    for _ in range(n_doublings):
        if m < 1:
            break
        sizes.append(m)
        m //= 2
    for m in sorted(sizes):
        entry: dict[str, Any] = {"N": int(m)}
        part = values[:m]
        if reference_cdf is not None and not discrete:
            entry["ks"] = ks_statistic(part, reference_cdf)
        if discrete:
            entry["frequencies"] = [float(np.mean(part == s)) for s in support]
        doublings.append(entry)
    return EmpiricalMeasure(probs, edges, support, int(n), doublings)


def krylov_bogoliubov(
    sys: SkewSystem,
    x0,
    noise_init,
    N: int,
    bins=50,
    seed=0,
    reference_cdf=None,
    n_doublings: int = 6,
) -> EmpiricalMeasure:
    """Cesaro average ``(1/N) sum_{n=1}^{N} delta_{x_n}`` along one trajectory.

    Statistics are also reported for the prefixes ``N, N/2, N/4, ...`` so that
    convergence can be judged; with ``reference_cdf`` each prefix gets a
    Kolmogorov-Smirnov distance.
    """
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ValidationError("N must be a positive integer")
    traj = evolve(sys, x0, noise_init, int(N), seed)
    values = traj.states[1:]
    return _measure(values, bins, sys.update.discrete, reference_cdf, n_doublings)


def krylov_bogoliubov_ensemble(
    sys: SkewSystem, x0, N: int, n_paths: int, bins=50, seed=0, noise_init=None, reference_cdf=None
) -> EmpiricalMeasure:
    """Average of ``(1/N) sum_n Q^n mu`` estimated over independent paths."""
    ens = evolve_ensemble(sys, x0, N, n_paths, seed, noise_init)
    values = ens.states[:, 1:].T.ravel()  # time-major so prefixes are early times
    return _measure(values, bins, sys.update.discrete, reference_cdf, 1)


# ---------------------------------------------------------------------------
# binary example: exact block laws


@dataclass(frozen=True, eq=False)
class BlockLaw:
    """Law of ``(x_1, ..., x_k)`` on {0,1}^k; index = binary number with x_1 most significant."""

    k: int
    probabilities: np.ndarray

    def prob(self, block: Sequence[int]) -> float:
        idx = 0
        for b in block:
            idx = 2 * idx + int(b)
        return float(self.probabilities[idx])

    def to_dict(self) -> dict:
        return {"k": self.k, "probabilities": self.probabilities.tolist()}


def _all_bits(n: int) -> np.ndarray:
    # rows enumerate {0,1}^n, column 0 most significant
    codes = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def binary_example_blocks(p: float, which: str, k: int) -> BlockLaw:
    """Exact block law under one of the two extremal invariant measures.

    Enumerates every noise block ``(w_0, ..., w_k)`` with Bernoulli weights,
    starts at ``x_0 = w_0`` (``aligned``) or ``x_0 = 1 - w_0`` (``anti``) and
    runs the update map.
    """
    BernoulliKernel(p)
    if which not in ("aligned", "anti"):
        raise ValidationError("which must be 'aligned' or 'anti'")
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValidationError("block length must be a positive integer")
    if k > MAX_BLOCK:
        raise BlockTooLong(f"block length {k} exceeds the enumeration budget {MAX_BLOCK}")
    w = _all_bits(k + 1)
    weight = np.prod(np.where(w == 0, p, 1.0 - p), axis=1)
    upd = BinaryExample()
    x = w[:, 0] if which == "aligned" else 1 - w[:, 0]
    code = np.zeros(w.shape[0], dtype=np.int64)
    for t in range(1, k + 1):
        x = upd(x, np.stack([w[:, t], w[:, t - 1]], axis=-1))
        code = 2 * code + x
    probs = np.bincount(code, weights=weight, minlength=1 << k)
    return BlockLaw(int(k), probs)


def block_tv(first: BlockLaw, second: BlockLaw) -> float:
    """Total variation between two block laws of the same length."""
    if first.k != second.k:
        raise ValidationError("block laws have different lengths")
    return 0.5 * float(np.sum(np.abs(first.probabilities - second.probabilities)))


# ---------------------------------------------------------------------------
# two-point motion


@dataclass
class TwoPointMotion:
    x: np.ndarray
    y: np.ndarray

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.x.astype(float) - self.y.astype(float))

    def summary(self) -> dict:
        d = self.distance
        return {
            "horizon": int(d.shape[1] - 1),
            "n_paths": int(d.shape[0]),
            "mean_distance": d.mean(axis=0).tolist(),
            "max_distance": d.max(axis=0).tolist(),
            "fraction_equal": (d == 0).mean(axis=0).tolist(),
        }


def two_point_motion(sys: SkewSystem, x0, y0, horizon: int, n_paths: int, seed: int, noise_init=None) -> TwoPointMotion:
    """Run two initial states with the same noise realisation on every path."""
    ens = evolve_ensemble(sys, 0, horizon, n_paths, seed, noise_init, stream="two_point")
    past_len = ens.noise.shape[1] - horizon
    dtype = np.int8 if sys.update.discrete else float
    xs = np.broadcast_to(np.asarray(x0, dtype=dtype), (ens.n_paths,))
    ys = np.broadcast_to(np.asarray(y0, dtype=dtype), (ens.n_paths,))
    x = _run_states(sys, xs, ens.noise, past_len)
    y = _run_states(sys, ys, ens.noise, past_len)
    return TwoPointMotion(x, y)
