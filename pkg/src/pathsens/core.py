"""Shared types: parameters, perturbations, random streams, trajectories and
running accumulators for ergodic averages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Every driver and every estimator that re-reads a stored trajectory slices
# transitions in blocks of this size, so streamed and stored runs sum in the
# same order.
CHUNK = 1 << 14


class PathSensError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(PathSensError, ValueError):
    pass


class ConfigError(PathSensError, ValueError):
    pass


class AbsoluteContinuityError(PathSensError):
    """A transition allowed under theta is forbidden under theta + eps."""


class AbsorbingStateError(PathSensError):
    """The total jump rate vanished during a simulation."""


class NoDataError(PathSensError):
    pass


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size < 1:
        raise DimensionError(f"{name} must have at least one component")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParameterVector:
    """Model parameters theta with one label per component."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        vals = _as_vector(self.values, "parameter vector")
        names = tuple(self.names or ()) or tuple(f"theta{i}" for i in range(vals.size))
        if len(names) != vals.size:
            raise DimensionError(f"{len(names)} names for {vals.size} parameters")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)

    @property
    def k(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.k

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def perturbed(self, eps: "Perturbation | np.ndarray") -> "ParameterVector":
        vec = eps.vector if isinstance(eps, Perturbation) else _as_vector(eps, "perturbation")
        if vec.size != self.k:
            raise DimensionError(f"perturbation has {vec.size} components, theta has {self.k}")
        return ParameterVector(self.values + vec, self.names)

    def require_positive(self, indices: Sequence[int] | None = None) -> None:
        idx = range(self.k) if indices is None else indices
        bad = [self.names[i] for i in idx if not self.values[i] > 0]
        if bad:
            raise ValueError(f"parameters must be strictly positive: {', '.join(bad)}")

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


@dataclass(frozen=True)
class Perturbation:
    """A perturbation eps of theta; the vector already carries its magnitude."""

    vector: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "vector", _as_vector(self.vector, "perturbation"))
        if not self.label:
            object.__setattr__(self, "label", _describe(self.vector))

    @classmethod
    def axis(cls, k: int, index: int, eps0: float, names: Sequence[str] | None = None) -> "Perturbation":
        """``eps0 * e_index``; a negative ``eps0`` gives the opposite direction."""
        vec = np.zeros(k)
        vec[index] = eps0
        sign = "+" if eps0 >= 0 else "-"
        name = names[index] if names else f"e{index + 1}"
        return cls(vec, f"{sign}{abs(eps0):g}*{name}")

    @property
    def k(self) -> int:
        return self.vector.size

    def is_null(self) -> bool:
        return not np.any(self.vector)


def _describe(vec: np.ndarray) -> str:
    return "[" + ", ".join(f"{v:g}" for v in vec) + "]"


def axis_directions(theta: ParameterVector, eps0: float, both_signs: bool = True) -> list[Perturbation]:
    """The directions +-eps0 e_k for every parameter."""
    out = []
    for i in range(theta.k):
        out.append(Perturbation.axis(theta.k, i, eps0, theta.names))
        if both_signs:
            out.append(Perturbation.axis(theta.k, i, -eps0, theta.names))
    return out


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream_id)``.

    Distinct stream ids are spawned children of the same seed sequence, so
    replicas never share draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


@dataclass
class JumpTrajectory:
    """Post burn-in record of a jump process.

    ``digests[i]`` summarizes the state held for ``waits[i]`` time units;
    ``channels[i]`` is the transition fired at the end of that hold, or -1
    when the hold was cut by the horizon.
    """

    digests: np.ndarray
    waits: np.ndarray
    channels: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        self.digests = np.asarray(self.digests, dtype=float)
        if self.digests.ndim == 1:
            self.digests = self.digests[:, None]
        self.waits = np.asarray(self.waits, dtype=float)
        self.channels = np.asarray(self.channels, dtype=np.int64)
        n = self.waits.size
        if self.digests.shape[0] != n or self.channels.size != n:
            raise DimensionError("digests, waits and channels must have equal length")
        if n and not np.all(self.waits > 0):
            raise ValueError("waiting times must be strictly positive")

    def __len__(self) -> int:
        return self.waits.size

    @property
    def total_time(self) -> float:
        return math.fsum(self.waits)

    @property
    def n_jumps(self) -> int:
        return int(np.count_nonzero(self.channels >= 0))

    def times(self) -> np.ndarray:
        """Jump instants (end of each hold)."""
        return self.start_time + np.cumsum(self.waits)


@dataclass
class ChainTrajectory:
    """Discrete-time path sigma_0 ... sigma_M, one row per state."""

    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.shape[0] < 2:
            raise ValueError("a chain trajectory needs at least two states")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1


class _Kahan:
    """Compensated running sum of arrays of fixed shape."""

    __slots__ = ("total", "comp")

    def __init__(self, shape=()):
        self.total = np.zeros(shape)
        self.comp = np.zeros(shape)

    def add(self, value) -> None:
        y = value - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t

    def copy(self) -> "_Kahan":
        out = _Kahan(self.total.shape)
        out.total = self.total.copy()
        out.comp = self.comp.copy()
        return out


@dataclass
class _Blocks:
    """Fixed-size sample blocks for batch means; sizes double as data grows."""

    shape: tuple
    max_blocks: int = 64
    block_size: int = 64
    sums: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    _fill_n: int = 0
    _fill_s: np.ndarray | None = None
    _fill_w: float = 0.0

    def add(self, xs: np.ndarray, ws: np.ndarray) -> None:
        pos, n = 0, ws.size
        while pos < n:
            if self._fill_s is None:
                self._fill_s = np.zeros(self.shape)
            take = min(self.block_size - self._fill_n, n - pos)
            sl = slice(pos, pos + take)
            self._fill_s = self._fill_s + np.tensordot(ws[sl], xs[sl], axes=(0, 0))
            self._fill_w += float(np.sum(ws[sl]))
            self._fill_n += take
            pos += take
            if self._fill_n == self.block_size:
                self._close()

    def _close(self) -> None:
        self.sums.append(self._fill_s)
        self.weights.append(self._fill_w)
        self._fill_s, self._fill_w, self._fill_n = None, 0.0, 0
        if len(self.sums) >= self.max_blocks:
            self.sums = [a + b for a, b in zip(self.sums[0::2], self.sums[1::2])]
            self.weights = [a + b for a, b in zip(self.weights[0::2], self.weights[1::2])]
            self.block_size *= 2

    def completed(self) -> tuple[list, list]:
        sums, weights = list(self.sums), list(self.weights)
        if self._fill_n:
            sums.append(self._fill_s)
            weights.append(self._fill_w)
        return sums, weights

    def merged(self, other: "_Blocks") -> "_Blocks":
        out = _Blocks(self.shape, self.max_blocks, max(self.block_size, other.block_size))
        s1, w1 = self.completed()
        s2, w2 = other.completed()
        out.sums, out.weights = s1 + s2, w1 + w2
        while len(out.sums) >= out.max_blocks:
            if len(out.sums) % 2:
                out.sums[-2] = out.sums[-2] + out.sums.pop()
                out.weights[-2] = out.weights[-2] + out.weights.pop()
            out.sums = [a + b for a, b in zip(out.sums[0::2], out.sums[1::2])]
            out.weights = [a + b for a, b in zip(out.weights[0::2], out.weights[1::2])]
        return out


class WeightedMean:
    """Single-pass weighted mean of scalar or array samples.

    Keeps compensated sums of ``w`` and ``w*x``, an online weighted second
    moment (per component) and a block record for batch-means standard
    errors. Samples are fed in chunks; within a chunk numpy's pairwise
    summation is used, across chunks the sums are compensated.
    """

    def __init__(self, shape=(), n_batches: int = 32):
        self.shape = tuple(shape)
        self.n_batches = int(n_batches)
        self.count = 0
        self._w = _Kahan()
        self._wx = _Kahan(self.shape)
        self._mean = np.zeros(self.shape)
        self._m2 = np.zeros(self.shape)
        self._blocks = _Blocks(self.shape, max_blocks=2 * self.n_batches)

    def add(self, x, w: float = 1.0) -> None:
        self.add_many(np.asarray(x, dtype=float)[None], np.array([w], dtype=float))

    def add_many(self, xs, ws=None) -> None:
        xs = np.asarray(xs, dtype=float)
        if xs.shape[1:] != self.shape:
            raise DimensionError(f"samples of shape {xs.shape[1:]} fed to accumulator of shape {self.shape}")
        n = xs.shape[0]
        if n == 0:
            return
        ws = np.ones(n) if ws is None else np.asarray(ws, dtype=float).reshape(-1)
        if ws.size != n:
            raise DimensionError(f"{ws.size} weights for {n} samples")
        if np.any(ws < 0) or not np.all(np.isfinite(ws)):
            raise ValueError("weights must be finite and non-negative")
        wsum = float(np.sum(ws))
        wx = np.tensordot(ws, xs, axes=(0, 0))
        if wsum > 0:
            cmean = wx / wsum
            dev = xs - cmean
            cm2 = np.tensordot(ws, dev * dev, axes=(0, 0))
            self._merge_moments(wsum, cmean, cm2)
        self._w.add(wsum)
        self._wx.add(wx)
        self.count += n
        self._blocks.add(xs, ws)

    def _merge_moments(self, wb, mb, m2b) -> None:
        wa = float(self._w.total)
        if wa == 0:
            self._mean, self._m2 = np.array(mb, dtype=float), np.array(m2b, dtype=float)
            return
        tot = wa + wb
        delta = mb - self._mean
        self._mean = self._mean + delta * (wb / tot)
        self._m2 = self._m2 + m2b + delta * delta * (wa * wb / tot)

    @property
    def total_weight(self) -> float:
        return float(self._w.total)

    @property
    def weighted_sum(self) -> np.ndarray:
        return self._wx.total.copy()

    def estimate(self):
        if self.count == 0 or self.total_weight == 0:
            raise NoDataError("no data")
        est = self._wx.total / self._w.total
        return float(est) if self.shape == () else est

    def variance(self):
        """Weighted population variance of the samples."""
        if self.count == 0 or self.total_weight == 0:
            raise NoDataError("no data")
        var = np.maximum(self._m2 / self.total_weight, 0.0)
        return float(var) if self.shape == () else var

    def batch_estimates(self, n_batches: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Per-batch weighted means and batch weights over contiguous batches."""
        nb = self.n_batches if n_batches is None else int(n_batches)
        sums, weights = self._blocks.completed()
        if not sums:
            raise NoDataError("no data")
        groups = np.array_split(np.arange(len(sums)), min(nb, len(sums)))
        bs = np.array([sum(sums[i] for i in g) for g in groups])
        bw = np.array([sum(weights[i] for i in g) for g in groups])
        keep = bw > 0
        bw = bw[keep]
        means = bs[keep] / bw.reshape((-1,) + (1,) * len(self.shape))
        return means, bw

    def std_error(self, n_batches: int | None = None):
        """Non-overlapping batch-means standard error of the estimate."""
        means, bw = self.batch_estimates(n_batches)
        b = means.shape[0]
        if b < 2:
            return float("nan") if self.shape == () else np.full(self.shape, np.nan)
        est = self._wx.total / self._w.total
        rel = (bw / bw.mean()).reshape((-1,) + (1,) * len(self.shape))
        se = np.sqrt(np.sum((rel * (means - est)) ** 2, axis=0) / (b * (b - 1)))
        return float(se) if self.shape == () else se

    def merge(self, other: "WeightedMean") -> "WeightedMean":
        """Accumulator equivalent to having fed both sample streams."""
        if other.shape != self.shape:
            raise DimensionError("cannot merge accumulators of different shapes")
        out = WeightedMean(self.shape, self.n_batches)
        out.count = self.count + other.count
        out._w = self._w.copy()
        out._wx = self._wx.copy()
        out._mean, out._m2 = self._mean.copy(), self._m2.copy()
        if other.total_weight > 0:
            out._merge_moments(other.total_weight, other._mean, other._m2)
        out._w.add(other._w.total)
        out._w.add(-other._w.comp)
        out._wx.add(other._wx.total)
        out._wx.add(-other._wx.comp)
        out._blocks = self._blocks.merged(other._blocks)
        return out


class RerAccumulator(WeightedMean):
    """Running RER estimate (scalar ergodic average)."""

    def __init__(self, n_batches: int = 32):
        super().__init__((), n_batches)


class FimAccumulator(WeightedMean):
    """Running k x k information-matrix estimate."""

    def __init__(self, k: int, n_batches: int = 32):
        super().__init__((k, k), n_batches)
        self.k = k

    def estimate(self) -> np.ndarray:
        est = super().estimate()
        return 0.5 * (est + est.T)


def accumulate(acc: WeightedMean, sample, weight: float = 1.0) -> WeightedMean:
    acc.add(sample, weight)
    return acc
