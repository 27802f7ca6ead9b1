"""Ergodic-average estimators of the relative entropy rate and the path-space FIM.

Two families, for jump processes (time-weighted by the holding times
``dtau_i``) and for discrete-time chains (weight 1 per step):

* ``H1``/``F1`` average, at every visited state, the full conditional
  expectation over all possible transitions. They need the complete set of
  outgoing transitions and have the lower variance.
* ``H2``/``F2`` only evaluate the transition that actually occurred, so
  they apply to any model with a computable transition density.

Estimators are hooks fed by :func:`pathsens.simulate.run`; the functional
wrappers ``rer_ctmc_h1`` and friends apply the same hooks to a stored
trajectory. One RER hook evaluates many perturbation directions in a
single pass over one unperturbed trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (AbsoluteContinuityError, ChainTrajectory, ConfigError, DimensionError, FimAccumulator,
                   JumpTrajectory, ParameterVector, Perturbation, RerAccumulator, WeightedMean)
from .models.base import ChainModel, JumpModel, check_support
from .simulate import PairBatch, TransitionBatch, trajectory_batches

# --------------------------------------------------------------------------
# estimate records


@dataclass
class RerEstimate:
    direction: str
    vector: list
    estimate: float
    std_error: float
    samples: int
    horizon: float

    def to_json(self) -> dict:
        return {"direction": self.direction, "vector": list(self.vector), "estimate": self.estimate,
                "std_error": self.std_error, "samples": self.samples, "horizon": self.horizon}


@dataclass
class FimEstimate:
    matrix: np.ndarray
    std_error: np.ndarray
    names: tuple
    samples: int
    horizon: float

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def to_json(self) -> dict:
        return {"k": self.k, "names": list(self.names), "matrix": self.matrix.ravel().tolist(),
                "std_error": self.std_error.ravel().tolist(), "samples": self.samples, "horizon": self.horizon}


# --------------------------------------------------------------------------
# shared machinery


def _as_perturbations(directions, k: int) -> list[Perturbation]:
    if isinstance(directions, (Perturbation, np.ndarray)) or (
            len(directions) and np.isscalar(directions[0])):
        directions = [directions]
    out = []
    for d in directions:
        p = d if isinstance(d, Perturbation) else Perturbation(np.asarray(d, dtype=float))
        if p.k != k:
            raise DimensionError(f"perturbation {p.label} has {p.k} components, the model has {k}")
        out.append(p)
    return out


@dataclass
class _Trace:
    """Running-estimate checkpoints: every ``every`` samples, or geometric (x2) spacing."""

    every: int | None = None
    next_at: int = 0
    points: list = field(default_factory=list)

    def __post_init__(self):
        if not self.next_at:
            self.next_at = self.every or 1

    def checkpoints(self, start: int, n: int) -> np.ndarray:
        """Sample counts (1-based, cumulative) inside ``(start, start + n]`` to record."""
        out = []
        while self.next_at <= start + n:
            out.append(self.next_at)
            self.next_at = self.next_at + self.every if self.every else 2 * self.next_at
        return np.array(out, dtype=np.int64)


class _Hook:
    """Weighted accumulation of per-transition samples with optional traces."""

    kind = ""
    continuous = True

    def __init__(self, shape_list: Sequence[tuple], n_batches: int, trace_every: int | None, trace: bool,
                 scale: float = 1.0):
        self.accs = [WeightedMean(s, n_batches) for s in shape_list]
        self.trace = _Trace(trace_every) if (trace or trace_every) else None
        self.clock = 0.0
        self.scale = float(scale)

    def _feed(self, samples: list[np.ndarray], weights: np.ndarray, clock: np.ndarray) -> None:
        start = self.accs[0].count
        if self.trace is not None:
            cps = self.trace.checkpoints(start, weights.size)
            if cps.size:
                idx = cps - start - 1
                cw = np.cumsum(weights)[idx]
                row = [float(clock[i]) for i in idx]
                vals = []
                for acc, xs in zip(self.accs, samples):
                    part = np.cumsum(weights.reshape((-1,) + (1,) * (xs.ndim - 1)) * xs, axis=0)[idx]
                    tot = acc.total_weight + cw
                    with np.errstate(invalid="ignore", divide="ignore"):
                        v = (acc.weighted_sum + part) / tot.reshape((-1,) + (1,) * (xs.ndim - 1))
                    vals.append(v * self.scale)
                for j, t in enumerate(row):
                    self.trace.points.append((t, [v[j] for v in vals]))
        for acc, xs in zip(self.accs, samples):
            acc.add_many(xs, weights)

    def trace_points(self) -> list[tuple[float, list]]:
        return [] if self.trace is None else list(self.trace.points)

    @property
    def samples(self) -> int:
        return self.accs[0].count


def _horizon(hook) -> float:
    return hook.accs[0].total_weight if hook.continuous else float(hook.accs[0].count)


class _RerHook(_Hook):
    def __init__(self, model, theta, directions, n_batches, trace_every, trace, scale=1.0):
        self.model = model
        self.theta = np.asarray(theta, dtype=float)
        model.check_admissible(self.theta)
        self.directions = _as_perturbations(directions, model.k)
        self.thetas_eps = []
        for d in self.directions:
            te = self.theta + d.vector
            try:
                model.check_admissible(te)
            except ConfigError as exc:
                raise ConfigError(f"direction {d.label} leaves the admissible region: {exc}") from None
            self.thetas_eps.append(te)
        super().__init__([()] * len(self.directions), n_batches, trace_every, trace, scale)

    def estimates(self) -> list[RerEstimate]:
        return [RerEstimate(d.label, d.vector.tolist(), acc.estimate() * self.scale,
                            acc.std_error() * self.scale, acc.count, _horizon(self))
                for d, acc in zip(self.directions, self.accs)]

    def estimate(self, i: int = 0) -> float:
        return self.accs[i].estimate() * self.scale

    def std_error(self, i: int = 0) -> float:
        return self.accs[i].std_error() * self.scale

    def replica_values(self) -> np.ndarray:
        return np.array([acc.estimate() * self.scale for acc in self.accs])


class _FimHook(_Hook):
    def __init__(self, model, theta, n_batches, trace_every, trace, scale=1.0):
        self.model = model
        self.theta = np.asarray(theta, dtype=float)
        model.check_admissible(self.theta)
        super().__init__([(model.k, model.k)], n_batches, trace_every, trace, scale)

    def estimate(self) -> np.ndarray:
        est = self.accs[0].estimate() * self.scale
        return 0.5 * (est + est.T)

    def std_error(self) -> np.ndarray:
        se = self.accs[0].std_error() * self.scale
        return 0.5 * (se + se.T)

    def result(self) -> FimEstimate:
        names = tuple(getattr(self.model, "param_names", ()))
        return FimEstimate(self.estimate(), self.std_error(), names, self.samples, _horizon(self))


# --------------------------------------------------------------------------
# jump processes


def _rer_integrand(c: np.ndarray, ce: np.ndarray) -> np.ndarray:
    """Sum over channels of ``c log(c / ce)`` minus ``(lambda - lambda_eps)``, per row."""
    pos = c > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, c * np.log(np.where(pos, c, 1.0) / np.where(pos, ce, 1.0)), 0.0)
    return terms.sum(axis=1) - (c.sum(axis=1) - ce.sum(axis=1))


class CtmcRerH1(_RerHook):
    """``(1/T) sum dtau_i [sum_s' c log(c/c_eps) - (lambda - lambda_eps)](sigma_i)``."""

    kind = "rer_ctmc_h1"

    def __init__(self, model: JumpModel, theta, directions, *, n_batches=32, trace_every=None, trace=False):
        super().__init__(model, theta, directions, n_batches, trace_every, trace)

    def update(self, batch: TransitionBatch) -> None:
        c = self.model.rates(batch.digests, self.theta)
        samples = []
        for te in self.thetas_eps:
            ce = self.model.rates(batch.digests, te)
            check_support(c, ce, batch.digests, self.model.channel_names)
            samples.append(_rer_integrand(c, ce))
        self._feed(samples, batch.waits, batch.t_start + np.cumsum(batch.waits))


class CtmcRerH2(_RerHook):
    """Realized-jump RER: ``(1/T) [sum_jumps log(c/c_eps) - sum dtau_i (lambda - lambda_eps)]``.

    With ``jump_average="count"`` the log term is instead divided by the
    number of jumps ``n`` (then the two terms use different normalizations
    and the estimate is biased by the mean jump rate unless it equals 1).
    """

    kind = "rer_ctmc_h2"

    def __init__(self, model: JumpModel, theta, directions, *, n_batches=32, trace_every=None, trace=False,
                 jump_average: str = "time"):
        if jump_average not in ("time", "count"):
            raise ConfigError("jump_average must be 'time' or 'count'")
        self.jump_average = jump_average
        super().__init__(model, theta, directions, n_batches, trace_every, trace)
        if jump_average == "count":
            self._logs = [0.0] * len(self.directions)
            self._jumps = 0
            self._rate_accs = [RerAccumulator(n_batches) for _ in self.directions]

    def update(self, batch: TransitionBatch) -> None:
        c = self.model.rates(batch.digests, self.theta)
        fired = batch.channels >= 0
        rows = np.flatnonzero(fired)
        ch = batch.channels[rows]
        lam = c.sum(axis=1)
        samples = []
        for i, te in enumerate(self.thetas_eps):
            ce = self.model.rates(batch.digests, te)
            cj, cej = c[rows, ch], ce[rows, ch]
            if np.any(cej <= 0):
                r = rows[np.argmax(cej <= 0)]
                name = self.model.channel_names[batch.channels[r]]
                raise AbsoluteContinuityError(
                    f"realized channel {name} has zero rate under theta+eps at digest {batch.digests[r].tolist()}")
            logs = np.zeros(batch.waits.size)
            logs[rows] = np.log(cj / cej)
            if self.jump_average == "time":
                samples.append(logs / batch.waits - (lam - ce.sum(axis=1)))
            else:
                self._logs[i] += math.fsum(logs)
                self._rate_accs[i].add_many(-(lam - ce.sum(axis=1)), batch.waits)
                samples.append(logs / batch.waits - (lam - ce.sum(axis=1)))
        if self.jump_average == "count":
            self._jumps += rows.size
        self._feed(samples, batch.waits, batch.t_start + np.cumsum(batch.waits))

    def estimate(self, i: int = 0) -> float:
        if self.jump_average == "time":
            return super().estimate(i)
        return self._logs[i] / self._jumps + self._rate_accs[i].estimate()

    def estimates(self) -> list[RerEstimate]:
        out = super().estimates()
        if self.jump_average == "count":
            for i, e in enumerate(out):
                e.estimate = self.estimate(i)
        return out


class CtmcFimH1(_FimHook):
    """``(1/T) sum dtau_i sum_s' c grad log c grad log c^T``."""

    kind = "fim_ctmc_h1"

    def __init__(self, model: JumpModel, theta, *, n_batches=32, trace_every=None, trace=False):
        super().__init__(model, theta, n_batches, trace_every, trace)

    def update(self, batch: TransitionBatch) -> None:
        c = self.model.rates(batch.digests, self.theta)
        g = self.model.log_rate_gradients(batch.digests, self.theta)
        if not np.all(np.isfinite(g[c > 0])):
            raise ValueError("rate gradient undefined on a transition with positive rate")
        x = np.einsum("nc,nci,ncj->nij", c, g, g)
        self._feed([x], batch.waits, batch.t_start + np.cumsum(batch.waits))


class CtmcFimH2(_FimHook):
    """``(1/T) sum_jumps grad log c grad log c^T`` at the realized transitions."""

    kind = "fim_ctmc_h2"

    def __init__(self, model: JumpModel, theta, *, n_batches=32, trace_every=None, trace=False):
        super().__init__(model, theta, n_batches, trace_every, trace)

    def update(self, batch: TransitionBatch) -> None:
        rows = np.flatnonzero(batch.channels >= 0)
        g = self.model.log_rate_gradients(batch.digests[rows], self.theta)
        gj = g[np.arange(rows.size), batch.channels[rows]]
        if not np.all(np.isfinite(gj)):
            raise ValueError("rate gradient undefined on a realized transition")
        x = np.zeros((batch.waits.size, self.model.k, self.model.k))
        x[rows] = np.einsum("ni,nj->nij", gj, gj) / batch.waits[rows, None, None]
        self._feed([x], batch.waits, batch.t_start + np.cumsum(batch.waits))


# --------------------------------------------------------------------------
# discrete-time chains


def _chain_scale(model, per_unit_time: bool) -> float:
    return 1.0 / float(getattr(model, "time_step", 1.0)) if per_unit_time else 1.0


def _require_enumerable(model: ChainModel) -> None:
    if not getattr(model, "enumerable", False):
        raise ConfigError(f"{type(model).__name__} has no enumerable target set; "
                          "use the H2 (realized-transition) estimators")


class ChainRerH1(_RerHook):
    """``(1/n) sum_i sum_s' p log(p / p_eps)(sigma_i, s')``."""

    kind = "rer_chain_h1"
    continuous = False

    def __init__(self, model: ChainModel, theta, directions, *, n_batches=32, trace_every=None, trace=False,
                 per_unit_time=False):
        _require_enumerable(model)
        super().__init__(model, theta, directions, n_batches, trace_every, trace, _chain_scale(model, per_unit_time))

    def update(self, batch: PairBatch) -> None:
        p = self.model.transition_rows(batch.prev, self.theta)
        samples = []
        for te in self.thetas_eps:
            pe = self.model.transition_rows(batch.prev, te)
            check_support(p, pe, batch.prev)
            pos = p > 0
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(pos, p * np.log(np.where(pos, p, 1.0) / np.where(pos, pe, 1.0)), 0.0)
            samples.append(t.sum(axis=1))
        n = len(batch)
        self._feed(samples, np.ones(n), batch.index_start + np.arange(1, n + 1, dtype=float))


class ChainRerH2(_RerHook):
    """``(1/n) sum_i log(p / p_eps)(sigma_i, sigma_{i+1})``."""

    kind = "rer_chain_h2"
    continuous = False

    def __init__(self, model: ChainModel, theta, directions, *, n_batches=32, trace_every=None, trace=False,
                 per_unit_time=False):
        super().__init__(model, theta, directions, n_batches, trace_every, trace, _chain_scale(model, per_unit_time))

    def update(self, batch: PairBatch) -> None:
        lp = self.model.log_density(batch.prev, batch.nxt, self.theta)
        samples = []
        for te in self.thetas_eps:
            lpe = self.model.log_density(batch.prev, batch.nxt, te)
            bad = ~np.isfinite(lpe) & np.isfinite(lp)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise AbsoluteContinuityError(
                    f"realized transition {batch.prev[i].tolist()} -> {batch.nxt[i].tolist()} "
                    "has zero density under theta+eps")
            samples.append(lp - lpe)
        n = len(batch)
        self._feed(samples, np.ones(n), batch.index_start + np.arange(1, n + 1, dtype=float))


class ChainFimH1(_FimHook):
    """``(1/n) sum_i sum_s' p grad log p grad log p^T (sigma_i, s')``."""

    kind = "fim_chain_h1"
    continuous = False

    def __init__(self, model: ChainModel, theta, *, n_batches=32, trace_every=None, trace=False,
                 per_unit_time=False):
        _require_enumerable(model)
        super().__init__(model, theta, n_batches, trace_every, trace, _chain_scale(model, per_unit_time))

    def update(self, batch: PairBatch) -> None:
        p = self.model.transition_rows(batch.prev, self.theta)
        g = self.model.transition_row_log_gradients(batch.prev, self.theta)
        x = np.einsum("ns,nsi,nsj->nij", p, g, g)
        n = len(batch)
        self._feed([x], np.ones(n), batch.index_start + np.arange(1, n + 1, dtype=float))


class ChainFimH2(_FimHook):
    """``(1/n) sum_i grad log p grad log p^T (sigma_i, sigma_{i+1})``."""

    kind = "fim_chain_h2"
    continuous = False

    def __init__(self, model: ChainModel, theta, *, n_batches=32, trace_every=None, trace=False,
                 per_unit_time=False):
        super().__init__(model, theta, n_batches, trace_every, trace, _chain_scale(model, per_unit_time))

    def update(self, batch: PairBatch) -> None:
        g = self.model.log_density_gradient(batch.prev, batch.nxt, self.theta)
        if not np.all(np.isfinite(g)):
            raise ValueError("log-density gradient is not finite on a realized transition")
        x = np.einsum("ni,nj->nij", g, g)
        n = len(batch)
        self._feed([x], np.ones(n), batch.index_start + np.arange(1, n + 1, dtype=float))


# --------------------------------------------------------------------------
# functional forms over stored trajectories


def _apply(hook, traj):
    for batch in trajectory_batches(traj):
        hook.update(batch)
    return hook


def _single(hook) -> RerEstimate:
    return hook.estimates()[0]


def rer_ctmc_h1(traj: JumpTrajectory, model: JumpModel, theta, eps, **kw) -> RerEstimate:
    return _single(_apply(CtmcRerH1(model, theta, eps, **kw), traj))


def rer_ctmc_h2(traj: JumpTrajectory, model: JumpModel, theta, eps, **kw) -> RerEstimate:
    return _single(_apply(CtmcRerH2(model, theta, eps, **kw), traj))


def fim_ctmc_h1(traj: JumpTrajectory, model: JumpModel, theta, **kw) -> FimEstimate:
    return _apply(CtmcFimH1(model, theta, **kw), traj).result()


def fim_ctmc_h2(traj: JumpTrajectory, model: JumpModel, theta, **kw) -> FimEstimate:
    return _apply(CtmcFimH2(model, theta, **kw), traj).result()


def rer_chain_h1(traj: ChainTrajectory, model: ChainModel, theta, eps, **kw) -> RerEstimate:
    return _single(_apply(ChainRerH1(model, theta, eps, **kw), traj))


def rer_chain_h2(traj: ChainTrajectory, model: ChainModel, theta, eps, **kw) -> RerEstimate:
    return _single(_apply(ChainRerH2(model, theta, eps, **kw), traj))


def fim_chain_h1(traj: ChainTrajectory, model: ChainModel, theta, **kw) -> FimEstimate:
    return _apply(ChainFimH1(model, theta, **kw), traj).result()


def fim_chain_h2(traj: ChainTrajectory, model: ChainModel, theta, **kw) -> FimEstimate:
    return _apply(ChainFimH2(model, theta, **kw), traj).result()


# --------------------------------------------------------------------------
# quadratic approximation and logarithmic scale


def _vec(eps) -> np.ndarray:
    return eps.vector if isinstance(eps, Perturbation) else np.asarray(eps, dtype=float).ravel()


def rer_quadratic(eps, fim) -> float:
    """Second-order RER ``0.5 eps^T F eps``."""
    e = _vec(eps)
    F = np.asarray(fim, dtype=float)
    if F.shape != (e.size, e.size):
        raise DimensionError(f"FIM of shape {F.shape} does not match a perturbation of length {e.size}")
    return 0.5 * float(e @ F @ e)


def _theta_values(theta) -> np.ndarray:
    return theta.values if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float).ravel()


def log_scale_fim(fim, theta) -> np.ndarray:
    """Information matrix with respect to ``log theta``: ``theta_i theta_j F_ij``."""
    th = _theta_values(theta)
    F = np.asarray(fim, dtype=float)
    if F.shape != (th.size, th.size):
        raise DimensionError(f"FIM of shape {F.shape} does not match {th.size} parameters")
    if not np.all(th > 0):
        raise ConfigError("logarithmic scale needs strictly positive parameters")
    return F * np.outer(th, th)


def log_scale_perturbation(eps, theta) -> np.ndarray:
    """The original-scale perturbation ``theta . eps`` (component-wise product)."""
    th = _theta_values(theta)
    e = _vec(eps)
    if e.size != th.size:
        raise DimensionError(f"perturbation of length {e.size} for {th.size} parameters")
    return th * e
