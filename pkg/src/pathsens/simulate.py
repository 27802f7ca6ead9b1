"""Stationary-regime trajectory generation.

Drivers produce the post burn-in transition stream in batches of at most
:data:`~pathsens.core.CHUNK` transitions and hand every batch, in order,
to passive estimator hooks. A batch is a :class:`TransitionBatch` for jump
processes (held state digests, holding times, fired channels) or a
:class:`PairBatch` for discrete-time chains (consecutive state pairs).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence

import numpy as np

from .core import CHUNK, ChainTrajectory, ConfigError, JumpTrajectory, RngStream
from .models.base import ChainModel, JumpModel
from .models.langevin import LangevinModel, LangevinState, random_initial_state


@dataclass
class TransitionBatch:
    """A slice of a jump trajectory; ``channels == -1`` marks a horizon-cut hold."""

    digests: np.ndarray
    waits: np.ndarray
    channels: np.ndarray
    t_start: float
    index_start: int

    def __len__(self) -> int:
        return self.waits.size


@dataclass
class PairBatch:
    """Consecutive state pairs ``(prev[i], nxt[i])`` of a chain."""

    prev: np.ndarray
    nxt: np.ndarray
    index_start: int

    def __len__(self) -> int:
        return self.prev.shape[0]


class Hook(Protocol):
    def update(self, batch) -> None:
        ...


def _uniforms_open_closed(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws on (0, 1], so ``-log(u)`` is always finite."""
    return 1.0 - gen.random(shape)


class SsaDriver:
    """Gillespie simulation of a :class:`JumpModel` at parameters ``theta``.

    Burn-in runs until time ``burn_in``; the hold in progress at that time
    is discarded and, by memorylessness, restarted. The horizon is a
    simulated time ``horizon_time`` after burn-in, or a number of jumps
    ``horizon_jumps``, whichever comes first.
    """

    def __init__(self, model: JumpModel, theta, state, rng: RngStream, *, burn_in: float = 0.0,
                 horizon_time: float | None = None, horizon_jumps: int | None = None):
        if horizon_time is None and horizon_jumps is None:
            raise ConfigError("an SSA run needs a time or jump-count horizon")
        if horizon_time is not None and not horizon_time > 0:
            raise ConfigError("time horizon must be positive")
        if horizon_jumps is not None and not horizon_jumps > 0:
            raise ConfigError("jump horizon must be positive")
        if not burn_in >= 0:
            raise ConfigError("burn-in must be non-negative")
        model.check_admissible(theta)
        self.model = model
        self.theta = np.asarray(theta, dtype=float)
        self.state = state
        self.rng = rng
        self.burn_in = float(burn_in)
        self.horizon_time = math.inf if horizon_time is None else float(horizon_time)
        self.horizon_jumps = horizon_jumps
        self.time = 0.0

    def batches(self) -> Iterator[TransitionBatch]:
        gen = self.rng.generator()
        nu = self.model.n_uniforms
        state, t = self.state, 0.0
        while t < self.burn_in:
            adv = self.model.advance(state, self.theta, _uniforms_open_closed(gen, (CHUNK, nu)), t,
                                     self.burn_in, CHUNK)
            state, t = adv.state, adv.time
        t0 = t
        t_stop = t0 + self.horizon_time
        jumps = 0
        index = 0
        while True:
            budget = CHUNK if self.horizon_jumps is None else min(CHUNK, self.horizon_jumps - jumps)
            if budget <= 0:
                break
            adv = self.model.advance(state, self.theta, _uniforms_open_closed(gen, (CHUNK, nu)), t,
                                     t_stop, budget)
            n = adv.waits.size
            if n:
                yield TransitionBatch(adv.digests, adv.waits, adv.channels, t - t0, index)
            index += n
            jumps += int(np.count_nonzero(adv.channels >= 0))
            state, t = adv.state, adv.time
            self.state, self.time = state, t - t0
            if adv.stopped:
                break


class ChainDriver:
    """Simulation of a :class:`ChainModel` for ``n_steps`` after ``burn_in_steps``."""

    def __init__(self, model: ChainModel, theta, state, rng: RngStream, *, n_steps: int,
                 burn_in_steps: int = 0):
        if not n_steps > 0:
            raise ConfigError("number of steps must be positive")
        if not burn_in_steps >= 0:
            raise ConfigError("burn-in must be non-negative")
        model.check_admissible(theta)
        self.model = model
        self.theta = np.asarray(theta, dtype=float)
        self.state = state
        self.rng = rng
        self.n_steps = int(n_steps)
        self.burn_in_steps = int(burn_in_steps)

    def batches(self) -> Iterator[PairBatch]:
        gen = self.rng.generator()
        state = self.state
        left = self.burn_in_steps
        while left > 0:
            m = min(CHUNK, left)
            state = self.model.advance(state, self.theta, gen, m)[-1]
            left -= m
        done = 0
        while done < self.n_steps:
            m = min(CHUNK, self.n_steps - done)
            path = self.model.advance(state, self.theta, gen, m)
            yield PairBatch(path[:-1], path[1:], done)
            state = path[-1]
            done += m
            self.state = state


class BbkDriver(ChainDriver):
    """BBK-discretized Langevin dynamics; horizon and burn-in given in time units."""

    def __init__(self, model: LangevinModel, theta, state, rng: RngStream, *, horizon_time: float,
                 burn_in_time: float = 0.0):
        dt = model.settings.dt
        if state is None:
            # initial condition from a stream disjoint from every replica's noise stream
            init = rng.child(rng.stream_id + (1 << 32)).generator()
            state = random_initial_state(model.settings, init, r_e=float(np.asarray(theta)[2]))
        if isinstance(state, LangevinState):
            state = state.as_vector()
        super().__init__(model, theta, state, rng, n_steps=int(round(horizon_time / dt)),
                         burn_in_steps=int(round(burn_in_time / dt)))


@dataclass
class RunResult:
    trajectory: JumpTrajectory | ChainTrajectory | None
    n_transitions: int
    horizon: float
    final_state: object
    partial: bool = False
    error: BaseException | None = None
    hooks: Sequence = field(default_factory=tuple)


def run(driver: SsaDriver | ChainDriver, hooks: Sequence = (), store: bool = False) -> RunResult:
    """Drive a simulation, feeding every post burn-in batch to each hook in order.

    A hook raising an exception stops the run; the result then carries
    ``partial=True`` and the exception, and hooks keep what they saw.
    Simulation errors (e.g. an absorbing state) propagate.
    """
    stored = []
    n = 0
    horizon = 0.0
    partial, error = False, None
    jump = isinstance(driver, SsaDriver)
    for batch in driver.batches():
        if store:
            stored.append(batch)
        n += len(batch)
        horizon = (batch.t_start + math.fsum(batch.waits)) if jump else float(n)
        try:
            for h in hooks:
                h.update(batch)
        except Exception as exc:  # noqa: BLE001 - surfaced to the caller as a partial result
            partial, error = True, exc
            break
    traj = None
    if store and stored:
        if jump:
            traj = JumpTrajectory(np.concatenate([b.digests for b in stored]),
                                  np.concatenate([b.waits for b in stored]),
                                  np.concatenate([b.channels for b in stored]))
        else:
            traj = ChainTrajectory(np.concatenate([stored[0].prev[:1]] + [b.nxt for b in stored]))
    return RunResult(traj, n, horizon, driver.state, partial, error, tuple(hooks))


def trajectory_batches(traj: JumpTrajectory | ChainTrajectory) -> Iterator[TransitionBatch | PairBatch]:
    """Re-slice a stored trajectory exactly as the drivers emit it."""
    if isinstance(traj, JumpTrajectory):
        t = 0.0
        for s in range(0, len(traj), CHUNK):
            sl = slice(s, s + CHUNK)
            b = TransitionBatch(traj.digests[sl], traj.waits[sl], traj.channels[sl], t, s)
            t += math.fsum(b.waits)
            yield b
    else:
        X = traj.states
        for s in range(0, traj.n_steps, CHUNK):
            e = min(s + CHUNK, traj.n_steps)
            yield PairBatch(X[s:e], X[s + 1:e + 1], s)


def write_trajectory_csv(traj: JumpTrajectory, path, channel_names: Sequence[str] = ()) -> None:
    """One row per hold: jump time, state digest (``;``-joined), event id (empty if cut)."""
    times = traj.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "state_digest", "event_id"])
        for t, d, c in zip(times, traj.digests, traj.channels):
            ev = "" if c < 0 else (channel_names[c] if channel_names else str(int(c)))
            w.writerow([repr(float(t)), ";".join(f"{v:g}" for v in d), ev])
