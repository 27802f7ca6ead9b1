"""Model abstractions for jump processes and discrete-time chains."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..core import AbsoluteContinuityError, AbsorbingStateError, ConfigError


@dataclass
class Advance:
    """Records produced by one call to :meth:`JumpModel.advance`.

    ``channels`` holds -1 for a final hold cut at ``t_stop``.
    """

    digests: np.ndarray
    waits: np.ndarray
    channels: np.ndarray
    state: object
    time: float
    stopped: bool


class JumpModel(ABC):
    """A continuous-time Markov jump process described by transition channels.

    A channel is either a single transition sigma -> sigma' or a group of
    transitions whose rates share the same parameter dependence up to a
    theta-independent factor. Under that rule the relative entropy rate
    and the information matrix computed per channel coincide with the
    ones computed per state transition.

    States are summarized by a ``digest`` (a short float vector) from which
    every channel rate can be evaluated for any theta; estimators only ever
    see digests.
    """

    param_names: tuple[str, ...] = ()
    channel_names: tuple[str, ...] = ()
    digest_names: tuple[str, ...] = ()
    #: uniforms consumed per SSA step: wait, selection, then model extras
    n_uniforms: int = 2

    @property
    def k(self) -> int:
        return len(self.param_names)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @abstractmethod
    def rates(self, digests: np.ndarray, theta) -> np.ndarray:
        """Channel rates, shape ``(n, n_channels)``."""

    @abstractmethod
    def log_rate_gradients(self, digests: np.ndarray, theta) -> np.ndarray:
        """grad_theta log c for every channel, shape ``(n, n_channels, k)``.

        Rows for channels with zero rate are zero.
        """

    @abstractmethod
    def digest(self, state) -> np.ndarray:
        ...

    @abstractmethod
    def fire(self, state, channel: int, u_within: float, extra: np.ndarray):
        """Apply ``channel`` and return the new state.

        ``u_within`` in (0, 1] locates the selection threshold inside the
        channel's rate, for channels that group several transitions.
        """

    def check_admissible(self, theta) -> None:
        """Raise :class:`ConfigError` when theta leaves the model's domain."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.k:
            raise ConfigError(f"expected {self.k} parameters {self.param_names}, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise ConfigError("parameters must be finite")

    def total_rates(self, digests, theta) -> np.ndarray:
        return self.rates(digests, theta).sum(axis=1)

    def advance(self, state, theta, uniforms: np.ndarray, t: float, t_stop: float,
                max_jumps: int) -> Advance:
        """Run SSA steps, one row of ``uniforms`` per step.

        Stops after ``max_jumps`` jumps, at the end of the uniforms, or when
        the next jump would fall after ``t_stop`` (then a censored hold up to
        ``t_stop`` is recorded). Subclasses override this with compiled
        loops; they must consume uniforms identically.
        """
        digests, waits, channels = [], [], []
        stopped = False
        for row in uniforms:
            if len(channels) >= max_jumps:
                break
            dg = self.digest(state)
            new_state, tau, ch = ssa_step(state, self, theta, row, t_stop - t)
            digests.append(dg)
            if ch < 0:
                waits.append(t_stop - t)
                channels.append(-1)
                t = t_stop
                stopped = True
                break
            waits.append(tau)
            channels.append(ch)
            t += tau
            state = new_state
        dim = len(self.digest_names) or 1
        return Advance(np.array(digests, dtype=float).reshape(-1, dim), np.array(waits, dtype=float),
                       np.array(channels, dtype=np.int64), state, t, stopped)


def select_channel(rates: np.ndarray, u: float) -> tuple[int, float]:
    """First channel whose cumulative rate reaches ``u * lambda``.

    Returns the channel and the relative position of the threshold inside
    that channel's rate, in (0, 1].
    """
    cum = np.cumsum(rates)
    thr = u * cum[-1]
    ch = int(np.searchsorted(cum, thr, side="left"))
    ch = min(ch, rates.size - 1)
    while rates[ch] <= 0:
        ch -= 1
    before = cum[ch - 1] if ch > 0 else 0.0
    return ch, min(max((thr - before) / rates[ch], 0.0), 1.0)


def ssa_step(state, model: JumpModel, theta, uniforms, max_wait: float = math.inf):
    """One Gillespie step from ``state``.

    ``uniforms[0]`` in (0, 1] gives the wait ``-log(u) / lambda``;
    ``uniforms[1]`` selects the channel by cumulative-rate inversion;
    remaining entries are handed to the model. Returns ``(state', wait,
    channel)``; when the wait exceeds ``max_wait`` nothing fires and the
    channel is -1.
    """
    uniforms = np.asarray(uniforms, dtype=float)
    rates = model.rates(np.asarray(model.digest(state), dtype=float)[None], theta)[0]
    lam = float(np.cumsum(rates)[-1])
    if not lam > 0:
        raise AbsorbingStateError(f"total rate is zero at state digest {model.digest(state)}")
    tau = -math.log(uniforms[0]) / lam
    if tau > max_wait:
        return state, tau, -1
    ch, u_within = select_channel(rates, uniforms[1])
    return model.fire(state, ch, u_within, uniforms[2:]), tau, ch


def check_support(rates: np.ndarray, rates_eps: np.ndarray, digests: np.ndarray,
                  channel_names=()) -> None:
    """Absolute continuity: a channel open under theta must stay open."""
    bad = (rates > 0) & ~(rates_eps > 0)
    if np.any(bad):
        i, c = np.argwhere(bad)[0]
        name = channel_names[c] if channel_names else str(c)
        raise AbsoluteContinuityError(
            f"channel {name} has rate {rates[i, c]:g} under theta but {rates_eps[i, c]:g} "
            f"under theta+eps at state digest {digests[i].tolist()}")


class ChainModel(ABC):
    """A discrete-time Markov chain with a parameterized transition density."""

    param_names: tuple[str, ...] = ()
    #: True when the targets sigma' form a finite set that can be summed over
    enumerable: bool = False

    @property
    def k(self) -> int:
        return len(self.param_names)

    @abstractmethod
    def log_density(self, prev: np.ndarray, nxt: np.ndarray, theta) -> np.ndarray:
        """log p(prev_i, next_i) for each row pair, shape ``(n,)``."""

    @abstractmethod
    def log_density_gradient(self, prev: np.ndarray, nxt: np.ndarray, theta) -> np.ndarray:
        """grad_theta log p(prev_i, next_i), shape ``(n, k)``."""

    @abstractmethod
    def advance(self, state: np.ndarray, theta, rng: np.random.Generator, n_steps: int) -> np.ndarray:
        """Simulate ``n_steps`` steps; returns ``(n_steps + 1, dim)`` states starting at ``state``."""

    def transition_rows(self, prev: np.ndarray, theta) -> np.ndarray:
        """Full rows p(prev_i, .) over the enumerable targets, shape ``(n, S)``."""
        raise NotImplementedError(
            f"{type(self).__name__} has no enumerable target set; use the H2 (realized-transition) estimators")

    def transition_row_log_gradients(self, prev: np.ndarray, theta) -> np.ndarray:
        """grad_theta log p(prev_i, s) over all targets s, shape ``(n, S, k)``."""
        raise NotImplementedError(
            f"{type(self).__name__} has no enumerable target set; use the H2 (realized-transition) estimators")

    def check_admissible(self, theta) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.k:
            raise ConfigError(f"expected {self.k} parameters {self.param_names}, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise ConfigError("parameters must be finite")
