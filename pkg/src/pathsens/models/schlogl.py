"""Schloegl bistable reaction network as a birth-death jump process.

Reactions (x = number of X molecules, volume omega)::

    1  A + 2X -> 3X    c1 = k1A x (x-1) / (2 omega)
    2  3X -> A + 2X    c2 = k2 x (x-1) (x-2) / (6 omega^2)
    3  B -> X          c3 = k3B omega
    4  X -> B          c4 = k4 x

Reactions 1 and 3 both move x -> x+1 and reactions 2 and 4 both move
x -> x-1, so the process on x has two transitions, birth with rate c1 + c3
and death with rate c2 + c4. These sums, not the individual reactions,
enter the path-space RER and information matrix.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ..core import AbsorbingStateError, ConfigError, ParameterVector
from .base import Advance, JumpModel

PARAM_NAMES = ("k1A", "k2", "k3B", "k4")
DEFAULT_THETA = (3.0, 1.0, 2.0, 3.5)
DEFAULT_OMEGA = 15.0
DEFAULT_X0 = 100


def default_parameters() -> ParameterVector:
    return ParameterVector(DEFAULT_THETA, PARAM_NAMES)


def schlogl_rates(x, theta, omega: float = DEFAULT_OMEGA) -> np.ndarray:
    """The four reaction rates at molecule count(s) ``x``; shape ``x.shape + (4,)``."""
    theta = np.asarray(theta, dtype=float)
    # float arithmetic keeps x (x-1) (x-2) exact below 2**53 and finite beyond
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("molecule counts must be non-negative")
    c1 = theta[0] * x * (x - 1.0) / (2.0 * omega)
    c2 = theta[1] * x * (x - 1.0) * (x - 2.0) / (6.0 * omega * omega)
    c3 = theta[2] * omega * np.ones_like(x)
    c4 = theta[3] * x
    return np.stack([c1, c2, c3, c4], axis=-1)


def schlogl_rate_gradient(x, theta, event: int, omega: float = DEFAULT_OMEGA) -> np.ndarray:
    """grad_theta log c_event(x) for a single reaction (``event`` in 1..4).

    Every reaction rate is linear in exactly one parameter, so the result
    is ``e_k / theta_k``.
    """
    if event not in (1, 2, 3, 4):
        raise ValueError(f"event must be 1..4, got {event}")
    c = schlogl_rates(x, theta, omega)[..., event - 1]
    if not c > 0:
        raise ValueError(f"reaction {event} has zero rate at x={x}; its log-gradient is undefined")
    grad = np.zeros(4)
    grad[event - 1] = 1.0 / float(np.asarray(theta, dtype=float)[event - 1])
    return grad


class SchloglModel(JumpModel):
    """Jump model on x with channels ``birth`` (x+1) and ``death`` (x-1)."""

    param_names = PARAM_NAMES
    channel_names = ("birth", "death")
    digest_names = ("x",)
    n_uniforms = 2

    def __init__(self, omega: float = DEFAULT_OMEGA):
        if not omega > 0:
            raise ConfigError("volume omega must be positive")
        self.omega = float(omega)

    def check_admissible(self, theta) -> None:
        super().check_admissible(theta)
        theta = np.asarray(theta, dtype=float)
        bad = [n for n, v in zip(self.param_names, theta) if not v > 0]
        if bad:
            raise ConfigError(f"Schloegl rate constants must stay positive: {', '.join(bad)}")

    def reaction_rates(self, x, theta) -> np.ndarray:
        return schlogl_rates(x, theta, self.omega)

    def rates(self, digests, theta) -> np.ndarray:
        c = self.reaction_rates(np.asarray(digests, dtype=float)[:, 0], theta)
        return np.stack([c[:, 0] + c[:, 2], c[:, 1] + c[:, 3]], axis=1)

    def log_rate_gradients(self, digests, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        c = self.reaction_rates(np.asarray(digests, dtype=float)[:, 0], theta)
        n = c.shape[0]
        birth, death = c[:, 0] + c[:, 2], c[:, 1] + c[:, 3]
        out = np.zeros((n, 2, 4))
        with np.errstate(divide="ignore", invalid="ignore"):
            ib = np.where(birth > 0, 1.0 / birth, 0.0)
            idn = np.where(death > 0, 1.0 / death, 0.0)
        out[:, 0, 0] = c[:, 0] / theta[0] * ib
        out[:, 0, 2] = c[:, 2] / theta[2] * ib
        out[:, 1, 1] = c[:, 1] / theta[1] * idn
        out[:, 1, 3] = c[:, 3] / theta[3] * idn
        return out

    def digest(self, state) -> np.ndarray:
        return np.array([float(state)])

    def fire(self, state, channel, u_within=1.0, extra=()):
        return int(state) + (1 if channel == 0 else -1)

    def rate_matrix(self, theta, x_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Rates and rate gradients of the chain truncated to 0..x_max.

        Returns ``C`` with shape (S, S) and ``dC`` with shape (S, S, 4)
        holding grad_theta c(x, x') for the birth/death transitions.
        """
        theta = np.asarray(theta, dtype=float)
        xs = np.arange(x_max + 1, dtype=float)
        c = self.reaction_rates(xs, theta)
        S = xs.size
        C = np.zeros((S, S))
        dC = np.zeros((S, S, 4))
        up, down = np.arange(S - 1), np.arange(1, S)
        C[up, up + 1] = c[:-1, 0] + c[:-1, 2]
        C[down, down - 1] = c[1:, 1] + c[1:, 3]
        dC[up, up + 1, 0] = c[:-1, 0] / theta[0]
        dC[up, up + 1, 2] = c[:-1, 2] / theta[2]
        dC[down, down - 1, 1] = c[1:, 1] / theta[1]
        dC[down, down - 1, 3] = c[1:, 3] / theta[3]
        return C, dC

    def advance(self, state, theta, uniforms, t, t_stop, max_jumps) -> Advance:
        m = uniforms.shape[0]
        xs = np.empty(m)
        waits = np.empty(m)
        chans = np.empty(m, dtype=np.int64)
        n, t_new, x_new, flag = _schlogl_kernel(
            int(state), np.asarray(theta, dtype=float), self.omega, np.ascontiguousarray(uniforms),
            float(t), float(t_stop), int(max_jumps), xs, waits, chans)
        if flag == 1:
            raise AbsorbingStateError(f"Schloegl total rate vanished at x={x_new}")
        return Advance(xs[:n, None], waits[:n], chans[:n], int(x_new), t_new, flag == 2)


@numba.njit(cache=True)
def _schlogl_kernel(x, theta, omega, uniforms, t, t_stop, max_jumps, out_x, out_w, out_c):
    n = 0
    for i in range(uniforms.shape[0]):
        if n >= max_jumps:
            break
        xf = float(x)
        c1 = theta[0] * xf * (xf - 1.0) / (2.0 * omega)
        c2 = theta[1] * xf * (xf - 1.0) * (xf - 2.0) / (6.0 * omega * omega)
        c3 = theta[2] * omega
        c4 = theta[3] * xf
        birth = c1 + c3
        death = c2 + c4
        lam = birth + death
        if not lam > 0.0:
            return n, t, x, 1
        tau = -math.log(uniforms[i, 0]) / lam
        out_x[n] = xf
        if tau > t_stop - t:
            out_w[n] = t_stop - t
            out_c[n] = -1
            return n + 1, t_stop, x, 2
        out_w[n] = tau
        t += tau
        thr = uniforms[i, 1] * lam
        if birth >= thr and birth > 0.0:
            out_c[n] = 0
            x += 1
        else:
            out_c[n] = 1
            x -= 1
        n += 1
    return n, t, x, 0
