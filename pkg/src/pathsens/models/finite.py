"""Finite-state models given by parameterized matrices.

``FiniteJumpModel`` wraps a rate matrix ``C(theta)`` (zero diagonal) and
``FiniteChainModel`` a transition matrix ``P(theta)``. Both take the
parameter gradient tensor ``dC/dtheta`` (or ``dP/dtheta``) of shape
``(S, S, k)`` from a user function. States are integer indices stored as
one-element digests.
"""

from __future__ import annotations

import math
from typing import Callable

import numba
import numpy as np

from ..core import AbsorbingStateError, ConfigError
from .base import Advance, ChainModel, JumpModel

MatrixFn = Callable[[np.ndarray], np.ndarray]


class _MatrixCache:
    """Evaluate a matrix function once per distinct theta."""

    def __init__(self, fn: MatrixFn):
        self.fn = fn
        self._key = None
        self._val = None

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key != self._key:
            self._val = np.asarray(self.fn(theta), dtype=float)
            self._key = key
        return self._val


def _constant_gradient_fn(S: int, k: int) -> MatrixFn:
    return lambda theta: np.zeros((S, S, k))


class FiniteJumpModel(JumpModel):
    """CTMC on ``{0..S-1}``; channel ``s`` is the transition to state ``s``."""

    def __init__(self, rate_fn: MatrixFn, grad_fn: MatrixFn | None, n_states: int,
                 param_names=("theta",)):
        self.param_names = tuple(param_names)
        self.S = int(n_states)
        self.channel_names = tuple(f"to_{s}" for s in range(self.S))
        self.digest_names = ("state",)
        self._rates = _MatrixCache(rate_fn)
        self._grads = _MatrixCache(grad_fn or _constant_gradient_fn(self.S, self.k))

    def rate_matrix(self, theta) -> np.ndarray:
        C = self._rates(theta).copy()
        if C.shape != (self.S, self.S):
            raise ValueError(f"rate matrix must be {self.S}x{self.S}, got {C.shape}")
        np.fill_diagonal(C, 0.0)
        if np.any(C < 0):
            raise ConfigError("rates must be non-negative")
        return C

    def rate_gradient(self, theta) -> np.ndarray:
        return self._grads(theta)

    def rates(self, digests, theta) -> np.ndarray:
        idx = np.asarray(digests)[:, 0].astype(np.int64)
        return self.rate_matrix(theta)[idx]

    def log_rate_gradients(self, digests, theta) -> np.ndarray:
        idx = np.asarray(digests)[:, 0].astype(np.int64)
        C = self.rate_matrix(theta)[idx]
        dC = self.rate_gradient(theta)[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((C > 0)[..., None], dC / C[..., None], 0.0)

    def digest(self, state) -> np.ndarray:
        return np.array([float(state)])

    def fire(self, state, channel, u_within=1.0, extra=()):
        return int(channel)

    def advance(self, state, theta, uniforms, t, t_stop, max_jumps) -> Advance:
        m = uniforms.shape[0]
        xs = np.empty(m)
        waits = np.empty(m)
        chans = np.empty(m, dtype=np.int64)
        n, t_new, s_new, flag = _finite_kernel(int(state), self.rate_matrix(theta), np.ascontiguousarray(uniforms),
                                               float(t), float(t_stop), int(max_jumps), xs, waits, chans)
        if flag == 1:
            raise AbsorbingStateError(f"state {s_new} is absorbing (all outgoing rates zero)")
        return Advance(xs[:n, None], waits[:n], chans[:n], int(s_new), t_new, flag == 2)


@numba.njit(cache=True)
def _finite_kernel(s, C, uniforms, t, t_stop, max_jumps, out_s, out_w, out_c):
    S = C.shape[0]
    n = 0
    for i in range(uniforms.shape[0]):
        if n >= max_jumps:
            break
        lam = 0.0
        for j in range(S):
            lam += C[s, j]
        if not lam > 0.0:
            return n, t, s, 1
        tau = -math.log(uniforms[i, 0]) / lam
        out_s[n] = float(s)
        if tau > t_stop - t:
            out_w[n] = t_stop - t
            out_c[n] = -1
            return n + 1, t_stop, s, 2
        out_w[n] = tau
        t += tau
        thr = uniforms[i, 1] * lam
        cum = 0.0
        ch = S - 1
        for j in range(S):
            cum += C[s, j]
            if cum >= thr:
                ch = j
                break
        while C[s, ch] <= 0.0:
            ch -= 1
        out_c[n] = ch
        s = ch
        n += 1
    return n, t, s, 0


class FiniteChainModel(ChainModel):
    """DTMC on ``{0..S-1}`` with an enumerable target set."""

    enumerable = True

    def __init__(self, prob_fn: MatrixFn, grad_fn: MatrixFn | None, n_states: int,
                 param_names=("theta",)):
        self.param_names = tuple(param_names)
        self.S = int(n_states)
        self._P = _MatrixCache(prob_fn)
        self._dP = _MatrixCache(grad_fn or _constant_gradient_fn(self.S, self.k))

    def matrix(self, theta) -> np.ndarray:
        P = self._P(theta)
        if P.shape != (self.S, self.S):
            raise ValueError(f"transition matrix must be {self.S}x{self.S}, got {P.shape}")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ConfigError("transition matrix must be non-negative and row-stochastic")
        return P

    def gradient(self, theta) -> np.ndarray:
        return self._dP(theta)

    @staticmethod
    def _idx(X) -> np.ndarray:
        return np.asarray(X).reshape(len(X), -1)[:, 0].astype(np.int64)

    def log_density(self, prev, nxt, theta) -> np.ndarray:
        P = self.matrix(theta)
        with np.errstate(divide="ignore"):
            return np.log(P[self._idx(prev), self._idx(nxt)])

    def log_density_gradient(self, prev, nxt, theta) -> np.ndarray:
        i, j = self._idx(prev), self._idx(nxt)
        P = self.matrix(theta)[i, j]
        if np.any(P <= 0):
            raise ValueError("log-density gradient requested on a zero-probability transition")
        return self.gradient(theta)[i, j] / P[:, None]

    def transition_rows(self, prev, theta) -> np.ndarray:
        return self.matrix(theta)[self._idx(prev)]

    def transition_row_log_gradients(self, prev, theta) -> np.ndarray:
        i = self._idx(prev)
        P = self.matrix(theta)[i]
        dP = self.gradient(theta)[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((P > 0)[..., None], dP / P[..., None], 0.0)

    def advance(self, state, theta, rng: np.random.Generator, n_steps: int) -> np.ndarray:
        cum = np.cumsum(self.matrix(theta), axis=1)
        u = rng.random(int(n_steps))
        out = np.empty(int(n_steps) + 1, dtype=np.int64)
        _chain_kernel(int(np.asarray(state).ravel()[0]), cum, u, out)
        return out[:, None].astype(float)


@numba.njit(cache=True)
def _chain_kernel(s, cum, u, out):
    S = cum.shape[0]
    out[0] = s
    for i in range(u.shape[0]):
        thr = u[i] * cum[s, S - 1]
        nxt = S - 1
        for j in range(S):
            if cum[s, j] > thr:
                nxt = j
                break
        s = nxt
        out[i + 1] = s


# --------------------------------------------------------------------------
# small closed-form models used in examples and tests


def two_state_jump_model() -> FiniteJumpModel:
    """Two-state CTMC with rates ``a`` (0 -> 1) and ``b`` (1 -> 0), theta = (a, b)."""
    def rates(theta):
        a, b = theta
        return np.array([[0.0, a], [b, 0.0]])

    def grads(theta):
        g = np.zeros((2, 2, 2))
        g[0, 1, 0] = 1.0
        g[1, 0, 1] = 1.0
        return g

    return FiniteJumpModel(rates, grads, 2, ("a", "b"))


def two_state_rer(theta, eps) -> float:
    """Closed-form RER of the two-state CTMC for the perturbation ``eps``."""
    a, b = (float(v) for v in theta)
    a2, b2 = a + float(eps[0]), b + float(eps[1])
    mu0, mu1 = b / (a + b), a / (a + b)
    return mu0 * (a * math.log(a / a2) - (a - a2)) + mu1 * (b * math.log(b / b2) - (b - b2))


def two_state_fim(theta) -> np.ndarray:
    """Closed-form FIM of the two-state CTMC: ``diag(mu0 / a, mu1 / b)``."""
    a, b = (float(v) for v in theta)
    return np.diag([b / (a + b) / a, a / (a + b) / b])
