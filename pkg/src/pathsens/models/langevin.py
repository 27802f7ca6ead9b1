"""Langevin dynamics of particles with a Morse pair potential, discretized by BBK.

The force is ``F(q) = grad V(q) + alpha G(q)`` with the pair potential
``V_M(r) = D_e (1 - exp(-a (r - r_e)))^2`` and the divergence-free
circulation ``G_i = q_{i+1} - q_{i-1}`` (periodic in the particle index).
``F`` enters the momentum equation with a minus sign,
``dp = -F dt - (gamma/m) p dt + sigma dW``; with ``alpha = 0`` this is the
usual reversible Langevin equation.

The BBK step (explicit Euler half step, Verlet drift, implicit Euler half
step solved exactly) turns the dynamics into a Markov chain on
``(q, p)`` with a Gaussian transition density, whose parameter gradient is
driven by the force Jacobian ``dF/dtheta`` for ``theta = [D_e, a, r_e]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from ..core import ConfigError, ParameterVector, PathSensError
from .base import ChainModel

PARAM_NAMES = ("D_e", "a", "r_e")
DEFAULT_THETA = (0.3, 0.3, 1.0)


def default_parameters() -> ParameterVector:
    return ParameterVector(DEFAULT_THETA, PARAM_NAMES)


@dataclass(frozen=True)
class LangevinSettings:
    """Fixed (non-parameter) settings of the discretized system."""

    n_particles: int = 3
    dim: int = 1
    mass: float = 1.0
    gamma: float = 1.0
    sigma: float = 0.1
    dt: float = 0.01
    alpha: float = 0.0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError("need at least two particles")
        if self.dim < 1:
            raise ConfigError("dimension must be at least 1")
        for name in ("mass", "sigma", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not self.gamma >= 0:
            raise ConfigError("gamma must be non-negative")
        if not 1.0 + self.gamma * self.dt / (2.0 * self.mass) > 0:
            raise ConfigError("1 + gamma dt / (2 m) must be positive")

    @property
    def n_coords(self) -> int:
        return self.n_particles * self.dim


@dataclass
class LangevinState:
    """Positions and momenta, each a flat vector of length ``dim * N`` (particle-major)."""

    q: np.ndarray
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float).ravel()
        self.p = np.zeros_like(self.q) if self.p is None else np.array(self.p, dtype=float).ravel()
        if self.q.shape != self.p.shape:
            raise ValueError("positions and momenta must have the same length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("Langevin state must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, v) -> "LangevinState":
        v = np.asarray(v, dtype=float)
        n = v.size // 2
        return cls(v[:n], v[n:])


def random_initial_state(settings: LangevinSettings, rng: np.random.Generator, r_e: float = 1.0,
                         momentum_scale: float = 0.1) -> LangevinState:
    """Uniform positions on ``[0, N r_e]`` and uniform momenta on ``[-s, s]``."""
    n = settings.n_coords
    q = rng.uniform(0.0, settings.n_particles * r_e, n)
    p = rng.uniform(-momentum_scale, momentum_scale, n)
    return LangevinState(q, p)


# --------------------------------------------------------------------------
# forces


@numba.njit(cache=True)
def _force_jac(q, De, a, re, alpha, d, N, F, J):
    """Fill F (dN,) and J = dF/dtheta (dN, 3); returns False on coincident particles."""
    for i in range(d * N):
        F[i] = 0.0
        J[i, 0] = 0.0
        J[i, 1] = 0.0
        J[i, 2] = 0.0
    for i in range(N):
        for j in range(i):
            r2 = 0.0
            for c in range(d):
                diff = q[i * d + c] - q[j * d + c]
                r2 += diff * diff
            r = math.sqrt(r2)
            if r == 0.0:
                return False
            x = r - re
            u = math.exp(-a * x)
            w = u * (1.0 - u)
            dV = 2.0 * De * a * w
            dD = 2.0 * a * w
            da = 2.0 * De * w - 2.0 * De * a * (1.0 - 2.0 * u) * x * u
            dre = 2.0 * De * a * a * u * (1.0 - 2.0 * u)
            for c in range(d):
                e = (q[i * d + c] - q[j * d + c]) / r
                F[i * d + c] += dV * e
                F[j * d + c] -= dV * e
                J[i * d + c, 0] += dD * e
                J[j * d + c, 0] -= dD * e
                J[i * d + c, 1] += da * e
                J[j * d + c, 1] -= da * e
                J[i * d + c, 2] += dre * e
                J[j * d + c, 2] -= dre * e
    if alpha != 0.0:
        for i in range(N):
            ip = (i + 1) % N
            im = (i - 1 + N) % N
            for c in range(d):
                F[i * d + c] += alpha * (q[ip * d + c] - q[im * d + c])
    return True


@numba.njit(cache=True)
def _force_jac_batch(Q, De, a, re, alpha, d, N, F, J):
    for n in range(Q.shape[0]):
        if not _force_jac(Q[n], De, a, re, alpha, d, N, F[n], J[n]):
            return n
    return -1


def morse_potential(r, theta) -> np.ndarray:
    De, a, re = np.asarray(theta, dtype=float)
    return De * (1.0 - np.exp(-a * (np.asarray(r, dtype=float) - re))) ** 2


def circulation(q, n_particles: int, dim: int = 1) -> np.ndarray:
    """``G_i = q_{i+1} - q_{i-1}`` with periodic particle index."""
    Q = np.asarray(q, dtype=float).reshape(n_particles, dim)
    return (np.roll(Q, -1, axis=0) - np.roll(Q, 1, axis=0)).ravel()


def _force_and_jacobian_batch(Q, theta, settings: LangevinSettings):
    Q = np.ascontiguousarray(np.atleast_2d(np.asarray(Q, dtype=float)))
    De, a, re = (float(v) for v in np.asarray(theta, dtype=float))
    n, m = Q.shape
    F = np.empty((n, m))
    J = np.empty((n, m, 3))
    bad = _force_jac_batch(Q, De, a, re, float(settings.alpha), settings.dim, settings.n_particles, F, J)
    if bad >= 0:
        raise PathSensError(f"coincident particles at positions {Q[bad].tolist()}")
    return F, J


def morse_force(q, theta, settings: LangevinSettings | None = None, *, alpha: float | None = None,
                with_jacobian: bool = False):
    """Force ``F(q) = grad V(q) + alpha G(q)``; optionally also ``dF/dtheta`` (dN, 3)."""
    q = np.asarray(q, dtype=float).ravel()
    if settings is None:
        settings = LangevinSettings(n_particles=q.size, dim=1)
    if alpha is not None:
        settings = replace(settings, alpha=float(alpha))
    if q.size != settings.n_coords:
        raise ValueError(f"expected {settings.n_coords} coordinates, got {q.size}")
    F, J = _force_and_jacobian_batch(q[None], theta, settings)
    return (F[0], J[0]) if with_jacobian else F[0]


def divergence_check(field_fn=None, q=None, h: float = 1e-6) -> float:
    """Divergence ``sum_i dG_i/dq_i`` of a vector field at ``q``.

    Without ``field_fn`` the built-in circulation is meant; its component
    ``G_i`` does not involve ``q_i``, so the divergence is exactly 0. A
    user-supplied field is differentiated by central differences.
    """
    if field_fn is None:
        return 0.0
    q = np.asarray(q, dtype=float).ravel()
    div = 0.0
    for i in range(q.size):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        div += (np.asarray(field_fn(qp))[i] - np.asarray(field_fn(qm))[i]) / (2.0 * h)
    return float(div)


# --------------------------------------------------------------------------
# BBK integrator


def bbk_step(state: LangevinState, theta, settings: LangevinSettings, rng: np.random.Generator | None = None,
             noise=None) -> LangevinState:
    """One BBK step; ``noise`` = (dW_i, dW_{i+1/2}) overrides the generator."""
    s = settings
    if noise is None:
        noise = rng.normal(0.0, math.sqrt(s.dt / 2.0), (2, s.n_coords))
    dW1, dW2 = (np.asarray(w, dtype=float) for w in noise)
    F = morse_force(state.q, theta, s)
    p_half = state.p - F * s.dt / 2.0 - (s.gamma / s.mass) * state.p * s.dt / 2.0 + s.sigma * dW1
    q_new = state.q + p_half * s.dt / s.mass
    F_new = morse_force(q_new, theta, s)
    if not np.all(np.isfinite(F_new)):
        raise PathSensError(f"non-finite force at coordinates {np.flatnonzero(~np.isfinite(F_new)).tolist()}")
    p_new = (p_half - F_new * s.dt / 2.0 + s.sigma * dW2) / (1.0 + s.gamma * s.dt / (2.0 * s.mass))
    return LangevinState(q_new, p_new)


@numba.njit(cache=True)
def _bbk_kernel(q, p, De, a, re, alpha, d, N, m, g, sig, dt, noise, out):
    n = q.size
    F = np.empty(n)
    J = np.empty((n, 3))
    if not _force_jac(q, De, a, re, alpha, d, N, F, J):
        return 0
    c = 1.0 + g * dt / (2.0 * m)
    out[0, :n] = q
    out[0, n:] = p
    for i in range(noise.shape[0]):
        ph = p - F * dt / 2.0 - (g / m) * p * dt / 2.0 + sig * noise[i, 0]
        q = q + ph * dt / m
        if not _force_jac(q, De, a, re, alpha, d, N, F, J):
            return i + 1
        p = (ph - F * dt / 2.0 + sig * noise[i, 1]) / c
        for k in range(n):
            if not math.isfinite(q[k]) or not math.isfinite(p[k]):
                return -(i + 2)
        out[i + 1, :n] = q
        out[i + 1, n:] = p
    return -1


class LangevinModel(ChainModel):
    """The BBK chain on ``(q, p)`` stacked as one vector of length ``2 d N``."""

    param_names = PARAM_NAMES
    enumerable = False

    def __init__(self, settings: LangevinSettings | None = None):
        self.settings = settings or LangevinSettings()

    @property
    def time_step(self) -> float:
        """Physical time per chain step, for per-unit-time estimates."""
        return self.settings.dt

    @property
    def state_dim(self) -> int:
        return 2 * self.settings.n_coords

    def check_admissible(self, theta) -> None:
        super().check_admissible(theta)
        De, a, re = np.asarray(theta, dtype=float)
        if not (De > 0 and a > 0 and re > 0):
            raise ConfigError(f"Morse parameters must be positive, got D_e={De:g}, a={a:g}, r_e={re:g}")

    def _split(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.settings.n_coords
        if X.shape[1] != 2 * n:
            raise ValueError(f"expected states of length {2 * n}, got {X.shape[1]}")
        return X[:, :n], X[:, n:]

    def _residuals(self, prev, nxt, theta):
        s = self.settings
        q, p = self._split(prev)
        q1, p1 = self._split(nxt)
        F0, J0 = _force_and_jacobian_batch(q, theta, s)
        F1, J1 = _force_and_jacobian_batch(q1, theta, s)
        c = 1.0 + s.gamma * s.dt / (2.0 * s.mass)
        r0 = q1 - q - (s.dt / s.mass) * (p - F0 * s.dt / 2.0 - s.gamma * p * s.dt / (2.0 * s.mass))
        r1 = c * p1 - (s.mass * (q1 - q) / s.dt - s.dt / 2.0 * F1)
        return r0, r1, J0, J1

    def log_density(self, prev, nxt, theta) -> np.ndarray:
        """Gaussian transition log-density including its normalization."""
        s = self.settings
        r0, r1, _, _ = self._residuals(prev, nxt, theta)
        n = s.n_coords
        c = 1.0 + s.gamma * s.dt / (2.0 * s.mass)
        # q' has covariance (dt/m)^2 sigma^2 dt/2; c p' has sigma^2 dt/2, so p' picks up a factor c
        var0 = (s.dt / s.mass) ** 2 * s.sigma ** 2 * s.dt / 2.0
        var1 = s.sigma ** 2 * s.dt / 2.0
        log_z = 0.5 * n * (math.log(2 * math.pi * var0) + math.log(2 * math.pi * var1)) - n * math.log(c)
        return -np.einsum("ij,ij->i", r0, r0) / (2 * var0) - np.einsum("ij,ij->i", r1, r1) / (2 * var1) - log_z

    def log_density_gradient(self, prev, nxt, theta) -> np.ndarray:
        s = self.settings
        r0, r1, J0, J1 = self._residuals(prev, nxt, theta)
        return (-(s.mass / (s.sigma ** 2 * s.dt)) * np.einsum("ni,nik->nk", r0, J0)
                - (1.0 / s.sigma ** 2) * np.einsum("ni,nik->nk", r1, J1))

    def advance(self, state, theta, rng: np.random.Generator, n_steps: int) -> np.ndarray:
        s = self.settings
        x = np.asarray(state.as_vector() if isinstance(state, LangevinState) else state, dtype=float)
        n = s.n_coords
        noise = rng.normal(0.0, math.sqrt(s.dt / 2.0), (int(n_steps), 2, n))
        out = np.empty((int(n_steps) + 1, 2 * n))
        De, a, re = (float(v) for v in np.asarray(theta, dtype=float))
        code = _bbk_kernel(x[:n].copy(), x[n:].copy(), De, a, re, float(s.alpha), s.dim, s.n_particles,
                           float(s.mass), float(s.gamma), float(s.sigma), float(s.dt), noise, out)
        if code >= 0:
            raise PathSensError(f"coincident particles after {code} BBK steps")
        if code < -1:
            raise PathSensError(f"non-finite state after {-code - 1} BBK steps")
        return out
