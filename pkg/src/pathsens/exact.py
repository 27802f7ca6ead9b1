"""Exact oracles for small systems.

Stationary laws, relative entropy rates and information matrices by direct
summation over finite (or truncated birth-death) state spaces; brute-force
path-space relative entropy by enumerating every path; and the
time-periodic and semi-Markov generalizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import AbsoluteContinuityError, ConfigError, DimensionError, PathSensError

DENSE_LIMIT = 2000
ENUMERATION_LIMIT = 10 ** 7


class ReducibleChainError(PathSensError):
    """The stationary law is not unique."""


class TruncationError(PathSensError):
    """A truncated state space leaves too much probability mass outside."""


class QuadratureError(PathSensError):
    """A time grid does not cover the effective support of an integrand."""


# --------------------------------------------------------------------------
# finite chains


@dataclass
class FiniteChain:
    """A transition matrix (``kind="probability"``) or rate matrix (``kind="rate"``).

    ``gradient`` is the optional parameter derivative tensor of shape
    ``(S, S, k)``.
    """

    matrix: np.ndarray
    kind: str = "probability"
    gradient: np.ndarray | None = None

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError("matrix must be square")
        if self.kind == "probability":
            if np.any(M < 0) or np.any(M > 1) or not np.allclose(M.sum(axis=1), 1.0, rtol=0, atol=1e-12):
                raise ConfigError("transition matrix must have entries in [0, 1] and rows summing to 1")
        elif self.kind == "rate":
            np.fill_diagonal(M, 0.0)
            if np.any(M < 0):
                raise ConfigError("rates must be non-negative")
        else:
            raise ConfigError(f"unknown chain kind {self.kind!r}")
        self.matrix = M
        if self.gradient is not None:
            G = np.asarray(self.gradient, dtype=float)
            if G.shape[:2] != M.shape or G.ndim != 3:
                raise DimensionError(f"gradient must have shape (S, S, k), got {G.shape}")
            self.gradient = G

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def generator(self) -> np.ndarray:
        """``P - I`` for a probability matrix, ``C - diag(lambda)`` for rates."""
        M = self.matrix
        if self.kind == "probability":
            return M - np.eye(M.shape[0])
        return M - np.diag(M.sum(axis=1))


def _as_chain(chain, kind: str) -> FiniteChain:
    return chain if isinstance(chain, FiniteChain) else FiniteChain(np.asarray(chain, dtype=float), kind)


def finite_stationary(chain, kind: str = "probability", method: str = "auto") -> np.ndarray:
    """Unique stationary law ``mu`` with ``mu Q = 0``, ``sum mu = 1``.

    ``method`` is ``"dense"`` (linear solve), ``"power"`` (iteration on the
    uniformized chain) or ``"auto"`` (dense up to 2000 states).
    """
    ch = _as_chain(chain, kind)
    Q = ch.generator()
    S = ch.n_states
    if method == "auto":
        method = "dense" if S <= DENSE_LIMIT else "power"
    if method == "power":
        return _power_stationary(ch)
    if S == 1:
        return np.ones(1)
    sv = np.linalg.svd(Q, compute_uv=False)
    scale = max(float(sv[0]), 1e-300)
    if sv[-2] <= 1e-10 * scale:
        raise ReducibleChainError("stationary law is not unique (the chain is reducible)")
    A = np.vstack([Q.T, np.ones((1, S))])
    b = np.zeros(S + 1)
    b[-1] = 1.0
    mu = np.linalg.lstsq(A, b, rcond=None)[0]
    mu = np.where(np.abs(mu) < 1e-15, 0.0, mu)
    if np.any(mu < -1e-10):
        raise ReducibleChainError("linear solve produced a negative stationary weight")
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def _power_stationary(ch: FiniteChain, tol: float = 1e-12, max_iter: int = 10 ** 7) -> np.ndarray:
    Q = ch.generator()
    S = ch.n_states
    # uniformize with a lazy factor so the iterated matrix is aperiodic
    lam = float(np.max(-np.diag(Q))) if ch.kind == "rate" else 1.0
    P = np.eye(S) + Q / (1.5 * lam) if ch.kind == "rate" else 0.5 * (np.eye(S) + ch.matrix)
    mu = np.full(S, 1.0 / S)
    for _ in range(max_iter):
        nxt = mu @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt @ Q)) < tol * max(1.0, lam) and np.max(np.abs(nxt - mu)) < tol:
            return nxt
        mu = nxt
    raise PathSensError("power iteration did not converge")


def stationary_residual(mu, chain, kind: str = "probability") -> float:
    ch = _as_chain(chain, kind)
    return float(np.max(np.abs(np.asarray(mu) @ ch.generator())))


def birth_death_stationary(birth: Callable, death: Callable, x_max: int, tail_tol: float = 1e-12) -> np.ndarray:
    """Stationary law on ``0..x_max`` of a birth-death process by detailed balance.

    ``birth(x)`` and ``death(x)`` are vectorized rate functions. The ratio
    recursion ``mu(x+1) = mu(x) birth(x) / death(x+1)`` runs in log space.
    The mass beyond ``x_max`` is estimated by continuing the recursion
    until it is negligible; more than ``tail_tol`` raises
    :class:`TruncationError`.
    """
    xs = np.arange(x_max, dtype=float)
    b, d = np.asarray(birth(xs), dtype=float), np.asarray(death(xs + 1.0), dtype=float)
    if np.any(b <= 0) or np.any(d <= 0):
        raise ConfigError("birth and death rates must be positive inside 0..x_max")
    logmu = np.concatenate([[0.0], np.cumsum(np.log(b) - np.log(d))])
    top = logmu.max()
    w = np.exp(logmu - top)
    tail = _tail_mass(birth, death, x_max, logmu[-1] - top)
    total = math.fsum(w)
    if tail / (total + tail) > tail_tol:
        raise TruncationError(f"probability mass {tail / (total + tail):.3g} lies beyond x_max={x_max}; "
                              "increase x_max")
    return w / total


def _tail_mass(birth, death, x_max: int, log_last: float, max_extra: int = 100000) -> float:
    """Unnormalized mass beyond ``x_max``, relative to the same scale as ``log_last``."""
    x = float(x_max)
    lw = log_last
    tail = 0.0
    for _ in range(max_extra):
        b, d = float(birth(np.array([x]))[0]), float(death(np.array([x + 1.0]))[0])
        if b <= 0:
            return tail
        lw += math.log(b) - math.log(d)
        term = math.exp(lw) if lw > -745 else 0.0
        tail += term
        x += 1.0
        if b / d < 0.5 and (term == 0.0 or term < 1e-30 * max(tail, 1.0)):
            return tail
    return math.inf


def schlogl_stationary(theta, omega: float = 15.0, x_max: int = 200) -> np.ndarray:
    """Schloegl stationary law, doubling ``x_max`` until the tail criterion holds."""
    from .models.schlogl import SchloglModel

    model = SchloglModel(omega)
    th = np.asarray(theta, dtype=float)

    def birth(x):
        c = model.reaction_rates(x, th)
        return c[..., 0] + c[..., 2]

    def death(x):
        c = model.reaction_rates(x, th)
        return c[..., 1] + c[..., 3]

    while True:
        try:
            return birth_death_stationary(birth, death, x_max)
        except TruncationError:
            if x_max > 10 ** 6:
                raise
            x_max *= 2


# --------------------------------------------------------------------------
# exact RER and FIM


def _check_support(A: np.ndarray, B: np.ndarray, what: str) -> None:
    bad = (A > 0) & ~(B > 0)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AbsoluteContinuityError(f"{what} {i} -> {j} is positive under theta but not under theta+eps")


def _kl_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    pos = A > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos, A * np.log(np.where(pos, A, 1.0) / np.where(pos, B, 1.0)), 0.0).sum(axis=1)


def exact_rer_ctmc(C, C_eps, mu=None) -> float:
    """``sum_x mu(x) [sum_y c log(c / c_eps) - (lambda - lambda_eps)](x)``."""
    C = _as_chain(C, "rate").matrix
    Ce = _as_chain(C_eps, "rate").matrix
    if C.shape != Ce.shape:
        raise DimensionError("rate matrices differ in size")
    _check_support(C, Ce, "transition")
    mu = finite_stationary(C, "rate") if mu is None else np.asarray(mu, dtype=float)
    per_state = _kl_rows(C, Ce) - (C.sum(axis=1) - Ce.sum(axis=1))
    return float(mu @ per_state)


def _log_gradients(M: np.ndarray, dM: np.ndarray) -> np.ndarray:
    pos = M > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos[..., None], dM / np.where(pos, M, 1.0)[..., None], 0.0)


def exact_fim_ctmc(C, dC, mu=None) -> np.ndarray:
    """``sum_x mu(x) sum_y c grad log c grad log c^T``."""
    C = _as_chain(C, "rate").matrix
    dC = np.asarray(dC, dtype=float)
    mu = finite_stationary(C, "rate") if mu is None else np.asarray(mu, dtype=float)
    g = _log_gradients(C, dC)
    F = np.einsum("x,xy,xyi,xyj->ij", mu, C, g, g)
    return 0.5 * (F + F.T)


def exact_rer_chain(P, P_eps, mu=None) -> float:
    """``sum_x mu(x) sum_y p log(p / p_eps)``."""
    P = _as_chain(P, "probability").matrix
    Pe = _as_chain(P_eps, "probability").matrix
    if P.shape != Pe.shape:
        raise DimensionError("transition matrices differ in size")
    _check_support(P, Pe, "transition")
    mu = finite_stationary(P) if mu is None else np.asarray(mu, dtype=float)
    return float(mu @ _kl_rows(P, Pe))


def exact_fim_chain(P, dP, mu=None) -> np.ndarray:
    """``sum_x mu(x) sum_y p grad log p grad log p^T``."""
    P = _as_chain(P, "probability").matrix
    mu = finite_stationary(P) if mu is None else np.asarray(mu, dtype=float)
    g = _log_gradients(P, np.asarray(dP, dtype=float))
    F = np.einsum("x,xy,xyi,xyj->ij", mu, P, g, g)
    return 0.5 * (F + F.T)


def stationary_relative_entropy(mu, mu_eps) -> float:
    """``sum mu log(mu / mu_eps)``."""
    mu, mue = np.asarray(mu, dtype=float), np.asarray(mu_eps, dtype=float)
    _check_support(mu[None], mue[None], "state")
    return float(_kl_rows(mu[None], mue[None])[0])


def schlogl_exact(theta, eps=None, omega: float = 15.0, x_max: int = 200):
    """Exact Schloegl RER (for ``eps``) or FIM (``eps=None``) on the truncated chain."""
    from .models.schlogl import SchloglModel

    model = SchloglModel(omega)
    mu = schlogl_stationary(theta, omega, x_max)
    C, dC = model.rate_matrix(theta, mu.size - 1)
    if eps is None:
        return exact_fim_ctmc(C, dC, mu)
    Ce, _ = model.rate_matrix(np.asarray(theta, dtype=float) + np.asarray(eps, dtype=float), mu.size - 1)
    return exact_rer_ctmc(C, Ce, mu)


# --------------------------------------------------------------------------
# brute-force path-space relative entropy


def brute_force_path_re(P, P_eps, M: int, mu=None, mu_eps=None) -> float:
    """Relative entropy of the laws of ``sigma_0..sigma_M`` (stationary starts), by enumeration.

    Every path is listed and ``sum Q log(Q / Q_eps)`` is accumulated
    directly; no decomposition is used.
    """
    P = _as_chain(P, "probability").matrix
    Pe = _as_chain(P_eps, "probability").matrix
    S = P.shape[0]
    if M < 0:
        raise ValueError("horizon M must be non-negative")
    n_paths = S ** (M + 1)
    if n_paths > ENUMERATION_LIMIT:
        raise PathSensError(f"{n_paths} paths exceed the enumeration bound {ENUMERATION_LIMIT}")
    mu = finite_stationary(P) if mu is None else np.asarray(mu, dtype=float)
    mue = finite_stationary(Pe) if mu_eps is None else np.asarray(mu_eps, dtype=float)
    total = []
    block = 1 << 20
    for start in range(0, n_paths, block):
        idx = np.arange(start, min(start + block, n_paths))
        paths = np.stack(np.unravel_index(idx, (S,) * (M + 1)), axis=1)
        q = mu[paths[:, 0]].copy()
        qe = mue[paths[:, 0]].copy()
        for m in range(M):
            q *= P[paths[:, m], paths[:, m + 1]]
            qe *= Pe[paths[:, m], paths[:, m + 1]]
        pos = q > 0
        if np.any(pos & ~(qe > 0)):
            raise AbsoluteContinuityError("a path with positive probability has zero probability under theta+eps")
        total.append(np.sum(q[pos] * np.log(q[pos] / qe[pos])))
    return math.fsum(total)


# --------------------------------------------------------------------------
# time-periodic chains


@dataclass
class PeriodicChain:
    """Transition matrices ``p(., .; m)`` for phases ``m = 0..zeta-1``."""

    matrices: Sequence[np.ndarray]
    gradients: Sequence[np.ndarray] | None = None

    def __post_init__(self):
        self.matrices = [_as_chain(P, "probability").matrix for P in self.matrices]
        if not self.matrices:
            raise ConfigError("a periodic chain needs at least one phase")
        if len({P.shape for P in self.matrices}) != 1:
            raise DimensionError("all phase matrices must have the same size")

    @property
    def period(self) -> int:
        return len(self.matrices)

    def phase_laws(self) -> list[np.ndarray]:
        """``mu(., m)``: stationary law of the one-period map started at phase ``m``."""
        z = self.period
        if z == 1:
            return [finite_stationary(self.matrices[0])]
        laws = []
        for m in range(z):
            A = np.eye(self.matrices[0].shape[0])
            for j in range(z):
                A = A @ self.matrices[(m + j) % z]
            laws.append(finite_stationary(A))
        return laws


def periodic_rer(chain: PeriodicChain, chain_eps: PeriodicChain) -> float:
    """``(1/zeta) sum_m sum_x mu(x, m) sum_y p_m log(p_m / p_eps_m)``."""
    if chain.period != chain_eps.period:
        raise DimensionError("periods differ")
    laws = chain.phase_laws()
    vals = [exact_rer_chain(P, Pe, mu) for P, Pe, mu in zip(chain.matrices, chain_eps.matrices, laws)]
    return sum(vals) / chain.period


def periodic_fim(chain: PeriodicChain) -> np.ndarray:
    if chain.gradients is None:
        raise ConfigError("periodic FIM needs the phase gradient tensors")
    laws = chain.phase_laws()
    mats = [exact_fim_chain(P, dP, mu) for P, dP, mu in zip(chain.matrices, chain.gradients, laws)]
    return sum(mats) / chain.period


# --------------------------------------------------------------------------
# semi-Markov processes


@dataclass
class SemiMarkovKernel:
    """Semi-Markov kernel through its density in time.

    ``density(t)`` returns ``dq(x, y; t)/dt`` with shape ``(S, S, len(t))``,
    so that ``int density dt`` is the embedded transition matrix.
    ``density_grad(t)`` (optional) returns the parameter derivative, shape
    ``(S, S, len(t), k)``. ``time_scale`` sets the default quadrature grid.
    """

    embedded: np.ndarray
    density: Callable[[np.ndarray], np.ndarray]
    density_grad: Callable[[np.ndarray], np.ndarray] | None = None
    time_scale: float = 1.0

    @classmethod
    def exponential(cls, C, dC=None) -> "SemiMarkovKernel":
        """Kernel of a jump Markov process: ``c(x, y) exp(-lambda(x) t)``."""
        C = _as_chain(C, "rate").matrix
        lam = C.sum(axis=1)
        if np.any(lam <= 0):
            raise ConfigError("every state needs a positive exit rate")

        def density(t):
            return C[:, :, None] * np.exp(-np.outer(lam, t))[:, None, :]

        grad = None
        if dC is not None:
            dC = np.asarray(dC, dtype=float)
            dlam = dC.sum(axis=1)

            def grad(t):
                e = np.exp(-np.outer(lam, t))[:, None, :, None]
                return e * (dC[:, :, None, :] - C[:, :, None, None] * t[None, None, :, None] * dlam[:, None, None, :])

        return cls(C / lam[:, None], density, grad, float(1.0 / lam.min()))


def default_time_grid(scale: float = 1.0, n: int = 2000) -> np.ndarray:
    """0 followed by a geometric grid from 1e-4 to 50 time scales."""
    return np.concatenate([[0.0], np.geomspace(1e-4 * scale, 50.0 * scale, n)])


def _trapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    dt = np.diff(t)
    return np.tensordot(0.5 * (y[..., 1:] + y[..., :-1]), dt, axes=([-1], [0])) if y.ndim else y


def _tail_bound(y: np.ndarray, t: np.ndarray) -> float:
    """Mass beyond the last node assuming exponential decay fitted on the last two nodes."""
    a, b = np.abs(y[..., -2]).sum(), np.abs(y[..., -1]).sum()
    if b == 0.0:
        return 0.0
    if a <= b:
        return math.inf
    rate = math.log(a / b) / (t[-1] - t[-2])
    return b / rate


def _semi_markov_common(kernel: SemiMarkovKernel, grid):
    t = default_time_grid(kernel.time_scale) if grid is None else np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0):
        raise ConfigError("time grid must be increasing with at least 3 nodes")
    mu = finite_stationary(kernel.embedded)
    q = kernel.density(t)
    sojourn = np.einsum("x,xyt->t", mu, q) * t
    if _tail_bound(sojourn, t) > 1e-8:
        raise QuadratureError("time grid too short for the sojourn-time integral; extend the grid")
    m_hat = float(_trapz(sojourn, t))
    if not m_hat > 0:
        raise PathSensError("mean sojourn time must be positive")
    return t, mu, q, m_hat


def semi_markov_rer(kernel: SemiMarkovKernel, kernel_eps: SemiMarkovKernel, grid=None) -> float:
    """``(1/m) int sum_x mu(x) sum_y q log(q / q_eps) dt`` with ``q`` the kernel density."""
    t, mu, q, m_hat = _semi_markov_common(kernel, grid)
    qe = kernel_eps.density(t)
    pos = q > 0
    if np.any(pos & ~(qe > 0)):
        raise AbsoluteContinuityError("kernel density positive under theta but zero under theta+eps")
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(pos, q * np.log(np.where(pos, q, 1.0) / np.where(pos, qe, 1.0)), 0.0)
    y = np.einsum("x,xyt->t", mu, integrand)
    if _tail_bound(y, t) > 1e-8:
        raise QuadratureError("time grid too short for the relative-entropy integral; extend the grid")
    return float(_trapz(y, t)) / m_hat


def semi_markov_fim(kernel: SemiMarkovKernel, grid=None) -> np.ndarray:
    """``(1/m) int sum_x mu(x) sum_y q grad log q grad log q^T dt``."""
    if kernel.density_grad is None:
        raise ConfigError("semi-Markov FIM needs the kernel density gradient")
    t, mu, q, m_hat = _semi_markov_common(kernel, grid)
    dq = kernel.density_grad(t)
    pos = q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(pos[..., None], dq / np.where(pos, q, 1.0)[..., None], 0.0)
    y = np.einsum("x,xyt,xyti,xytj->ijt", mu, q, g, g)
    if _tail_bound(y, t) > 1e-8:
        raise QuadratureError("time grid too short for the information integral; extend the grid")
    F = _trapz(y, t) / m_hat
    return 0.5 * (F + F.T)


# --------------------------------------------------------------------------
# input


def load_matrix(path) -> np.ndarray:
    """Whitespace-separated rows of a square matrix; ``#`` starts a comment."""
    M = np.loadtxt(path, dtype=float, comments="#", ndmin=2)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{path}: matrix is {M.shape[0]}x{M.shape[1]}, expected square")
    return M
