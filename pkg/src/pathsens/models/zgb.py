"""Ziff-Gulari-Barshad CO oxidation on a periodic square lattice, no diffusion.

Spins: -1 = CO, 0 = vacant, +1 = O. Events at site ``j`` (n.n. = the four
nearest neighbors, ``s = sigma(j)``)::

    1  empty -> CO         (1 - s^2) k1
    2  empty -> O2 (pair)  (1 - s^2) (1 - k1) #vacant n.n. / 4
    3  CO + O -> CO2       s (s - 1) / 2  k2 #O n.n. / 4     (j holds CO)
    4  O + CO -> CO2       s (s + 1) / 2  k2 #CO n.n. / 4    (j holds O)

Multisite events also change one neighbor, chosen uniformly among the
eligible ones: the second O of an adsorbing O2 pair, or the reaction
partner, which is vacated together with ``j``.

Within each event type all site rates share one parameter factor
(k1, 1 - k1, k2, k2), so the jump model uses the four event types as
channels. Their totals depend on the lattice only through three counts,
the digest: vacant sites, vacant-vacant bonds and CO-O bonds.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ..core import AbsorbingStateError, ConfigError, ParameterVector
from .base import Advance, JumpModel

PARAM_NAMES = ("k1", "k2")
DEFAULT_THETA = (0.35, 0.85)
DEFAULT_SIZE = 64

CO, VACANT, O = -1, 0, 1

# neighbor offsets in enumeration order: up, down, left, right
_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def default_parameters() -> ParameterVector:
    return ParameterVector(DEFAULT_THETA, PARAM_NAMES)


class ZgbLattice:
    """L x L periodic lattice of spins in {-1, 0, +1}."""

    def __init__(self, spins):
        spins = np.array(spins, dtype=np.int8)
        if spins.ndim != 2 or spins.shape[0] != spins.shape[1]:
            raise ValueError("ZGB lattice must be a square 2-d array")
        if not np.all(np.isin(spins, (-1, 0, 1))):
            raise ValueError("spins must be -1 (CO), 0 (vacant) or +1 (O)")
        self.spins = spins

    @classmethod
    def empty(cls, size: int = DEFAULT_SIZE) -> "ZgbLattice":
        return cls(np.zeros((size, size), dtype=np.int8))

    @property
    def size(self) -> int:
        return self.spins.shape[0]

    def copy(self) -> "ZgbLattice":
        return ZgbLattice(self.spins.copy())

    def neighbors(self, j: tuple[int, int]) -> list[tuple[int, int]]:
        L = self.size
        r, c = j
        return [((r + dr) % L, (c + dc) % L) for dr, dc in _OFFSETS]

    def counts(self) -> np.ndarray:
        """The digest: (#vacant sites, #vacant-vacant bonds, #CO-O bonds)."""
        s = self.spins.astype(np.int64)
        vac = s == 0
        vv = 0
        coo = 0
        for axis in (0, 1):
            t = np.roll(s, -1, axis=axis)
            vv += int(np.count_nonzero(vac & (t == 0)))
            coo += int(np.count_nonzero(s * t == -1))
        return np.array([float(np.count_nonzero(vac)), float(vv), float(coo)])

    def coverages(self) -> dict[str, float]:
        n = self.spins.size
        return {"CO": float(np.count_nonzero(self.spins == CO)) / n,
                "vacant": float(np.count_nonzero(self.spins == VACANT)) / n,
                "O": float(np.count_nonzero(self.spins == O)) / n}


def _neighbor_counts(spins: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s = spins.astype(np.int64)
    nvac = np.zeros_like(s)
    nO = np.zeros_like(s)
    nCO = np.zeros_like(s)
    for dr, dc in _OFFSETS:
        t = np.roll(s, shift=(-dr, -dc), axis=(0, 1))
        nvac += t == 0
        nO += t == 1
        nCO += t == -1
    return nvac, nO, nCO


def zgb_rate_field(lattice: ZgbLattice, theta) -> np.ndarray:
    """All per-site event rates, shape (L, L, 4), following the rate table."""
    k1, k2 = np.asarray(theta, dtype=float)
    s = lattice.spins.astype(float)
    nvac, nO, nCO = _neighbor_counts(lattice.spins)
    empty = 1.0 - s * s
    return np.stack([
        empty * k1,
        empty * (1.0 - k1) * nvac / 4.0,
        0.5 * s * (s - 1.0) * k2 * nO / 4.0,
        0.5 * s * (s + 1.0) * k2 * nCO / 4.0,
    ], axis=-1)


def zgb_site_rates(lattice: ZgbLattice, j: tuple[int, int], theta) -> np.ndarray:
    """The four event rates at site ``j``."""
    k1, k2 = np.asarray(theta, dtype=float)
    s = float(lattice.spins[j])
    nb = [int(lattice.spins[n]) for n in lattice.neighbors(j)]
    nvac, nO, nCO = nb.count(VACANT), nb.count(O), nb.count(CO)
    empty = 1.0 - s * s
    return np.array([
        empty * k1,
        empty * (1.0 - k1) * nvac / 4.0,
        0.5 * s * (s - 1.0) * k2 * nO / 4.0,
        0.5 * s * (s + 1.0) * k2 * nCO / 4.0,
    ])


def _pick(u: float, n: int) -> int:
    """Index in 0..n-1 for u in (0, 1], by inversion."""
    return min(max(int(math.ceil(u * n)) - 1, 0), n - 1)


def zgb_execute(lattice: ZgbLattice, j: tuple[int, int], event: int, u: float) -> ZgbLattice:
    """Apply event 1..4 at site ``j``; ``u`` in (0, 1] picks the partner.

    The partner is uniform among the eligible neighbors, taken in the fixed
    neighbor order. Returns a new lattice.
    """
    s = int(lattice.spins[j])
    out = lattice.copy()
    if event == 1:
        if s != VACANT:
            raise ValueError(f"event 1 needs a vacant site, site {j} holds {s}")
        out.spins[j] = CO
        return out
    want = {2: VACANT, 3: O, 4: CO}[event]
    need_site = {2: VACANT, 3: CO, 4: O}[event]
    if s != need_site:
        raise ValueError(f"event {event} cannot fire at site {j} holding {s}")
    eligible = [n for n in lattice.neighbors(j) if lattice.spins[n] == want]
    if not eligible:
        raise RuntimeError(f"event {event} at site {j} has no eligible neighbor")
    partner = eligible[_pick(u, len(eligible))]
    if event == 2:
        out.spins[j] = O
        out.spins[partner] = O
    else:
        out.spins[j] = VACANT
        out.spins[partner] = VACANT
    return out


class ZgbModel(JumpModel):
    """ZGB lattice SSA with event types as channels."""

    param_names = PARAM_NAMES
    channel_names = ("CO_adsorption", "O2_adsorption", "reaction_at_CO", "reaction_at_O")
    digest_names = ("n_vacant", "vacant_bonds", "CO_O_bonds")
    n_uniforms = 3

    def check_admissible(self, theta) -> None:
        super().check_admissible(theta)
        k1, k2 = np.asarray(theta, dtype=float)
        if not 0.0 < k1 < 1.0:
            raise ConfigError(f"ZGB requires 0 < k1 < 1, got k1={k1:g}")
        if not k2 > 0.0:
            raise ConfigError(f"ZGB requires k2 > 0, got k2={k2:g}")

    @staticmethod
    def _factors(digests) -> np.ndarray:
        d = np.asarray(digests, dtype=float)
        return np.stack([d[:, 0], d[:, 1] / 2.0, d[:, 2] / 4.0, d[:, 2] / 4.0], axis=1)

    def rates(self, digests, theta) -> np.ndarray:
        k1, k2 = np.asarray(theta, dtype=float)
        return self._factors(digests) * np.array([k1, 1.0 - k1, k2, k2])

    def log_rate_gradients(self, digests, theta) -> np.ndarray:
        k1, k2 = np.asarray(theta, dtype=float)
        g = np.array([[1.0 / k1, 0.0], [-1.0 / (1.0 - k1), 0.0], [0.0, 1.0 / k2], [0.0, 1.0 / k2]])
        open_ = self._factors(digests) > 0
        return open_[:, :, None] * g[None]

    def digest(self, state: ZgbLattice) -> np.ndarray:
        return state.counts()

    def fire(self, state: ZgbLattice, channel, u_within=1.0, extra=(1.0,)):
        # site weights inside a channel are theta-free; scan them row-major
        # exactly like the compiled kernel
        w = _channel_weights(state.spins, channel).ravel()
        cum = np.cumsum(w)
        idx = min(int(np.searchsorted(cum, u_within * cum[-1], side="left")), w.size - 1)
        while w[idx] <= 0:
            idx -= 1
        j = divmod(idx, state.size)
        u = float(extra[0]) if len(extra) else 1.0
        return zgb_execute(state, j, channel + 1, u)

    def advance(self, state: ZgbLattice, theta, uniforms, t, t_stop, max_jumps) -> Advance:
        m = uniforms.shape[0]
        dig = np.empty((m, 3))
        waits = np.empty(m)
        chans = np.empty(m, dtype=np.int64)
        spins = state.spins.copy()
        counts = state.counts().astype(np.int64)
        k1, k2 = np.asarray(theta, dtype=float)
        n, t_new, flag = _zgb_kernel(spins, counts, k1, k2, np.ascontiguousarray(uniforms), float(t),
                                     float(t_stop), int(max_jumps), dig, waits, chans)
        if flag == 1:
            raise AbsorbingStateError(
                f"ZGB lattice reached an absorbing configuration at t={t_new:g} "
                f"(coverages {ZgbLattice(spins).coverages()})")
        return Advance(dig[:n], waits[:n], chans[:n], ZgbLattice(spins), t_new, flag == 2)


def _channel_weights(spins: np.ndarray, channel: int) -> np.ndarray:
    """Per-site weights of a channel, i.e. site rates divided by its parameter factor."""
    s = spins.astype(np.int64)
    nvac, nO, nCO = _neighbor_counts(spins)
    if channel == 0:
        return (s == 0).astype(float)
    if channel == 1:
        return (s == 0) * nvac / 4.0
    if channel == 2:
        return (s == -1) * nO / 4.0
    return (s == 1) * nCO / 4.0


@numba.njit(cache=True)
def _nb(L, r, c, d):
    if d == 0:
        return (r - 1) % L, c
    if d == 1:
        return (r + 1) % L, c
    if d == 2:
        return r, (c - 1) % L
    return r, (c + 1) % L


@numba.njit(cache=True)
def _site_weight(spins, L, r, c, channel):
    s = spins[r, c]
    if channel == 0:
        return 1.0 if s == 0 else 0.0
    want_site = 0 if channel == 1 else (-1 if channel == 2 else 1)
    if s != want_site:
        return 0.0
    want_nb = 0 if channel == 1 else (1 if channel == 2 else -1)
    cnt = 0
    for d in range(4):
        rr, cc = _nb(L, r, c, d)
        if spins[rr, cc] == want_nb:
            cnt += 1
    return cnt / 4.0


@numba.njit(cache=True)
def _bond_stats(spins, L, r0, c0, r1, c1, two):
    """Vacant-vacant and CO-O bonds incident to one or two sites, each bond once."""
    vv = 0
    coo = 0
    nsite = 2 if two else 1
    for si in range(nsite):
        r = r0 if si == 0 else r1
        c = c0 if si == 0 else c1
        a = spins[r, c]
        for d in range(4):
            rr, cc = _nb(L, r, c, d)
            if si == 1 and rr == r0 and cc == c0:
                continue
            b = spins[rr, cc]
            if a == 0 and b == 0:
                vv += 1
            if a * b == -1:
                coo += 1
    return vv, coo


@numba.njit(cache=True)
def _zgb_kernel(spins, counts, k1, k2, uniforms, t, t_stop, max_jumps, out_d, out_w, out_c):
    L = spins.shape[0]
    n = 0
    rates = np.empty(4)
    for i in range(uniforms.shape[0]):
        if n >= max_jumps:
            break
        g0 = float(counts[0])
        g1 = float(counts[1]) / 2.0
        g2 = float(counts[2]) / 4.0
        rates[0] = g0 * k1
        rates[1] = g1 * (1.0 - k1)
        rates[2] = g2 * k2
        rates[3] = g2 * k2
        cum = 0.0
        for ch in range(4):
            cum += rates[ch]
        lam = cum
        if not lam > 0.0:
            return n, t, 1
        tau = -math.log(uniforms[i, 0]) / lam
        out_d[n, 0] = float(counts[0])
        out_d[n, 1] = float(counts[1])
        out_d[n, 2] = float(counts[2])
        if tau > t_stop - t:
            out_w[n] = t_stop - t
            out_c[n] = -1
            return n + 1, t_stop, 2
        out_w[n] = tau
        t += tau
        # channel by cumulative scan, mirroring select_channel
        thr = uniforms[i, 1] * lam
        cum = 0.0
        chosen = 3
        before = 0.0
        for ch in range(4):
            prev = cum
            cum += rates[ch]
            if cum >= thr:
                chosen = ch
                before = prev
                break
        while rates[chosen] <= 0.0:
            chosen -= 1
            before = 0.0
            for c2 in range(chosen):
                before += rates[c2]
        u_in = (thr - before) / rates[chosen]
        if u_in < 0.0:
            u_in = 0.0
        if u_in > 1.0:
            u_in = 1.0
        # site within the channel by a row-major scan of theta-free weights
        if chosen == 0:
            wtot = g0
        elif chosen == 1:
            wtot = g1
        else:
            wtot = g2
        target = u_in * wtot
        acc = 0.0
        sr = -1
        sc = -1
        lr = -1
        lc = -1
        for r in range(L):
            for c in range(L):
                w = _site_weight(spins, L, r, c, chosen)
                if w > 0.0:
                    lr = r
                    lc = c
                    acc += w
                    if acc >= target:
                        sr = r
                        sc = c
                        break
            if sr >= 0:
                break
        if sr < 0:
            sr = lr
            sc = lc
        # partner among eligible neighbors in fixed order
        pr = -1
        pc = -1
        if chosen > 0:
            want_nb = 0 if chosen == 1 else (1 if chosen == 2 else -1)
            cnt = 0
            for d in range(4):
                rr, cc = _nb(L, sr, sc, d)
                if spins[rr, cc] == want_nb:
                    cnt += 1
            u = uniforms[i, 2]
            pick = int(math.ceil(u * cnt)) - 1
            if pick < 0:
                pick = 0
            if pick > cnt - 1:
                pick = cnt - 1
            seen = 0
            for d in range(4):
                rr, cc = _nb(L, sr, sc, d)
                if spins[rr, cc] == want_nb:
                    if seen == pick:
                        pr = rr
                        pc = cc
                        break
                    seen += 1
        two = chosen > 0
        vv0, co0 = _bond_stats(spins, L, sr, sc, pr, pc, two)
        nvac0 = (1 if spins[sr, sc] == 0 else 0) + ((1 if spins[pr, pc] == 0 else 0) if two else 0)
        if chosen == 0:
            spins[sr, sc] = -1
        elif chosen == 1:
            spins[sr, sc] = 1
            spins[pr, pc] = 1
        else:
            spins[sr, sc] = 0
            spins[pr, pc] = 0
        vv1, co1 = _bond_stats(spins, L, sr, sc, pr, pc, two)
        nvac1 = (1 if spins[sr, sc] == 0 else 0) + ((1 if spins[pr, pc] == 0 else 0) if two else 0)
        counts[0] += nvac1 - nvac0
        counts[1] += vv1 - vv0
        counts[2] += co1 - co0
        out_c[n] = chosen
        n += 1
    return n, t, 0
