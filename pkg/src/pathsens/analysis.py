"""Post-processing of information matrices.

Eigen-decomposition by cyclic Jacobi rotations (the matrices here are at
most 10 x 10, and the rotation sweep is fully deterministic), the most and
least sensitive parameter directions, the determinant design criterion, a
parameter-grid sweep of sensitive directions, and level-set ellipses of the
quadratic form ``eps^T F eps``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import DimensionError


@dataclass
class EigenReport:
    """Eigenpairs of a symmetric matrix, eigenvalues in decreasing order.

    ``vectors[:, i]`` belongs to ``values[i]``; each vector's largest-magnitude
    component is positive. ``degenerate[i]`` flags eigenvalue ``i`` when it is
    within ``1e-8 ||F||`` of a neighbor, so its direction is not unique.
    """

    values: np.ndarray
    vectors: np.ndarray
    digest: str
    degenerate: np.ndarray
    sweeps: int = 0

    @property
    def most_sensitive(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def least_sensitive(self) -> np.ndarray:
        return self.vectors[:, -1]

    def determinant(self) -> float:
        return float(np.prod(self.values))

    def to_json(self) -> dict:
        return {"eigenvalues": self.values.tolist(), "eigenvectors": self.vectors.T.tolist(),
                "degenerate": self.degenerate.tolist(), "fim_digest": self.digest}


def matrix_digest(F: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(F, dtype=float).tobytes()).hexdigest()[:16]


def jacobi_eigh(F, tol: float = 1e-12, max_sweeps: int = 100) -> EigenReport:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Sweeps rotate every off-diagonal pair until the off-diagonal Frobenius
    norm falls below ``tol * ||F||``.
    """
    A0 = np.array(F, dtype=float)
    if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise DimensionError("eigen-decomposition needs a square matrix")
    if not np.all(np.isfinite(A0)):
        raise ValueError("matrix has non-finite entries")
    norm = float(np.linalg.norm(A0))
    asym = float(np.linalg.norm(A0 - A0.T))
    if asym > 1e-8 * max(norm, 1e-300):
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.3g}, norm {norm:.3g})")
    A = 0.5 * (A0 + A0.T)
    n = A.shape[0]
    V = np.eye(n)
    sweeps = 0

    def off(M):
        # summed directly: subtracting the diagonal from the full norm cancels badly
        return math.sqrt(2.0 * float(np.sum(np.triu(M, 1) ** 2)))

    while off(A) > tol * norm and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow; same root to working precision
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with the rotation in the (p, q) plane
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    vals, V = vals[order], V[:, order]
    for i in range(n):
        j = int(np.argmax(np.abs(V[:, i])))
        if V[j, i] < 0:
            V[:, i] = -V[:, i]
    gap_tol = 1e-8 * max(norm, 1e-300)
    degenerate = np.zeros(n, dtype=bool)
    for i in range(n - 1):
        if vals[i] - vals[i + 1] < gap_tol:
            degenerate[i] = degenerate[i + 1] = True
    return EigenReport(vals, V, matrix_digest(A0), degenerate, sweeps)


eigen_sym = jacobi_eigh


def a_optimality(F) -> float:
    """Determinant of the FIM as the product of its eigenvalues.

    This is the quantity the sensitivity literature sometimes calls
    A-optimality; in experiment-design terms it is the D-optimality
    criterion (A-optimality is usually the trace of the inverse).
    """
    return jacobi_eigh(F).determinant()


d_optimality = a_optimality


def design_criteria(F) -> dict:
    det = a_optimality(F)
    return {"determinant": det, "A_optimality_as_labelled": det, "D_optimality": det}


# --------------------------------------------------------------------------
# phase diagram


@dataclass
class PhasePoint:
    params: tuple
    valid: bool
    evec_max: np.ndarray | None = None
    eval_max: float = math.nan
    evec_min: np.ndarray | None = None
    eval_min: float = math.nan
    error: str = ""


@dataclass
class PhaseDiagram:
    points: list = field(default_factory=list)
    names: tuple = ()

    def max_eigenvalue(self) -> float:
        vals = [p.eval_max for p in self.points if p.valid]
        return max(vals) if vals else math.nan

    def arrow_lengths(self) -> list[tuple[float, float]]:
        """Eigenvalues scaled by the largest eigenvalue over the grid."""
        top = self.max_eigenvalue()
        return [(p.eval_max / top, p.eval_min / top) if p.valid else (math.nan, math.nan) for p in self.points]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p1", "p2", "evec_max_x", "evec_max_y", "eval_max", "evec_min_x", "evec_min_y",
                        "eval_min", "valid"])
            for p in self.points:
                p1 = p.params[0]
                p2 = p.params[1] if len(p.params) > 1 else ""
                if p.valid:
                    ex = list(p.evec_max) + [0.0] * (2 - len(p.evec_max))
                    en = list(p.evec_min) + [0.0] * (2 - len(p.evec_min))
                    row = [p1, p2, ex[0], ex[1], p.eval_max, en[0], en[1], p.eval_min, 1]
                else:
                    row = [p1, p2, "", "", "", "", "", "", 0]
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def phase_diagram(fim_at: Callable[[np.ndarray], np.ndarray], grid: Sequence, names: tuple = ()) -> PhaseDiagram:
    """Most/least sensitive directions of ``fim_at(theta)`` over parameter points.

    A point whose computation raises is recorded as invalid and the sweep
    continues.
    """
    out = PhaseDiagram(names=tuple(names))
    for theta in grid:
        th = tuple(float(v) for v in np.atleast_1d(theta))
        try:
            rep = jacobi_eigh(fim_at(np.array(th)))
        except Exception as exc:  # noqa: BLE001 - recorded per point
            out.points.append(PhasePoint(th, False, error=f"{type(exc).__name__}: {exc}"))
            continue
        out.points.append(PhasePoint(th, True, rep.vectors[:, 0].copy(), float(rep.values[0]),
                                     rep.vectors[:, -1].copy(), float(rep.values[-1])))
    return out


def grid_points(axes: Sequence[Sequence[float]]) -> list[np.ndarray]:
    """Cartesian product of per-parameter value lists, first axis slowest."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    return [np.array(v) for v in zip(*[m.ravel() for m in mesh])]


# --------------------------------------------------------------------------
# level sets of the quadratic form


def fim_level_set(F, i: int, j: int, level: float = 1.0, n: int = 181) -> np.ndarray:
    """Points ``eps`` in the ``(i, j)`` parameter plane with ``eps^T F_ij eps = level``.

    Returns shape ``(n, 2)``; empty when the 2 x 2 block is not positive
    definite (the level set is then unbounded).
    """
    F = np.asarray(F, dtype=float)
    B = F[np.ix_([i, j], [i, j])]
    rep = jacobi_eigh(B)
    if not np.all(rep.values > 0):
        return np.zeros((0, 2))
    phi = np.linspace(0.0, 2.0 * math.pi, n)
    circle = np.stack([np.cos(phi), np.sin(phi)])
    return (rep.vectors @ (circle * np.sqrt(level / rep.values)[:, None])).T


def level_set_records(F, names: Sequence[str], levels=(1.0,), n: int = 181) -> list[dict]:
    k = np.asarray(F).shape[0]
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            for lev in levels:
                pts = fim_level_set(F, i, j, lev, n)
                out.append({"plane": [names[i], names[j]], "level": lev, "points": pts.tolist()})
    return out
