"""Discrete operators and the hyperbolic metric on a triangulated cover.

The background is the piecewise-flat metric with vertices on the unit sphere
(chordal edge lengths).  The hyperbolic metric is ``e^{2u}`` times the
background and solves the discrete Liouville equation

    R_i(u) = (L u)_i + kappa_i + A_i exp(2 u_i) = 0,

with ``L`` the cotangent stiffness matrix, ``kappa`` the angle defects and
``A`` mixed Voronoi areas.  ``R`` is the gradient of a strictly convex energy,
so Newton with a backtracking line search converges from any start.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg, splu

from .charts import ChartGradient, build_gradient, build_quadratic_gradient
from .mesh import CoverSurface, euler_characteristic


class SolverError(RuntimeError):
    """Newton or linear solve failed; carries the residual history."""

    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = history or []


@dataclass(frozen=True)
class DiscreteOperators:
    L: sparse.csr_matrix        # cotangent stiffness, symmetric PSD
    area: np.ndarray            # mixed Voronoi vertex areas
    face_area: np.ndarray
    defect: np.ndarray          # 2 pi - angle sum
    angle_sum: np.ndarray
    gradient: ChartGradient

    @property
    def total_area(self) -> float:
        return float(self.area.sum())


def _face_geometry(x: np.ndarray, faces: np.ndarray):
    p = x[faces]                                  # (F, 3, 3)
    e = [p[:, (r + 2) % 3] - p[:, (r + 1) % 3] for r in range(3)]   # opposite edges
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1)
    cots, angles = [], []
    for r in range(3):
        u = p[:, (r + 1) % 3] - p[:, r]
        v = p[:, (r + 2) % 3] - p[:, r]
        dot = np.einsum("ij,ij->i", u, v)
        cots.append(dot / (2.0 * area))
        angles.append(np.arctan2(2.0 * area, dot))
    return area, np.array(cots).T, np.array(angles).T


def mixed_areas(x, faces, area, cots, angles) -> np.ndarray:
    """Voronoi vertex areas, falling back to area/2, area/4 on obtuse faces.

    Unlike barycentric areas these make ``L f / A`` a pointwise consistent
    Laplacian on irregular meshes.  They sum to the total area.
    """
    p = x[faces]
    out = np.zeros(len(x))
    obtuse = angles.max(axis=1) > np.pi / 2
    for r in range(3):
        j, k = (r + 1) % 3, (r + 2) % 3
        eij = np.sum((p[:, j] - p[:, r]) ** 2, axis=1)
        eik = np.sum((p[:, k] - p[:, r]) ** 2, axis=1)
        vor = (eij * cots[:, k] + eik * cots[:, j]) / 8.0
        fallback = np.where(angles[:, r] > np.pi / 2, area / 2.0, area / 4.0)
        np.add.at(out, faces[:, r], np.where(obtuse, fallback, vor))
    return out


def assemble_operators(surface: CoverSurface, min_area: float = 1e-14,
                       quadratic: bool = True) -> DiscreteOperators:
    x = surface.positions()
    faces = surface.faces
    V = surface.num_vertices
    area, cots, angles = _face_geometry(x, faces)
    if area.min() < min_area:
        raise ValueError(f"degenerate triangle (area {area.min():.3e})")

    rows, cols, vals = [], [], []
    for r in range(3):
        i = faces[:, (r + 1) % 3]
        j = faces[:, (r + 2) % 3]
        w = 0.5 * cots[:, r]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    L = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(V, V))
    L = ((L + L.T) * 0.5).tocsr()

    varea = mixed_areas(x, faces, area, cots, angles)
    asum = np.zeros(V)
    for r in range(3):
        np.add.at(asum, faces[:, r], angles[:, r])
    gradient = build_quadratic_gradient(surface) if quadratic else build_gradient(surface)
    return DiscreteOperators(L, varea, area, 2 * np.pi - asum, asum, gradient)


@dataclass(frozen=True)
class MetricField:
    """Solution ``u`` of the Liouville equation; ``g`` is chart dependent."""

    u: np.ndarray
    residual_history: tuple[float, ...]
    iterations: int
    converged: bool
    mass: np.ndarray = field(repr=False)   # hyperbolic vertex areas A_i e^{2u_i}

    @property
    def area(self) -> float:
        return float(self.mass.sum())

    def residual(self) -> float:
        return self.residual_history[-1]

    def log_density(self, background: np.ndarray) -> np.ndarray:
        """``log g`` in own charts, given the background density ``lambda``.

        ``lambda = 2 g`` for the background, so ``log g = 2u + log(lambda / 2)``.
        """
        with np.errstate(divide="ignore"):
            return 2.0 * self.u + np.log(background / 2.0)

    def write_csv(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        cols = {"u": self.u, "mass": self.mass}
        cols.update(extra or {})
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex"] + list(cols))
            for i in range(len(self.u)):
                w.writerow([i] + [_csv_value(c[i]) for c in cols.values()])


def _csv_value(v):
    if np.iscomplexobj(v):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{v:.17g}"


def liouville_residual(ops: DiscreteOperators, u: np.ndarray) -> np.ndarray:
    return ops.L @ u + ops.defect + ops.area * np.exp(2 * u)


def _energy(ops: DiscreteOperators, u: np.ndarray) -> float:
    return 0.5 * u @ (ops.L @ u) + ops.defect @ u + 0.5 * ops.area @ np.exp(2 * u)


def liouville_jacobian(ops: DiscreteOperators, u: np.ndarray) -> sparse.csc_matrix:
    return (ops.L + sparse.diags(2 * ops.area * np.exp(2 * u))).tocsc()


def solve_liouville(surface: CoverSurface, ops: DiscreteOperators | None = None,
                    tol: float = 1e-10, max_iter: int = 60,
                    u0: np.ndarray | None = None) -> MetricField:
    """Newton's method for the constant curvature ``-1`` metric.

    Stops once ``max |R_i| <= tol``.  Raises ``SolverError`` if the cover has
    ``chi >= 0`` or Newton stalls.
    """
    chi = euler_characteristic(surface)
    if chi >= 0:
        raise ValueError(f"no hyperbolic metric for chi = {chi}")
    if ops is None:
        ops = assemble_operators(surface)
    if u0 is None:
        u = np.full(surface.num_vertices, 0.5 * np.log(-2 * np.pi * chi / ops.total_area))
    else:
        u = np.array(u0, dtype=float)

    R = liouville_residual(ops, u)
    history = [float(np.abs(R).max())]
    E = _energy(ops, u)
    for it in range(1, max_iter + 1):
        if history[-1] <= tol:
            return MetricField(u, tuple(history), it - 1, True, ops.area * np.exp(2 * u))
        J = liouville_jacobian(ops, u)
        try:
            step = -splu(J).solve(R)
        except RuntimeError as exc:
            raise SolverError(f"linear solve failed: {exc}", history) from exc
        t = 1.0
        slope = R @ step
        norm = np.linalg.norm(R)
        while True:
            trial = u + t * step
            E_trial = _energy(ops, trial)
            R_trial = liouville_residual(ops, trial)
            # near the solution energy decreases drown in roundoff; the
            # residual norm is then the reliable merit function
            if (E_trial <= E + 1e-4 * t * slope
                    or np.linalg.norm(R_trial) <= (1 - 1e-4 * t) * norm or t < 1e-10):
                break
            t *= 0.5
        u, E, R = trial, E_trial, R_trial
        history.append(float(np.abs(R).max()))
    if history[-1] <= tol:
        return MetricField(u, tuple(history), max_iter, True, ops.area * np.exp(2 * u))
    raise SolverError(f"Newton did not converge in {max_iter} iterations", history)


def face_area_estimate(surface: CoverSurface, ops: DiscreteOperators,
                       metric: MetricField) -> float:
    """Hyperbolic area by face quadrature of ``exp(2u)``.

    ``metric.area`` equals ``-2 pi chi`` exactly by discrete Gauss-Bonnet;
    this independent rule carries the discretization error.
    """
    conf = np.exp(2 * metric.u)[surface.faces].mean(axis=1)
    return float(np.sum(ops.face_area * conf))


def spd_certificate(matrix, rtol: float = 1e-12, seed: int = 0) -> bool:
    """Symmetric and positive definite, witnessed by a converging CG solve."""
    A = sparse.csr_matrix(matrix)
    if abs(A - A.T).max() > 1e-12 * abs(A).max():
        return False
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(A.shape[0])
    x, info = cg(A, b, rtol=rtol, maxiter=20 * A.shape[0])
    return info == 0 and float(x @ b) > 0


# nonnegative Laplacian  box = -g^{-1} d_z d_zbar = -(1/2) Delta_LB, and the
# cotangent matrix approximates M * (-Delta_LB); hence box ~ L / (2 M)
BOX_SCALE = 0.5


def apply_box(ops: DiscreteOperators, metric: MetricField, f: np.ndarray) -> np.ndarray:
    return BOX_SCALE * (ops.L @ f) / metric.mass


def screened_poisson(ops: DiscreteOperators, metric: MetricField, rhs: np.ndarray,
                     box_scale: float = BOX_SCALE) -> np.ndarray:
    """Solve ``(box + 1) phi = rhs`` as ``(s L + M) phi = M rhs``."""
    M = sparse.diags(metric.mass)
    A = (box_scale * ops.L + M).tocsc()
    b = metric.mass * np.asarray(rhs, dtype=float)
    try:
        phi = splu(A).solve(b)
    except RuntimeError as exc:
        raise SolverError(f"screened Poisson solve failed: {exc}") from exc
    if not np.all(np.isfinite(phi)):
        raise SolverError("screened Poisson solve produced non-finite values")
    return phi
