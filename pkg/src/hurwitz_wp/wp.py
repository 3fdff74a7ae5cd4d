"""Weil-Petersson norm of a branch-point motion via finite differences in s.

One branch point ``p_k`` moves inside its disk, ``w_loc = z^2 + s``, while
everything outside the disk stays fixed.  With ``log g`` known on five solves
``s in {0, +-eps, +-i eps}`` at fixed chart coordinates we form

    g_szbar = d_s d_zbar log g,  g_ssbar = d_s d_sbar log g,
    a = -g_szbar / g,  mu = d_zbar a,  phi = g_ssbar - |g_szbar|^2 / g

and integrate

    G0 = int phi |zeta|^2 h,   G1 = int |a zeta + xi|^2 g h,
    fiber = int (g_ssbar |zeta|^2 - 2 Re(g_szbar zeta conj(xi)) + g |xi|^2) h

against ``i dz ^ dzbar``, all with one lumped quadrature.  An independent
value of G0 comes from ``(box + 1) psi = |mu|^2`` and ``int psi |zeta|^2 h``.

The computation runs in a canonical frame where ``p_k = 0`` and ``p_{k+1}``
is on the positive real axis; the result is transported back, which makes it
exactly covariant under rotations of the sphere.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .charts import background_density, chart_frame, vertex_coordinates
from .mesh import (CHART_DISK, CHART_LOCAL, CHART_W, CHART_WINV, BranchConfiguration,
                   CoverSurface, MeshParams, build_cover)
from .solver import (DiscreteOperators, MetricField, apply_box, assemble_operators,
                     screened_poisson, solve_liouville)
from .sphere import Rotation, to_sphere


def target_metric(w):
    """Density ``h`` of the curvature +1 form ``h i dw ^ dwbar`` on P1."""
    return 2.0 / (1.0 + np.abs(np.asarray(w)) ** 2) ** 2


def curvature_scalings(wp: float) -> tuple[float, float]:
    """Curvatures of the determinant line and of the Deligne pairing."""
    if wp < 0:
        raise ValueError("Weil-Petersson norm must be nonnegative")
    value = wp / (4 * np.pi ** 2)
    return value, value


def fiber_identity_residual(g, g_ss, g_sz, a, phi, zeta, xi):
    """Pointwise ``g_ss|zeta|^2 - 2Re(g_sz zeta conj xi) + g|xi|^2
    - phi|zeta|^2 - |a zeta + xi|^2 g``, relative to the term sizes."""
    lhs = g_ss * np.abs(zeta) ** 2 - 2 * np.real(g_sz * zeta * np.conj(xi)) + g * np.abs(xi) ** 2
    rhs = phi * np.abs(zeta) ** 2 + np.abs(a * zeta + xi) ** 2 * g
    scale = (np.abs(g_ss) * np.abs(zeta) ** 2 + 2 * np.abs(g_sz * zeta * xi)
             + g * np.abs(xi) ** 2 + np.abs(phi) * np.abs(zeta) ** 2
             + np.abs(a * zeta + xi) ** 2 * g)
    return np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)


def random_identity_check(samples: int = 1000, seed: int = 0) -> float:
    """Max relative residual of the pointwise identity on random tensors."""
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.1, 10.0, samples)
    g_sz = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    g_ss = rng.normal(size=samples) * 10
    zeta = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    xi = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    a = -g_sz / g
    phi = g_ss - np.abs(g_sz) ** 2 / g
    return float(fiber_identity_residual(g, g_ss, g_sz, a, phi, zeta, xi).max())


# -- stencil -----------------------------------------------------------------

STENCIL_SHIFTS = (0.0, 1.0, -1.0, 1j, -1j)


@dataclass(frozen=True)
class Solve:
    surface: CoverSurface
    ops: DiscreteOperators
    metric: MetricField


@dataclass(frozen=True)
class FamilyStencil:
    """Five solves of the deformed family at ``s = 0, +-eps, +-i eps``.

    ``moving is None`` is the constant family (every member is the same
    surface), for which all ``s``-derivatives vanish.
    """

    config: BranchConfiguration
    moving: int | None
    eps: float
    refinement: int
    solves: tuple[Solve, ...]

    @property
    def center(self) -> Solve:
        return self.solves[0]


def _solve_member(surface: CoverSurface, tol: float) -> Solve:
    ops = assemble_operators(surface)
    return Solve(surface, ops, solve_liouville(surface, ops, tol=tol))


def eps_limit(surface: CoverSurface) -> float:
    """Largest admissible step: 1/8 of the disk radius in the local coordinate."""
    return float(np.tan(surface.base.disk_radius / 2) / 8)


def build_stencil(config: BranchConfiguration | CoverSurface, moving: int | None, eps: float,
                  refinement: int = 3, params: MeshParams = MeshParams(),
                  tol: float = 1e-10, workers: int = 1,
                  center: Solve | None = None) -> FamilyStencil:
    """Solve the five members; ``center`` reuses an existing ``s = 0`` solve."""
    surface = config if isinstance(config, CoverSurface) else build_cover(config, refinement, params)
    if eps <= 0:
        raise ValueError("eps must be positive")
    limit = eps_limit(surface)
    if moving is not None and eps >= limit:
        raise ValueError(f"eps must be below {limit:.3g} (1/8 of the disk radius)")
    if moving is None:
        members = [surface]
    else:
        members = [surface.deformed(moving, eps * d) for d in STENCIL_SHIFTS]
    todo = members[1:] if center is not None else members
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            solves = list(pool.map(lambda s: _solve_member(s, tol), todo))
    else:
        solves = [_solve_member(s, tol) for s in todo]
    if center is not None:
        solves = [center] + solves
    if moving is None:
        solves = [solves[0]] * 5
    return FamilyStencil(surface.config, moving, eps, refinement, tuple(solves))


def _center_rings(surface: CoverSurface):
    """For each ramification vertex, the cover vertices of its first two rings."""
    ring = surface.base.ring_of[surface.vertex_base]
    out = []
    for j, c in enumerate(surface.ram_vertices):
        same = (surface.chart_disk == j) & (surface.chart_kind == CHART_DISK)
        out.append((c, np.flatnonzero(same & (ring == 1)), np.flatnonzero(same & (ring == 2))))
    return out


def log_density(solve: Solve) -> np.ndarray:
    """``log g`` in own charts; at ramification vertices (where the background
    vanishes) it is extrapolated from the first two rings, ``O(h^4)``."""
    surf = solve.surface
    ell = solve.metric.log_density(background_density(surf))
    for c, r1, r2 in _center_rings(surf):
        ell[c] = (4 * ell[r1].mean() - ell[r2].mean()) / 3
    return ell


@dataclass(frozen=True)
class WPTensors:
    g: np.ndarray
    g_sz: np.ndarray       # d_s d_zbar log g
    g_ss: np.ndarray       # d_s d_sbar log g
    a: np.ndarray          # horizontal lift component a^z_s
    mu: np.ndarray         # d_zbar a
    phi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    h: np.ndarray          # target density at the image point
    weight: np.ndarray     # quadrature weight of i dz ^ dzbar: M_i / g_i

    def identity_residual(self) -> float:
        return float(fiber_identity_residual(self.g, self.g_ss, self.g_sz, self.a,
                                             self.phi, self.zeta, self.xi).max())


def assemble_tensors(stencil: FamilyStencil) -> WPTensors:
    eps = stencil.eps
    ells = [log_density(s) for s in stencil.solves]
    dbars = [s.ops.gradient.dzbar_log_density(e) for s, e in zip(stencil.solves, ells)]
    l0, lp, lm, lip, lim = ells
    d0, dp, dm, dip, dim = dbars
    g_sz = ((dp - dm) - 1j * (dip - dim)) / (4 * eps)
    g_ss = (lp + lm + lip + lim - 4 * l0) / (4 * eps ** 2)
    g = np.exp(l0)
    a = -g_sz / g
    center = stencil.center
    mu = center.ops.gradient.dzbar_vector(a)
    phi = g_ss - np.abs(g_sz) ** 2 / g
    zeta, xi, h = chart_frame(center.surface.deformed(stencil.moving, 0.0)
                              if stencil.moving is not None else center.surface)
    weight = center.metric.mass / g
    return WPTensors(g, g_sz, g_ss, a, mu, phi, zeta, xi, h, weight)


def _integrate(t: WPTensors, density) -> float:
    return float(np.sum(t.weight * density))


def wp_g0_direct(t: WPTensors) -> float:
    return _integrate(t, t.phi * np.abs(t.zeta) ** 2 * t.h)


def wp_g1(t: WPTensors) -> float:
    return _integrate(t, np.abs(t.a * t.zeta + t.xi) ** 2 * t.g * t.h)


def fiber_integral(t: WPTensors) -> float:
    dens = (t.g_ss * np.abs(t.zeta) ** 2 - 2 * np.real(t.g_sz * t.zeta * np.conj(t.xi))
            + t.g * np.abs(t.xi) ** 2) * t.h
    return _integrate(t, dens)


def wp_g0_pde(t: WPTensors, ops: DiscreteOperators, metric: MetricField,
              rhs_scale: float = 1.0) -> tuple[float, np.ndarray]:
    """G0 through the screened Poisson problem; returns the value and ``psi``."""
    psi = screened_poisson(ops, metric, rhs_scale * np.abs(t.mu) ** 2)
    return _integrate(t, psi * np.abs(t.zeta) ** 2 * t.h), psi


def ell_residual(t: WPTensors, ops: DiscreteOperators, metric: MetricField) -> float:
    """Relative hyperbolic L2 norm of ``(box + 1) phi - |mu|^2``."""
    rhs = np.abs(t.mu) ** 2
    res = apply_box(ops, metric, t.phi) + t.phi - rhs
    m = metric.mass
    return float(np.sqrt(np.sum(m * res ** 2) / np.sum(m * rhs ** 2)))


@dataclass(frozen=True)
class WPResult:
    g0_direct: float
    g0_pde: float
    g1: float
    fiber_integral: float
    det_curvature: float
    deligne_curvature: float
    identity_residual: float
    ell_residual: float
    phi_min: float
    mu_max: float
    eps: float
    refinement: int
    moving: int | None
    scale: float = 1.0       # factor applied when transporting to the user frame
    richardson: dict = field(default_factory=dict)

    @property
    def wp_total(self) -> float:
        return self.g0_direct + self.g1

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "g0_direct", "g0_pde", "g1", "fiber_integral", "det_curvature",
            "deligne_curvature", "eps", "refinement", "moving", "scale")}
        out["wp_total"] = self.wp_total
        out["residuals"] = {
            "identity": self.identity_residual,
            "ell": self.ell_residual,
            "phi_min": self.phi_min,
            "mu_max": self.mu_max,
        }
        out["richardson"] = self.richardson
        return out

    def scaled(self, factor: float) -> "WPResult":
        """All integrals are quadratic in the direction; residuals are not."""
        g0, g0p, g1, fib = (factor * v for v in (
            self.g0_direct, self.g0_pde, self.g1, self.fiber_integral))
        det, dl = curvature_scalings(g0 + g1)
        return replace(self, g0_direct=g0, g0_pde=g0p, g1=g1, fiber_integral=fib,
                       det_curvature=det, deligne_curvature=dl, scale=self.scale * factor)


def evaluate(stencil: FamilyStencil) -> tuple[WPResult, WPTensors, np.ndarray]:
    t = assemble_tensors(stencil)
    c = stencil.center
    g0 = wp_g0_direct(t)
    g1 = wp_g1(t)
    g0p, psi = wp_g0_pde(t, c.ops, c.metric)
    det, dl = curvature_scalings(max(g0 + g1, 0.0))
    mu_max = float(np.abs(t.mu).max())
    res = WPResult(
        g0_direct=g0, g0_pde=g0p, g1=g1, fiber_integral=fiber_integral(t),
        det_curvature=det, deligne_curvature=dl,
        identity_residual=t.identity_residual(),
        ell_residual=ell_residual(t, c.ops, c.metric) if mu_max > 0 else 0.0,
        phi_min=float(t.phi.min()), mu_max=mu_max,
        eps=stencil.eps, refinement=stencil.refinement, moving=stencil.moving,
    )
    return res, t, psi


# -- canonical frame and the user-facing entry point -------------------------

SNAP_DIGITS = 12


def _snap(z: complex) -> complex:
    """Round to a fixed grid so congruent inputs give bit-identical meshes."""
    if not np.isfinite(z) or abs(z) > 10.0 ** SNAP_DIGITS:
        return complex(np.inf, 0.0)
    return complex(round(z.real, SNAP_DIGITS) + 0.0, round(z.imag, SNAP_DIGITS) + 0.0)


def canonical_frame(config: BranchConfiguration, k: int) -> tuple[BranchConfiguration, Rotation]:
    """Rotate ``p_k`` to ``0`` and the next finite image onto the positive real
    axis, then relabel cyclically so the moving point has index 0.

    A cyclic relabelling conjugates the monodromy product, so the datum stays
    valid.  The base point is dropped and chosen afresh in the new frame.
    Coordinates are snapped to ``1e-12`` so that roundoff cannot flip
    discrete meshing decisions between congruent configurations.
    """
    b = config.b
    if not 0 <= k < b:
        raise ValueError(f"branch point index {k} out of range 0..{b - 1}")
    x = to_sphere(np.array([config.points[k]], dtype=complex))[0]
    rot = Rotation.to_origin(x)
    for step in range(1, b):
        q = complex(rot(config.points[(k + step) % b]))
        if np.isfinite(q) and abs(q) > 1e-12:
            rot = Rotation.about_pole(-np.angle(q)).compose(rot)
            break
    order = [(k + i) % b for i in range(b)]
    pts = [_snap(complex(rot(config.points[i]))) for i in order]
    pts[0] = 0j
    datum = replace(config.datum, transpositions=tuple(config.datum.transpositions[i] for i in order))
    return BranchConfiguration(tuple(pts), datum), rot


def direction_scale(point: complex, direction: complex = 1.0) -> float:
    """Factor turning the canonical norm into the norm of ``direction``.

    ``direction`` is a displacement of ``point`` in the affine chart ``w`` (or
    ``1/w`` at infinity).  Rotations are isometries of ``h``, so the factor is
    ``|direction|^2 h(point) / h(0)``.
    """
    d2 = abs(direction) ** 2
    if not np.isfinite(point):
        return float(d2)
    return float(d2 / (1.0 + abs(point) ** 2) ** 2)


def richardson_select(surface: CoverSurface, moving: int, eps_list, tol: float = 1e-10,
                      rtol: float = 1e-3, workers: int = 1) -> tuple[FamilyStencil, dict]:
    """Decrease ``eps`` until consecutive totals agree to ``rtol``.

    The centre solve is shared between all steps.  Returns the finer stencil of
    the first agreeing pair (or the last one tried) with a report.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if len(eps_list) < 2:
        raise ValueError("need at least two step sizes")
    center = None
    totals, stencils = [], []
    chosen = None
    for eps in eps_list:
        st = build_stencil(surface, moving, eps, tol=tol, workers=workers, center=center)
        center = st.center
        t = assemble_tensors(st)
        totals.append(wp_g0_direct(t) + wp_g1(t))
        stencils.append(st)
        if len(totals) >= 2:
            prev, cur = totals[-2], totals[-1]
            if abs(prev - cur) <= rtol * max(abs(cur), 1e-300):
                chosen = len(totals) - 1
                break
    agreed = chosen is not None
    if chosen is None:
        chosen = len(totals) - 1
    report = {
        "eps": eps_list[:len(totals)],
        "wp_total": totals,
        "chosen_eps": eps_list[chosen],
        "rtol": rtol,
        "agreed": agreed,
    }
    return stencils[chosen], report


def wp_norm(config: BranchConfiguration, k: int, direction: complex = 1.0,
            refinement: int = 3, eps=None,
            params: MeshParams = MeshParams(), tol: float = 1e-10,
            rtol: float = 1e-3, workers: int = 1):
    """Weil-Petersson norm of moving ``p_k`` with velocity ``direction``.

    ``eps`` is a step, a decreasing list of candidates for
    ``richardson_select``, or ``None`` for ``limit/4, limit/8, limit/16``.  Returns ``(result, tensors, psi, stencil)``;
    fields are those of the canonical frame, integrals are in the user frame.
    """
    canon, _ = canonical_frame(config, k)
    surface = build_cover(canon, refinement, params)
    if eps is None:
        limit = eps_limit(surface)
        eps = [limit / 4, limit / 8, limit / 16]
    if np.ndim(eps) == 1 and len(eps) == 1:
        eps = eps[0]
    if np.ndim(eps) == 1:
        stencil, report = richardson_select(surface, 0, eps, tol=tol, rtol=rtol, workers=workers)
    else:
        stencil = build_stencil(surface, 0, eps, tol=tol, workers=workers)
        report = {}
    res, t, psi = evaluate(stencil)
    res = replace(res, moving=k, richardson=report)
    return res.scaled(direction_scale(config.points[k], direction)), t, psi, stencil


# -- reparametrization family -------------------------------------------------

def _vector_field(coeffs, w):
    c0, c1, c2 = coeffs
    return c0 + c1 * w + c2 * w * w


def reparametrization_tensors(solve: Solve, coeffs=(1.0, 0.0, 0.0)) -> WPTensors:
    """Tensors of the family ``beta_s = exp(s V) o beta`` with ``X`` held fixed.

    ``V = c0 + c1 w + c2 w^2`` is a holomorphic vector field on the sphere.
    The curve does not move, so every ``s``-derivative of ``log g`` vanishes
    and only the target motion ``xi = V(beta)`` contributes, through ``G1``.
    """
    surf = solve.surface
    coords = vertex_coordinates(surf)
    zeta, _, h = chart_frame(surf, coords)
    kind = surf.chart_kind
    loc = np.where(kind == CHART_DISK, coords ** 2, coords)
    xi = np.zeros(len(coords), dtype=complex)
    m = kind == CHART_W
    xi[m] = _vector_field(coeffs, loc[m])
    m = kind == CHART_WINV
    c0, c1, c2 = coeffs
    xi[m] = -(c0 * loc[m] ** 2 + c1 * loc[m] + c2)
    for j, rot in enumerate(surf.base.rotations):
        m = ((kind == CHART_DISK) | (kind == CHART_LOCAL)) & (surf.chart_disk == j)
        if m.any():
            # w = R^{-1}(loc) = num / den; near infinity use u = 1/w instead
            num = np.conj(rot.a) * loc[m] - rot.b
            den = np.conj(rot.b) * loc[m] + rot.a
            big = np.abs(num) > np.abs(den)
            w = np.where(big, 1.0, num / np.where(big, 1.0, den))
            u = np.where(big, den / np.where(big, num, 1.0), 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                near = rot.derivative(w) * _vector_field(coeffs, w)
                far = (c0 * u ** 2 + c1 * u + c2) / (-np.conj(rot.b) + np.conj(rot.a) * u) ** 2
            xi[m] = np.where(big, far, near)
    g = np.exp(log_density(solve))
    zero = np.zeros(len(g))
    return WPTensors(g, zero.astype(complex), zero, zero.astype(complex), zero.astype(complex),
                     zero, zeta, xi, h, solve.metric.mass / g)


def reparametrization_norm(solve: Solve, coeffs=(1.0, 0.0, 0.0)) -> tuple[float, float]:
    """``(G0, G1)`` of the reparametrization family; ``G0`` is identically 0."""
    t = reparametrization_tensors(solve, coeffs)
    return wp_g0_direct(t), wp_g1(t)
