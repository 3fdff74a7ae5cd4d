"""Holomorphic atlas of the family of covers and chart-aware gradients.

Every cover vertex owns a chart:

* ``w`` for ``|w| <= 1`` and ``1/w`` otherwise, away from the disks;
* ``z`` with ``w_loc = z^2 + s`` on the sheet through a ramification vertex;
* ``c`` with ``w_loc = c + s`` on the unramified sheets over a disk,

where ``w_loc = T_j(w)`` is the rotated local coordinate of disk ``j`` and
``s`` is the shift (nonzero only for the moving disk).  Chart coordinates of
disk vertices are fixed as ``s`` varies.

Points of the sphere are handled through ``(v, inverted)`` with ``|v| <= 1``
and ``w = v`` or ``w = 1/v``, so nothing blows up near ``w = inf``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import CHART_DISK, CHART_LOCAL, CHART_W, CHART_WINV, CoverSurface
from .sphere import round_density


def sphere_points(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(v, inverted)`` for unit vectors: ``v = w`` on the south half, else ``1/w``."""
    inverted = x[..., 2] > 0
    south = (x[..., 0] + 1j * x[..., 1]) / np.where(inverted, 1.0, 1.0 - x[..., 2])
    north = (x[..., 0] - 1j * x[..., 1]) / np.where(inverted, 1.0 + x[..., 2], 1.0)
    return np.where(inverted, north, south), inverted


def _mobius_v(rot, v, inverted):
    """Value and ``d/dv`` of ``w_loc = T(w)`` with ``w = v`` or ``1/v``."""
    a, b = rot.a, rot.b
    ca, cb = np.conj(a), np.conj(b)
    den_n = -cb * v + ca
    den_i = ca * v - cb
    val = np.where(inverted, (a + b * v) / den_i, (a * v + b) / den_n)
    der = np.where(inverted, -1.0 / den_i ** 2, 1.0 / den_n ** 2)
    return val, der


@dataclass(frozen=True)
class ChartSpec:
    """Chart identity per vertex: kind, disk index, and the shift of that disk."""

    kind: np.ndarray
    disk: np.ndarray
    slide: np.ndarray   # fraction of the shift followed by the chart
    shift: np.ndarray   # slide * s

    @classmethod
    def of(cls, surface: CoverSurface) -> "ChartSpec":
        slide = surface.vertex_slide()
        return cls(surface.chart_kind, surface.chart_disk, slide, slide * surface.shift)

    def same_chart(self, i, j) -> np.ndarray:
        return ((self.kind[i] == self.kind[j]) & (self.disk[i] == self.disk[j])
                & (self.slide[i] == self.slide[j]))


def eval_chart(surface: CoverSurface, owner: np.ndarray, x: np.ndarray,
               ref: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coordinates of points ``x`` in the charts of vertices ``owner``.

    Returns ``(c, dc/dv, d_s c)`` where ``v`` is the ``sphere_points`` coordinate
    of ``x`` and ``d_s c`` is the shift derivative at a fixed point of the
    sphere.  ``ref`` selects the square-root branch in ``z`` charts.
    """
    layout = ChartSpec.of(surface)
    kind = layout.kind[owner]
    v, inv = sphere_points(x)
    c = np.zeros(len(owner), dtype=complex)
    dc = np.zeros(len(owner), dtype=complex)
    ds = np.zeros(len(owner), dtype=complex)

    m = kind == CHART_W
    with np.errstate(divide="ignore", invalid="ignore"):
        c[m] = np.where(inv[m], 1.0 / v[m], v[m])
        dc[m] = np.where(inv[m], -1.0 / v[m] ** 2, 1.0)
        m = kind == CHART_WINV
        c[m] = np.where(inv[m], v[m], 1.0 / v[m])
        dc[m] = np.where(inv[m], 1.0, -1.0 / v[m] ** 2)

    rots = surface.base.rotations
    for j in np.unique(layout.disk[owner][layout.disk[owner] >= 0]):
        sel = (layout.disk[owner] == j)
        loc, dloc = _mobius_v(rots[j], v[sel], inv[sel])
        loc = loc - layout.shift[owner][sel]
        k = kind[sel]
        local = k == CHART_LOCAL
        z = np.sqrt(loc)
        z = np.where(np.abs(z - ref[sel]) <= np.abs(z + ref[sel]), z, -z)
        with np.errstate(divide="ignore", invalid="ignore"):
            c[sel] = np.where(local, loc, z)
            dc[sel] = np.where(local, dloc, dloc / (2 * z))
            t = layout.slide[owner][sel]
            ds[sel] = np.where(t > 0, np.where(local, -t, -t / (2 * z)), 0.0)
    return c, dc, ds


def vertex_coordinates(surface: CoverSurface) -> np.ndarray:
    """Each vertex's coordinate in its own chart."""
    kind = surface.chart_kind
    c = surface.disk_coord.copy()
    x = surface.positions()
    v, inv = sphere_points(x)
    m = kind == CHART_W
    with np.errstate(divide="ignore", invalid="ignore"):
        c[m] = np.where(inv[m], 1.0 / v[m], v[m])
        m = kind == CHART_WINV
        c[m] = np.where(inv[m], v[m], 1.0 / v[m])
    return c


def background_density(surface: CoverSurface, coords: np.ndarray | None = None) -> np.ndarray:
    """Round density ``lambda`` of the pulled-back sphere metric in own charts.

    Vanishes at ramification vertices (``|2z|^2`` factor).
    """
    if coords is None:
        coords = vertex_coordinates(surface)
    kind = surface.chart_kind
    lam = round_density(coords)
    disk = kind >= CHART_DISK
    loc = np.where(kind == CHART_DISK, coords ** 2, coords) + surface.vertex_slide() * surface.shift
    lam = np.where(disk, round_density(loc), lam)
    return np.where(kind == CHART_DISK, lam * np.abs(2 * coords) ** 2, lam)


def chart_frame(surface: CoverSurface, coords: np.ndarray | None = None):
    """``(zeta, xi, h)``: derivative of the projection in ``z`` and ``s`` and the
    target density at the image, all in each vertex's own chart."""
    if coords is None:
        coords = vertex_coordinates(surface)
    kind = surface.chart_kind
    zeta = np.where(kind == CHART_DISK, 2 * coords, 1.0 + 0j)
    slide = surface.vertex_slide()
    xi = slide.astype(complex)
    loc = np.where(kind == CHART_DISK, coords ** 2, coords) + slide * surface.shift
    h = round_density(loc) / 2.0
    return zeta, xi, h


@dataclass(frozen=True)
class ChartGradient:
    """Vertex-based ``d/dz`` and ``d/dzbar`` in the vertex's own chart.

    Each vertex averages the linear interpolants of its incident faces
    (weighted by chart area).  Neighbour values must be expressed in the
    vertex's chart; ``jac`` and ``dshift`` give the transformation data per
    stencil entry: ``jac = dc_i/dc_j`` and ``dshift = d_s c_i`` at fixed
    ``c_j``, both at the neighbour ``j``.
    """

    rows: np.ndarray
    cols: np.ndarray
    wz: np.ndarray
    wzbar: np.ndarray
    jac: np.ndarray
    dshift: np.ndarray
    size: int
    wlap: np.ndarray | None = None   # d_z d_zbar of a scalar, quadratic fits only

    def _apply(self, weights, vals):
        out = np.zeros(self.size, dtype=complex)
        np.add.at(out, self.rows, weights * vals)
        return out

    def dz(self, f):
        return self._apply(self.wz, np.asarray(f)[self.cols])

    def dzbar(self, f):
        """Derivative of a scalar function."""
        return self._apply(self.wzbar, np.asarray(f)[self.cols])

    def dzdzbar(self, f):
        """``d_z d_zbar`` of a scalar function (real for real ``f``)."""
        if self.wlap is None:
            raise ValueError("second derivatives need the quadratic fit")
        return self._apply(self.wlap, np.asarray(f)[self.cols]).real

    def dzbar_log_density(self, ell):
        """``d/dzbar`` of ``log g`` where ``g |dz|^2`` is chart invariant."""
        vals = np.asarray(ell)[self.cols] - np.log(np.abs(self.jac) ** 2)
        return self._apply(self.wzbar, vals)

    def dzbar_vector(self, a):
        """``d/dzbar`` of the ``z``-component of a lift ``d_s + a d_z``."""
        vals = self.jac * np.asarray(a)[self.cols] + self.dshift
        return self._apply(self.wzbar, vals)

    def matrix(self, which: str = "zbar") -> sparse.csr_matrix:
        w = self.wzbar if which == "zbar" else self.wz
        return sparse.csr_matrix((w, (self.rows, self.cols)), shape=(self.size, self.size))


def _pair_transitions(surface: CoverSurface, pi: np.ndarray, pj: np.ndarray, own: np.ndarray):
    """Coordinate of ``j`` in the chart of ``i`` plus ``jac`` and ``dshift``."""
    x = surface.positions()
    layout = ChartSpec.of(surface)
    same = layout.same_chart(pi, pj)
    cij = own[pj].copy()
    jac = np.ones(len(pi), dtype=complex)
    dsh = np.zeros(len(pi), dtype=complex)
    diff = np.flatnonzero(~same)
    if len(diff):
        ci, dci, dsi = eval_chart(surface, pi[diff], x[pj[diff]], own[pi[diff]])
        cj, dcj, dsj = eval_chart(surface, pj[diff], x[pj[diff]], own[pj[diff]])
        cij[diff] = ci
        jac[diff] = dci / dcj
        # d_s c_i at fixed c_j = d_s c_i|_x - (dc_i/dv)(d_s c_j|_x)/(dc_j/dv)
        dsh[diff] = dsi - jac[diff] * dsj
    return cij, jac, dsh


def _adjacency(surface: CoverSurface) -> sparse.csr_matrix:
    f = surface.faces.astype(np.int64)
    V = surface.num_vertices
    r = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
    c = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
    A = sparse.csr_matrix((np.ones(len(r)), (r, c)), shape=(V, V))
    A.data[:] = 1.0
    return A


def _fit_basis(D: np.ndarray, degree: int) -> np.ndarray:
    """Monomials ``D^a conj(D)^b`` with ``1 <= a + b <= degree``, linear
    terms first and ``|D|^2`` fourth."""
    cols = [D, np.conj(D), D ** 2, np.abs(D) ** 2, np.conj(D) ** 2]
    for k in range(3, degree + 1):
        cols += [D ** a * np.conj(D) ** (k - a) for a in range(k + 1)]
    return np.stack(cols, axis=2)


def build_quadratic_gradient(surface: CoverSurface, weight_2ring: float = 0.5,
                             degree: int = 2) -> ChartGradient:
    """Derivatives from weighted least-squares polynomial fits over the 2-ring.

    Exact for polynomials of the given degree in the vertex's chart.  The
    gradient error is then ``O(h^degree)`` even on irregular meshes, so it can
    be differentiated twice more without the mesh pattern taking over.
    """
    V = surface.num_vertices
    own = vertex_coordinates(surface)
    A1 = _adjacency(surface)
    A2 = (A1 @ A1 + A1).tocsr()
    A2.setdiag(0)
    A2.eliminate_zeros()
    A2.sort_indices()
    rows = np.repeat(np.arange(V), np.diff(A2.indptr))
    cols = A2.indices.astype(np.int64)
    first = np.asarray(A1[rows, cols]).ravel() > 0
    cij, jac, dsh = _pair_transitions(surface, rows, cols, own)
    d = cij - own[rows]

    counts = np.diff(A2.indptr)
    m = counts.max()
    slot = np.arange(len(rows)) - A2.indptr[rows]
    weight = np.where(first, 1.0, weight_2ring)
    gz = np.zeros((V, m), dtype=complex)
    gzb = np.zeros((V, m), dtype=complex)
    glap = np.zeros((V, m))
    for lo in range(0, V, 8192):
        hi = min(V, lo + 8192)
        sel = slice(A2.indptr[lo], A2.indptr[hi])
        D = np.zeros((hi - lo, m), dtype=complex)
        W = np.zeros((hi - lo, m))
        D[rows[sel] - lo, slot[sel]] = d[sel]
        W[rows[sel] - lo, slot[sel]] = weight[sel]
        scale = np.abs(D).max(axis=1, keepdims=True)
        B = _fit_basis(D / scale, degree)
        BW = np.conj(B) * W[:, :, None]
        N = np.einsum("vmi,vmj->vij", BW, B)                 # normal equations
        P = np.linalg.solve(N, np.transpose(BW, (0, 2, 1)))  # (chunk, basis, m)
        gz[lo:hi] = P[:, 0, :] / scale
        gzb[lo:hi] = P[:, 1, :] / scale
        glap[lo:hi] = P[:, 3, :].real / scale ** 2

    wz = gz[rows, slot]
    wzb = gzb[rows, slot]
    # the fit is relative to f_i, so the diagonal carries minus the row sum
    diag = np.arange(V)
    rows_all = np.concatenate([rows, diag])
    cols_all = np.concatenate([cols, diag])
    wz_all = np.concatenate([wz, -gz.sum(axis=1)])
    wzb_all = np.concatenate([wzb, -gzb.sum(axis=1)])
    wlap_all = np.concatenate([glap[rows, slot], -glap.sum(axis=1)])
    jac_all = np.concatenate([jac, np.ones(V, dtype=complex)])
    dsh_all = np.concatenate([dsh, np.zeros(V, dtype=complex)])
    return ChartGradient(rows_all, cols_all, wz_all, wzb_all, jac_all, dsh_all, V, wlap_all)


def build_gradient(surface: CoverSurface) -> ChartGradient:
    faces = surface.faces.astype(np.int64)
    V = surface.num_vertices
    x = surface.positions()
    own = vertex_coordinates(surface)
    layout = ChartSpec.of(surface)

    # directed pairs (i, j) with j a face-neighbour of i
    rows, cols = [], []
    for a, b in ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)):
        rows.append(faces[:, a])
        cols.append(faces[:, b])
    pairs = np.unique(np.column_stack([np.concatenate(rows), np.concatenate(cols)]), axis=0)
    pi, pj = pairs[:, 0], pairs[:, 1]

    same = layout.same_chart(pi, pj)
    cij = own[pj].copy()
    jac = np.ones(len(pairs), dtype=complex)
    dsh = np.zeros(len(pairs), dtype=complex)
    diff = np.flatnonzero(~same)
    if len(diff):
        ci, dci, dsi = eval_chart(surface, pi[diff], x[pj[diff]], own[pi[diff]])
        cj, dcj, dsj = eval_chart(surface, pj[diff], x[pj[diff]], own[pj[diff]])
        cij[diff] = ci
        jac[diff] = dci / dcj
        # d_s c_i at fixed c_j = d_s c_i|_x - (dc_i/dv)(d_s c_j|_x)/(dc_j/dv)
        dsh[diff] = dsi - jac[diff] * dsj
    pair_key = pi * V + pj    # sorted, since pairs come from np.unique

    def lookup(a, b):
        return np.searchsorted(pair_key, a * V + b)

    # per corner: i = faces[:, r], j, k the others in order
    wz_acc, wzb_acc, r_acc, c_acc = [], [], [], []
    wsum = np.zeros(V)
    for r in range(3):
        i = faces[:, r]
        j = faces[:, (r + 1) % 3]
        k = faces[:, (r + 2) % 3]
        kj = lookup(i, j)
        kk = lookup(i, k)
        dj = cij[kj] - own[i]
        dk = cij[kk] - own[i]
        D = dj * np.conj(dk) - dk * np.conj(dj)
        area = np.abs(D.imag) / 4.0
        # gamma = (dj Fk - dk Fj)/D ; beta = (Fj conj(dk) - Fk conj(dj))/D
        gbj, gbk = -dk / D, dj / D
        gj, gk = np.conj(dk) / D, -np.conj(dj) / D
        for col, wz, wzb in ((j, gj, gbj), (k, gk, gbk), (i, -(gj + gk), -(gbj + gbk))):
            r_acc.append(i)
            c_acc.append(col)
            wz_acc.append(area * wz)
            wzb_acc.append(area * wzb)
        np.add.at(wsum, i, area)

    rows = np.concatenate(r_acc)
    cols = np.concatenate(c_acc)
    wz = np.concatenate(wz_acc) / wsum[rows]
    wzb = np.concatenate(wzb_acc) / wsum[rows]
    # merge duplicates
    key = rows * V + cols
    uniq, inv = np.unique(key, return_inverse=True)
    wz_m = np.zeros(len(uniq), dtype=complex)
    wzb_m = np.zeros(len(uniq), dtype=complex)
    np.add.at(wz_m, inv, wz)
    np.add.at(wzb_m, inv, wzb)
    ur, uc = uniq // V, uniq % V
    jac_m = np.ones(len(uniq), dtype=complex)
    dsh_m = np.zeros(len(uniq), dtype=complex)
    off = ur != uc
    idx = lookup(ur[off], uc[off])
    jac_m[off] = jac[idx]
    dsh_m[off] = dsh[idx]
    return ChartGradient(ur, uc, wz_m, wzb_m, jac_m, dsh_m, V)
