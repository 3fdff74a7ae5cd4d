"""Triangulated simple branched covers of the sphere.

The base sphere is meshed as follows.  Around every branch point ``p_j`` a
closed disk is triangulated in the local chart ``w_loc = T_j(w)`` (a rotation
taking ``p_j`` to 0) with concentric rings of ``3k`` points at radius
``(k h)^2``; its preimage under ``w_loc = z^2`` is a uniform polar mesh with
``6k`` points on the ``k``-th ring of the ``z``-disk.  Outside the disks a
Fibonacci point set is triangulated by the convex hull (spherical Delaunay).

The cover has faces ``(f, sheet)``.  Crossing the geodesic arc from the base
point ``b0`` to ``p_i`` applies ``t_i`` to the sheet label, so the loop around
``p_i`` has monodromy exactly ``t_i``.  Cover vertices are the classes of
face corners glued across edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, SphericalVoronoi

from .combinatorics import MonodromyDatum, genus_from_relation, validation_error
from .sphere import Rotation, spherical_distance, to_plane, to_plane_inv, to_sphere

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
RING_PHASE = 0.3183  # angular offset of disk rings, keeps cut arcs off the spokes

# chart kinds
CHART_W, CHART_WINV, CHART_DISK, CHART_LOCAL = 0, 1, 2, 3
CHART_NAMES = ("w", "winv", "disk", "local")


class MeshError(ValueError):
    """Degenerate geometry: disks overlap, triangulation fails, bad cut system."""


@dataclass(frozen=True)
class MeshParams:
    """Discretization knobs; ``spacing`` halves with each refinement level."""

    coarse_spacing: float = 0.4
    disk_radius: float | None = None   # spherical radius; default from the configuration
    band_factor: float = 2.5           # outer radius of the log-polar band, in disk radii
    band_spacing: float = 0.7          # band point spacing at its outer ring, in units of spacing
    gap_factor: float = 0.5
    min_rings: int = 2
    lloyd_iterations: int = 30         # centroidal relaxation of the exterior points

    def spacing(self, refinement: int) -> float:
        return self.coarse_spacing / 2.0 ** refinement


@dataclass(frozen=True)
class BranchConfiguration:
    """Branch points in the affine coordinate ``w`` (``inf`` allowed).

    ``datum.transpositions[i]`` is the monodromy around ``points[i]`` for the
    cut system of geodesic arcs from ``base_point``.  Without an explicit base
    point one is chosen so that the arcs' cyclic order closes the product.
    """

    points: tuple[complex, ...]
    datum: MonodromyDatum
    base_point: complex | None = None

    def __post_init__(self):
        if self.datum.h != 0:
            raise ValueError("covers are built over the sphere only (base genus 0)")
        reason = validation_error(self.datum)
        if reason is not None:
            raise ValueError(f"invalid monodromy datum: {reason}")
        if len(self.points) != self.datum.b:
            raise ValueError("need one point per transposition")
        if self.min_distance() <= 0:
            raise MeshError("branch points must be pairwise distinct")

    @property
    def b(self) -> int:
        return len(self.points)

    def unit_vectors(self) -> np.ndarray:
        return to_sphere(np.array(self.points, dtype=complex))

    def min_distance(self) -> float:
        x = self.unit_vectors()
        d = spherical_distance(x[:, None, :], x[None, :, :])
        d[np.diag_indices(len(x))] = np.inf
        return float(d.min())

    def rotated(self, rot: Rotation) -> "BranchConfiguration":
        pts = tuple(complex(v) for v in rot(np.array(self.points, dtype=complex)))
        bp = None if self.base_point is None else complex(rot(self.base_point))
        return replace(self, points=pts, base_point=bp)

    def to_json(self) -> dict:
        return {
            "points": [_complex_json(p) for p in self.points],
            "datum": self.datum.to_json(),
            "base_point": None if self.base_point is None else _complex_json(self.base_point),
        }

    @classmethod
    def from_json(cls, data: dict) -> "BranchConfiguration":
        pts = tuple(_complex_from_json(p) for p in data["points"])
        bp = data.get("base_point")
        return cls(pts, MonodromyDatum.from_json(data["datum"]),
                   None if bp is None else _complex_from_json(bp))


def _complex_json(z: complex):
    z = complex(z)
    if not np.isfinite(z):
        return "inf"
    return [z.real, z.imag]


def _complex_from_json(v) -> complex:
    if isinstance(v, str):
        return complex(v.replace("inf", "infj").replace("infj", "inf")) if v != "inf" else complex(np.inf)
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


def hexagon_configuration(rotation: Rotation | None = None) -> BranchConfiguration:
    """Genus-2 double cover branched at the sixth roots of unity."""
    pts = np.exp(2j * np.pi * np.arange(6) / 6)
    if rotation is not None:
        pts = rotation(pts)
    datum = MonodromyDatum.from_pairs(2, [(1, 2)] * 6)
    return BranchConfiguration(tuple(complex(p) for p in pts), datum)


# -- base mesh -------------------------------------------------------------

def lloyd_relax(free: np.ndarray, fixed: np.ndarray, iterations: int) -> np.ndarray:
    """Move ``free`` unit vectors towards the centroids of their spherical
    Voronoi cells, with ``fixed`` acting as immovable generators.

    Centroidal Voronoi meshes are well centred, which keeps the cotangent
    Laplacian pointwise consistent.
    """
    pts = np.asarray(free, dtype=float)
    nfree = len(pts)
    for _ in range(iterations):
        sv = SphericalVoronoi(np.vstack([pts, fixed]), threshold=1e-9)
        sv.sort_vertices_of_regions()
        regions = sv.regions[:nfree]
        size = np.array([len(r) for r in regions])
        pad = np.full((nfree, size.max()), -1)
        for i, r in enumerate(regions):
            pad[i, :len(r)] = r
        a = sv.vertices[pad]
        b = sv.vertices[np.where(np.arange(pad.shape[1]) + 1 < size[:, None],
                                 np.roll(pad, -1, axis=1), pad[:, :1])]
        valid = (np.arange(pad.shape[1]) < size[:, None])[:, :, None]
        g = pts[:, None, :]
        area = 0.5 * np.linalg.norm(np.cross(a - g, b - g), axis=2)[:, :, None]
        cen = np.sum(valid * area * (a + b + g) / 3.0, axis=1)
        pts = cen / np.linalg.norm(cen, axis=1, keepdims=True)
    return pts


def fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    theta = GOLDEN_ANGLE * np.arange(count)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def _ring_counts_zipper(inner: list[int], outer: list[int], inner_ang, outer_ang):
    """Triangulate the band between two closed rings by merging angles."""
    tris = []
    m, n = len(inner), len(outer)
    i = j = 0
    while i < m or j < n:
        a_next = inner_ang[(i + 1) % m] + (2 * np.pi if i + 1 >= m else 0.0)
        b_next = outer_ang[(j + 1) % n] + (2 * np.pi if j + 1 >= n else 0.0)
        if j >= n or (i < m and a_next < b_next):
            tris.append((inner[i % m], outer[j % n], inner[(i + 1) % m]))
            i += 1
        else:
            tris.append((inner[i % m], outer[j % n], outer[(j + 1) % n]))
            j += 1
    return tris


@dataclass
class _Disk:
    index: int
    center: int
    rings: list[list[int]]     # base vertex ids, ring 1..K
    tris: list[tuple[int, int, int]]
    rotation: Rotation         # w -> local chart with p_j at 0
    ring_step: float           # z-radius increment h


def default_disk_radius(config: BranchConfiguration) -> float:
    return min(0.25, config.min_distance() / 6.0)


@dataclass(frozen=True)
class BaseMesh:
    positions: np.ndarray          # (V, 3) at shift 0
    local0: np.ndarray             # local chart coordinate w_loc for disk vertices
    faces: np.ndarray              # (F, 3)
    disk_of: np.ndarray            # disk index or -1
    ring_of: np.ndarray            # 0 for centers, k for ring k, -1 outside disks and bands
    band_of: np.ndarray            # disk index for log-polar band vertices, else -1
    band_radii: np.ndarray         # local radii of the band rings
    centers: np.ndarray            # base vertex id of each branch point
    rotations: tuple[Rotation, ...]
    ring_step: np.ndarray          # per disk
    ring_count: int
    disk_radius: float
    spacing: float


def build_base_mesh(config: BranchConfiguration, refinement: int,
                    params: MeshParams = MeshParams()) -> BaseMesh:
    if refinement < 0:
        raise ValueError("refinement must be non-negative")
    H = params.spacing(refinement)
    radius = params.disk_radius or default_disk_radius(config)
    if config.min_distance() <= 4.0 * radius:
        raise MeshError("branch points too close for the requested disk radius")
    rho_w = np.tan(radius / 2.0)
    # the band's point count is set by its outer spacing; the disk is refined
    # so its outer ring carries the same number of points
    rho_out = np.tan(params.band_factor * radius / 2.0)
    chord_out = 2 * np.sin(params.band_factor * radius / 2.0)
    N = int(np.ceil(2 * np.pi * chord_out / (params.band_spacing * H)))
    K = max(params.min_rings, int(np.ceil(4.2 * rho_w / H)), -(-N // 3))
    N = 3 * K
    h = np.sqrt(rho_w) / K

    centers3 = config.unit_vectors()
    positions = []
    local0 = []
    disk_of = []
    ring_of = []
    band_of = []
    disks: list[_Disk] = []

    def add(x, loc, d, r, band=-1):
        positions.append(x)
        local0.append(loc)
        disk_of.append(d)
        ring_of.append(r)
        band_of.append(band)
        return len(positions) - 1

    # log-polar band: 3K points per ring, radii growing geometrically so
    # triangles stay near equilateral
    q = np.exp(np.pi * np.sqrt(3.0) / N)
    M = max(1, int(np.ceil(np.log(rho_out / rho_w) / np.log(q))))
    band_radii = rho_w * (rho_out / rho_w) ** (np.arange(1, M + 1) / M)

    for j, c3 in enumerate(centers3):
        rot = Rotation.to_origin(c3)
        inv = rot.inverse()
        center = add(c3, 0j, j, 0)
        rings = []
        for k in range(1, K + 1):
            ang = RING_PHASE + 2 * np.pi * np.arange(3 * k) / (3 * k)
            loc = (k * h) ** 2 * np.exp(1j * ang)
            xs = to_sphere(inv(loc))
            rings.append([add(x, l, j, k) for x, l in zip(xs, loc)])
        tris = [(center, rings[0][m], rings[0][(m + 1) % 3]) for m in range(3)]
        for k in range(1, K):
            ai = RING_PHASE + 2 * np.pi * np.arange(3 * k) / (3 * k)
            ao = RING_PHASE + 2 * np.pi * np.arange(3 * k + 3) / (3 * k + 3)
            tris += _ring_counts_zipper(rings[k - 1], rings[k], ai, ao)
        prev = rings[-1]
        prev_ang = RING_PHASE + 2 * np.pi * np.arange(3 * K) / (3 * K)
        for m, rho in enumerate(band_radii, start=1):
            ang = RING_PHASE + (m % 2) * np.pi / N + 2 * np.pi * np.arange(N) / N
            loc = rho * np.exp(1j * ang)
            xs = to_sphere(inv(loc))
            ring = [add(x, l, -1, K + m, j) for x, l in zip(xs, loc)]
            tris += _ring_counts_zipper(prev, ring, prev_ang, ang)
            rings.append(ring)
            prev, prev_ang = ring, ang
        disks.append(_Disk(j, center, rings, tris, rot, h))

    count = int(np.ceil(4 * np.pi / (0.866 * H * H)))
    fib = fibonacci_sphere(count)
    dist = spherical_distance(fib[:, None, :], centers3[None, :, :]).min(axis=1)
    outer = 2 * np.arctan(band_radii[-1])
    free = fib[dist > outer + params.gap_factor * H]
    fixed = np.array([positions[i] for i in range(len(positions))
                      if ring_of[i] == K + M or ring_of[i] == 0])
    free = lloyd_relax(free, fixed, params.lloyd_iterations)
    for x in free:
        add(x, 0j, -1, -1)

    positions = np.array(positions)
    disk_of = np.array(disk_of)
    ring_of = np.array(ring_of)
    band_of = np.array(band_of)
    last = K + M

    # hull over exterior, centers and outermost rings only
    hull_ids = np.flatnonzero(((disk_of < 0) & (band_of < 0)) | (ring_of == 0) | (ring_of == last))
    hull = ConvexHull(positions[hull_ids])
    simplices = hull_ids[hull.simplices]
    keep = np.ones(len(simplices), dtype=bool)
    for disk in disks:
        inside = np.zeros(len(positions), dtype=bool)
        inside[disk.center] = True
        inside[disk.rings[-1]] = True
        fan = inside[simplices].all(axis=1)
        if fan.sum() != N or not (simplices[fan] == disk.center).any(axis=1).all():
            raise MeshError(f"disk {disk.index} boundary is not Delaunay; refine or shrink disks")
        keep &= ~fan
    faces = [tuple(t) for t in simplices[keep]]
    for disk in disks:
        faces += disk.tris
    faces = _orient_outward(positions, np.array(faces, dtype=np.int64))

    return BaseMesh(
        positions=positions,
        local0=np.array(local0, dtype=complex),
        faces=faces,
        disk_of=disk_of,
        ring_of=ring_of,
        band_of=band_of,
        band_radii=band_radii,
        centers=np.array([d.center for d in disks]),
        rotations=tuple(d.rotation for d in disks),
        ring_step=np.array([d.ring_step for d in disks]),
        ring_count=K,
        disk_radius=radius,
        spacing=H,
    )


def _orient_outward(x: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = x[faces[:, 0]], x[faces[:, 1]], x[faces[:, 2]]
    normal = np.cross(b - a, c - a)
    flip = np.einsum("ij,ij->i", normal, a + b + c) < 0
    faces = faces.copy()
    faces[flip, 1], faces[flip, 2] = faces[flip, 2], faces[flip, 1].copy()
    return faces


def _moved_positions(base: BaseMesh, moving: int | None, shift: complex,
                     slide: np.ndarray | None) -> np.ndarray:
    if moving is None or shift == 0:
        return base.positions
    x = base.positions.copy()
    sel = np.flatnonzero(slide > 0)
    inv = base.rotations[moving].inverse()
    x[sel] = to_sphere(inv(base.local0[sel] + slide[sel] * shift))
    return x


def smoothstep(x):
    """C-infinity ramp from 0 to 1 on [0, 1], flat to all orders at the ends."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / x), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / (1.0 - x)), 0.0)
    return a / (a + b)


def base_slide(base: BaseMesh, moving: int) -> np.ndarray:
    """Fraction of the shift each base vertex follows.

    1 on the moving disk, decaying smoothly (in log radius) to 0 across its
    log-polar band, 0 elsewhere.  The band is a structured mesh, so the moved
    mesh stays a smooth image of a fixed lattice.
    """
    t = np.zeros(len(base.positions))
    t[base.disk_of == moving] = 1.0
    band = base.band_of == moving
    rho_in = np.tan(base.disk_radius / 2)
    rho_out = base.band_radii[-1]
    x = np.log(np.abs(base.local0[band]) / rho_in) / np.log(rho_out / rho_in)
    t[band] = 1.0 - smoothstep(x)
    return t


# -- cut system ---------------------------------------------------------------

def _arc_order_product(datum: MonodromyDatum, q: np.ndarray) -> bool:
    order = np.argsort(np.angle(q))
    perm = list(range(datum.n))
    for i in order:
        a, b = datum.pairs()[i]
        perm[a - 1], perm[b - 1] = perm[b - 1], perm[a - 1]
    return perm == list(range(datum.n))


def choose_base_point(config: BranchConfiguration, radius: float) -> complex:
    """Deterministic base point whose arcs are well separated and close the product."""
    centers = config.unit_vectors()
    best, best_score = None, -np.inf
    for cand in fibonacci_sphere(97):
        if spherical_distance(cand[None, :], centers).min() < 3 * radius:
            continue
        rot = Rotation.to_origin(cand)
        q = rot(np.array(config.points, dtype=complex))
        if not np.all(np.isfinite(q)) or not _arc_order_product(config.datum, q):
            continue
        score = _arc_clearance(q, radius)
        if score > best_score:
            best, best_score = cand, score
    if best is None or best_score <= 0:
        raise MeshError("no admissible base point for the cut system")
    return complex(to_plane(best))


def _arc_clearance(q: np.ndarray, radius: float) -> float:
    """Positive iff every arc keeps away from the other branch points."""
    ang = np.sort(np.angle(q))
    sep = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi])).min()
    worst = np.inf
    qx = to_sphere(q)
    for i in range(len(q)):
        # sample the geodesic 0 -> q_i (a straight segment in this chart)
        t = np.linspace(0.0, 1.0, 64)[:, None]
        arc = to_sphere(t[:, 0] * q[i])
        for j in range(len(q)):
            if j != i:
                worst = min(worst, spherical_distance(arc, qx[j]).min() - 1.5 * radius)
    return min(sep, worst)


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def _segment_crossings(P, Q, sideP, sideQ, q):
    """Parameter ``t`` along P->Q where it crosses the arc ``[0, q]``, else nan.

    ``sideP``/``sideQ`` are precomputed half-plane labels of the endpoints, so a
    point shared by several segments is classified once and closed loops of
    segments always cross the arc an even number of times unless they enclose
    an endpoint.  Also returns a flag for crossings too close to an endpoint.
    """
    d = Q - P
    den = _cross(d, q)
    change = sideP != sideQ
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(_cross(-P, q) / den, 0.0, 1.0)
        u = _cross(-P, d) / den
    hit = change & (u > 0) & (u < 1)
    tol = 1e-9
    degenerate = change & ((np.abs(u) < tol) | (np.abs(u - 1) < tol))
    return np.where(hit, t, np.nan), degenerate


# -- cover ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoverSurface:
    """Triangulated n-sheeted cover with a pulled-back round background.

    ``moving``/``shift`` describe a deformed member of a family: the disk
    around branch point ``moving`` is translated by ``shift`` in its local
    chart, every other vertex stays put.
    """

    config: BranchConfiguration
    base: BaseMesh
    base_point: complex
    vertex_base: np.ndarray      # cover vertex -> base vertex
    vertex_sheet: np.ndarray     # sheet label of a representative corner
    faces: np.ndarray            # (F, 3) cover vertex ids
    face_base: np.ndarray        # cover face -> base face
    face_sheet: np.ndarray
    ram_vertices: np.ndarray     # cover vertex over each branch point
    chart_kind: np.ndarray
    chart_disk: np.ndarray       # disk index for disk charts, else -1
    disk_coord: np.ndarray       # fixed chart coordinate over the disks
    edge_perms: dict = field(repr=False, default_factory=dict)
    moving: int | None = None
    shift: complex = 0j
    slide: np.ndarray | None = field(default=None, repr=False)   # per base vertex

    @property
    def n(self) -> int:
        return self.config.datum.n

    @property
    def genus(self) -> int:
        return genus_from_relation(self.n, 0, self.config.b)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_base)

    def edges(self) -> np.ndarray:
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def positions(self) -> np.ndarray:
        x = _moved_positions(self.base, self.moving, self.shift, self.slide)
        return x[self.vertex_base]

    def plane_coords(self) -> np.ndarray:
        """Global affine coordinate ``w`` of every vertex."""
        return to_plane(self.positions())

    def vertex_slide(self) -> np.ndarray:
        if self.slide is None:
            return np.zeros(self.num_vertices)
        return self.slide[self.vertex_base]

    def deformed(self, moving: int, shift: complex) -> "CoverSurface":
        """Member of the family moving branch point ``moving`` by ``shift``.

        Vertices in the annulus around the disk get sliding charts
        ``c = w_loc - t s`` with a fixed weight ``t``, so the mesh motion is
        spread smoothly instead of shearing a single layer of triangles.
        """
        if self.moving == moving:
            return replace(self, shift=complex(shift))
        if self.moving is not None:
            raise ValueError("surface already belongs to another family")
        slide = base_slide(self.base, moving)
        t = slide[self.vertex_base]
        annulus = (t > 0) & (self.chart_disk < 0)
        kind = self.chart_kind.copy()
        disk = self.chart_disk.copy()
        coord = self.disk_coord.copy()
        kind[annulus] = CHART_LOCAL
        disk[annulus] = moving
        coord[annulus] = self.base.local0[self.vertex_base[annulus]]
        return replace(self, moving=moving, shift=complex(shift), slide=slide,
                       chart_kind=kind, chart_disk=disk, disk_coord=coord)

    def half_turn(self, j: int) -> "CoverSurface":
        """The same triangulation rotated by pi about the axis through ``p_j``.

        Disk ``j`` keeps its chart map, so its local coordinates change sign
        (``z -> i z``); every other disk absorbs the rotation into its chart
        map and keeps its coordinates.  A shift ``s`` of the original thus
        corresponds to ``-s`` here.
        """
        base = self.base
        flip = Rotation(1j, 0.0)                     # w -> -w
        rot = base.rotations[j].inverse().compose(flip).compose(base.rotations[j])
        inv = rot.inverse()
        rotations = tuple(r if i == j else r.compose(inv) for i, r in enumerate(base.rotations))
        own = (base.disk_of == j) | (base.band_of == j)
        local0 = np.where(own, -base.local0, base.local0)
        new_base = replace(base, positions=rot.apply(base.positions), local0=local0,
                           rotations=rotations)
        coord = self.disk_coord.copy()
        mine = self.chart_disk == j
        coord[mine & (self.chart_kind == CHART_DISK)] *= 1j
        coord[mine & (self.chart_kind == CHART_LOCAL)] *= -1
        return replace(self, config=self.config.rotated(rot), base=new_base,
                       base_point=complex(rot(self.base_point)), disk_coord=coord,
                       shift=-self.shift)

    def edge_lengths(self) -> np.ndarray:
        x = self.positions()
        e = self.edges()
        return np.linalg.norm(x[e[:, 0]] - x[e[:, 1]], axis=1)

    def branch_point(self, j: int) -> complex:
        loc = self.shift if self.moving == j else 0j
        return complex(self.base.rotations[j].inverse()(loc))

    def to_json(self) -> dict:
        w = self.plane_coords()
        return {
            "genus": self.genus,
            "sheets": self.n,
            "config": self.config.to_json(),
            "base_point": _complex_json(self.base_point),
            "moving": self.moving,
            "shift": _complex_json(self.shift),
            "vertices": [
                {
                    "base": int(vb),
                    "sheet": int(sh),
                    "w": _complex_json(wi),
                    "chart": CHART_NAMES[int(ck)],
                    "disk": int(cd),
                    "coord": _complex_json(z) if ck >= CHART_DISK else None,
                }
                for vb, sh, wi, ck, cd, z in zip(
                    self.vertex_base, self.vertex_sheet, w, self.chart_kind,
                    self.chart_disk, self.disk_coord)
            ],
            "faces": self.faces.tolist(),
            "cones": [{"vertex": int(v), "angle": 4 * np.pi} for v in self.ram_vertices],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def build_cover(config: BranchConfiguration, refinement: int,
                params: MeshParams = MeshParams()) -> CoverSurface:
    """Glue ``n`` copies of the base mesh along the cut arcs."""
    n = config.datum.n
    if n < 2:
        raise ValueError("degree must be at least 2")
    base = build_base_mesh(config, refinement, params)
    b0 = config.base_point
    if b0 is None:
        b0 = choose_base_point(config, base.disk_radius)
    faces_b = base.faces
    Fb = len(faces_b)

    # dual edges: base edge -> the two incident faces
    e = np.concatenate([faces_b[:, [0, 1]], faces_b[:, [1, 2]], faces_b[:, [2, 0]]])
    fid = np.tile(np.arange(Fb), 3)
    key = np.sort(e, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, fid = key[order], fid[order]
    if len(key) % 2 or not (key[0::2] == key[1::2]).all():
        raise MeshError("base mesh is not a closed manifold")
    edge_v = key[0::2]
    f1, f2 = fid[0::2], fid[1::2]

    # sheet permutation for f1 -> f2 from arc crossings
    rot0 = Rotation.to_origin(to_sphere(b0))
    om = rot0(to_plane(base.positions))
    q = rot0(np.array(config.points, dtype=complex))
    rmax = 3.0 * np.abs(q).max()
    far = ~np.isfinite(om) | (np.abs(om) > rmax)
    omf = np.where(far, 0, om)
    cen = omf[faces_b].mean(axis=1)
    mid = 0.5 * (omf[edge_v[:, 0]] + omf[edge_v[:, 1]])
    skip = far[faces_b[f1]].any(axis=1) | far[faces_b[f2]].any(axis=1)
    hits = []
    for i, qi in enumerate(q):
        sc = _cross(qi, cen) >= 0
        sm = _cross(qi, mid) >= 0
        t1, d1 = _segment_crossings(cen[f1], mid, sc[f1], sm, qi)
        t2, d2 = _segment_crossings(mid, cen[f2], sm, sc[f2], qi)
        if ((d1 | d2) & ~skip).any():
            raise MeshError("cut arc passes through a mesh feature; choose another base point")
        # crossing the same arc on both halves cancels out
        one = np.isnan(t1) != np.isnan(t2)
        hits.append(np.where(one, np.where(np.isnan(t1), 1 + t2, t1), np.nan))
    hits = np.array(hits)       # (b, E)
    hits[:, skip] = np.nan
    pairs = config.datum.pairs()
    perms = np.tile(np.arange(n), (len(edge_v), 1))
    crossing_edges = np.flatnonzero(~np.isnan(hits).all(axis=0))
    edge_perms = {}
    for ei in crossing_edges:
        seq = np.argsort(hits[:, ei])
        seq = [i for i in seq if not np.isnan(hits[i, ei])]
        sheet = list(range(n))  # sheet label after crossing, as a map k -> sigma(k)
        for i in seq:
            a, b = pairs[i]
            sheet = [b - 1 if s == a - 1 else a - 1 if s == b - 1 else s for s in sheet]
        perms[ei] = sheet
        edge_perms[int(ei)] = tuple(sheet)

    # corners (f, sheet, local slot) glued across edges
    def corner(f, sheet, v):
        slot = np.argmax(faces_b[f] == v[:, None], axis=1)
        return (f * n + sheet) * 3 + slot

    rows, cols = [], []
    for s in range(n):
        s2 = perms[:, s]
        for end in (0, 1):
            v = edge_v[:, end]
            rows.append(corner(f1, np.full(len(f1), s), v))
            cols.append(corner(f2, s2, v))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    ncorner = Fb * n * 3
    graph = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(ncorner, ncorner))
    ncomp, label = connected_components(graph, directed=False)

    corner_base = np.repeat(faces_b, n, axis=0).reshape(-1)
    vertex_base = np.zeros(ncomp, dtype=np.int64)
    vertex_base[label] = corner_base
    corner_sheet = np.repeat(np.tile(np.arange(n), Fb), 3)
    vertex_sheet = np.zeros(ncomp, dtype=np.int64)
    vertex_sheet[label[::-1]] = corner_sheet[::-1]
    faces = label.reshape(Fb * n, 3)
    face_base = np.repeat(np.arange(Fb), n)
    face_sheet = np.tile(np.arange(n), Fb)

    expected = n * len(base.positions) - config.b
    if ncomp != expected:
        lifts = np.bincount(vertex_base, minlength=len(base.positions))
        bad = np.setdiff1d(np.flatnonzero(lifts != n), base.centers)
        raise MeshError(f"gluing produced {ncomp} vertices, expected {expected}; "
                        f"inconsistent base vertices {bad[:10].tolist()}")
    ram = np.array([np.flatnonzero(vertex_base == c) for c in base.centers])
    if ram.ndim != 2 or ram.shape[1] != n - 1:
        raise MeshError("ramification structure is not simple")
    # the ramified vertex is the one of valence two sheets (more corners)
    counts = np.bincount(label, minlength=ncomp)
    ram_vertices = np.array([r[np.argmax(counts[r])] for r in ram])

    kind = np.where(base.disk_of[vertex_base] >= 0, CHART_DISK, CHART_W)
    w = to_plane(base.positions[vertex_base])
    kind = np.where((kind == CHART_W) & ~(np.abs(w) <= 1.0), CHART_WINV, kind)
    chart_disk = base.disk_of[vertex_base]

    surface = CoverSurface(
        config=config, base=base, base_point=complex(b0),
        vertex_base=vertex_base, vertex_sheet=vertex_sheet,
        faces=faces, face_base=face_base, face_sheet=face_sheet,
        ram_vertices=ram_vertices, chart_kind=kind, chart_disk=chart_disk,
        disk_coord=np.zeros(ncomp, dtype=complex), edge_perms=edge_perms,
    )
    kind, coord = _disk_charts(surface)
    object.__setattr__(surface, "chart_kind", kind)
    object.__setattr__(surface, "disk_coord", coord)
    return surface


def _disk_charts(surface: CoverSurface) -> tuple[np.ndarray, np.ndarray]:
    """Chart kinds and fixed coordinates of the vertices over the disks.

    The sheet through a ramification vertex uses ``z`` with ``w_loc = z^2``
    (branch chosen continuously); unramified sheets use ``w_loc`` itself.
    """
    base = surface.base
    loc = base.local0[surface.vertex_base]
    kind = surface.chart_kind.copy()
    coord = np.where(kind == CHART_DISK, loc, 0j)
    kind[kind == CHART_DISK] = CHART_LOCAL
    disk = surface.chart_disk
    e = surface.edges()
    e = e[(disk[e[:, 0]] >= 0) & (disk[e[:, 0]] == disk[e[:, 1]])]
    nbrs = [[] for _ in range(surface.num_vertices)]
    for a, b in e:
        nbrs[a].append(b)
        nbrs[b].append(a)
    for c in surface.ram_vertices:
        kind[c] = CHART_DISK
        coord[c] = 0j
        start = nbrs[c][0]
        coord[start] = np.sqrt(loc[start])
        kind[start] = CHART_DISK
        stack = [start]
        while stack:
            v = stack.pop()
            for u in nbrs[v]:
                if kind[u] == CHART_DISK:
                    continue
                r = np.sqrt(loc[u])
                coord[u] = r if abs(r - coord[v]) <= abs(-r - coord[v]) else -r
                kind[u] = CHART_DISK
                stack.append(u)
    return kind, coord


def euler_characteristic(surface: CoverSurface) -> int:
    V = surface.num_vertices
    E = len(surface.edges())
    F = len(surface.faces)
    return V - E + F


def monodromy_around(surface: CoverSurface, j: int) -> tuple[int, ...]:
    """Sheet permutation from walking once around branch point ``j``."""
    base = surface.base
    c = base.centers[j]
    fan = np.flatnonzero((base.faces == c).any(axis=1))
    # order fan faces cyclically by angle in the local chart
    loc = base.local0
    ang = []
    for f in fan:
        others = [v for v in base.faces[f] if v != c]
        ang.append(np.angle(loc[others].mean()))
    fan = fan[np.argsort(ang)]
    n = surface.n
    sheet = list(range(n))
    lookup = {}
    faces_b = base.faces
    for idx in range(len(fan)):
        fa, fb = fan[idx], fan[(idx + 1) % len(fan)]
        shared = sorted(set(faces_b[fa]) & set(faces_b[fb]))
        lookup[(fa, fb)] = tuple(shared)
    e = np.sort(np.concatenate([faces_b[:, [0, 1]], faces_b[:, [1, 2]], faces_b[:, [2, 0]]]), axis=1)
    fid = np.tile(np.arange(len(faces_b)), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, fid = e[order], fid[order]
    edge_index = {(int(a), int(b)): k for k, (a, b) in enumerate(e[0::2])}
    first = fid[0::2]
    for idx in range(len(fan)):
        fa, fb = fan[idx], fan[(idx + 1) % len(fan)]
        k = edge_index[lookup[(fa, fb)]]
        perm = surface.edge_perms.get(k, tuple(range(n)))
        if first[k] != fa:
            inv = [0] * n
            for s, t in enumerate(perm):
                inv[t] = s
            perm = tuple(inv)
        sheet = [perm[s] for s in sheet]
    return tuple(sheet)
