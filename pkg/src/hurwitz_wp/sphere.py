"""Round-sphere helpers: stereographic charts and Moebius rotations.

Points of P1 are stored as unit vectors in R^3.  The affine coordinate is
``w = (x + iy) / (1 - z)`` (projection from the north pole), so ``w = 0`` is
the south pole and ``w = inf`` the north pole.  The unit sphere carries the
metric ``4|dw|^2 / (1 + |w|^2)^2`` of curvature +1 and total area ``4 pi``.
"""

from __future__ import annotations

import numpy as np


def to_sphere(w):
    """Inverse stereographic projection; ``w`` may contain ``inf``."""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape + (3,))
    finite = np.isfinite(w)
    small = finite & (np.abs(w) <= 1)
    wf = w[small]
    r2 = np.abs(wf) ** 2
    out[small, 0] = 2 * wf.real / (1 + r2)
    out[small, 1] = 2 * wf.imag / (1 + r2)
    out[small, 2] = (r2 - 1) / (1 + r2)
    # |w| > 1 through u = 1/w, which cannot overflow
    big = finite & ~small
    u = 1.0 / w[big]
    r2 = np.abs(u) ** 2
    out[big, 0] = 2 * u.real / (1 + r2)
    out[big, 1] = -2 * u.imag / (1 + r2)
    out[big, 2] = (1 - r2) / (1 + r2)
    out[~finite] = (0.0, 0.0, 1.0)
    return out


def to_plane(x):
    """Stereographic coordinate of unit vectors (north pole maps to ``inf``)."""
    x = np.asarray(x, dtype=float)
    den = 1.0 - x[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (x[..., 0] + 1j * x[..., 1]) / den
    return np.where(den > 1e-300, w, np.inf + 0j)


def to_plane_inv(x):
    """The coordinate ``1/w`` computed stably from the south-pole projection."""
    x = np.asarray(x, dtype=float)
    return (x[..., 0] - 1j * x[..., 1]) / (1.0 + x[..., 2])


def round_density(w):
    """Riemannian density ``lambda`` of the unit sphere in an isometric chart."""
    return 4.0 / (1.0 + np.abs(w) ** 2) ** 2


class Rotation:
    """A rotation of the round sphere, acting on ``w`` as an SU(2) Moebius map

    ``w -> (a w + b) / (-conj(b) w + conj(a))`` with ``|a|^2 + |b|^2 = 1``.
    """

    def __init__(self, a: complex, b: complex):
        norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        self.a = complex(a) / norm
        self.b = complex(b) / norm

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0)

    @classmethod
    def about_pole(cls, angle: float) -> "Rotation":
        """``w -> exp(i angle) w``."""
        return cls(np.exp(0.5j * angle), 0.0)

    @classmethod
    def to_origin(cls, x) -> "Rotation":
        """Rotation taking the unit vector ``x`` to ``w = 0``.

        For finite ``p`` this is ``w -> (w - p) / (1 + conj(p) w)``.
        """
        X, Y, Z = (float(c) for c in x)
        theta = np.arctan2(Y, X) if X * X + Y * Y > 0 else 0.0
        a = np.sqrt(max(0.0, (1 - Z) / 2))
        b = -np.exp(1j * theta) * np.sqrt(max(0.0, (1 + Z) / 2))
        return cls(a, b)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        nx, ny, nz = axis
        return cls(c + 1j * s * nz, 1j * s * (nx + 1j * ny))

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        a, b = self.a, self.b
        finite = np.isfinite(w)
        wf = np.where(finite, w, 0)
        num = a * wf + b
        den = -np.conj(b) * wf + np.conj(a)
        zero = np.abs(den) < 1e-300
        out = np.where(zero, np.inf + 0j, num / np.where(zero, 1, den))
        at_inf = a / (-np.conj(b)) if abs(b) > 1e-300 else np.inf + 0j
        return np.where(finite, out, at_inf)

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        return 1.0 / (-np.conj(self.b) * w + np.conj(self.a)) ** 2

    def inverse(self) -> "Rotation":
        return Rotation(np.conj(self.a), -self.b)

    def compose(self, other: "Rotation") -> "Rotation":
        """``self o other``."""
        m1 = np.array([[self.a, self.b], [-np.conj(self.b), np.conj(self.a)]])
        m2 = np.array([[other.a, other.b], [-np.conj(other.b), np.conj(other.a)]])
        m = m1 @ m2
        return Rotation(m[0, 0], m[0, 1])

    def apply(self, x):
        """Act on unit vectors."""
        return np.asarray(x, dtype=float) @ self.matrix().T

    def matrix(self) -> np.ndarray:
        """The SO(3) matrix, obtained from the action on three basis points."""
        basis = np.eye(3)
        imgs = to_sphere(self(to_plane(basis)))
        # columns: images of e1, e2, e3 -- valid for a linear map since the
        # action is an isometry fixing the origin of R^3
        return imgs.T


def _rodrigues(axis, angle) -> np.ndarray:
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


def chordal_distance(x, y):
    return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


def spherical_distance(x, y):
    d = np.clip(np.sum(np.asarray(x) * np.asarray(y), axis=-1), -1.0, 1.0)
    return np.arccos(d)
