"""Dimension arithmetic for deformations of a simple covering X -> Y.

Only degree arguments are used: Riemann-Roch ``chi(L) = deg L - p + 1``,
Serre duality ``h^1(L) = h^0(K_X - L)`` and ``h^0(L) = 0`` for ``deg L < 0``.
Anything those cannot pin down is reported as undetermined (``None``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .combinatorics import genus_from_relation


@dataclass(frozen=True)
class BundleDegrees:
    deg_pullback: int   # beta^* T_Y
    deg_tx: int         # T_X
    deg_kx: int         # K_X
    deg_dual_twist: int  # (beta^* T_Y)^* (x) K_X

    @classmethod
    def of(cls, n: int, h: int, b: int) -> "BundleDegrees":
        p = genus_from_relation(n, h, b)
        return cls(n * (2 - 2 * h), 2 - 2 * p, 2 * p - 2, 4 * p - 4 - b)


@dataclass(frozen=True)
class CohomologyProfile:
    h0_pullback: int | None
    t1: int
    h1_tx: int
    h1_pullback: int | None
    notes: tuple[str, ...] = field(default=())

    @property
    def determined(self) -> dict[str, bool]:
        return {
            "h0_pullback": self.h0_pullback is not None,
            "t1": True,
            "h1_tx": True,
            "h1_pullback": self.h1_pullback is not None,
        }

    def alternating_sum(self) -> int | None:
        if self.h0_pullback is None or self.h1_pullback is None:
            return None
        return self.h0_pullback - self.t1 + self.h1_tx - self.h1_pullback

    def as_tuple(self):
        return (self.h0_pullback, self.t1, self.h1_tx, self.h1_pullback)

    def to_json(self) -> dict:
        return {
            "h0_pullback": self.h0_pullback,
            "t1": self.t1,
            "h1_tx": self.h1_tx,
            "h1_pullback": self.h1_pullback,
            "determined": self.determined,
            "notes": list(self.notes),
        }


def _require_hyperbolic(p: int) -> None:
    if p < 2:
        raise ValueError(f"cover genus must be at least 2, got {p}")


def tangent_dims(b: int) -> tuple[int, int, int]:
    """Dimensions of T^0, T^1, T^2 of the covering relative to Y."""
    if b < 1:
        raise ValueError("need at least one branch point")
    return (0, b, 0)


def hypercohomology_dims(n: int, h: int, b: int) -> tuple[int, int, int]:
    """Hypercohomology of ``T_X -> beta^* T_Y``; agrees with ``tangent_dims``."""
    _require_hyperbolic(genus_from_relation(n, h, b))
    return tangent_dims(b)


def obstruction_vanishes(p: int, b: int) -> bool:
    """Degree criterion ``b > 4p - 4`` for ``H^1(X, beta^* T_Y) = 0``."""
    _require_hyperbolic(p)
    return b > 4 * p - 4


def cohomology_profile(n: int, h: int, b: int) -> CohomologyProfile:
    p = genus_from_relation(n, h, b)
    _require_hyperbolic(p)
    deg = BundleDegrees.of(n, h, b)
    chi = deg.deg_pullback - p + 1
    h1_tx = 3 * p - 3
    notes = []

    if deg.deg_dual_twist < 0:
        h1 = 0
        h0 = chi
    elif deg.deg_pullback < 0:
        h0 = 0
        h1 = h0 - chi
    elif h == 1:
        # T_Y is trivial on an elliptic curve, so is its pullback
        h0 = 1
        h1 = h0 - chi
        notes.append("elliptic base: pullback of trivial tangent bundle has h0 = 1")
    else:
        h0 = h1 = None
        notes.append("degree arguments do not determine h0/h1 of the pullback")

    return CohomologyProfile(h0, b, h1_tx, h1, tuple(notes))
