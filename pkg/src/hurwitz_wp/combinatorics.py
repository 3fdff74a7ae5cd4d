"""Monodromy data of simple branched coverings.

A simple ``n``-sheeted covering of a genus-``h`` curve with ``b`` branch
points is described by transpositions ``t_1 .. t_b`` in ``S_n`` and ``h``
pairs of handle permutations, subject to

    [a_1, b_1] ... [a_h, b_h] t_1 ... t_b = id

and transitivity of the generated group.  Permutations act on ``1..n`` and
compose right to left: ``(p * q)(i) = p(q(i))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence


class BudgetExceeded(ValueError):
    """The requested enumeration is outside the supported range."""


MAX_ENUM_DEGREE = 6
MAX_ENUM_BRANCH = 8


@dataclass(frozen=True, order=True)
class Permutation:
    """A permutation of ``{1..n}`` in one-line notation."""

    images: tuple[int, ...]

    def __post_init__(self):
        n = len(self.images)
        if sorted(self.images) != list(range(1, n + 1)):
            raise ValueError(f"not a permutation of 1..{n}: {self.images}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "Permutation":
        if a == b or not (1 <= a <= n and 1 <= b <= n):
            raise ValueError(f"bad transposition ({a} {b}) in S_{n}")
        img = list(range(1, n + 1))
        img[a - 1], img[b - 1] = b, a
        return cls(tuple(img))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        img = list(range(1, n + 1))
        for cyc in cycles:
            for x, y in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                img[x - 1] = y
        return cls(tuple(img))

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def inverse(self) -> "Permutation":
        inv = [0] * self.degree
        for i, j in enumerate(self.images, start=1):
            inv[j - 1] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(j == i for i, j in enumerate(self.images, start=1))

    def cycles(self) -> list[tuple[int, ...]]:
        """Nontrivial cycles, each starting at its least element."""
        seen = set()
        out = []
        for start in range(1, self.degree + 1):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            j = self(start)
            while j != start:
                cyc.append(j)
                seen.add(j)
                j = self(j)
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def num_cycles(self) -> int:
        """Number of cycles including fixed points."""
        return self.degree - sum(len(c) - 1 for c in self.cycles())

    def is_transposition(self) -> bool:
        cyc = self.cycles()
        return len(cyc) == 1 and len(cyc[0]) == 2

    def support_pair(self) -> tuple[int, int]:
        """The 2-cycle of a transposition as a sorted pair."""
        (cyc,) = self.cycles()
        return (min(cyc), max(cyc))

    def conjugate(self, g: "Permutation") -> "Permutation":
        """``g self g^-1``."""
        return compose(compose(g, self), g.inverse())

    def __str__(self) -> str:
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc)

    __repr__ = __str__


def compose(p: Permutation, q: Permutation) -> Permutation:
    """``(p o q)(i) = p(q(i))``."""
    if p.degree != q.degree:
        raise ValueError(f"degree mismatch: {p.degree} vs {q.degree}")
    return Permutation(tuple(p.images[j - 1] for j in q.images))


def product(perms: Iterable[Permutation], n: int) -> Permutation:
    out = Permutation.identity(n)
    for p in perms:
        out = compose(out, p)
    return out


def commutator(a: Permutation, b: Permutation) -> Permutation:
    return product([a, b, a.inverse(), b.inverse()], a.degree)


def is_transitive(perms: Sequence[Permutation], n: int) -> bool:
    """True iff the group generated by ``perms`` acts transitively on 1..n."""
    for p in perms:
        if p.degree != n:
            raise ValueError(f"degree mismatch: {p.degree} vs {n}")
    orbit = {1}
    frontier = [1]
    while frontier:
        i = frontier.pop()
        for p in perms:
            j = p(i)
            if j not in orbit:
                orbit.add(j)
                frontier.append(j)
    return len(orbit) == n


@dataclass(frozen=True)
class MonodromyDatum:
    """Combinatorial type of a simple branched covering."""

    n: int
    transpositions: tuple[Permutation, ...]
    h: int = 0
    handles: tuple[tuple[Permutation, Permutation], ...] = field(default=())

    @property
    def b(self) -> int:
        return len(self.transpositions)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]], h: int = 0,
                   handles=()) -> "MonodromyDatum":
        taus = tuple(Permutation.transposition(n, a, b) for a, b in pairs)
        return cls(n, taus, h, tuple(handles))

    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(t.support_pair() for t in self.transpositions)

    def generators(self) -> list[Permutation]:
        gens = list(self.transpositions)
        for a, b in self.handles:
            gens += [a, b]
        return gens

    def monodromy_product(self) -> Permutation:
        parts = [commutator(a, b) for a, b in self.handles]
        return product(parts + list(self.transpositions), self.n)

    def conjugate(self, g: Permutation) -> "MonodromyDatum":
        return MonodromyDatum(
            self.n,
            tuple(t.conjugate(g) for t in self.transpositions),
            self.h,
            tuple((a.conjugate(g), b.conjugate(g)) for a, b in self.handles),
        )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "transpositions": [list(p) for p in self.pairs()],
            "handles": [[list(a.images), list(b.images)] for a, b in self.handles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "MonodromyDatum":
        n = int(data["n"])
        handles = tuple(
            (Permutation(tuple(a)), Permutation(tuple(b))) for a, b in data.get("handles", [])
        )
        return cls.from_pairs(n, data["transpositions"], int(data.get("h", 0)), handles)


def validation_error(d: MonodromyDatum) -> str | None:
    """Reason code for the first violated invariant, or ``None`` if valid."""
    if d.n < 2:
        return "degree"
    if d.h < 0 or len(d.handles) != d.h:
        return "handles"
    if d.b < 1:
        return "no_branch_points"
    for p in d.generators():
        if p.degree != d.n:
            return "degree_mismatch"
    if not all(t.is_transposition() for t in d.transpositions):
        return "not_transposition"
    if not d.monodromy_product().is_identity():
        return "product"
    if not is_transitive(d.generators(), d.n):
        return "not_transitive"
    return None


def validate(d: MonodromyDatum) -> bool:
    return validation_error(d) is None


def genus_from_relation(n: int, h: int, b: int) -> int:
    """Genus ``p`` of the cover from ``b = n(2 - 2h) + 2p - 2``."""
    twice = b - n * (2 - 2 * h) + 2
    if twice % 2 or twice < 0:
        raise ValueError(f"no covering type with n={n}, h={h}, b={b}")
    return twice // 2


# -- enumeration ------------------------------------------------------------

@lru_cache(maxsize=None)
def _symmetric_group(n: int) -> tuple[tuple[int, ...], ...]:
    """All of S_n as 0-based image tuples."""
    return tuple(itertools.permutations(range(n)))


@lru_cache(maxsize=None)
def _transposition_pairs(n: int) -> tuple[tuple[int, int], ...]:
    return tuple((a, b) for a in range(n) for b in range(a + 1, n))


def _act(g, pair):
    a, b = g[pair[0]], g[pair[1]]
    return (a, b) if a < b else (b, a)


def _swap(perm: list[int], a: int, b: int) -> list[int]:
    """``perm o (a b)`` on 0-based image lists."""
    out = list(perm)
    out[a], out[b] = perm[b], perm[a]
    return out


def _cycle_count(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    count = 0
    for i in range(len(perm)):
        if not seen[i]:
            count += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return count


def _transitive_pairs(pairs, n: int) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(n)}) == 1


def canonical_pairs(pairs: Sequence[tuple[int, int]], n: int) -> tuple[tuple[int, int], ...]:
    """Lexicographically least conjugate of a tuple of 0-based transpositions."""
    return min(tuple(_act(g, p) for p in pairs) for g in _symmetric_group(n))


def _iter_canonical(n: int, b: int):
    """Depth-first search over tuples that are lex-least in their S_n orbit.

    A prefix of a lex-least tuple is lex-least among the conjugates of that
    prefix, so non-minimal prefixes are cut.  ``stab`` holds the group
    elements fixing the current prefix; every other element already maps it
    to something strictly larger.
    """
    group = _symmetric_group(n)
    pairs = _transposition_pairs(n)

    def rec(prefix, perm, stab):
        depth = len(prefix)
        remaining = b - depth
        distance = n - _cycle_count(perm)
        if remaining < distance or (remaining - distance) % 2:
            return
        if remaining == 0:
            if _transitive_pairs(prefix, n):
                yield tuple(prefix)
            return
        for t in pairs:
            images = [_act(g, t) for g in stab]
            if any(im < t for im in images):
                continue
            new_stab = [g for g, im in zip(stab, images) if im == t]
            prefix.append(t)
            yield from rec(prefix, _swap(perm, *t), new_stab)
            prefix.pop()

    yield from rec([], list(range(n)), list(group))


def enumerate_classes(n: int, b: int) -> list[MonodromyDatum]:
    """One lex-least representative per S_n-conjugation class of genus-0 data."""
    if n < 2 or b < 1:
        raise ValueError("need n >= 2 and b >= 1")
    if n > MAX_ENUM_DEGREE or b > MAX_ENUM_BRANCH:
        raise BudgetExceeded(
            f"enumeration budget is n <= {MAX_ENUM_DEGREE}, b <= {MAX_ENUM_BRANCH}"
        )
    reps = sorted(_iter_canonical(n, b))
    return [MonodromyDatum.from_pairs(n, [(x + 1, y + 1) for x, y in r]) for r in reps]


def brute_force_classes(n: int, b: int) -> list[tuple[tuple[int, int], ...]]:
    """Reference enumeration: every tuple, then grouping by conjugation."""
    classes = set()
    for tup in itertools.product(_transposition_pairs(n), repeat=b):
        perm = list(range(n))
        for t in tup:
            perm = _swap(perm, *t)
        if perm == list(range(n)) and _transitive_pairs(tup, n):
            classes.add(canonical_pairs(tup, n))
    return sorted(classes)


def delta_degree(n: int, b: int) -> int:
    """Number of sheets of the branch-locus map, i.e. the number of classes."""
    return len(enumerate_classes(n, b))


def canonical_datum(d: MonodromyDatum) -> MonodromyDatum:
    if d.h:
        raise ValueError("canonical forms are only defined for base genus 0")
    pairs = canonical_pairs([(a - 1, b - 1) for a, b in d.pairs()], d.n)
    return MonodromyDatum.from_pairs(d.n, [(x + 1, y + 1) for x, y in pairs])


# -- braid action -----------------------------------------------------------

def braid_move(d: MonodromyDatum, i: int) -> MonodromyDatum:
    """Hurwitz move ``(t_i, t_i+1) -> (t_i+1, t_i+1^-1 t_i t_i+1)`` (1-based ``i``)."""
    if not 1 <= i <= d.b - 1:
        raise IndexError(f"braid index {i} outside 1..{d.b - 1}")
    t = list(d.transpositions)
    a, c = t[i - 1], t[i]
    t[i - 1], t[i] = c, product([c.inverse(), a, c], d.n)
    return MonodromyDatum(d.n, tuple(t), d.h, d.handles)


def braid_move_inverse(d: MonodromyDatum, i: int) -> MonodromyDatum:
    """Inverse Hurwitz move ``(t_i, t_i+1) -> (t_i t_i+1 t_i^-1, t_i)``."""
    if not 1 <= i <= d.b - 1:
        raise IndexError(f"braid index {i} outside 1..{d.b - 1}")
    t = list(d.transpositions)
    a, c = t[i - 1], t[i]
    t[i - 1], t[i] = product([a, c, a.inverse()], d.n), a
    return MonodromyDatum(d.n, tuple(t), d.h, d.handles)


def braid_orbits(classes: Sequence[MonodromyDatum]) -> list[list[int]]:
    """Partition class indices into orbits of the braid group action."""
    index = {canonical_datum(d).pairs(): k for k, d in enumerate(classes)}
    parent = list(range(len(classes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, d in enumerate(classes):
        for i in range(1, d.b):
            image = canonical_datum(braid_move(d, i)).pairs()
            if image not in index:
                raise ValueError("braid image is not among the given classes")
            parent[find(k)] = find(index[image])
    orbits: dict[int, list[int]] = {}
    for k in range(len(classes)):
        orbits.setdefault(find(k), []).append(k)
    return sorted(orbits.values())


# -- automorphisms ----------------------------------------------------------

def centralizer_order(perms: Sequence[Permutation], n: int) -> int:
    """Order of the centralizer in S_n of a transitive group.

    The centralizer acts semiregularly, so an element is determined by the
    image of 1; each candidate image is extended along a spanning tree of
    the Schreier graph and then checked.
    """
    if not is_transitive(perms, n):
        raise ValueError("centralizer shortcut requires a transitive group")
    # words reaching each point from 1
    tree = {1: []}
    frontier = [1]
    while frontier:
        i = frontier.pop(0)
        for k, p in enumerate(perms):
            j = p(i)
            if j not in tree:
                tree[j] = tree[i] + [k]
                frontier.append(j)
    count = 0
    for target in range(1, n + 1):
        img = [0] * (n + 1)
        for x, word in tree.items():
            y = target
            for k in word:
                y = perms[k](y)
            img[x] = y
        if sorted(img[1:]) != list(range(1, n + 1)):
            continue
        if all(img[p(x)] == p(img[x]) for p in perms for x in range(1, n + 1)):
            count += 1
    return count


def automorphism_order(d: MonodromyDatum) -> int:
    """Order of the deck-automorphism group of the covering."""
    reason = validation_error(d)
    if reason is not None:
        raise ValueError(f"invalid monodromy datum: {reason}")
    return centralizer_order(d.generators(), d.n)
