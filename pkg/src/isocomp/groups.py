"""Marked groups, normal forms, word lengths and Cayley balls.

Four families are supported, each with a fixed symmetric generating set
that contains the identity (so S^n is exactly the ball B(1, n)):

* ``Z^d``        integer vectors, generators 0 and +-e_i
* ``Fr``         free group on r letters, generators e and the letters +-1..+-r
* ``CmwrZ``      lamplighter C_m wr Z, generators e, t, t^-1 and every lamp c*delta_0
* ``ZwrZ``       Z wr Z, generators e, t, t^-1, a, a^-1

Wreath elements are pairs ``(shift, lamps)`` multiplied by the rule
``(n, f)(m, g) = (n + m, tau_m f + g)`` with ``tau_m f(x) = f(m + x)``.  In this
encoding the lamp stored at key ``x`` physically sits at position
``shift + x``; :func:`absolute_lamps` returns that picture.
"""

from __future__ import annotations

import csv
import io
import re
from collections.abc import Iterator
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ResourceError, UsageError

DEFAULT_BUDGET = 5_000_000


class WreathElement(NamedTuple):
    shift: int
    lamps: tuple  # sorted ((key, value), ...) with no zero values


def _lamp_dict_to_tuple(d, m):
    if m:
        items = ((k, v % m) for k, v in d.items())
    else:
        items = d.items()
    return tuple(sorted((k, v) for k, v in items if v))


@dataclass(frozen=True)
class MarkedGroup:
    name: str
    family: str  # "lattice" | "free" | "wreath"
    rank: int = 1  # d for Z^d, r for F_r, unused for wreath products
    lamp_order: int = 0  # m for C_m wr Z, 0 for Z wr Z

    def __post_init__(self):
        if self.family not in ("lattice", "free", "wreath"):
            raise UsageError(f"unknown group family {self.family!r}")
        if self.family == "wreath" and self.lamp_order == 1:
            raise UsageError("lamp group must be nontrivial")

    # -- elements ---------------------------------------------------------

    @cached_property
    def identity(self):
        if self.family == "lattice":
            return (0,) * self.rank
        if self.family == "free":
            return ()
        return WreathElement(0, ())

    @cached_property
    def generators(self) -> tuple:
        gens = [self.identity]
        if self.family == "lattice":
            for i in range(self.rank):
                for sign in (1, -1):
                    v = [0] * self.rank
                    v[i] = sign
                    gens.append(tuple(v))
        elif self.family == "free":
            for i in range(1, self.rank + 1):
                gens.extend([(i,), (-i,)])
        else:
            gens.extend([WreathElement(1, ()), WreathElement(-1, ())])
            if self.lamp_order:
                for c in range(1, self.lamp_order):
                    gens.append(WreathElement(0, ((0, c),)))
            else:
                gens.extend([WreathElement(0, ((0, 1),)), WreathElement(0, ((0, -1),))])
        return tuple(gens)

    @property
    def is_wreath(self) -> bool:
        return self.family == "wreath"

    def is_element(self, g) -> bool:
        if self.family == "lattice":
            return isinstance(g, tuple) and len(g) == self.rank and all(isinstance(x, int) for x in g)
        if self.family == "free":
            if not isinstance(g, tuple) or isinstance(g, WreathElement):
                return False
            ok = all(isinstance(x, int) and x != 0 and abs(x) <= self.rank for x in g)
            return ok and all(g[i] != -g[i + 1] for i in range(len(g) - 1))
        if not isinstance(g, WreathElement):
            return False
        keys = [k for k, _ in g.lamps]
        if keys != sorted(set(keys)):
            return False
        m = self.lamp_order
        return all(v != 0 and (not m or 0 < v < m) for _, v in g.lamps)

    def check(self, *elements):
        for g in elements:
            if not self.is_element(g):
                raise UsageError(f"{g!r} is not a normal-form element of {self.name}")

    # -- group law --------------------------------------------------------

    def multiply(self, g, h):
        self.check(g, h)
        return self._mul(g, h)

    def _mul(self, g, h):
        if self.family == "lattice":
            return tuple(a + b for a, b in zip(g, h))
        if self.family == "free":
            i = 0
            while i < len(g) and i < len(h) and g[-1 - i] == -h[i]:
                i += 1
            return g[: len(g) - i] + h[i:]
        n, f = g
        k, u = h
        if not f:
            return WreathElement(n + k, u)
        d = {y - k: v for y, v in f}
        for y, v in u:
            d[y] = d.get(y, 0) + v
        return WreathElement(n + k, _lamp_dict_to_tuple(d, self.lamp_order))

    def inverse(self, g):
        if self.family == "lattice":
            return tuple(-a for a in g)
        if self.family == "free":
            return tuple(-x for x in reversed(g))
        n, f = g
        m = self.lamp_order
        return WreathElement(-n, tuple((y + n, (-v) % m if m else -v) for y, v in f))

    def left_mul_gen(self, j: int, g):
        """Return ``s_j * g`` for the j-th generator, using per-family shortcuts."""
        s = self.generators[j]
        if j == 0:
            return g
        if self.family == "lattice":
            return tuple(a + b for a, b in zip(s, g))
        if self.family == "free":
            x = s[0]
            if g and g[0] == -x:
                return g[1:]
            return (x,) + g
        k, u = g
        if not s.lamps:
            return WreathElement(k + s.shift, u)
        c = s.lamps[0][1]
        key = -k
        m = self.lamp_order
        out = []
        done = False
        for y, v in u:
            if not done and y >= key:
                done = True
                if y == key:
                    nv = (v + c) % m if m else v + c
                    if nv:
                        out.append((y, nv))
                    continue
                out.append((key, c))
            out.append((y, v))
        if not done:
            out.append((key, c))
        return WreathElement(k, tuple(out))

    def power(self, g, n: int):
        out = self.identity
        base = g if n >= 0 else self.inverse(g)
        for _ in range(abs(n)):
            out = self._mul(out, base)
        return out

    # -- wreath-specific helpers ------------------------------------------

    def lamp_cost(self, v: int) -> int:
        """Word length of a lamp value in the lamp group F with its generators."""
        if self.lamp_order:
            return 1 if v % self.lamp_order else 0
        return abs(v)

    def format(self, g) -> str:
        if self.family == "lattice":
            return str(g[0]) if self.rank == 1 else "(" + ",".join(map(str, g)) + ")"
        if self.family == "free":
            if not g:
                return "e"
            letters = "abcdefghijklmnopqrstuvwxyz"
            return "".join(letters[x - 1] if x > 0 else letters[-x - 1].upper() for x in g)
        body = ",".join(f"{y}:{v}" for y, v in g.lamps)
        return f"({g.shift}|{body})"

    def element(self, *args):
        """Build a normal-form element, e.g. ``G.element(3, {0: 2, 5: -1})`` for wreaths."""
        if self.family == "lattice":
            return tuple(int(a) for a in args)
        if self.family == "free":
            out = self.identity
            for x in args:
                out = self._mul(out, (int(x),))
            return out
        shift, lamps = args if len(args) == 2 else (args[0], {})
        return WreathElement(int(shift), _lamp_dict_to_tuple(dict(lamps), self.lamp_order))


def absolute_lamps(g: WreathElement) -> dict:
    """Lamp configuration seen from the origin: position ``shift + key``."""
    return {g.shift + y: v for y, v in g.lamps}


_PATTERNS = [
    (re.compile(r"^Z(?:\^(\d+))?$"), "lattice"),
    (re.compile(r"^F(\d+)$"), "free"),
    (re.compile(r"^C(\d+)wrZ$"), "lamplighter"),
    (re.compile(r"^ZwrZ$"), "zwrz"),
]


def parse_group(spec: str) -> MarkedGroup:
    """Parse a descriptor such as ``"Z"``, ``"Z^2"``, ``"F2"``, ``"C2wrZ"``, ``"ZwrZ"``."""
    s = spec.strip()
    for pat, kind in _PATTERNS:
        mt = pat.match(s)
        if not mt:
            continue
        if kind == "lattice":
            d = int(mt.group(1) or 1)
            if d < 1:
                break
            return MarkedGroup(s, "lattice", rank=d)
        if kind == "free":
            r = int(mt.group(1))
            if r < 1:
                break
            return MarkedGroup(s, "free", rank=r)
        if kind == "lamplighter":
            m = int(mt.group(1))
            if m < 2:
                break
            return MarkedGroup(s, "wreath", lamp_order=m)
        return MarkedGroup(s, "wreath", lamp_order=0)
    raise UsageError(f"unrecognised group descriptor {spec!r}")


# -- word lengths ---------------------------------------------------------


def _bfs_spheres(G: MarkedGroup, max_radius: int) -> Iterator[list]:
    seen = {G.identity}
    frontier = [G.identity]
    yield frontier
    ngen = len(G.generators)
    for _ in range(max_radius):
        nxt = []
        for g in frontier:
            for j in range(1, ngen):
                h = G.left_mul_gen(j, g)
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
        frontier = nxt
        yield frontier


def word_length_bfs(G: MarkedGroup, g, max_radius: int) -> int | None:
    """Exact word length by breadth-first search, or ``None`` if it exceeds ``max_radius``."""
    if max_radius < 0:
        raise UsageError("max_radius must be >= 0")
    G.check(g)
    for r, sphere in enumerate(_bfs_spheres(G, max_radius)):
        if g in sphere:
            return r
    return None


def tour_length(positions, end: int) -> int:
    """Shortest walk on Z from 0 to ``end`` visiting every point of ``positions``."""
    lo = min(0, end)
    hi = max(0, end)
    for x in positions:
        if x < lo:
            lo = x
        elif x > hi:
            hi = x
    span = hi - lo
    left_first = -lo + span + (hi - end)
    right_first = hi + span + (end - lo)
    return min(left_first, right_first)


def word_length_wreath(G: MarkedGroup, g: WreathElement) -> int:
    """Parry's formula: travelling cost of the cursor plus the lamp costs."""
    if not G.is_wreath:
        raise UsageError(f"{G.name} is not a wreath product")
    G.check(g)
    tour = tour_length([g.shift + y for y, _ in g.lamps], g.shift)
    return tour + sum(G.lamp_cost(v) for _, v in g.lamps)


def project_theta(G: MarkedGroup, g: WreathElement, target: MarkedGroup | None = None) -> WreathElement:
    """Reduce every lamp of a Z wr Z element mod 2, landing in C2 wr Z."""
    if not (G.is_wreath and G.lamp_order == 0):
        raise UsageError("theta is defined on Z wr Z only")
    return WreathElement(g.shift, tuple((y, 1) for y, v in g.lamps if v % 2))


C2_WR_Z = MarkedGroup("C2wrZ", "wreath", lamp_order=2)


# -- balls ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ball:
    group: MarkedGroup
    radius: int
    elements: list
    lengths: np.ndarray
    left_mul: np.ndarray  # (N, |S|), -1 marks a product outside the ball
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def index_of(self, g) -> int:
        try:
            return self.index[g]
        except KeyError:
            raise ResourceError(f"{self.group.format(g)} lies outside B(1,{self.radius})") from None

    def volume(self, k: int) -> int:
        """V(k) = |B(1, k)| for k <= radius."""
        if k < 0:
            return 0
        if k > self.radius:
            raise ResourceError(f"V({k}) needs radius {k}, ball has radius {self.radius}")
        return int(np.searchsorted(self.lengths, k, side="right"))

    @cached_property
    def sphere_sizes(self) -> np.ndarray:
        return np.bincount(self.lengths, minlength=self.radius + 1)

    def indices_within(self, k: int) -> np.ndarray:
        return np.arange(self.volume(min(k, self.radius)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "length", "normal_form"])
        for i, g in enumerate(self.elements):
            w.writerow([i, int(self.lengths[i]), self.group.format(g)])
        return buf.getvalue()


def enumerate_ball(G: MarkedGroup, n: int, budget: int = DEFAULT_BUDGET) -> Ball:
    """Breadth-first enumeration of B(1, n) with left-multiplication tables.

    Elements are indexed in order of first discovery under the fixed
    generator order, so the identity is index 0 and lengths are sorted.
    """
    if n < 0:
        raise UsageError("radius must be >= 0")
    elements = []
    lengths = []
    index = {}
    attained = -1
    for r, sphere in enumerate(_bfs_spheres(G, n)):
        if len(elements) + len(sphere) > budget:
            raise ResourceError(
                f"ball of {G.name} exceeds the {budget}-element budget; attained radius {attained}"
            )
        for g in sphere:
            index[g] = len(elements)
            elements.append(g)
            lengths.append(r)
        attained = r
        # spheres never shrink in these infinite groups, so this already overflows
        if len(elements) + (n - r) * len(sphere) > budget:
            raise ResourceError(
                f"ball of {G.name} would exceed the {budget}-element budget; attained radius {attained}"
            )
    ngen = len(G.generators)
    table = np.empty((len(elements), ngen), dtype=np.int64)
    table[:, 0] = np.arange(len(elements))
    get = index.get
    for i, g in enumerate(elements):
        row = table[i]
        for j in range(1, ngen):
            row[j] = get(G.left_mul_gen(j, g), -1)
    return Ball(G, n, elements, np.asarray(lengths, dtype=np.int64), table, index)


def iter_wreath_ball(G: MarkedGroup, radius: int) -> Iterator[tuple[WreathElement, int]]:
    """Yield every ``(g, |g|)`` with ``|g| <= radius`` using Parry's formula.

    This avoids storing multiplication tables, which matters for Z wr Z
    where B(1, 16) has ~10^7 elements.  Agreement with BFS is tested.
    """
    if not G.is_wreath:
        raise UsageError(f"{G.name} is not a wreath product")
    m = G.lamp_order
    if m:
        values = [(c, 1) for c in range(1, m)]

        def vals(budget):
            return values if budget >= 1 else []
    else:

        def vals(budget):
            for a in range(1, budget + 1):
                yield a, a
                yield -a, a

    for k in range(-radius, radius + 1):
        yield WreathElement(k, ()), abs(k)
    for lo in range(-radius, radius + 1):
        for hi in range(lo, radius + 1):
            for k in range(-radius, radius + 1):
                tour = tour_length((lo, hi), k)
                budget = radius - tour
                need = 1 if lo == hi else 2
                if budget < need:
                    continue
                yield from _fill_lamps(k, lo, hi, budget, tour, vals)


def _fill_lamps(k, lo, hi, budget, tour, vals):
    # endpoints lo and hi must be lit, interior positions are optional
    if lo == hi:
        for v, c in vals(budget):
            yield WreathElement(k, ((lo - k, v),)), tour + c
        return
    interior = list(range(lo + 1, hi))

    def rec(i, left, acc):
        if i == len(interior):
            for v, c in vals(left):
                if c > left:
                    break
                lamps = tuple(acc) + ((hi - k, v),)
                yield WreathElement(k, lamps), tour + budget - left + c
            return
        yield from rec(i + 1, left, acc)
        for v, c in vals(left - 1):
            if c > left - 1:
                break
            acc.append((interior[i] - k, v))
            yield from rec(i + 1, left - c, acc)
            acc.pop()

    for v, c in vals(budget - 1):
        if c > budget - 1:
            break
        yield from rec(0, budget - c, [(lo - k, v)])
