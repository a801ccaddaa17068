"""Finitely supported functions on an enumerated Cayley ball.

Everything uses counting measure and the *left* gradient

    |grad phi|(g) = max_{s in S} |phi(s g) - phi(g)|,

which only needs the ball's left-multiplication table.  Operations refuse to
silently read values outside the ball: the support must stay far enough from
the boundary sphere, otherwise :class:`PrecisionError` is raised unless the
caller opts into truncation (the result is then flagged).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import PrecisionError, ResourceError, UsageError
from .groups import Ball


@dataclass(frozen=True, eq=False)
class GroupFunction:
    ball: Ball
    values: np.ndarray  # dense over ball indices, zero off the support
    truncated: bool = False

    def __post_init__(self):
        if self.values.shape != (len(self.ball),):
            raise UsageError("values must have one entry per ball element")

    @classmethod
    def zeros(cls, ball: Ball) -> GroupFunction:
        return cls(ball, np.zeros(len(ball)))

    @classmethod
    def from_dict(cls, ball: Ball, mapping: dict) -> GroupFunction:
        """Build from ``{element: value}``; every element must lie in the ball."""
        vals = np.zeros(len(ball))
        for g, v in mapping.items():
            vals[ball.index_of(g)] = v
        return cls(ball, vals)

    @classmethod
    def indicator(cls, ball: Ball, indices) -> GroupFunction:
        vals = np.zeros(len(ball))
        vals[np.asarray(list(indices), dtype=np.int64)] = 1.0
        return cls(ball, vals)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)

    @property
    def support_radius(self) -> int:
        """Largest word length on the support, -1 for the zero function."""
        s = self.support
        return int(self.ball.lengths[s].max()) if s.size else -1

    def __getitem__(self, g) -> float:
        i = self.ball.index.get(g)
        return 0.0 if i is None else float(self.values[i])

    def as_dict(self) -> dict:
        return {self.ball.elements[i]: float(self.values[i]) for i in self.support}

    def __abs__(self):
        return GroupFunction(self.ball, np.abs(self.values), self.truncated)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["normal_form", "value"])
        fmt = self.ball.group.format
        for i in self.support:
            w.writerow([fmt(self.ball.elements[i]), repr(float(self.values[i]))])
        return buf.getvalue()


def _check_p(p):
    if not (p >= 1) or math.isinf(p):
        raise UsageError(f"p must be a finite real >= 1, got {p}")


def lp_norm(phi: GroupFunction | np.ndarray, p: float) -> float:
    _check_p(p)
    v = np.abs(phi.values if isinstance(phi, GroupFunction) else np.asarray(phi, dtype=float))
    if p == 1:
        return float(math.fsum(v))
    scale = v.max(initial=0.0)
    if scale == 0:
        return 0.0
    return scale * math.fsum((v / scale) ** p) ** (1.0 / p)


def _padded(values):
    # index -1 of the padded vector reads the zero appended at the end
    return np.append(values, 0.0)


def gradient_sup(phi: GroupFunction, truncate: bool = False) -> GroupFunction:
    """Pointwise left sup-gradient, evaluated on every ball element."""
    B = phi.ball
    touches = phi.support_radius >= B.radius
    if touches and not truncate:
        raise PrecisionError(
            f"support reaches the boundary sphere of B(1,{B.radius}); enlarge the ball or pass truncate=True"
        )
    v = _padded(phi.values)
    diffs = np.abs(v[B.left_mul] - phi.values[:, None])
    return GroupFunction(B, diffs.max(axis=1), truncated=touches)


def gradient_l2_energy(phi: GroupFunction, nu) -> float:
    """Sum over g and s of nu^(2)(s) |phi(s g) - phi(g)|^2.

    ``nu`` must be supported on generators; nu^(2) is expanded as the pairs
    (s1, s2) with weight nu(s1) nu(s2), so s g is read as s1 (s2 g).
    """
    return float(math.fsum(gradient_l2(phi, nu).values ** 2))


def gradient_l2(phi: GroupFunction, nu) -> GroupFunction:
    """|grad phi|_2(g) = (integral of |phi(s g) - phi(g)|^2 d nu^(2)(s))^(1/2)."""
    B = phi.ball
    if phi.support_radius > B.radius - 2:
        raise PrecisionError("the nu^(2)-gradient needs the support inside B(1, radius - 2)")
    gens = _generator_masses(nu)
    lm = np.vstack([B.left_mul, np.full((1, B.left_mul.shape[1]), -1)])
    v = _padded(phi.values)
    acc = np.zeros(len(B))
    for j2, w2 in gens:
        step = lm[:-1, j2]
        for j1, w1 in gens:
            target = lm[step, j1]
            acc += w1 * w2 * (v[target] - phi.values) ** 2
    return GroupFunction(B, np.sqrt(acc))


def _generator_masses(nu):
    B = nu.ball
    gens = B.group.generators
    pos = {B.index_of(s): j for j, s in enumerate(gens)}
    out = []
    for i, w in sorted(nu.masses.items()):
        if i not in pos:
            raise UsageError("measure must be supported on the generating set")
        out.append((pos[i], w))
    return out


def left_translate_values(phi: GroupFunction, g) -> dict:
    """lambda(g) phi as ``{element: value}``: (lambda(g) phi)(x) = phi(g^-1 x)."""
    G = phi.ball.group
    els = phi.ball.elements
    return {G._mul(g, els[i]): float(phi.values[i]) for i in phi.support}


def translation_distance(phi: GroupFunction, g, p: float) -> float:
    """|| phi - lambda(g) phi ||_p, computed without leaving element space."""
    _check_p(p)
    moved = left_translate_values(phi, g)
    B = phi.ball
    diff = []
    for i in phi.support:
        x = B.elements[i]
        diff.append(phi.values[i] - moved.pop(x, 0.0))
    diff.extend(-v for v in moved.values())
    return lp_norm(np.asarray(diff), p)


def right_translate(phi: GroupFunction, h) -> GroupFunction:
    """phi o R_h, i.e. g -> phi(g h)."""
    B = phi.ball
    G = B.group
    hinv = G.inverse(h)
    vals = np.zeros(len(B))
    for i in phi.support:
        j = B.index.get(G._mul(B.elements[i], hinv))
        if j is None:
            raise ResourceError("right translate leaves the ball")
        vals[j] = phi.values[i]
    return GroupFunction(B, vals)


def variation(phi: GroupFunction, t: float, p: float) -> float:
    """Var_p(phi, t) = inf over |g| >= t of || phi - lambda(g) phi ||_p.

    Translates by |g| > 2R (R the support radius) have disjoint support, so
    they all contribute exactly 2^(1/p) ||phi||_p and are not enumerated.
    """
    if t < 0:
        raise UsageError("t must be >= 0")
    _check_p(p)
    R = phi.support_radius
    if R < 0:
        return 0.0
    B = phi.ball
    far = 2.0 ** (1.0 / p) * lp_norm(phi, p)
    tmin = math.ceil(t)
    if tmin > 2 * R:
        return far
    if B.radius < 2 * R:
        raise ResourceError(f"Var_p needs every translate up to length {2 * R}; ball radius is {B.radius}")
    best = far
    lo = B.volume(tmin - 1)
    hi = B.volume(2 * R)
    for i in range(lo, hi):
        d = translation_distance(phi, B.elements[i], p)
        if d < best:
            best = d
    return best


def convolve(nu, phi: GroupFunction) -> GroupFunction:
    """(nu * phi)(x) = sum_g nu(g) phi(g^-1 x)."""
    B = phi.ball
    out = np.zeros(len(B))
    src = phi.support
    gens = {B.index_of(s): j for j, s in enumerate(B.group.generators)}
    G = B.group
    for i, w in sorted(nu.masses.items()):
        if w == 0:
            continue
        j = gens.get(i)
        if j is not None:
            tgt = B.left_mul[src, j]
        else:
            g = B.elements[i]
            tgt = np.array([B.index.get(G._mul(g, B.elements[k]), -1) for k in src], dtype=np.int64)
        if (tgt < 0).any():
            raise PrecisionError("supp(nu) supp(phi) leaves the ball")
        # left multiplication is injective, so targets within one g are distinct
        out[tgt] += w * phi.values[src]
    return GroupFunction(B, out)
