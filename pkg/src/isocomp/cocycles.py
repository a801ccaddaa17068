"""Evaluable 1-cocycles into sparse l^p vectors and their compression.

A cocycle b satisfies b(gh) = pi(g) b(h) + b(g).  Vectors are plain dicts
``{coordinate: value}``; direct sums tag coordinates with their block index
instead of concatenating.  Every variant exposes ``__call__`` (the vector),
``act`` (the linear action) and ``norm``.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass

import numpy as np

from .embeddings import CompressionCurve, CompressionModulus, cp_integral
from .errors import UsageError
from .functions import GroupFunction, _check_p, lp_norm
from .groups import (
    C2_WR_Z,
    Ball,
    MarkedGroup,
    WreathElement,
    absolute_lamps,
    enumerate_ball,
    iter_wreath_ball,
    project_theta,
    word_length_wreath,
)
from .isoperimetry import CosetFunction, lamplighter_folner_pair, pair_test_function


def _norm(values, p) -> float:
    return lp_norm(np.fromiter(values, dtype=float), p)


class Cocycle:
    group: MarkedGroup

    def __call__(self, g) -> dict:
        raise NotImplementedError

    def act(self, g, v: dict) -> dict:
        raise NotImplementedError

    def norm(self, g, p: float) -> float:
        return _norm(self(g).values(), p)


def add_vectors(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        s = out.get(k, 0) + v
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def cocycle_defect(b: Cocycle, g, h) -> float:
    """max |b(gh) - b(g) - pi(g) b(h)| over coordinates."""
    lhs = b(b.group._mul(g, h))
    rhs = add_vectors(b(g), b.act(g, b(h)))
    keys = lhs.keys() | rhs.keys()
    return max((abs(lhs.get(k, 0) - rhs.get(k, 0)) for k in keys), default=0.0)


@dataclass(eq=False)
class Variational(Cocycle):
    """b(g) = phi - lambda(g) phi in l^p(G)."""

    phi: GroupFunction

    def __post_init__(self):
        self.group = self.phi.ball.group
        self._items = [(self.phi.ball.elements[i], float(self.phi.values[i])) for i in self.phi.support]

    def __call__(self, g):
        G = self.group
        out = {x: v for x, v in self._items}
        for x, v in self._items:
            y = G._mul(g, x)
            s = out.get(y, 0.0) - v
            if s:
                out[y] = s
            else:
                out.pop(y, None)
        return out

    def act(self, g, v):
        return {self.group._mul(g, x): c for x, c in v.items()}


@dataclass(eq=False)
class CosetVariational(Cocycle):
    """phi - lambda(g) phi for phi constant on lamp-window cosets.

    Coordinates are coset representatives; each stands for |K| group
    elements, which :meth:`norm` accounts for.
    """

    phi: CosetFunction

    def __post_init__(self):
        self.group = self.phi.window.group
        self._items = [(x, float(v)) for x, v in self.phi.values.items() if v]

    def __call__(self, g):
        win = self.phi.window
        G = self.group
        out = {x: v for x, v in self._items}
        for x, v in self._items:
            y = win.reduce(G._mul(g, x))
            s = out.get(y, 0.0) - v
            if s:
                out[y] = s
            else:
                out.pop(y, None)
        return out

    def act(self, g, v):
        win = self.phi.window
        return {win.reduce(self.group._mul(g, x)): c for x, c in v.items()}

    def norm(self, g, p):
        return _norm(self(g).values(), p) * self.phi.window.coset_size ** (1.0 / p)


@dataclass(eq=False)
class LampConfig(Cocycle):
    """b(k, u) = the lamp configuration seen from the origin.

    For Z lamps pi(k, u) shifts by k.  For C2 lamps the configuration is a
    0/1 vector and pi(k, u) also flips the sign wherever u is lit, since
    u_gh = u_g + (1 - 2 u_g) u_h(. - k) over the reals.
    """

    group: MarkedGroup

    def __post_init__(self):
        if not self.group.is_wreath or self.group.lamp_order not in (0, 2):
            raise UsageError("LampConfig needs Z or C2 lamps")

    def __call__(self, g):
        return absolute_lamps(g)

    def act(self, g, v):
        out = {x + g.shift: c for x, c in v.items()}
        if self.group.lamp_order == 2:
            for x in absolute_lamps(g):
                if x in out:
                    out[x] = -out[x]
        return out


@dataclass(eq=False)
class Pullback(Cocycle):
    """c o theta for the mod-2 projection theta of Z wr Z onto C2 wr Z."""

    inner: Cocycle
    group: MarkedGroup

    def __post_init__(self):
        if not (self.group.is_wreath and self.group.lamp_order == 0):
            raise UsageError("Pullback is along Z wr Z -> C2 wr Z")
        if self.inner.group != C2_WR_Z:
            raise UsageError("inner cocycle must live on C2 wr Z")

    def __call__(self, g):
        return self.inner(project_theta(self.group, g))

    def act(self, g, v):
        return self.inner.act(project_theta(self.group, g), v)

    def norm(self, g, p):
        return self.inner.norm(project_theta(self.group, g), p)


@dataclass(eq=False)
class ScaledSum(Cocycle):
    """The block direct sum of weight_i * b_i; coordinates are ``(i, key)``."""

    terms: list  # [(weight, Cocycle)]

    def __post_init__(self):
        if not self.terms:
            raise UsageError("empty direct sum")
        groups = {b.group for _, b in self.terms}
        if len(groups) != 1:
            raise UsageError("all summands must live on one group")
        self.group = groups.pop()

    def __call__(self, g):
        out = {}
        for i, (w, b) in enumerate(self.terms):
            for k, v in b(g).items():
                out[(i, k)] = w * v
        return out

    def act(self, g, v):
        out = {}
        for i, (_, b) in enumerate(self.terms):
            block = {k: c for (j, k), c in v.items() if j == i}
            for k, c in b.act(g, block).items():
                out[(i, k)] = c
        return out

    def norm(self, g, p):
        return math.fsum((w * b.norm(g, p)) ** p for w, b in self.terms) ** (1.0 / p)


def evaluate(b: Cocycle, g, p: float) -> tuple[dict, float]:
    _check_p(p)
    b.group.check(g)
    return b(g), b.norm(g, p)


def generator_norm(b: Cocycle, p: float) -> float:
    return max(b.norm(s, p) for s in b.group.generators)


def cocycle_compression(b: Cocycle, B: Ball, p: float) -> CompressionCurve:
    """rho(t) = min over ball elements with |g| >= t of ||b(g)||, t = 1..radius."""
    _check_p(p)
    if B.group != b.group:
        raise UsageError("cocycle and ball live on different groups")
    norms = np.array([b.norm(g, p) for g in B.elements])
    return _curve_from_norms(norms, B.lengths, B.radius, generator_norm(b, p))


def _curve_from_norms(norms, lengths, radius, lip) -> CompressionCurve:
    sphere_min = np.full(radius + 2, math.inf)
    np.minimum.at(sphere_min, lengths, norms)
    rho = np.minimum.accumulate(sphere_min[::-1])[::-1][1 : radius + 1]
    return CompressionCurve(np.arange(1, radius + 1), rho, lip)


# -- dyadic assembly ----------------------------------------------------------


@dataclass
class AssemblyResult:
    cocycle: ScaledSum
    weights: list
    generator_sum: float  # sum_k max_s ||w_k b_k(s)||_p^p
    integral: float  # integral_1^{2^K} (f/M)^p dt/t


def _as_modulus(M) -> CompressionModulus:
    if isinstance(M, CompressionModulus):
        return M
    return step_curve(M)


def assemble_dyadic(cocycles, curves, f: CompressionModulus, M, K: int, p: float) -> AssemblyResult:
    """b = sum_k (f(2^k) / M(2^(k+1))) b_k over k < K, in disjoint blocks."""
    _check_p(p)
    if K < 1 or len(cocycles) < K or len(curves) < K:
        raise UsageError(f"need K = {K} cocycles with curves")
    f.check_monotone()
    Mm = _as_modulus(M)
    weights = []
    for k in range(K):
        t = 2 ** (k + 1)
        m = float(Mm(t))
        if m <= 0:
            raise UsageError(f"reference curve vanishes at 2^{k + 1}")
        if curves[k].at(t) < m / 2 * (1 - 1e-12):
            raise UsageError(f"k={k}: rho_k(2^{k + 1}) = {curves[k].at(t)} < M/2 = {m / 2}")
        weights.append(float(f(2.0**k)) / m)
    terms = [(w, b) for w, b in zip(weights, cocycles[:K])]
    gen_sum = math.fsum(w**p * generator_norm(b, p) ** p for w, b in terms)

    integral = cp_integral_ratio(lambda t: f(t) / Mm(t), p, K)
    return AssemblyResult(ScaledSum(terms), weights, gen_sum, integral)


def cp_integral_ratio(ratio, p: float, K: int) -> float:
    """integral_1^{2^K} (f/M)^p dt/t, split at the integers where M may jump."""
    from .embeddings import _integrate_log

    def integrand(u):
        return ratio(np.exp(u)) ** p

    # M is piecewise constant between integers: integrate each piece separately
    edges = np.log(np.arange(1, 2**K + 1, dtype=float))
    total = []
    for a, b in zip(edges, edges[1:]):
        lo, hi = a + 1e-12, b - 1e-12
        total.append(_integrate_log(integrand, lo, hi))
    return math.fsum(total)


def step_curve(curve: CompressionCurve) -> CompressionModulus:
    """Right-continuous step function t -> rho(floor(t))."""
    return CompressionModulus.lacunar(curve.t.astype(float), curve.rho, label="step")


# -- Z wr Z ---------------------------------------------------------------------

ZWRZ = MarkedGroup("ZwrZ", "wreath", lamp_order=0)


@dataclass
class ZwrZReport:
    radius: int
    p: float
    per_sphere_inf: np.ndarray  # t -> inf over t <= |g| <= radius of m(g)
    fitted_exponent: float
    c: float  # min over g != 1 of m(g) / |g|^(p/(2p-1))
    n_elements: int
    case_a: int  # elements with L(gamma) > |g|/2
    case_a_broken: int  # ... where nevertheless |theta(g)| < |g|/2
    support_broken: int  # |supp u| > |theta(g)|, the step the Hölder case needs
    final_broken: int  # m(g) < (|g|/2)^(p/(2p-1))
    witness: str  # an element realising the smallest m(g) on the outer sphere


def _lamp_stats(g: WreathElement, p: float):
    vals = [abs(v) for _, v in g.lamps]
    l1 = sum(vals)
    lp = math.fsum(v**p for v in vals) ** (1.0 / p) if vals else 0.0
    return l1, lp, len(vals)


def zwrz_lower_bound(B: Ball | int, p: float) -> ZwrZReport:
    """Per-sphere infima of m(g) = max{|theta(g)|, ||b(g)||_p} on a Z wr Z ball.

    ``B`` is either an enumerated ball or a radius, in which case the ball is
    streamed through Parry's formula without storing it.
    """
    _check_p(p)
    if isinstance(B, Ball):
        if B.group != ZWRZ:
            raise UsageError("zwrz_lower_bound needs a Z wr Z ball")
        radius = B.radius
        stream = zip(B.elements, (int(x) for x in B.lengths))
    else:
        radius = int(B)
        stream = iter_wreath_ball(ZWRZ, radius)
    e = p / (2 * p - 1)
    sphere_inf = np.full(radius + 1, math.inf)
    sphere_arg = [None] * (radius + 1)
    c = math.inf
    n = ca = cab = sb = fb = 0
    for g, L in stream:
        n += 1
        th = project_theta(ZWRZ, g)
        tl = word_length_wreath(C2_WR_Z, th)
        l1, lp, supp = _lamp_stats(g, p)
        m = max(tl, lp)
        if m < sphere_inf[L]:
            sphere_inf[L] = m
            sphere_arg[L] = g
        if L == 0:
            continue
        c = min(c, m / L**e)
        tour = L - l1
        if tour > L / 2:
            ca += 1
            if tl < L / 2:
                cab += 1
        elif supp > tl:
            sb += 1
        if m < (L / 2) ** e * (1 - 1e-12):
            fb += 1
    inf = np.minimum.accumulate(sphere_inf[::-1])[::-1]
    ts = np.arange(1, radius + 1)
    slope = float(np.polyfit(np.log(ts), np.log(inf[1:]), 1)[0]) if radius >= 2 else math.nan
    return ZwrZReport(
        radius, p, inf, slope, c, n, ca, cab, sb, fb, ZWRZ.format(sphere_arg[radius]) if radius else "e"
    )


@dataclass
class ZwrZAssembly:
    f: CompressionModulus
    K: int
    p: float
    radius: int
    weights: list
    block_scale: list  # normalisation of each b_k
    M: np.ndarray  # M(t) for t = 0..radius
    rho_blocks: list  # per-block compression curves (t = 0..radius)
    rho: np.ndarray  # assembled compression, t = 0..radius
    generator_sum: float
    integral: float  # integral_1^{2^K} (f/M)^p dt/t
    cp_partial: float  # integral_1^{2^K} (f/t)^p dt/t

    def rows(self):
        for k in range(self.K):
            t = 2 ** (k + 1)
            yield k, float(self.f(2.0**k)), float(self.rho[t])


def lamplighter_pullback(n: int) -> CosetVariational:
    """Variational cocycle of the C2 wr Z pair witness at scale n, generator norm 1."""
    phi = pair_test_function(lamplighter_folner_pair(2, n), 2.0).witness
    return CosetVariational(phi)


def zwrz_assembly(f: CompressionModulus, K: int, radius: int, p: float) -> ZwrZAssembly:
    """Assemble b = sum_k w_k b_k on Z wr Z, b_k = LampConfig + Pullback(theta, var_{2^k}).

    Norms are computed exactly: ||b_k(g)||^p = ||u||_p^p + ||c_k(theta g)||_p^p,
    the second term tabulated once over the C2 wr Z ball (theta does not
    increase word length).  M is the pointwise minimum of the block
    compressions, a certified lower bound for the maximal compression.
    """
    _check_p(p)
    if K < 1:
        raise UsageError("K must be >= 1")
    if 2**K > radius:
        raise UsageError(f"K = {K} needs radius >= {2**K}")
    f.check_monotone()
    C = enumerate_ball(C2_WR_Z, radius)
    inner = [lamplighter_pullback(2**k) for k in range(K)]
    pull = []
    for c in inner:
        raw = np.array([c.norm(h, p) for h in C.elements]) ** p
        scale = max(raw[C.index_of(s)] for s in C2_WR_Z.generators)
        pull.append(raw / scale)  # pullback generator norm 1
    # each block: (lamps + pullback) / max generator norm
    lamp_gen = [math.fsum(abs(v) ** p for _, v in s.lamps) for s in ZWRZ.generators]
    theta_gen = [C.index_of(project_theta(ZWRZ, s)) for s in ZWRZ.generators]
    block_scale = []
    for k in range(K):
        gmax = max((lamp_gen[j] + pull[k][theta_gen[j]]) for j in range(len(theta_gen)))
        block_scale.append(gmax)
    lengths = array("b")
    lamp_p = array("d")
    theta_idx = array("i")
    index = C.index
    for g, L in iter_wreath_ball(ZWRZ, radius):
        lengths.append(L)
        lamp_p.append(math.fsum(abs(v) ** p for _, v in g.lamps))
        theta_idx.append(index[project_theta(ZWRZ, g)])
    lengths = np.frombuffer(lengths, dtype=np.int8).astype(np.int64)
    lamp_p = np.frombuffer(lamp_p, dtype=float)
    theta_idx = np.frombuffer(theta_idx, dtype=np.int32)
    block_norm_p = [(lamp_p + pull[k][theta_idx]) / block_scale[k] for k in range(K)]
    rho_blocks = []
    for k in range(K):
        curve = _curve_from_norms(block_norm_p[k] ** (1.0 / p), lengths, radius, 1.0)
        rho_blocks.append(np.concatenate([[0.0], curve.rho]))
    M = np.minimum.reduce(rho_blocks)
    weights = []
    for k in range(K):
        t = 2 ** (k + 1)
        if rho_blocks[k][t] < M[t] / 2:
            raise UsageError(f"k={k}: block compression below M/2")
        weights.append(float(f(2.0**k)) / M[t])
    total = sum(w**p * bn for w, bn in zip(weights, block_norm_p))
    rho = np.concatenate([[0.0], _curve_from_norms(total ** (1.0 / p), lengths, radius, math.inf).rho])
    gen_sum = math.fsum(w**p for w in weights)  # each block has generator norm exactly 1

    Mstep = CompressionModulus.lacunar(np.arange(1, radius + 1, dtype=float), M[1:], label="M")
    integral = cp_integral_ratio(lambda t: f(t) / Mstep(t), p, K)
    partial = cp_integral(f, p, 1.0, 2.0**K)
    return ZwrZAssembly(f, K, p, radius, weights, block_scale, M, rho_blocks, rho, gen_sum, integral, partial)


# -- Schoenberg ---------------------------------------------------------------


@dataclass
class KernelReport:
    min_eigenvalue: float
    norm: float  # spectral norm of K

    @property
    def holds(self) -> bool:
        return self.min_eigenvalue >= -1e-8 * self.norm


def schoenberg_psd_check(b: Cocycle, sample, t: float, p: float = 2.0) -> KernelReport:
    """Minimum eigenvalue of K_xy = exp(-||b(x^-1 y)||_2^2 / t^2)."""
    if p != 2:
        raise UsageError("the Gaussian kernel argument needs Hilbert norms (p = 2)")
    if t <= 0:
        raise UsageError("t must be > 0")
    G = b.group
    sample = list(sample)
    if not sample:
        raise UsageError("empty sample")
    inv = [G.inverse(x) for x in sample]
    n = len(sample)
    Kmat = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            d = b.norm(G._mul(inv[i], sample[j]), 2.0)
            Kmat[i, j] = Kmat[j, i] = math.exp(-(d * d) / (t * t))
    eig = np.linalg.eigvalsh(Kmat)
    return KernelReport(float(eig[0]), float(np.abs(eig).max()))


def random_wreath_elements(G: MarkedGroup, count: int, seed: int, span: int = 4, lamps: int = 4) -> list:
    """Random elements with shift and lamp keys in [-span, span]."""
    rng = np.random.default_rng(seed)
    out = []
    m = G.lamp_order
    for _ in range(count):
        d = {}
        for _ in range(int(rng.integers(0, lamps + 1))):
            key = int(rng.integers(-span, span + 1))
            v = int(rng.integers(1, m)) if m else int(rng.integers(-3, 4))
            d[key] = d.get(key, 0) + v
        out.append(G.element(int(rng.integers(-span, span + 1)), d))
    return out


__all__ = [
    "Cocycle",
    "Variational",
    "CosetVariational",
    "LampConfig",
    "Pullback",
    "ScaledSum",
    "evaluate",
    "cocycle_defect",
    "cocycle_compression",
    "assemble_dyadic",
    "step_curve",
    "zwrz_lower_bound",
    "zwrz_assembly",
    "schoenberg_psd_check",
]
