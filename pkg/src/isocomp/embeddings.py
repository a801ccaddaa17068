"""Compression moduli, condition (C_p), tree embeddings and the tree integral.

Condition (C_p) for a nondecreasing f asks that

    integral_1^oo (f(t)/t)^p dt/t < oo.

Tree embeddings send a vertex x with root path x = x_0, ..., x_l to
F(x) = sum_i w_i delta_{x_i}, with weights w_i = xi_{i+2} read off the
sequence built by :func:`build_xi`.  Distances only depend on the meet depth
of the two vertices and their distances to the meet.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ResourceError, UsageError
from .functions import _check_p

T_MAX_LOG2 = 40
LOG_START = math.exp(math.e)  # log-type moduli are linear below e^e


# -- moduli -------------------------------------------------------------------


@dataclass(frozen=True)
class CompressionModulus:
    kind: str  # power | powerLog | lacunarStep | tabulated
    params: tuple = ()
    breakpoints: tuple = ()
    values: tuple = ()
    label: str = ""

    @classmethod
    def parse(cls, spec: str) -> CompressionModulus:
        """Parse ``pow:a``, ``powlog:a,b``, ``powloglog:a,b,c`` or ``const:c``."""
        name, _, rest = spec.strip().partition(":")
        try:
            args = tuple(float(x) for x in rest.split(",")) if rest else ()
        except ValueError:
            raise UsageError(f"bad modulus parameters in {spec!r}") from None
        if name == "pow" and len(args) == 1:
            return cls.power(args[0])
        if name == "powlog" and len(args) == 2:
            return cls.power_log(args[0], args[1], 0.0, label=spec)
        if name == "powloglog" and len(args) == 3:
            return cls.power_log(*args, label=spec)
        if name == "const" and len(args) == 1:
            return cls.power(0.0, scale=args[0], label=spec)
        raise UsageError(f"unrecognised modulus {spec!r}")

    @classmethod
    def power(cls, a: float, scale: float = 1.0, label: str = "") -> CompressionModulus:
        if a < 0 or scale < 0:
            raise UsageError("power moduli need a >= 0 and a nonnegative scale")
        return cls("power", (a, scale), label=label or f"pow:{a:g}")

    @classmethod
    def power_log(cls, a: float, b: float, c: float = 0.0, label: str = "") -> CompressionModulus:
        """t^a (log t)^-b (log log t)^-c, continued linearly below e^e."""
        if a < 0 or b < 0 or c < 0:
            raise UsageError("powlog moduli need a, b, c >= 0")
        return cls("powerLog", (a, b, c), label=label or f"powloglog:{a:g},{b:g},{c:g}")

    @classmethod
    def lacunar(cls, breakpoints, values, label: str = "lacunar") -> CompressionModulus:
        return cls("lacunarStep", breakpoints=tuple(breakpoints), values=tuple(values), label=label)

    @classmethod
    def tabulated(cls, ts, values, label: str = "tabulated") -> CompressionModulus:
        return cls("tabulated", breakpoints=tuple(ts), values=tuple(values), label=label)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            a, scale = self.params
            return scale * t**a
        if self.kind == "powerLog":
            return self._powlog(t)
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if self.kind == "lacunarStep":
            i = np.searchsorted(bp, t, side="right") - 1
            return vals[np.clip(i, 0, None)]
        return np.interp(t, bp, vals)

    def _powlog(self, t):
        a, b, c = self.params

        def raw(x):
            lg = np.log(x)
            return x**a * lg ** (-b) * np.log(lg) ** (-c)

        t0 = LOG_START
        big = np.maximum(t, t0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t >= t0, raw(big), raw(t0) * t / t0)
        return out

    def check_monotone(self, tmax: float = 2.0**T_MAX_LOG2):
        grid = np.exp(np.linspace(0.0, math.log(tmax), 4001))
        v = self(grid)
        if np.any(np.diff(v) < -1e-12 * np.maximum(np.abs(v[:-1]), 1.0)):
            raise UsageError(f"modulus {self.label} is not nondecreasing on [1, {tmax:g}]")


# -- condition (C_p) ----------------------------------------------------------


@dataclass
class CpReport:
    verdict: str  # converges | diverges | inconclusive
    partial_integral: float
    tail_estimate: float

    @property
    def converges(self) -> bool:
        return self.verdict == "converges"


def _integrate_log(func, u0: float, u1: float, rtol: float = 1e-9, max_level: int = 24) -> float:
    """Trapezoid rule in u = log t, halving the step until stable to ``rtol``."""
    if u1 <= u0:
        return 0.0
    n = 64
    u = np.linspace(u0, u1, n + 1)
    y = func(u)
    h = (u1 - u0) / n
    prev = h * (y.sum() - 0.5 * (y[0] + y[-1]))
    for _ in range(max_level):
        mids = u[:-1] + h / 2
        ym = func(mids)
        cur = 0.5 * prev + (h / 2) * ym.sum()
        merged = np.empty(u.size + mids.size)
        merged[0::2] = u
        merged[1::2] = mids
        u = merged
        h /= 2
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    warnings.warn("log-trapezoid integral did not reach the requested tolerance", stacklevel=2)
    return cur


def cp_integral(f: CompressionModulus, p: float, t0: float, t1: float) -> float:
    """integral_{t0}^{t1} (f(t)/t)^p dt/t."""
    if f.kind == "lacunarStep":
        bp = list(f.breakpoints) + [math.inf]
        total = 0.0
        for i, v in enumerate(f.values):
            a, b = max(bp[i], t0), min(bp[i + 1], t1)
            if b > a:
                total += v**p * (a ** (-p) - b ** (-p)) / p
        if t0 < bp[0]:
            total += f.values[0] ** p * (t0 ** (-p) - min(bp[0], t1) ** (-p)) / p
        return total

    def integrand(u):
        t = np.exp(u)
        return (f(t) / t) ** p

    cuts = [math.log(t0)]
    for x in f.breakpoints if f.kind == "tabulated" else [LOG_START] if f.kind == "powerLog" else []:
        if t0 < x < t1:
            cuts.append(math.log(x))
    cuts.append(math.log(t1))
    return math.fsum(_integrate_log(integrand, a, b) for a, b in zip(cuts, cuts[1:]))


def _tail(f: CompressionModulus, p: float, T: float) -> tuple[str, float]:
    if f.kind == "lacunarStep":
        # stored steps beyond T, then the last value held constant
        return "converges", cp_integral(f, p, T, math.inf)
    if f.kind == "tabulated":
        # eventually constant: integral_T^oo (c/t)^p dt/t
        c = float(f(T))
        return "converges", c**p * T ** (-p) / p
    if f.kind == "power":
        a, scale = f.params
        if a < 1:
            return "converges", scale**p * T ** (p * (a - 1)) / (p * (1 - a))
        return "diverges", math.inf
    a, b, c = f.params
    lg = math.log(T)
    llg = math.log(lg)
    if a < 1:
        return "converges", T ** (p * (a - 1)) / (p * (1 - a)) * lg ** (-p * b) * llg ** (-p * c)
    if a > 1:
        return "diverges", math.inf
    pb, pc = p * b, p * c
    if pb > 1:
        return "converges", lg ** (1 - pb) / (pb - 1) * llg ** (-pc)
    if pb == 1 and pc > 1:
        return "converges", llg ** (1 - pc) / (pc - 1)
    return "diverges", math.inf


def check_Cp(f: CompressionModulus, p: float, tmax_log2: int = T_MAX_LOG2) -> CpReport:
    """Classify f against (C_p): dyadic-range integral plus an analytic tail."""
    _check_p(p)
    T = 2.0**tmax_log2
    f.check_monotone(T)
    partial = cp_integral(f, p, 1.0, T)
    verdict, tail = _tail(f, p, T)
    return CpReport(verdict, partial, tail)


# -- the xi sequence ----------------------------------------------------------


def build_xi(f: CompressionModulus, p: float, N: int) -> np.ndarray:
    """xi_0 = xi_1 = 0 and xi_{j+1} - xi_j = f(j) j^(-1-1/p) for 1 <= j < N."""
    _check_p(p)
    if N < 2:
        raise UsageError("N must be >= 2")
    if not check_Cp(f, p).converges:
        warnings.warn(f"{f.label} does not satisfy (C_{p:g}); xi grows without bound", stacklevel=2)
    j = np.arange(1, N, dtype=float)
    steps = f(j) * j ** (-1.0 - 1.0 / p)
    xi = np.zeros(N + 1)
    xi[2:] = np.cumsum(steps)
    return xi


# -- trees --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Tree:
    """A finite rooted tree as a BFS parent array (root first, parent[0] = -1)."""

    parent: np.ndarray
    depth: np.ndarray

    @classmethod
    def binary(cls, J: int) -> Tree:
        if J < 0:
            raise UsageError("depth must be >= 0")
        n = 2 ** (J + 1) - 1
        if n > 10**6:
            raise ResourceError(f"binary tree of depth {J} has {n} vertices")
        idx = np.arange(n)
        parent = np.where(idx > 0, (idx - 1) // 2, -1)
        depth = np.floor(np.log2(idx + 1)).astype(np.int64)
        return cls(parent, depth)

    @classmethod
    def from_adjacency(cls, adjacency: dict, root) -> Tree:
        order = [root]
        par = {root: None}
        q = deque([root])
        while q:
            x = q.popleft()
            for y in adjacency.get(x, ()):
                if y not in par:
                    par[y] = x
                    order.append(y)
                    q.append(y)
        pos = {x: i for i, x in enumerate(order)}
        parent = np.array([-1] + [pos[par[x]] for x in order[1:]], dtype=np.int64)
        depth = np.zeros(len(order), dtype=np.int64)
        for i in range(1, len(order)):
            depth[i] = depth[parent[i]] + 1
        return cls(parent, depth)

    def __len__(self):
        return self.parent.size

    @property
    def height(self) -> int:
        return int(self.depth.max())

    def meet_classes(self) -> set:
        """Every (meet depth, d(x, meet), d(y, meet)) realised by a pair x != y, with kx >= ky."""
        n = len(self)
        below = np.zeros(n, dtype=np.int64)  # height of the subtree under each vertex
        top2 = np.zeros((n, 2), dtype=np.int64)  # two largest 1 + child heights
        for i in range(n - 1, 0, -1):
            par = self.parent[i]
            h = below[i] + 1
            if h > top2[par, 0]:
                top2[par, 1] = top2[par, 0]
                top2[par, 0] = h
            elif h > top2[par, 1]:
                top2[par, 1] = h
            below[par] = max(below[par], h)
        shapes = {(int(self.depth[z]), int(top2[z, 0]), int(top2[z, 1])) for z in range(n)}
        out = set()
        for dz, h1, h2 in shapes:
            for kx in range(1, h1 + 1):
                out.add((dz, kx, 0))
                for ky in range(1, min(kx, h2) + 1):
                    out.add((dz, kx, ky))
        return out


@dataclass
class CompressionCurve:
    t: np.ndarray
    rho: np.ndarray
    lip: float = math.nan

    def __post_init__(self):
        if np.any(np.diff(self.rho) < -1e-12 * max(1.0, float(np.abs(self.rho).max(initial=0)))):
            raise CertificateError("compression monotonicity", "rho decreases")
        if np.isfinite(self.lip) and np.any(self.rho > self.lip * self.t * (1 + 1e-12) + 1e-12):
            raise CertificateError("Lipschitz bound", "rho(t) exceeds Lip * t")

    def at(self, t) -> float:
        i = np.searchsorted(self.t, t)
        if i >= self.t.size or self.t[i] != t:
            raise UsageError(f"curve has no sample at t={t}")
        return float(self.rho[i])


@dataclass(eq=False)
class TreeEmbedding:
    tree: Tree
    p: float
    xi: np.ndarray
    modulus: CompressionModulus | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_p(self.p)
        xi = np.asarray(self.xi, dtype=float)
        if xi.size < 2 or xi[0] != 0 or xi[1] != 0:
            raise UsageError("xi must start with xi_0 = xi_1 = 0")
        if np.any(np.diff(xi) < 0):
            raise UsageError("xi must be nondecreasing")
        if xi.size < self.tree.height + 3:
            raise UsageError(f"xi needs at least {self.tree.height + 3} terms")
        self.xi = xi

    @classmethod
    def binary(cls, J: int, p: float, f: CompressionModulus) -> TreeEmbedding:
        return cls(Tree.binary(J), p, build_xi(f, p, J + 2), f)

    @property
    def weights(self) -> np.ndarray:
        return self.xi[2:]

    def distance_p(self, dz: int, kx: int, ky: int) -> float:
        """||F(x) - F(y)||_p^p for a pair with meet depth dz and legs kx, ky."""
        w = self.weights
        p = self.p
        # one correctly rounded sum, so the brute-force oracle agrees bit for bit
        terms = np.concatenate([w[:kx] ** p, w[:ky] ** p, np.abs(w[kx : kx + dz + 1] - w[ky : ky + dz + 1]) ** p])
        return math.fsum(terms)

    def lipschitz(self) -> float:
        H = self.tree.height
        return max(self.distance_p(dz, 1, 0) for dz in range(H)) ** (1.0 / self.p) if H else 0.0

    def image(self, v: int) -> dict:
        """F(v) as a sparse vector {vertex: coefficient}."""
        out = {}
        i = 0
        w = self.weights
        while v >= 0:
            if w[i]:
                out[int(v)] = float(w[i])
            v = self.tree.parent[v]
            i += 1
        return out


def tree_compression_curve(E: TreeEmbedding) -> CompressionCurve:
    """Exact rho(t) for t = 1..diameter via the meet-depth reduction."""
    if len(E.tree) > 10**4 and not _is_binary(E.tree):
        raise ResourceError("general trees are limited to 10^4 vertices")
    classes = E.tree.meet_classes()
    diam = max(kx + ky for _, kx, ky in classes)
    best = np.full(diam + 1, math.inf)
    for dz, kx, ky in classes:
        d = E.distance_p(dz, kx, ky) ** (1.0 / E.p)
        if d < best[kx + ky]:
            best[kx + ky] = d
    # rho(t) = min over distances >= t
    rho = np.minimum.accumulate(best[::-1])[::-1][1:]
    return CompressionCurve(np.arange(1, diam + 1), rho, E.lipschitz())


def _is_binary(tree: Tree) -> bool:
    n = len(tree)
    return n == 2 ** (tree.height + 1) - 1 and np.array_equal(tree.parent[1:], (np.arange(1, n) - 1) // 2)


def tree_compression_curve_bruteforce(E: TreeEmbedding) -> CompressionCurve:
    """All-pairs oracle using the explicit images; for small trees only."""
    n = len(E.tree)
    if n > 2000:
        raise ResourceError("brute force is limited to 2000 vertices")
    imgs = [E.image(v) for v in range(n)]
    paths = [_root_path(E.tree, v) for v in range(n)]
    best = {}
    for x in range(n):
        for y in range(x + 1, n):
            d = _tree_distance(E.tree, paths[x], paths[y])
            keys = imgs[x].keys() | imgs[y].keys()
            v = _pdist(imgs[x], imgs[y], E.p)
            if v < best.get(d, math.inf):
                best[d] = v
    diam = max(best)
    arr = np.array([best.get(d, math.inf) for d in range(diam + 1)])
    rho = np.minimum.accumulate(arr[::-1])[::-1][1:]
    lip = 0.0
    for v in range(1, n):
        u = E.tree.parent[v]
        lip = max(lip, _pdist(imgs[v], imgs[u], E.p))
    return CompressionCurve(np.arange(1, diam + 1), rho, lip)


def _pdist(a: dict, b: dict, p: float) -> float:
    keys = a.keys() | b.keys()
    return math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) ** p for k in keys) ** (1.0 / p)


def _root_path(tree, v):
    out = []
    while v >= 0:
        out.append(int(v))
        v = tree.parent[v]
    return out


def _tree_distance(tree, px, py):
    sy = set(py)
    for i, a in enumerate(px):
        if a in sy:
            return i + py.index(a)
    raise UsageError("vertices lie in different trees")


def lemma_lower_bound(E: TreeEmbedding, n: int) -> float:
    """(sum_{j <= floor(n/2)} xi_j^p)^(1/p)."""
    m = min(n // 2, E.xi.size - 1)
    return math.fsum(E.xi[: m + 1] ** E.p) ** (1.0 / E.p)


def compression_constant(curve: CompressionCurve, f: CompressionModulus, tmax: int | None = None) -> float:
    """Largest c with rho(t) >= c f(t) for every sampled t <= tmax."""
    mask = curve.t <= (tmax if tmax is not None else curve.t.max())
    fv = f(curve.t[mask].astype(float))
    pos = fv > 0
    return float(np.min(curve.rho[mask][pos] / fv[pos])) if pos.any() else math.inf


# -- integral obstruction -----------------------------------------------------


def bourgain_integral(curve: CompressionCurve, q: float, J: int, lip: float | None = None) -> float:
    """integral_1^{2J} (rho(t) / (Lip t))^q dt/t with rho linear between integers."""
    if q <= 1:
        raise UsageError("q must be > 1")
    L = curve.lip if lip is None else lip
    if not L or not np.isfinite(L):
        raise UsageError("Lipschitz constant must be positive")
    T = 2 * J
    if curve.t[0] > 1 or curve.t[-1] < T:
        raise UsageError(f"curve must cover [1, {T}]")
    ts = curve.t.astype(float)
    rs = curve.rho / L

    def integrand(u):
        t = np.exp(u)
        return (np.interp(t, ts, rs) / t) ** q

    cuts = np.log(np.arange(1, T + 1, dtype=float))
    return math.fsum(_integrate_log(integrand, a, b) for a, b in zip(cuts, cuts[1:]))


def min_distance_ratio(E: TreeEmbedding) -> float:
    """min over x != y of ||F(x) - F(y)||_p / (Lip d(x, y))."""
    L = E.lipschitz()
    if L == 0:
        return 0.0
    return min(E.distance_p(*c) ** (1.0 / E.p) / (c[1] + c[2]) for c in E.tree.meet_classes()) / L


# -- lacunar moduli -----------------------------------------------------------


@dataclass
class LacunarResult:
    f: CompressionModulus
    c: float
    breakpoints: list
    terms: list  # (h(n_i) / n_i)^p


def lacunar_modulus(h: CompressionModulus, p: float, tmax_log2: int = 60) -> LacunarResult:
    """Step modulus f = h(n_i) on [n_i, n_{i+1}) with (h(n_i)/n_i)^p <= 2^-i."""
    _check_p(p)
    h.check_monotone()
    grid = np.exp(np.linspace(0.0, tmax_log2 * math.log(2), 2001))
    slope = h(grid) / grid
    if np.any(np.diff(slope) > 1e-12 * np.maximum(slope[:-1], 1e-300)) or not slope[-1] < slope[0]:
        raise UsageError(f"{h.label} is not sublinear")
    limit = 2**tmax_log2

    def ok(n, i):
        return (float(h(float(n))) / n) ** p <= 2.0**-i

    bps = [1]
    i = 1
    while True:
        lo = bps[-1]  # ok(lo, i) may fail; find smallest n > lo with ok(n, i)
        step = 1
        hi = lo + step
        while not ok(hi, i):
            step *= 2
            hi = lo + step
            if hi > limit:
                break
        if hi > limit:
            break
        a = hi - step // 2 if step > 1 else lo  # ok(a) false, ok(hi) true
        while hi - a > 1:
            mid = (a + hi) // 2
            if ok(mid, i):
                hi = mid
            else:
                a = mid
        bps.append(hi)
        i += 1
    vals = [float(h(float(n))) for n in bps]
    terms = [(v / n) ** p for v, n in zip(vals, bps)]
    f = CompressionModulus.lacunar(bps, vals, label=f"lacunar({h.label})")
    return LacunarResult(f, 1.0, bps, terms)
