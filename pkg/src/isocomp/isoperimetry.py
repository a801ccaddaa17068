"""Lower bounds on the L^p-isoperimetric profile inside balls.

A :class:`ProfileCertificate` carries a witness function supported in a ball
and the ratio ||phi||_p / ||grad phi||_p it achieves; :func:`verify_certificate`
recomputes that ratio from the witness alone.

Lamplighter Følner pairs are unions of cosets gK of the window subgroup
K = {(0, v) : supp v in [-2n, 2n]} (acting on the right).  Left
multiplication permutes these cosets, so sets, test functions and gradients
are handled exactly on coset representatives, each standing for |K| elements.
This reaches scales whose Cayley balls could never be enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ResourceError, UsageError
from .functions import GroupFunction, _check_p, gradient_sup, lp_norm
from .groups import Ball, MarkedGroup, WreathElement, word_length_wreath

RTOL = 1e-10


# -- coset spaces -------------------------------------------------------------


@dataclass(frozen=True)
class LampWindow:
    """Right cosets of the lamps supported on keys [-w, w] in C_m wr Z."""

    group: MarkedGroup
    w: int

    def __post_init__(self):
        if not (self.group.is_wreath and self.group.lamp_order):
            raise UsageError("lamp windows need a finite lamp group")
        if self.w < 0:
            raise UsageError("window half-width must be >= 0")

    @property
    def coset_size(self) -> int:
        return self.group.lamp_order ** (2 * self.w + 1)

    def reduce(self, g: WreathElement) -> WreathElement:
        """Canonical representative: drop the lamps whose key lies in the window."""
        w = self.w
        return WreathElement(g.shift, tuple((y, v) for y, v in g.lamps if abs(y) > w))

    def neighbours(self, rep: WreathElement):
        G = self.group
        return [self.reduce(G.left_mul_gen(j, rep)) for j in range(len(G.generators))]

    def max_length(self, rep: WreathElement) -> int:
        """Largest word length in the coset: every window lamp lit."""
        lamps = dict(rep.lamps)
        for y in range(-self.w, self.w + 1):
            lamps[y] = 1
        full = WreathElement(rep.shift, tuple(sorted(lamps.items())))
        return word_length_wreath(self.group, full)

    def min_length(self, rep: WreathElement) -> int:
        return word_length_wreath(self.group, rep)


class _BallSpace:
    """Elements of an enumerated ball, one node per element."""

    def __init__(self, ball: Ball):
        self.ball = ball
        self.coset_size = 1

    def neighbours(self, i):
        row = self.ball.left_mul[i]
        if (row < 0).any():
            raise ResourceError(f"left multiplication leaves B(1,{self.ball.radius})")
        return [int(x) for x in row]

    def max_length(self, i):
        return int(self.ball.lengths[i])


def _expand(space, sources, steps: int) -> list[set]:
    """Layers S^j A for j = 0..steps (cumulative sets)."""
    cur = set(sources)
    layers = [set(cur)]
    frontier = set(cur)
    for _ in range(steps):
        nxt = set()
        for x in frontier:
            for y in space.neighbours(x):
                if y not in cur:
                    nxt.add(y)
        cur |= nxt
        frontier = nxt
        layers.append(set(cur))
    return layers


@dataclass(eq=False)
class CosetFunction:
    """A function constant on the cosets of a lamp window, stored on representatives."""

    window: LampWindow
    values: dict  # representative -> value

    def lp_norm(self, p: float) -> float:
        _check_p(p)
        v = np.array([abs(x) for x in self.values.values() if x], dtype=float)
        return lp_norm(v, p) * self.window.coset_size ** (1.0 / p) if v.size else 0.0

    def gradient(self) -> CosetFunction:
        out = {}
        touched = set(self.values)
        for x in self.values:
            touched.update(self.window.neighbours(x))
        for x in touched:
            fx = self.values.get(x, 0.0)
            g = max(abs(self.values.get(y, 0.0) - fx) for y in self.window.neighbours(x))
            if g:
                out[x] = g
        return CosetFunction(self.window, out)

    @property
    def support_radius(self) -> int:
        reps = [x for x, v in self.values.items() if v]
        return max((self.window.max_length(x) for x in reps), default=-1)

    def expand(self, ball: Ball) -> GroupFunction:
        """The same function written out element by element on an explicit ball."""
        G = self.window.group
        vals = np.zeros(len(ball))
        for i, g in enumerate(ball.elements):
            v = self.values.get(self.window.reduce(g))
            if v:
                vals[i] = v
        total = sum(1 for v in self.values.values() if v) * self.window.coset_size
        if np.count_nonzero(vals) != total:
            raise ResourceError(f"B(1,{ball.radius}) does not contain the support in {G.name}")
        return GroupFunction(ball, vals)


# -- certificates -------------------------------------------------------------


@dataclass
class ProfileCertificate:
    t: int  # support radius of the witness
    p: float
    ratio: float
    witness: GroupFunction | CosetFunction | None
    method: str
    degenerate: bool = False
    info: object = None


def _ratio_of(witness, p) -> tuple[float, int]:
    if isinstance(witness, CosetFunction):
        num = witness.lp_norm(p)
        den = witness.gradient().lp_norm(p)
        return (num / den if den else 0.0), witness.support_radius
    num = lp_norm(witness, p)
    den = lp_norm(gradient_sup(witness), p)
    return (num / den if den else 0.0), witness.support_radius


def make_certificate(witness, p, method, info=None) -> ProfileCertificate:
    ratio, t = _ratio_of(witness, p)
    return ProfileCertificate(t, p, ratio, witness, method, degenerate=ratio == 0.0, info=info)


def verify_certificate(cert: ProfileCertificate) -> float:
    """Recompute the ratio from the witness; raise if it disagrees or overclaims."""
    if cert.witness is None:
        if cert.ratio != 0:
            raise CertificateError("certificate soundness", "ratio claimed without a witness")
        return 0.0
    ratio, t = _ratio_of(cert.witness, cert.p)
    if t > cert.t:
        raise CertificateError("certificate soundness", f"witness reaches radius {t} > {cert.t}")
    if abs(ratio - cert.ratio) > RTOL * max(abs(ratio), 1e-300):
        raise CertificateError("certificate soundness", f"stored {cert.ratio!r}, recomputed {ratio!r}")
    return ratio


# -- Følner pairs -------------------------------------------------------------


@dataclass(eq=False)
class FolnerPair:
    n: int
    H: frozenset
    Hp: frozenset
    alpha: int
    space: object = field(repr=False)

    def __post_init__(self):
        if not self.H or not self.H <= self.Hp:
            raise UsageError("need a nonempty H contained in H'")

    def measure(self, nodes) -> int:
        return len(nodes) * self.space.coset_size


@dataclass
class FolnerReport:
    cond1: bool
    C2: float
    C3: float
    max_length: int
    right_form: bool | None
    right_witness: str | None


def lamplighter_folner_pair(m: int, n: int) -> FolnerPair:
    """H_n = I_n x U_n, H'_n = I_2n x U_n with U_n the lamps on keys [-2n, 2n]."""
    if n < 1:
        raise UsageError("n must be >= 1")
    G = MarkedGroup(f"C{m}wrZ", "wreath", lamp_order=m)
    win = LampWindow(G, 2 * n)
    H = frozenset(WreathElement(k, ()) for k in range(-n, n + 1))
    Hp = frozenset(WreathElement(k, ()) for k in range(-2 * n, 2 * n + 1))
    return FolnerPair(n, H, Hp, n, win)


def explicit_folner_pair(P: FolnerPair, ball: Ball) -> FolnerPair:
    """Write a coset pair out element by element on an enumerated ball."""
    win = P.space
    if not isinstance(win, LampWindow):
        raise UsageError("pair is already explicit")
    need = max(win.max_length(x) for x in P.Hp) + P.alpha
    if ball.radius < need:
        raise ResourceError(f"explicit pair at n={P.n} needs radius {need}, ball has {ball.radius}")
    H, Hp = set(), set()
    for i, g in enumerate(ball.elements):
        r = win.reduce(g)
        if r in P.Hp:
            Hp.add(i)
            if r in P.H:
                H.add(i)
    if len(Hp) != P.measure(P.Hp):
        raise ResourceError("ball misses part of H'")
    return FolnerPair(P.n, frozenset(H), frozenset(Hp), P.alpha, _BallSpace(ball))


def ball_folner_pair(ball: Ball, H, Hp, alpha: int, n: int | None = None) -> FolnerPair:
    return FolnerPair(n if n is not None else alpha, frozenset(H), frozenset(Hp), alpha, _BallSpace(ball))


def _right_form(P: FolnerPair):
    """Check H S^alpha in H' on the explicit level, or exhibit a violation."""
    space = P.space
    if isinstance(space, LampWindow):
        # lamp at the left edge of the window, then move the cursor right:
        # the lamp key drifts out of the window
        G = space.group
        n = P.n
        g = WreathElement(0, ((-space.w, 1),))
        h = G._mul(g, G.power(G.generators[1], P.alpha))
        if space.reduce(h) not in P.Hp:
            return False, f"{G.format(g)}*t^{P.alpha} = {G.format(h)} lies outside H'"
        return None, None
    B = space.ball
    G = B.group
    inside = set(P.Hp)
    frontier = set(P.H)
    seen = set(frontier)
    gens = G.generators
    for _ in range(P.alpha):
        nxt = set()
        for i in frontier:
            for s in gens:
                j = B.index.get(G._mul(B.elements[i], s))
                if j is None:
                    raise ResourceError("right multiplication leaves the ball")
                if j not in seen:
                    seen.add(j)
                    nxt.add(j)
        frontier = nxt
    bad = seen - inside
    if bad:
        i = min(bad)
        return False, f"{G.format(B.elements[i])} in H S^{P.alpha} lies outside H'"
    return True, None


def verify_folner_pair(P: FolnerPair) -> FolnerReport:
    layers = _expand(P.space, P.H, P.alpha)
    cond1 = layers[-1] <= P.Hp
    C2 = len(P.Hp) / len(P.H)
    maxlen = max(P.space.max_length(x) for x in P.Hp)
    right, witness = _right_form(P)
    return FolnerReport(cond1, C2, maxlen / max(P.n, 1), maxlen, right, witness)


def pair_test_function(P: FolnerPair, p: float) -> ProfileCertificate:
    """phi(g) = distance from g to the complement of H', the pair's witness."""
    _check_p(p)
    space = P.space
    dist = {x: 0 for x in P.Hp}
    # distance to the complement, found by peeling the boundary layer by layer
    remaining = set(P.Hp)
    level = 0
    while remaining:
        level += 1
        layer = {x for x in remaining if any(y not in remaining for y in space.neighbours(x))}
        if not layer:
            raise UsageError("H' has no boundary")
        for x in layer:
            dist[x] = level
        remaining -= layer
    if isinstance(space, LampWindow):
        witness = CosetFunction(space, {x: float(v) for x, v in dist.items()})
    else:
        vals = np.zeros(len(space.ball))
        for x, v in dist.items():
            vals[x] = v
        witness = GroupFunction(space.ball, vals)
    if min(dist[x] for x in P.H) < P.alpha:
        raise CertificateError("pair witness", "phi < alpha somewhere on H")
    cert = make_certificate(witness, p, "pair")
    floor = P.alpha * (len(P.H) / len(P.Hp)) ** (1.0 / p)
    if P.alpha and cert.ratio < floor * (1 - RTOL):
        raise CertificateError("pair certificate bound", f"{cert.ratio} < {floor}")
    cert.info = {"floor": floor}
    return cert


@dataclass
class FolnerSet:
    j: int
    K: frozenset
    boundary: int  # measure of S^{j+1}H minus S^jH
    ratio: float


def folner_from_pair(P: FolnerPair) -> FolnerSet:
    """Pigeonhole: some S^j H, 0 <= j < alpha, has boundary ratio <= C2/alpha."""
    if P.alpha < 1:
        raise UsageError("alpha must be >= 1")
    layers = _expand(P.space, P.H, P.alpha)
    best = None
    for j in range(P.alpha):
        r = (len(layers[j + 1]) - len(layers[j])) / len(layers[j])
        if best is None or r < best[1]:
            best = (j, r)
    j, r = best
    K = frozenset(layers[j])
    if not (P.H <= K <= P.Hp):
        raise CertificateError("Følner set sandwich", "H <= K <= H' fails")
    bound = len(P.Hp) / len(P.H) / P.alpha
    if r > bound * (1 + RTOL):
        raise CertificateError("pigeonhole bound", f"{r} > {bound}")
    return FolnerSet(j, K, P.measure(layers[j + 1]) - P.measure(layers[j]), r)


# -- growth certificate -------------------------------------------------------


@dataclass
class GrowthData:
    j: int
    q: int
    k: list  # k(q) for q = 0..n


def _half_volume_depths(ball: Ball, n: int) -> list[int]:
    V = np.cumsum(ball.sphere_sizes)
    ks = []
    for q in range(n + 1):
        # largest k <= q with V(q - k) >= V(q) / 2; V nondecreasing so scan up
        k = 0
        while k < q and 2 * V[q - k - 1] >= V[q]:
            k += 1
        ks.append(k)
    return ks


def profile_growth_certificate(ball: Ball, n: int, p: float) -> ProfileCertificate:
    """phi = sum_{k=1}^{q-1} 1_{B(1,k)} at the scale q maximising k(q)."""
    _check_p(p)
    if n < 0:
        raise UsageError("n must be >= 0")
    if n > ball.radius:
        raise ResourceError(f"growth certificate at n={n} needs radius {n}, ball has {ball.radius}")
    ks = _half_volume_depths(ball, n)
    j = max(ks)
    q = max(i for i, k in enumerate(ks) if k == j)
    data = GrowthData(j, q, ks)
    if j == 0:
        return ProfileCertificate(-1, p, 0.0, None, "growth", degenerate=True, info=data)
    L = ball.lengths[: ball.volume(q - 1)]
    vals = np.zeros(len(ball))
    vals[: L.size] = q - np.maximum(L, 1)
    witness = GroupFunction(ball, vals)
    cert = make_certificate(witness, p, "growth", data)
    grad = lp_norm(gradient_sup(witness), p)
    if grad > ball.volume(q) ** (1.0 / p) * (1 + RTOL):
        raise CertificateError("annuli disjointness", f"||grad phi|| = {grad} > V(q)^(1/p)")
    floor = j * ball.volume(q - j) ** (1.0 / p)
    if lp_norm(witness, p) < floor * (1 - RTOL):
        raise CertificateError("growth certificate mass", f"||phi|| < {floor}")
    return cert


# -- heuristic maximiser ------------------------------------------------------


def _objective_and_grad(values, table, p):
    padded = np.append(values, 0.0)
    nb = padded[table]  # (N, |S|)
    diffs = nb - values[:, None]
    arg = np.argmax(np.abs(diffs), axis=1)
    rows = np.arange(values.size)
    d = diffs[rows, arg]
    G = np.abs(d)
    num = lp_norm(values, p)
    den = lp_norm(G, p)
    if num == 0 or den == 0:
        return -math.inf, np.zeros_like(values)
    # d/dphi of log ||phi||_p - log ||G||_p
    g_num = np.abs(values) ** (p - 1) / num**p
    coef = G ** (p - 1) * np.sign(d) / den**p
    g_den = np.zeros(values.size + 1)
    np.add.at(g_den, table[rows, arg], coef)
    g_den[:-1] -= coef
    return math.log(num / den), g_num - g_den[:-1]


def profile_heuristic_max(
    ball: Ball, t: int, p: float, restarts: int = 8, seed: int = 0, iterations: int = 200
) -> ProfileCertificate:
    """Projected normalised subgradient ascent on log(||phi||_p / ||grad phi||_p).

    Only a lower bound.  The first restart starts from the growth witness of
    the same support radius (or the cone t + 1 - |g| when that is degenerate),
    so the result never falls below the growth certificate.
    """
    _check_p(p)
    if t < 0:
        raise UsageError("t must be >= 0")
    if t > ball.radius - 1:
        raise ResourceError(f"heuristic at t={t} needs radius {t + 1}, ball has {ball.radius}")
    N = ball.volume(t)
    sub = ball.volume(t + 1)
    table = ball.left_mul[:sub].copy()
    table[table >= N] = N  # padded zero slot for everything outside B(1,t)
    table[table < 0] = N
    rng = np.random.default_rng(seed)
    grow = profile_growth_certificate(ball, t + 1, p)
    best_val, best_phi = -math.inf, None
    for r in range(max(restarts, 1)):
        if r == 0:
            if grow.witness is not None:
                phi = grow.witness.values[:N].copy()
            else:
                phi = (t + 1 - ball.lengths[:N]).astype(float)
        else:
            phi = rng.random(N)
        full = np.zeros(sub)
        for it in range(1, iterations + 1):
            full[:N] = phi
            val, g = _objective_and_grad(full, table, p)
            g = g[:N]
            if val > best_val:
                best_val, best_phi = val, phi.copy()
            norm = np.linalg.norm(g)
            if norm == 0:
                break
            phi = np.maximum(phi + 0.5 / math.sqrt(it) * np.linalg.norm(phi) * g / norm, 0.0)
            top = phi.max()
            if top == 0:
                break
            phi /= top
        full[:N] = phi
        val, _ = _objective_and_grad(full, table, p)
        if val > best_val:
            best_val, best_phi = val, phi.copy()
    vals = np.zeros(len(ball))
    vals[:N] = best_phi
    return make_certificate(GroupFunction(ball, vals), p, "heuristic")
