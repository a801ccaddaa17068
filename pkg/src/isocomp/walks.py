"""Convolution powers, return probabilities and the walk-to-profile certificate.

Two exact routes to return probabilities are provided:

* ball convolution: nu^(n) computed on an enumerated ball (any group);
* :func:`wreath_return_probabilities`: a local-time dynamic programme for lazy
  measures on F wr Z, which reaches times far beyond any enumerable ball.

They are checked against each other at small times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ResourceError, UsageError
from .functions import GroupFunction, convolve, gradient_l2_energy, gradient_sup, lp_norm
from .groups import Ball, MarkedGroup


@dataclass(frozen=True, eq=False)
class WalkMeasure:
    ball: Ball
    masses: dict  # ball index -> probability
    symmetric: bool = field(init=False)
    lazy: bool = field(init=False)

    def __post_init__(self):
        total = math.fsum(self.masses.values())
        if abs(total - 1.0) > 1e-12:
            raise UsageError(f"masses sum to {total!r}, not 1")
        if any(w < 0 for w in self.masses.values()):
            raise UsageError("negative mass")
        B = self.ball
        G = B.group
        sym = all(
            self.masses.get(B.index.get(G.inverse(B.elements[i]), -1), None) == w for i, w in self.masses.items()
        )
        object.__setattr__(self, "symmetric", sym)
        object.__setattr__(self, "lazy", self.masses.get(0, 0.0) > 0)

    def as_function(self) -> GroupFunction:
        vals = np.zeros(len(self.ball))
        for i, w in self.masses.items():
            vals[i] = w
        return GroupFunction(self.ball, vals)


def lazy_uniform(ball: Ball, laziness: float = 0.5) -> WalkMeasure:
    """Mass ``laziness`` at the identity, the rest uniform on S minus the identity."""
    if not 0 <= laziness < 1:
        raise UsageError("laziness must lie in [0, 1)")
    gens = ball.group.generators[1:]
    w = (1.0 - laziness) / len(gens)
    masses = {ball.index_of(s): w for s in gens}
    if laziness:
        masses[0] = laziness
    return WalkMeasure(ball, masses)


def simple_random_walk(ball: Ball) -> WalkMeasure:
    return lazy_uniform(ball, 0.0)


def convolution_power(nu: WalkMeasure, n: int, ball: Ball | None = None) -> GroupFunction:
    """nu^(n) as a function on the ball; nu^(0) is the Dirac mass at 1."""
    return convolution_powers(nu, n, ball)[-1]


def convolution_powers(nu: WalkMeasure, n: int, ball: Ball | None = None) -> list[GroupFunction]:
    B = ball or nu.ball
    if B is not nu.ball:
        raise UsageError("measure and ball disagree")
    if n < 0:
        raise UsageError("n must be >= 0")
    if n > B.radius:
        raise ResourceError(f"nu^({n}) needs radius {n}, ball has radius {B.radius}")
    cur = GroupFunction(B, np.eye(1, len(B)).ravel())
    out = [cur]
    for _ in range(n):
        cur = convolve(nu, cur)
        out.append(cur)
    return out


def return_probability(nu: WalkMeasure, n: int, ball: Ball | None = None) -> float:
    return float(convolution_power(nu, n, ball).values[0])


# -- lamplighter local-time recursion -------------------------------------


def _lamp_return_weights(m: int, stay: float, lamp: float, nmax: int) -> np.ndarray:
    """Total weight of N non-moving steps whose lamp increments sum to zero."""
    N = np.arange(nmax + 1)
    if m:
        other = stay - lamp / (m - 1)
        return ((stay + lamp) ** N + (m - 1) * np.sign(other) ** N * np.abs(other) ** N) / m
    out = np.zeros(nmax + 1)
    for n in range(nmax + 1):
        acc = 0.0
        for i in range(0, n + 1, 2):
            acc += math.comb(n, i) * stay ** (n - i) * lamp**i * math.comb(i, i // 2) / 2.0**i
        out[n] = acc
    return out


def wreath_return_probabilities(group: MarkedGroup, tmax: int, laziness: float = 0.5) -> np.ndarray:
    """Exact nu^(T)(1) for T = 0..tmax, nu the lazy uniform measure on F wr Z.

    A returning path is decomposed into its cursor trajectory on Z, with 2c_x
    crossings of each edge (x, x+1), and the non-moving steps spent at each
    site.  Sites left of 0 and right of 0 contribute independent factors that
    satisfy one recursion in the crossing number, evaluated by increasing
    step count.  Lamps return to 0 iff the increments at every site cancel.
    """
    if not group.is_wreath:
        raise UsageError("recursion is specific to wreath products over Z")
    m = group.lamp_order
    ngen = len(group.generators) - 1
    move = (1.0 - laziness) / ngen
    lamp = move * (ngen - 2)
    T = tmax
    C = T // 2 + 1
    w = _lamp_return_weights(m, laziness, lamp, T)
    # g[v, N]: N stays split over v visits, with vanishing lamp increments
    g = np.zeros((T + 2, T + 1))
    for v in range(1, T + 2):
        for N in range(T + 1):
            g[v, N] = math.comb(N + v - 1, v - 1) * w[N]
    crossing = np.zeros((C, C))
    for c in range(1, C):
        for c2 in range(C):
            crossing[c, c2] = math.comb(c2 + c - 1, c2) * move ** (2 * c2)
    R = np.zeros((C, T + 1))
    R[0, 0] = 1.0
    cs = np.arange(1, C)
    for s in range(T + 1):
        # c2 = 0: site has c visits and no excursion further out
        acc = g[cs, s].copy()
        for c2 in range(1, C):
            rest = s - 2 * c2
            if rest < 0:
                break
            # sum_N g[c + c2, N] R[c2, rest - N]
            tail = R[c2, rest::-1]
            vidx = cs + c2
            ok = vidx <= T + 1
            contrib = np.zeros(cs.size)
            contrib[ok] = g[vidx[ok], : rest + 1] @ tail
            acc += crossing[cs, c2] * contrib
        R[1:, s] = acc
    P = np.zeros(T + 1)
    for v in range(0, C):
        inner = np.zeros(T + 1)
        for c0 in range(v + 1):
            c1 = v - c0
            if c0 >= C or c1 >= C:
                continue
            prod = np.convolve(R[c0], R[c1])[: T + 1]
            inner += math.comb(v, c0) * prod
        shifted = np.zeros(T + 1)
        if 2 * v <= T:
            shifted[2 * v :] = inner[: T + 1 - 2 * v]
        P += move ** (2 * v) * np.convolve(g[v + 1], shifted)[: T + 1]
    return P


# -- certificate --------------------------------------------------------------


@dataclass
class SelectionReport:
    n: int
    q: int
    ratio: float  # || |grad nu^(q)|_2 ||_2^2 / || nu^(q) ||_2^2
    bound: float  # (2/n) log(psi(n) / psi(2n))
    psi: np.ndarray

    @property
    def holds(self) -> bool:
        return self.ratio <= self.bound * (1 + 1e-12) + 1e-15


def select_scale(psi, n: int, ratios=None) -> SelectionReport:
    """Pick q in [n, 2n-1] minimising the l2-gradient Rayleigh ratio.

    ``psi[q] = ||nu^(q)||_2^2``.  Without explicit ``ratios`` they are read off
    the energy identity ratio(q) = 2 (psi(q) - psi(q+1)) / psi(q).
    """
    psi = np.asarray(psi, dtype=float)
    if n < 1 or len(psi) <= 2 * n:
        raise UsageError(f"need psi(0..{2 * n})")
    qs = np.arange(n, 2 * n)
    if ratios is None:
        r = 2.0 * (psi[qs] - psi[qs + 1]) / psi[qs]
    else:
        r = np.asarray([ratios[q] for q in qs])
    k = int(np.argmin(r))
    bound = 2.0 / n * math.log(psi[n] / psi[2 * n])
    return SelectionReport(n, int(qs[k]), float(r[k]), bound, psi)


def wreath_selection(group: MarkedGroup, n: int, laziness: float = 0.5) -> SelectionReport:
    """Scale selection on F wr Z from psi(q) = nu^(2q)(1), reaching large n."""
    P = wreath_return_probabilities(group, 4 * n, laziness)
    return select_scale(P[0::2], n)


@dataclass
class WalkCertificateData:
    selection: SelectionReport
    energy_gaps: dict  # q -> relative error of the energy identity
    conversion_bound: float


def walk_profile_certificate(nu: WalkMeasure, n: int, ball: Ball | None = None):
    """Profile certificate from the walk: witness nu^(q*) for the selected q*."""
    from .isoperimetry import ProfileCertificate

    B = ball or nu.ball
    if not nu.lazy:
        raise UsageError("walk certificate needs a lazy measure")
    if not nu.symmetric:
        raise UsageError("walk certificate needs a symmetric measure")
    if n < 1:
        raise UsageError("n must be >= 1")
    if B.radius < 2 * n + 1:
        raise ResourceError(f"walk certificate at n={n} needs radius {2 * n + 1}, ball has {B.radius}")
    powers = convolution_powers(nu, 2 * n, B)
    psi = np.array([lp_norm(f, 2) ** 2 for f in powers])
    ratios = {}
    gaps = {}
    for q in range(n, 2 * n):
        e = gradient_l2_energy(powers[q], nu)
        ratios[q] = e / psi[q]
        identity = 2.0 * (psi[q] - psi[q + 1])
        gaps[q] = abs(e - identity) / max(abs(identity), 1e-300)
        if gaps[q] > 1e-10:
            raise CertificateError("energy identity", f"q={q}: relative gap {gaps[q]:.3e}")
    sel = select_scale(psi, n, ratios)
    if not sel.holds:
        raise CertificateError("scale selection bound", f"{sel.ratio} > {sel.bound}")
    witness = powers[sel.q]
    nu2 = powers[2]
    gen_idx = [B.index_of(s) for s in B.group.generators]
    min_nu2 = float(min(nu2.values[gen_idx]))
    conversion = math.sqrt(min_nu2 / sel.ratio) if sel.ratio > 0 else math.inf
    grad = gradient_sup(witness)
    ratio = lp_norm(witness, 2) / lp_norm(grad, 2)
    if ratio < conversion * (1 - 1e-10):
        raise CertificateError("sup/l2 gradient conversion", f"{ratio} < {conversion}")
    return ProfileCertificate(
        t=witness.support_radius,
        p=2.0,
        ratio=ratio,
        witness=witness,
        method="walk",
        info=WalkCertificateData(sel, gaps, conversion),
    )


def simulate_return_probability(nu: WalkMeasure, n: int, trials: int, seed: int) -> float:
    """Monte Carlo estimate of nu^(n)(1).  Exploratory only, never certified."""
    B = nu.ball
    G = B.group
    gens = {B.index_of(s): j for j, s in enumerate(G.generators)}
    items = sorted(nu.masses.items())
    if any(i not in gens for i, _ in items):
        raise UsageError("simulation needs a measure on the generating set")
    idx = np.array([gens[i] for i, _ in items])
    prob = np.array([w for _, w in items])
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        x = G.identity
        for j in rng.choice(idx, size=n, p=prob):
            x = G.left_mul_gen(int(j), x)
        hits += x == G.identity
    return hits / trials
