import math

import numpy as np
import pytest

from isocomp.errors import CertificateError, ResourceError, UsageError
from isocomp.functions import GroupFunction, gradient_sup, lp_norm
from isocomp.groups import C2_WR_Z, WreathElement, enumerate_ball, parse_group
from isocomp.isoperimetry import (
    CosetFunction,
    LampWindow,
    ball_folner_pair,
    explicit_folner_pair,
    folner_from_pair,
    lamplighter_folner_pair,
    make_certificate,
    pair_test_function,
    profile_growth_certificate,
    profile_heuristic_max,
    verify_certificate,
    verify_folner_pair,
)

Z = parse_group("Z")
BZ = enumerate_ball(Z, 120)


@pytest.fixture(scope="module")
def lamp_ball():
    return enumerate_ball(C2_WR_Z, 14)


def test_window_reduce_and_size():
    win = LampWindow(C2_WR_Z, 2)
    assert win.coset_size == 32
    g = C2_WR_Z.element(1, {-3: 1, 0: 1, 2: 1, 5: 1})
    assert win.reduce(g) == C2_WR_Z.element(1, {-3: 1, 5: 1})
    with pytest.raises(UsageError):
        LampWindow(parse_group("ZwrZ"), 1)


def test_window_max_length():
    win = LampWindow(C2_WR_Z, 2)
    # all five lamps on keys -2..2 lit, cursor back at 0
    assert win.max_length(C2_WR_Z.identity) == 4 + 4 + 5
    assert win.min_length(C2_WR_Z.identity) == 0


@pytest.mark.parametrize("m, n", [(2, 1), (2, 2), (3, 1), (2, 4)])
def test_pair_counts(m, n):
    P = lamplighter_folner_pair(m, n)
    K = m ** (4 * n + 1)
    assert P.measure(P.H) == (2 * n + 1) * K
    assert P.measure(P.Hp) == (4 * n + 1) * K


def test_pair_n1_m2_sizes():
    P = lamplighter_folner_pair(2, 1)
    assert (P.measure(P.H), P.measure(P.Hp)) == (96, 160)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_pair_conditions(n):
    rep = verify_folner_pair(lamplighter_folner_pair(2, n))
    assert rep.cond1
    assert rep.C2 == pytest.approx((4 * n + 1) / (2 * n + 1))
    assert rep.C2 <= 2
    assert rep.C3 == pytest.approx(12 + 1 / n)
    assert rep.C3 <= 60


@pytest.mark.parametrize("n", [1, 2, 4])
def test_right_form_fails_with_witness(n):
    rep = verify_folner_pair(lamplighter_folner_pair(2, n))
    assert rep.right_form is False
    assert f"(0|-{2 * n}:1)*t^{n}" in rep.right_witness


def test_explicit_pair_matches_cosets(lamp_ball):
    P = lamplighter_folner_pair(2, 1)
    E = explicit_folner_pair(P, lamp_ball)
    assert len(E.H) == 96 and len(E.Hp) == 160
    rep = verify_folner_pair(E)
    assert rep.cond1
    assert rep.max_length == 13
    assert rep.right_form is False
    cE = pair_test_function(E, 1)
    cP = pair_test_function(P, 1)
    assert cE.ratio == pytest.approx(cP.ratio, rel=1e-12)
    assert cE.ratio == pytest.approx(9 / 7, rel=1e-12)


def test_explicit_pair_needs_radius():
    P = lamplighter_folner_pair(2, 1)
    with pytest.raises(ResourceError):
        explicit_folner_pair(P, enumerate_ball(C2_WR_Z, 8))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_pair_ratio_p1_closed_form(n):
    cert = pair_test_function(lamplighter_folner_pair(2, n), 1)
    assert cert.ratio == pytest.approx((2 * n + 1) ** 2 / (4 * n + 3), rel=1e-12)
    assert verify_certificate(cert) == pytest.approx(cert.ratio, rel=1e-10)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_pair_ratio_floor(n, p):
    cert = pair_test_function(lamplighter_folner_pair(2, n), p)
    assert cert.ratio >= cert.info["floor"] * (1 - 1e-10)
    assert cert.info["floor"] == pytest.approx(n * ((2 * n + 1) / (4 * n + 1)) ** (1 / p))


def test_pair_ratio_p1_n4():
    assert pair_test_function(lamplighter_folner_pair(2, 4), 1).ratio >= 2.1


def test_pair_ratio_linear_growth():
    ratios = [pair_test_function(lamplighter_folner_pair(2, n), 2).ratio for n in (2, 4, 8)]
    assert ratios[1] / ratios[0] > 1.7 and ratios[2] / ratios[1] > 1.8


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_pigeonhole_set(n):
    P = lamplighter_folner_pair(2, n)
    F = folner_from_pair(P)
    assert 0 <= F.j < n
    assert F.ratio <= verify_folner_pair(P).C2 / n
    assert P.H <= F.K <= P.Hp


def test_pigeonhole_set_closed_form():
    # the cursor interval grows by one on each side per step
    for n in (2, 3, 6):
        F = folner_from_pair(lamplighter_folner_pair(2, n))
        assert F.j == n - 1
        assert F.ratio == pytest.approx(2 / (4 * n - 1))


def test_ball_pair_on_Z():
    idx = {BZ.elements[i][0]: i for i in range(len(BZ))}
    H = [idx[k] for k in range(-5, 6)]
    Hp = [idx[k] for k in range(-10, 11)]
    P = ball_folner_pair(BZ, H, Hp, 5)
    rep = verify_folner_pair(P)
    assert rep.cond1 and rep.right_form
    cert = pair_test_function(P, 1)
    # the tent 11 - |k| on [-10, 10]; unit gradient on [-11, 11]
    assert cert.ratio == pytest.approx(121 / 23)


def test_ball_pair_rejects_bad_sets():
    with pytest.raises(UsageError):
        ball_folner_pair(BZ, [0, 1], [0], 1)


@pytest.mark.parametrize("n", [10, 40, 100])
def test_growth_Z(n):
    cert = profile_growth_certificate(BZ, n, 1)
    d = cert.info
    assert d.j == n // 2 and d.q == n
    assert cert.ratio >= d.j * (2 * (d.q - d.j) + 1) / (2 * d.q + 1) * (1 - 1e-12)
    assert verify_certificate(cert) == pytest.approx(cert.ratio)


def test_growth_Z_at_100():
    cert = profile_growth_certificate(BZ, 100, 1)
    assert cert.ratio == pytest.approx(9999 / 200, rel=1e-12)


def test_growth_free_group_degenerate():
    cert = profile_growth_certificate(enumerate_ball(parse_group("F2"), 7), 7, 2)
    assert cert.degenerate and cert.ratio == 0.0 and cert.witness is None
    assert verify_certificate(cert) == 0.0


def test_growth_radius_check():
    with pytest.raises(ResourceError):
        profile_growth_certificate(enumerate_ball(Z, 5), 6, 1)


def test_verify_rejects_tampering():
    cert = profile_growth_certificate(BZ, 20, 2)
    cert.ratio *= 1.01
    with pytest.raises(CertificateError):
        verify_certificate(cert)


def test_verify_rejects_radius_overclaim():
    cert = profile_growth_certificate(BZ, 20, 2)
    cert.t = 2
    with pytest.raises(CertificateError):
        verify_certificate(cert)


@pytest.mark.parametrize("p", [1, 2])
def test_certificate_matches_direct_ratio(p):
    vals = np.zeros(len(BZ))
    vals[: BZ.volume(6)] = 7 - BZ.lengths[: BZ.volume(6)]
    phi = GroupFunction(BZ, vals)
    cert = make_certificate(phi, p, "manual")
    assert cert.ratio == pytest.approx(lp_norm(phi, p) / lp_norm(gradient_sup(phi), p))


def test_coset_function_norms():
    win = LampWindow(C2_WR_Z, 1)
    f = CosetFunction(win, {C2_WR_Z.identity: 2.0})
    assert f.lp_norm(1) == 2.0 * 8
    assert f.lp_norm(2) == pytest.approx(2.0 * math.sqrt(8))


def test_coset_function_expands_consistently(lamp_ball):
    P = lamplighter_folner_pair(2, 1)
    coset = pair_test_function(P, 2).witness
    full = coset.expand(lamp_ball)
    assert lp_norm(full, 2) == pytest.approx(coset.lp_norm(2), rel=1e-12)
    assert lp_norm(gradient_sup(full), 2) == pytest.approx(coset.gradient().lp_norm(2), rel=1e-12)


@pytest.mark.parametrize("t", [0, 5, 20])
def test_heuristic_beats_growth_Z(t):
    cert = profile_heuristic_max(BZ, t, 2, restarts=3, iterations=100)
    assert cert.t <= t
    verify_certificate(cert)
    grow = profile_growth_certificate(BZ, t + 1, 2)
    assert cert.ratio >= grow.ratio * (1 - 1e-12)


def test_heuristic_t0_on_Z():
    cert = profile_heuristic_max(BZ, 0, 2, restarts=2, iterations=20)
    # a point mass and its two neighbours
    assert cert.ratio == pytest.approx(1 / math.sqrt(3))


def test_heuristic_seeded(lamp_ball):
    a = profile_heuristic_max(lamp_ball, 4, 2, restarts=3, seed=7, iterations=60)
    b = profile_heuristic_max(lamp_ball, 4, 2, restarts=3, seed=7, iterations=60)
    assert a.ratio == b.ratio


def test_heuristic_radius_check():
    with pytest.raises(ResourceError):
        profile_heuristic_max(enumerate_ball(Z, 4), 4, 2)
