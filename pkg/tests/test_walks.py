import math

import numpy as np
import pytest

from isocomp.errors import ResourceError, UsageError
from isocomp.functions import lp_norm
from isocomp.groups import C2_WR_Z, enumerate_ball, parse_group
from isocomp.isoperimetry import verify_certificate
from isocomp.walks import (
    WalkMeasure,
    convolution_power,
    convolution_powers,
    lazy_uniform,
    return_probability,
    select_scale,
    simple_random_walk,
    simulate_return_probability,
    walk_profile_certificate,
    wreath_return_probabilities,
    wreath_selection,
)

Z = parse_group("Z")
BZ = enumerate_ball(Z, 70)


def test_measure_validation():
    with pytest.raises(UsageError):
        WalkMeasure(BZ, {0: 0.5})
    with pytest.raises(UsageError):
        WalkMeasure(BZ, {0: 1.5, 1: -0.5})
    nu = WalkMeasure(BZ, {0: 0.5, 1: 0.5})
    assert not nu.symmetric and nu.lazy
    assert lazy_uniform(BZ).symmetric
    assert not simple_random_walk(BZ).lazy


def test_power_zero_is_dirac():
    f = convolution_power(lazy_uniform(BZ), 0)
    assert f.as_dict() == {(0,): 1.0}
    assert return_probability(lazy_uniform(BZ), 0) == 1.0


def test_lazy_two_steps():
    assert return_probability(lazy_uniform(BZ), 2) == 3 / 8


@pytest.mark.parametrize("n", range(0, 65, 2))
def test_binomial_oracle(n):
    expected = math.comb(n, n // 2) / 2.0**n
    got = return_probability(simple_random_walk(BZ), n)
    assert abs(got - expected) <= 1e-12 * max(expected, 1e-300)


def test_odd_return_vanishes():
    assert return_probability(simple_random_walk(BZ), 7) == 0.0


def test_mass_conservation():
    for f in convolution_powers(lazy_uniform(BZ), 40):
        assert abs(f.values.sum() - 1.0) <= 1e-12


def test_radius_check():
    with pytest.raises(ResourceError):
        convolution_power(lazy_uniform(BZ), 71)


def test_lazy_Z_decay_exponent():
    B = enumerate_ball(Z, 256)
    powers = convolution_powers(lazy_uniform(B), 256)
    ns = np.arange(64, 257)
    ret = np.array([powers[n].values[0] for n in ns])
    slope = np.polyfit(np.log(ns), np.log(ret), 1)[0]
    assert abs(slope + 0.5) <= 0.05


@pytest.mark.parametrize("G, T", [(C2_WR_Z, 12), (parse_group("C3wrZ"), 9), (parse_group("ZwrZ"), 8)])
@pytest.mark.parametrize("laziness", [0.5, 0.2])
def test_local_time_recursion_matches_ball(G, T, laziness):
    B = enumerate_ball(G, T)
    nu = lazy_uniform(B, laziness)
    P = wreath_return_probabilities(G, T, laziness)
    for t, f in enumerate(convolution_powers(nu, T)):
        assert P[t] == pytest.approx(f.values[0], rel=1e-12, abs=1e-300)


def test_local_time_recursion_non_lazy():
    B = enumerate_ball(C2_WR_Z, 10)
    P = wreath_return_probabilities(C2_WR_Z, 10, 0.0)
    ref = [f.values[0] for f in convolution_powers(simple_random_walk(B), 10)]
    assert np.allclose(P, ref, rtol=1e-12, atol=0)


def test_lamplighter_decay_qualitative():
    # log P(2n) ~ -n^(1/3)
    P = wreath_return_probabilities(C2_WR_Z, 256)
    ns = np.arange(64, 257)
    slope = np.polyfit(np.log(ns), np.log(-np.log(P[ns])), 1)[0]
    assert 0.2 < slope < 0.5


@pytest.mark.parametrize("G", [Z, C2_WR_Z], ids=lambda G: G.name)
def test_psi_properties(G):
    B = enumerate_ball(G, 12)
    nu = lazy_uniform(B)
    powers = convolution_powers(nu, 12)
    psi = np.array([lp_norm(f, 2) ** 2 for f in powers])
    assert np.all(np.diff(psi) < 0)
    for q in range(7):
        assert psi[q] == pytest.approx(powers[2 * q].values[0], rel=1e-12)
        assert powers[2 * q].values[0] >= powers[q].values[0] ** 2


@pytest.mark.parametrize("n", [1, 4, 8, 16, 32])
def test_walk_certificate_Z(n):
    cert = walk_profile_certificate(lazy_uniform(BZ), n)
    sel = cert.info.selection
    assert n <= sel.q <= 2 * n - 1
    assert sel.holds
    assert all(gap <= 1e-10 for gap in cert.info.energy_gaps.values())
    assert verify_certificate(cert) == pytest.approx(cert.ratio, rel=1e-10)
    assert cert.t <= 2 * n
    assert cert.ratio >= cert.info.conversion_bound * (1 - 1e-10)


def test_walk_certificate_grows_like_sqrt_n():
    ratios = [walk_profile_certificate(lazy_uniform(BZ), n).ratio for n in (8, 16, 32)]
    assert all(r >= 0.5 * math.sqrt(n) for r, n in zip(ratios, (8, 16, 32)))


def test_walk_certificate_requires_lazy_symmetric():
    with pytest.raises(UsageError):
        walk_profile_certificate(simple_random_walk(BZ), 4)
    with pytest.raises(UsageError):
        walk_profile_certificate(WalkMeasure(BZ, {0: 0.5, 1: 0.5}), 4)
    with pytest.raises(ResourceError):
        walk_profile_certificate(lazy_uniform(BZ), 35)


@pytest.mark.parametrize("n", [8, 16, 32])
def test_wreath_selection(n):
    sel = wreath_selection(C2_WR_Z, n)
    assert n <= sel.q < 2 * n
    assert sel.holds


def test_select_scale_uses_energy_identity():
    psi = 0.5 ** np.arange(9)
    sel = select_scale(psi, 4)
    assert sel.ratio == pytest.approx(1.0)
    assert sel.bound == pytest.approx(2 / 4 * 4 * math.log(2))


def test_simulation_is_seeded():
    B = enumerate_ball(C2_WR_Z, 1)
    nu = lazy_uniform(B)
    a = simulate_return_probability(nu, 6, 300, seed=4)
    assert a == simulate_return_probability(nu, 6, 300, seed=4)
    assert abs(a - wreath_return_probabilities(C2_WR_Z, 6)[6]) < 0.1
