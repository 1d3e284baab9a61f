import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcpd.errors import ConfigurationError, WrongItinerary, ZeroSign
from bcpd.pws_map import HalfMapSeriesND, PwsMap
from bcpd.second_iterate import (f2_local_form, find_two_cycle, g_function, h1_numeric,
                                 h2_numeric, h2_numeric_nd, rl_admissibility_sign,
                                 rl_admissibility_value)
from bcpd.unfolding1d import unfold

from conftest import normalized_map, random_coeffs


def test_f2_local_form_fig2(fig2):
    form = f2_local_form(fig2, -0.05)
    # chain-rule oracle at the numeric h2
    eta = h2_numeric(fig2, -0.05)
    fz = fig2.at(-0.05, eta)
    y = fz.left.f(0.0)
    assert form.left_slope == pytest.approx(fz.left.df(y) * fz.left.df(0.0), abs=1e-14)
    assert form.left_slope == pytest.approx(0.99316, abs=1e-5)


def test_f2_slopes_asymptotics(fig2):
    # left slope 1 - c0 mu^2 + o(mu^2), right slope -> -a0R
    mus = np.array([-4e-3, -2e-3, -1e-3])
    left = np.array([f2_local_form(fig2, mu).left_slope for mu in mus])
    right = np.array([f2_local_form(fig2, mu).right_slope for mu in mus])
    c0_fit = -np.polyfit(mus, left - 1, 2)[0]
    assert c0_fit == pytest.approx(2.5, rel=0.05)
    assert right[-1] == pytest.approx(-1.5, abs=1e-2)
    assert np.all(np.abs(right + 1.5) <= 3 * np.abs(mus))


def test_f2_at_mu_zero(fig2):
    form = f2_local_form(fig2, 0.0)
    assert form.left_slope == 1.0 and form.right_slope == -1.5


def test_eta_coefficient(fig2):
    mus = np.array([-2e-3, -1e-3])
    coeffs = np.array([f2_local_form(fig2, mu).eta_hat_coeff for mu in mus])
    np.testing.assert_allclose(coeffs / mus, 1.0, atol=5e-3)


def test_ll_cycle_fig2(fig2):
    cyc = find_two_cycle(fig2, -0.21, -0.25, "LL")
    assert cyc.admissible and cyc.stable
    assert np.all(cyc.points[:, 0] <= 0)
    assert cyc.residual <= 1e-10
    assert abs(cyc.points[0, 0] - cyc.points[1, 0]) > 1e-3


def test_cycle_on_h2(fig2):
    mu = -0.05
    eta = h2_numeric(fig2, mu)
    b = fig2.left.b(mu, eta)
    for it in ("LL", "RL"):
        seed = np.array([0.0]) if it == "LL" else np.array([1e-12])
        cyc = find_two_cycle(fig2, mu, eta, it, seed=seed if it == "RL" else np.array([1e-3]))
        pts = sorted(cyc.points[:, 0])
        np.testing.assert_allclose(pts, sorted([0.0, mu * b]), atol=1e-10)


def test_wrong_itinerary_raises(fig2):
    # above h2 the RL cycle is virtual (c0 > 0, a0R > 1: RL lives below h2)
    mu = -0.05
    eta = h2_numeric(fig2, mu) + 0.01
    cyc = find_two_cycle(fig2, mu, eta, "RL")
    if not cyc.admissible:
        with pytest.raises(WrongItinerary):
            find_two_cycle(fig2, mu, eta, "RL", require_admissible=True)
    with pytest.raises(ConfigurationError):
        find_two_cycle(fig2, mu, eta, "LR")


def test_multipliers_rotation_invariant(pdmapex):
    cyc = find_two_cycle(pdmapex, 0.05, -0.05, "RL")
    fz = pdmapex.at(0.05, -0.05)
    x0, x1 = cyc.points
    D0 = fz.left.jac(x1) @ fz.right.jac(x0)
    D1 = fz.right.jac(x0) @ fz.left.jac(x1)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(D0)),
                               np.sort_complex(np.linalg.eigvals(D1)), atol=1e-12)
    assert np.max(np.abs(fz.left.f(fz.right.f(x0)) - x0)) <= 1e-10


def test_rl_slope_vanishes_at_codim2(pdmapex):
    # d s*(RL) / d mu is zero at eta = 0 (det(I + A_L) = 0) and nonzero away from it
    def slope(eta):
        s = [find_two_cycle(pdmapex, mu, eta, "RL").points[0, 0] for mu in (1e-4, -1e-4)]
        return (s[0] - s[1]) / 2e-4
    assert np.linalg.det(np.eye(2) + pdmapex.left.linear_part(0, 0)) == pytest.approx(0, abs=1e-15)
    assert abs(slope(0.0)) < 1e-3
    assert abs(slope(0.02)) > 1e-3


def test_rl_sign_pdmapex(pdmapex):
    assert rl_admissibility_value(pdmapex) == pytest.approx(1 * 1.5 / (1 / 6), rel=1e-6)
    assert rl_admissibility_sign(pdmapex) == 1


def _flip_eta_coupling(m):
    def flip(h):
        A = h.A.copy()
        A[:, :, 0, 1] *= -1
        return HalfMapSeriesND(h.b, A, h.Q, h.C)
    return PwsMap(flip(m.left), flip(m.right))


def test_rl_sign_flips(pdmapex):
    assert rl_admissibility_sign(_flip_eta_coupling(pdmapex)) == -1


def test_rl_sign_zero():
    b = [{"00": 1.0}, {}]
    A = [[{"00": -1.0}, {}], [{}, {"00": 0.2}]]
    A_R = [[{"00": 2.0}, {}], [{}, {"00": 0.2}]]
    # A_L has no eta dependence, so d/deta det(I + A_L) = 0
    m = PwsMap(HalfMapSeriesND.build(b, A), HalfMapSeriesND.build(b, A_R))
    with pytest.raises(ZeroSign):
        rl_admissibility_sign(m)


def test_rl_sign_by_sampling(pdmapex):
    # sigma = +1: RL cycle admissible for mu > 0 (mu_hat < 0) below h2, virtual above
    mu = 0.02
    h2, _ = h2_numeric_nd(pdmapex, mu, -mu / 6)
    below = find_two_cycle(pdmapex, mu, h2 - 0.01, "RL")
    above = find_two_cycle(pdmapex, mu, h2 + 0.01, "RL")
    assert below.admissible and not above.admissible


def test_h2_numeric_nd_pdmapex(pdmapex):
    for mu in (0.01, 0.05, 0.1):
        eta, x0 = h2_numeric_nd(pdmapex, mu, -mu / 6 + 1e-3)
        assert eta == pytest.approx(-mu / 6, abs=1e-12)
        assert x0[0] == 0.0


def test_h1_numeric_pdmapex(pdmapex):
    # exact PD locus: mu = -6 eta - 9/2 eta^2
    for eta in (-0.01, -0.03):
        mu = -6 * eta - 4.5 * eta**2
        assert h1_numeric(pdmapex, mu, eta + 1e-3) == pytest.approx(eta, abs=1e-12)


def test_g_function_zero_on_h2(fig2):
    eta = h2_numeric(fig2, -0.03)
    assert abs(g_function(fig2, -0.03, eta)) < 1e-13


@given(st.integers(0, 2**32 - 1), st.floats(-0.9, 0.9))
def test_rl_stable_iff_contracting(seed, a0R):
    m = normalized_map(random_coeffs(np.random.default_rng(seed)), a0R)
    mu = -1e-3
    eta = h2_numeric(m, mu) - 1e-4
    cyc = find_two_cycle(m, mu, eta, "RL")
    assert cyc.stable


@given(st.integers(0, 2**32 - 1), st.floats(1.1, 3.0))
def test_rl_unstable_when_expanding(seed, a0R):
    m = normalized_map(random_coeffs(np.random.default_rng(seed)), a0R)
    mu = -1e-3
    cyc = find_two_cycle(m, mu, h2_numeric(m, mu) - 1e-4, "RL")
    assert not cyc.stable


@given(st.integers(0, 2**32 - 1))
def test_ll_admissible_side_matches_c0(seed):
    m = normalized_map(random_coeffs(np.random.default_rng(seed), min_c0=0.3), 0.5)
    rep = unfold(m)
    mu = -1e-3
    h2 = h2_numeric(m, mu)
    h1 = h1_numeric(m, mu)
    # the LL cycle exists on the side of h1 given by sign(c0), then stays left
    # of the manifold until h2; sample halfway between the curves
    eta = 0.5 * (h1 + h2)
    cyc = find_two_cycle(m, mu, eta, "LL")
    assert cyc.admissible
    assert cyc.stable == (rep.c0 > 0)


@given(st.integers(0, 2**32 - 1))
def test_cycles_coincide_on_h2(seed):
    m = normalized_map(random_coeffs(np.random.default_rng(seed)), 0.5)
    mu = -2e-3
    eta = h2_numeric(m, mu)
    b = m.left.b(mu, eta)
    cyc = find_two_cycle(m, mu, eta, "LL", seed=np.array([mu * b * 0.9]))
    # eta is a root of f^2(0) only to rounding, scaled by 1/|d f^2 / d eta| ~ 1/|mu|
    np.testing.assert_allclose(sorted(cyc.points[:, 0]), sorted([0.0, mu * b]), atol=1e-12 / abs(mu))
