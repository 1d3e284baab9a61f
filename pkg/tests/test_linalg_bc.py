import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from bcpd.errors import ContinuityError, SingularLinearization
from bcpd.linalg_bc import adjugate, feigin_classify, half_fixed_point, s_star_slope, varrho
from bcpd.pws_map import HalfMapSeries1D, PwsMap

from conftest import pl_map_2d


def test_adjugate_examples():
    np.testing.assert_array_equal(adjugate(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(adjugate([[0, 1], [1, 0]]), [[0, -1], [-1, 0]])
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(adjugate(M), [[1, -1], [-1, 1]])
    np.testing.assert_allclose(adjugate(M) @ M, 0, atol=1e-15)
    assert adjugate([[5.0]])[0, 0] == 1.0


@given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-3, 3))))
def test_adjugate_identity(M):
    n = M.shape[0]
    lhs = adjugate(M) @ M
    scale = 1.0 + np.max(np.abs(M)) ** (n)
    assert np.max(np.abs(lhs - np.linalg.det(M) * np.eye(n))) <= 1e-10 * scale


def test_adjugate_singular_large():
    M = np.ones((5, 5))
    M[0, 0] = 2.0  # rank 2
    A = adjugate(M)
    np.testing.assert_allclose(A @ M, np.linalg.det(M) * np.eye(5), atol=1e-10)


def test_varrho_examples(pdmapex):
    assert np.array_equal(varrho(np.zeros((3, 3)), np.zeros((3, 3))), [1, 0, 0])
    A_L = pdmapex.left.linear_part(0, 0)
    A_R = pdmapex.right.linear_part(0, 0)
    np.testing.assert_allclose(varrho(A_L, A_R), [1, 1], atol=1e-14)
    assert varrho([[0.3]], [[2.0]])[0] == 1.0


@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), arrays(float, 3, elements=st.floats(-2, 2)))
def test_varrho_rows_agree(A_L, col):
    A_R = A_L.copy()
    A_R[:, 0] = col
    rl = adjugate(np.eye(3) - A_L)[0]
    rr = adjugate(np.eye(3) - A_R)[0]
    assert np.max(np.abs(rl - rr)) <= 1e-10 * (1 + np.max(np.abs(rl)))
    varrho(A_L, A_R)


def test_varrho_rejects_column_mismatch():
    with pytest.raises(ContinuityError):
        varrho(np.zeros((2, 2)), np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_fixed_point_fig2(fig2):
    fp = half_fixed_point(fig2.left, "L", -0.1, -0.25)
    # oracle: bisection on -0.1 - 1.25 x - x^2 + 1.5 x^3 - x
    g = lambda x: -0.1 - 2.25 * x - x * x + 1.5 * x**3
    lo, hi = -0.2, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(lo) * g(mid) > 0 else (lo, mid)
    assert fp.x_star[0] == pytest.approx(lo, abs=1e-12)
    assert fp.residual <= 1e-10 and fp.admissible
    # the leading slope is 1/2
    for mu in (1e-4, -1e-4):
        assert half_fixed_point(fig2.left, "L", mu, 0.0).x_star[0] / mu == pytest.approx(0.5, abs=1e-3)


def test_fixed_point_at_mu_zero(pdmapex, fig2):
    for m in (pdmapex, fig2):
        for side in "LR":
            fp = half_fixed_point(m.half(side), side, 0.0, 0.03)
            assert fp.s_star == 0.0 and np.all(fp.x_star == 0)


def test_singular_linearization():
    half = HalfMapSeries1D(b={"00": 1.0}, a={"00": 1.0})
    with pytest.raises(SingularLinearization):
        half_fixed_point(half, "R", 0.1, 0.0)


def test_s_star_slope(pdmapex, fig2):
    assert s_star_slope(pdmapex.left, "L") == pytest.approx(-0.5, abs=1e-14)
    assert s_star_slope(fig2.left, "L") == pytest.approx(0.5)
    assert s_star_slope(fig2.right, "R") == pytest.approx(-2.0)


@pytest.mark.parametrize("side", ["L", "R"])
def test_s_star_matches_slope(pdmapex, side):
    half = pdmapex.half(side)
    slope = s_star_slope(half, side)
    mus = np.array([1e-3, -1e-3, 1e-4, -1e-4])
    s = np.array([half_fixed_point(half, side, mu, 0.0).s_star for mu in mus])
    fitted = np.polyfit(mus, s, 2)[1]
    assert fitted == pytest.approx(slope, rel=1e-4)


def _map_1d(aL, aR):
    return PwsMap(HalfMapSeries1D(b=1.0, a=aL), HalfMapSeries1D(b=1.0, a=aR))


def test_feigin_rules():
    rep = feigin_classify(_map_1d(0.5, 0.8))
    assert rep.fixed_point_scenario == "Persistence" and not rep.two_cycle_exists
    assert feigin_classify(_map_1d(0.5, 2.0)).fixed_point_scenario == "NonsmoothFold"
    rep = feigin_classify(_map_1d(-1.5, 0.5))
    assert rep.two_cycle_exists and rep.sigma_minus_L == 1


def test_feigin_fig2(fig2):
    rep = feigin_classify(fig2, 0.1)
    assert rep.fixed_point_scenario == "NonsmoothFold"
    assert not rep.two_cycle_exists and rep.degenerate_flags == []
    # brute force at eta = 0.1: no admissible fixed point for mu > 0, two for mu < 0
    from bcpd.linalg_bc import sides_admissible
    assert sides_admissible(fig2, 1e-3, 0.1) == {}
    assert set(sides_admissible(fig2, -1e-3, 0.1)) == {"L", "R"}


def test_feigin_degenerate_flags(fig2, pdmapex):
    assert feigin_classify(fig2, 0.0).degenerate_flags  # a_L = -1
    assert feigin_classify(pdmapex, -0.05).degenerate_flags == []


def test_feigin_record(pdmapex):
    rec = feigin_classify(pdmapex, -0.05).to_record()
    assert rec["fixed_point_scenario"] == "Persistence"
    assert rec["degenerate_flags"] == ""


@given(arrays(float, (2, 2), elements=st.floats(-2.5, 2.5)), arrays(float, 2, elements=st.floats(-2.5, 2.5)))
def test_feigin_invariants(A_L, col):
    m = pl_map_2d(A_L, col, np.array([1.0, 0.3]))
    rep = feigin_classify(m)
    assert (rep.fixed_point_scenario == "Persistence") == ((rep.sigma_plus_L + rep.sigma_plus_R) % 2 == 0)
    assert rep.two_cycle_exists == ((rep.sigma_minus_L + rep.sigma_minus_R) % 2 == 1)
