import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bcpd.errors import ConfigurationError, ContinuityError
from bcpd.poly import Poly2
from bcpd.pws_map import (HalfMapSeries1D, PwsMap, evaluate, iterate, jacobian, load_map,
                          map_from_dict, map_to_dict, resolve_map)

small = st.floats(-0.2, 0.2, allow_nan=False)


def test_fig2_eval_at_origin(fig2):
    assert evaluate(fig2, 0.0, 0.1, 0.0) == pytest.approx(0.1, abs=1e-15)


def test_fig2_eval_polynomial(fig2):
    expected = -0.1 + (-1.25) * (-0.2) + (-1.0) * 0.04 + 1.5 * (-0.008)
    assert evaluate(fig2, -0.2, -0.1, -0.25) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.098)


@given(small)
def test_origin_fixed_at_mu_zero(eta):
    from bcpd.pws_map import pdmapex_map, fig2_map
    assert evaluate(fig2_map(), 0.0, 0.0, eta) == 0.0
    assert np.all(evaluate(pdmapex_map(), np.zeros(2), 0.0, eta) == 0.0)


def test_jacobians_at_origin(fig2, pdmapex):
    assert jacobian(fig2.left, 0.0, 0.0, 0.0) == -1.0
    np.testing.assert_allclose(jacobian(pdmapex.left, np.zeros(2), 0, 0), [[-0.5, 1], [0.5, 0]], atol=1e-15)
    np.testing.assert_allclose(jacobian(pdmapex.right, np.zeros(2), 0, 0), [[-0.5, 1], [1 / 6, 0]], atol=1e-15)


def test_pdmapex_abs_term(pdmapex):
    # y' = s/3 - |s|/6 - 3/2 eta s + s^2/4 on both sides
    for s in (-0.3, 0.2):
        x = np.array([s, 0.1])
        out = evaluate(pdmapex, x, 0.05, -0.1)
        y = s / 3 - abs(s) / 6 + 0.15 * s + s * s / 4
        np.testing.assert_allclose(out, [-0.025 - s / 2 + 0.1, y], atol=1e-15)


def _fd_jac(f, x, h=1e-5):
    cols = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), small, small)
def test_jacobian_matches_finite_differences(s, y, mu, eta):
    from bcpd.pws_map import pdmapex_map
    m = pdmapex_map()
    x = np.array([s, y])
    for half in (m.left, m.right):
        fz = half.freeze(mu, eta)
        J = jacobian(half, x, mu, eta)
        Jfd = _fd_jac(fz.f, x)
        assert np.max(np.abs(J - Jfd)) <= 1e-6 * (1 + np.max(np.abs(J)))


@given(small, small, st.floats(-1, 1))
def test_continuity_on_switching_manifold(mu, eta, y):
    from bcpd.pws_map import pdmapex_map, fig2_map
    for m, x in ((pdmapex_map(), np.array([0.0, y])), (fig2_map(), 0.0)):
        fl = m.left.freeze(mu, eta).f(x)
        fr = m.right.freeze(mu, eta).f(x)
        assert np.max(np.abs(fl - fr)) <= 1e-12 * (1 + np.max(np.abs(fl)))


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), small, small)
def test_poly2_evaluation_agrees(coeffs, mu, eta):
    c = np.zeros((3, 3))
    c[0, 0], c[1, 0], c[0, 1], c[2, 0], c[1, 1], c[0, 2] = coeffs
    p = Poly2(c)
    assert p(mu, eta) == pytest.approx(p.evaluate_naive(mu, eta), rel=1e-14, abs=1e-14)
    assert p(0.0, 0.0) == c[0, 0]
    assert p.derivative_at_origin(1, 1) == pytest.approx(c[1, 1])
    assert p.derivative_at_origin(2, 0) == pytest.approx(2 * c[2, 0])


def test_continuity_violation_lists_monomials():
    left = HalfMapSeries1D(b={"00": 1.0, "01": 0.5}, a={"00": -1.0})
    right = HalfMapSeries1D(b={"00": 1.0}, a={"00": 2.0})
    with pytest.raises(ContinuityError) as err:
        PwsMap(left, right)
    assert "b:01" in str(err.value)


def test_dimension_mismatch(pdmapex):
    with pytest.raises(ConfigurationError):
        evaluate(pdmapex, np.zeros(3), 0.0, 0.0)


def test_iterate_fixed_point_constant(fig2):
    from bcpd.linalg_bc import half_fixed_point
    fp = half_fixed_point(fig2.left, "L", -0.1, -0.25)
    res = iterate(fig2, fp.x_star[0], -0.1, -0.25, 5)
    assert len(res) == 6 and not res.escaped
    np.testing.assert_allclose(res.states, fp.x_star[0], atol=1e-12)


def test_iterate_converges_to_two_cycle(fig2):
    res = iterate(fig2, 0.01, -0.21, -0.25, 4000)
    a, b = res.states[-2], res.states[-1]
    assert abs(a - b) > 1e-2
    assert abs(res.states[-3] - b) < 1e-8
    assert max(a, b) < 0


def test_iterate_escapes_for_positive_mu(fig2):
    res = iterate(fig2, 0.0, 0.05, -0.25, 10_000)
    assert res.escaped


def test_map_file_roundtrip(tmp_path, pdmapex, fig2):
    for m in (pdmapex, fig2):
        path = tmp_path / f"{m.name}.json"
        path.write_text(json.dumps(map_to_dict(m)))
        again = load_map(path)
        x = np.array([-0.1, 0.05])[: m.dim] if m.dim > 1 else -0.1
        np.testing.assert_allclose(evaluate(again, x, 0.03, -0.02), evaluate(m, x, 0.03, -0.02), atol=1e-15)


def test_toml_map_file(tmp_path):
    path = tmp_path / "m.toml"
    path.write_text('dimension = 1\n[left]\nb = 1.0\na = {"00" = -1.0, "01" = 1.0}\n'
                    'p = -1.0\nq = 1.5\n[right]\nb = 1.0\na = 1.5\n')
    m = load_map(path)
    assert evaluate(m, -0.2, -0.1, -0.25) == pytest.approx(0.098)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigurationError):
        map_from_dict({"dimension": 1, "left": {"b": 1, "a": -1}, "right": {"b": 1, "a": 2}, "extra": 1})
    with pytest.raises(ConfigurationError):
        map_from_dict({"dimension": 1, "left": {"b": 1, "a": -1, "z": 0}, "right": {"b": 1, "a": 2}})
    with pytest.raises(ConfigurationError):
        resolve_map("builtin:nope")


def test_swapped_is_mirror_image(pdmapex):
    sw = pdmapex.swapped()
    R = np.array([-1.0, 1.0])
    for x in (np.array([0.2, -0.1]), np.array([-0.3, 0.05])):
        np.testing.assert_allclose(evaluate(sw, R * x, 0.02, 0.01),
                                   R * evaluate(pdmapex, x, 0.02, 0.01), atol=1e-15)
