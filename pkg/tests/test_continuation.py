import csv
import json

import numpy as np
import pytest

from bcpd.continuation import (ContinuationOptions, detect_codim2, sn_emanation_points,
                               sweep_1param, trace_bc_fixed_curve, trace_bc_twocycle_curve,
                               trace_pd_curve, trace_sn_twocycle_curve, write_curves_csv,
                               write_plot_recipe, write_sweep_csv)
from bcpd.errors import SeedInvalid
from bcpd.pws_map import HalfMapSeries1D, HalfMapSeriesND, PwsMap
from bcpd.second_iterate import find_two_cycle
from bcpd.unfolding1d import unfold


def _fold_map():
    # RL two-cycle equation is quadratic in x1: p x1^2 + (a_L - 1/a_R) x1 + mu (1 + 1/a_R) = 0,
    # so the fold of two-cycles is mu = (eta - 0.2)^2 / 0.8 for a_L = -1 + eta, a_R = -1.25, p = 1
    return PwsMap(HalfMapSeries1D(b=1.0, a={"00": -1.0, "01": 1.0}, p=1.0),
                  HalfMapSeries1D(b=1.0, a=-1.25))


def _interp_mu_at_eta(curve, eta):
    mu, e = np.array(curve.mu), np.array(curve.eta)
    k = int(np.argmin(np.abs(e - eta)))
    lo, hi = max(k - 3, 0), min(k + 4, len(e))
    return float(np.polyval(np.polyfit(e[lo:hi], mu[lo:hi], min(3, hi - lo - 1)), eta))


@pytest.fixture(scope="module")
def pd_pdmapex():
    from bcpd.pws_map import pdmapex_map
    return trace_pd_curve(pdmapex_map())


@pytest.fixture(scope="module")
def bc2_pdmapex():
    from bcpd.pws_map import pdmapex_map
    return trace_bc_twocycle_curve(pdmapex_map())


def test_pd_curve_pdmapex_exact(pd_pdmapex):
    mu, eta = np.array(pd_pdmapex.mu), np.array(pd_pdmapex.eta)
    sel = (eta >= -0.03) & (eta <= 0)
    assert sel.sum() > 10
    assert np.max(np.abs(mu[sel] - (-6 * eta[sel] - 4.5 * eta[sel] ** 2))) <= 1e-6
    assert pd_pdmapex.max_residual <= 1e-9
    assert pd_pdmapex.special("Codim2_BCPD")


def test_bc2_curve_pdmapex_exact(bc2_pdmapex):
    mu, eta = np.array(bc2_pdmapex.mu), np.array(bc2_pdmapex.eta)
    sel = (mu >= 0) & (mu <= 0.2)
    assert sel.sum() > 10 and mu.max() >= 0.2
    assert np.max(np.abs(eta[sel] + mu[sel] / 6)) <= 1e-6
    assert bc2_pdmapex.max_residual <= 1e-9
    # passes through the codim-2 origin
    assert np.min(np.abs(mu) + np.abs(eta)) == 0.0


def test_tangency_and_gap(pd_pdmapex, bc2_pdmapex):
    def fit(c):
        mu, eta = np.array(c.mu), np.array(c.eta)
        sel = (mu > 0) & (mu <= 0.05)
        return np.polyfit(mu[sel], eta[sel], 3)
    p1, p2 = fit(pd_pdmapex), fit(bc2_pdmapex)
    assert abs(p1[2] - p2[2]) <= 1e-6
    # h2 - h1 = -(c0/4) mu_hat^2 = mu^2 / 48
    assert (p2[1] - p1[1]) == pytest.approx(1 / 48, rel=0.2)


def test_pd_curve_verified_points(pd_pdmapex):
    from bcpd.linalg_bc import half_fixed_point
    from bcpd.pws_map import pdmapex_map
    m = pdmapex_map()
    for pt in pd_pdmapex.points[::7]:
        fp = half_fixed_point(m.left, "L", pt.mu, pt.eta)
        np.testing.assert_allclose(fp.x_star, pt.state, atol=1e-9)
        w = np.linalg.eigvals(m.left.jacobian(fp.x_star, pt.mu, pt.eta))
        assert np.min(np.abs(w + 1)) <= 1e-9
        assert pt.admissible


def test_pd_curve_stops_at_admissibility(pd_pdmapex):
    assert "admissibility" in pd_pdmapex.stop_reasons
    assert pd_pdmapex.special("Codim2_BCPD")[0].mu == 0.0


def test_pd_step_sizes(pd_pdmapex):
    z = np.column_stack([pd_pdmapex.mu, pd_pdmapex.eta, [p.state for p in pd_pdmapex.points]])
    steps = np.linalg.norm(np.diff(z, axis=0), axis=1)
    assert np.max(steps) <= ContinuationOptions().step_max * 1.01


def test_fig2_curves(fig2):
    pd = trace_pd_curve(fig2)
    bc2 = trace_bc_twocycle_curve(fig2)
    assert _interp_mu_at_eta(pd, -0.25) == pytest.approx(-0.2169, abs=5e-4)
    assert _interp_mu_at_eta(bc2, -0.25) == pytest.approx(-0.1937, abs=5e-4)
    assert pd.max_residual <= 1e-9 and bc2.max_residual <= 1e-9


def test_fig2_pd_matches_series(fig2):
    # |eta_traced - h1_quad| <= C |mu|^3
    from bcpd.unfolding1d import h1_curve
    rep = unfold(fig2)
    pd = trace_pd_curve(fig2)
    mu, eta = np.array(pd.mu), np.array(pd.eta)
    sel = (np.abs(mu) > 1e-3) & (np.abs(mu) <= 0.1)
    err = np.abs(eta[sel] - np.array([h1_curve(rep, x) for x in mu[sel]]))
    assert np.max(err / np.abs(mu[sel]) ** 3) <= 10


def test_sn_pdmapex_special_points():
    from bcpd.pws_map import pdmapex_map
    m = pdmapex_map()
    roots = sn_emanation_points(m, (-0.3, 0.3))
    assert any(abs(r - (-4 + np.sqrt(10)) / 9) <= 1e-4 for r in roots)
    sn = trace_sn_twocycle_curve(m)
    em = sn.special("SN_emanation")[0]
    assert em.eta == pytest.approx((-4 + np.sqrt(10)) / 9, abs=1e-4)
    cusp = sn.special("Cusp")
    assert len(cusp) == 1
    assert cusp[0].mu == pytest.approx(-1 / 18, abs=1e-4)
    assert cusp[0].eta == pytest.approx(-1 / 9, abs=1e-4)
    assert sn.max_residual <= 1e-9


def test_sn_points_are_folds():
    from bcpd.pws_map import pdmapex_map
    m = pdmapex_map()
    sn = trace_sn_twocycle_curve(m)
    for pt in sn.points[1::9]:
        mults = np.asarray(pt.multipliers)
        assert np.min(np.abs(mults - 1)) <= 1e-8


def test_sn_analytic_fold():
    m = _fold_map()
    assert sn_emanation_points(m, (-0.3, 0.3)) == [pytest.approx(0.2, abs=1e-12)]
    sn = trace_sn_twocycle_curve(m, opts=ContinuationOptions(eta_window=(-0.3, 0.5)))
    mu, eta = np.array(sn.mu), np.array(sn.eta)
    assert eta.max() > 0.45
    assert np.max(np.abs(mu - (eta - 0.2) ** 2 / 0.8)) <= 1e-9
    # the other branch (eta < 0.2) has x1 > 0 and is cut at the emanation point
    assert eta.min() == pytest.approx(0.2, abs=1e-12)


def test_sn_analytic_fold_virtual():
    m = _fold_map()
    opts = ContinuationOptions(eta_window=(-0.1, 0.5), allow_virtual=True)
    sn = trace_sn_twocycle_curve(m, opts=opts)
    eta = np.array(sn.eta)
    assert eta.min() < 0.0
    assert np.max(np.abs(np.array(sn.mu) - (eta - 0.2) ** 2 / 0.8)) <= 1e-9
    assert not all(p.admissible for p in sn.points)


def test_sn_without_emanation_point(fig2):
    # a_L a_R = 1 never holds on the axis for fig2 (a_L = eta - 1, a_R = 1.5)
    with pytest.raises(SeedInvalid):
        trace_sn_twocycle_curve(fig2, opts=ContinuationOptions(eta_window=(-0.3, 0.3)))


def test_right_side_codim2(pdmapex):
    pd = trace_pd_curve(pdmapex, side="R", eta0=-2 / 9)
    bc2 = trace_bc_twocycle_curve(pdmapex, side="R", eta0=-2 / 9)
    assert pd.side == bc2.side == "R"
    assert pd.max_residual <= 1e-9 and bc2.max_residual <= 1e-9
    for c in (pd, bc2):
        k = int(np.argmin(np.abs(c.mu) + np.abs(np.array(c.eta) + 2 / 9)))
        assert abs(c.mu[k]) + abs(c.eta[k] + 2 / 9) <= 1e-9
    # right-half fixed points on the PD curve have s >= 0
    assert all(p.state[0] >= -1e-12 for p in pd.points)


def test_bc_fixed_line(pdmapex):
    c = trace_bc_fixed_curve(pdmapex, ContinuationOptions(eta_window=(-0.1, 0.1)), n_points=11)
    assert c.kind == "BC_fixed" and all(p.mu == 0.0 for p in c.points)
    assert c.eta[0] == -0.1 and c.eta[-1] == 0.1


def test_detect_codim2(pdmapex, fig2):
    pts = detect_codim2(pdmapex)
    etas = sorted((p.eta, p.side) for p in pts)
    assert len(etas) == 2
    assert etas[0][0] == pytest.approx(-2 / 9, abs=1e-8) and etas[0][1] == "R"
    assert etas[1][0] == pytest.approx(0.0, abs=1e-8) and etas[1][1] == "L"
    fig = detect_codim2(fig2)
    assert [p.side for p in fig] == ["L"] and fig[0].eta == pytest.approx(0.0, abs=1e-10)
    const = PwsMap(HalfMapSeriesND.build([{"00": 1.0}, {}], [[{"00": 0.3}, {"00": 1.0}], [{"00": 0.1}, {}]]),
                   HalfMapSeriesND.build([{"00": 1.0}, {}], [[{"00": 0.5}, {"00": 1.0}], [{"00": 0.2}, {}]]))
    assert detect_codim2(const) == []


@pytest.fixture(scope="module")
def fig2_sweep():
    from bcpd.pws_map import fig2_map
    return sweep_1param(fig2_map(), -0.25, np.linspace(-0.3, 0.05, 141))


def test_fig2_sweep_transitions(fig2_sweep):
    pd = fig2_sweep.transitions_of("PD")
    bc2 = fig2_sweep.transitions_of("BC_twocycle")
    assert len(pd) == 1 and len(bc2) == 1
    assert pd[0].mu == pytest.approx(-0.2169, abs=5e-4)
    assert bc2[0].mu == pytest.approx(-0.1937, abs=5e-4)
    # root-found inside the grid bracket, not snapped to a grid value
    grid = fig2_sweep.mu_grid
    for t in (pd[0], bc2[0]):
        assert t.mu_lo < t.mu < t.mu_hi
        assert t.mu_hi - t.mu_lo == pytest.approx(grid[1] - grid[0])
        assert np.min(np.abs(grid - t.mu)) > 1e-6


def test_fig2_sweep_brackets_traced_curves(fig2_sweep, fig2):
    pd_traced = _interp_mu_at_eta(trace_pd_curve(fig2), -0.25)
    pd = fig2_sweep.transitions_of("PD")[0]
    assert abs(pd.mu - pd_traced) <= fig2_sweep.mu_grid[1] - fig2_sweep.mu_grid[0]


def test_fig2_sweep_escape_and_chaos(fig2_sweep):
    cls = fig2_sweep.classifications(0)
    grid = fig2_sweep.mu_grid
    assert cls[-1] == "escaped"
    assert all(c == "escaped" for c, mu in zip(cls, grid) if mu > 1e-3)
    lyap = fig2_sweep.lyapunov(0)
    for mu in (-0.15, -0.10, -0.05):
        k = int(np.argmin(np.abs(grid - mu)))
        assert cls[k] == "aperiodic" and lyap[k] > 0.01
    k = int(np.argmin(np.abs(grid + 0.21)))
    assert cls[k] == "period-2"


def test_persistence_pl_sweep():
    m = PwsMap(HalfMapSeries1D(b=1.0, a=0.5), HalfMapSeries1D(b=1.0, a=0.3))
    grid = np.linspace(-0.1, 0.1, 41)
    res = sweep_1param(m, 0.0, grid, n_transient=200, n_sample=100)
    assert set(res.classifications(0)) == {"fixed"} and res.transitions == []
    x = np.array([s.states[-1, 0] for s in res.samples[0]])
    expected = np.where(grid <= 0, grid / 0.5, grid / 0.7)
    np.testing.assert_allclose(x, expected, atol=1e-12)
    slopes = np.diff(x) / np.diff(grid)
    assert slopes[0] == pytest.approx(2.0) and slopes[-1] == pytest.approx(1 / 0.7)


def test_pdmapex_sweep_pd(pdmapex):
    # forward sweep sits on the RL cycle; decreasing mu from the stable left fixed
    # point crosses the PD locus at -6 eta - 4.5 eta^2 = 0.28875
    rev = pdmapex.reparameterized(-1.0, 1.0)
    res = sweep_1param(rev, -0.05, np.linspace(-0.4, 0.0, 81), x_seeds=[np.array([-0.2, -0.05])])
    pd = res.transitions_of("PD")
    assert len(pd) == 1
    assert -pd[0].mu == pytest.approx(0.28875, abs=1e-6)
    assert pd[0].mu_lo <= pd[0].mu <= pd[0].mu_hi


def test_pdmapex_forward_sweep(pdmapex):
    res = sweep_1param(pdmapex, -0.05, np.linspace(0.0, 0.4, 81))
    kinds = [(t.kind, t.after) for t in res.transitions]
    assert kinds[0] == ("BC_fixed", "period-2")
    bc2 = res.transitions_of("BC_twocycle")
    assert bc2 and bc2[0].mu == pytest.approx(0.3, abs=1e-6)
    # the period-2 attractor is the admissible RL cycle of find_two_cycle
    k = int(np.argmin(np.abs(res.mu_grid - 0.1)))
    cyc = find_two_cycle(pdmapex, 0.1, -0.05, "RL")
    got = res.samples[0][k].states
    assert np.min(np.linalg.norm(got - cyc.points[0], axis=1)) <= 1e-8


def test_sweep_rejects_unsorted(fig2):
    with pytest.raises(ValueError):
        sweep_1param(fig2, -0.25, [0.0, -0.1])


def test_writers(tmp_path, fig2, fig2_sweep):
    curves = [trace_pd_curve(fig2), trace_bc_twocycle_curve(fig2)]
    cpath, spath = tmp_path / "curves.csv", tmp_path / "special.csv"
    write_curves_csv(curves, cpath, spath)
    with open(cpath) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["kind"] for r in rows} == {"PD_fixed", "BC_twocycle"}
    assert {"kind", "index", "mu", "eta", "state0", "multiplier0"} <= set(rows[0])
    assert len(rows) == sum(len(c.points) for c in curves)
    assert spath.exists()
    wpath, tpath = tmp_path / "sweep.csv", tmp_path / "trans.csv"
    write_sweep_csv(fig2_sweep, wpath, tpath)
    with open(tpath) as fh:
        kinds = [r["kind"] for r in csv.DictReader(fh)]
    assert "PD" in kinds and "BC_twocycle" in kinds
    rpath = tmp_path / "plot.json"
    write_plot_recipe(rpath, {"curves": "curves.csv"}, "curves")
    recipe = json.loads(rpath.read_text())
    assert "curves.csv" in json.dumps(recipe)
