"""Curve tracing in the ``(mu, eta)`` plane and one-parameter attractor sweeps.

Curves are continued by pseudo-arclength in ``z = (mu, eta, state...)`` with a
secant predictor and a Newton corrector. Every curve is computed for the left
half-map; curves of the right half-map are obtained on the mirrored map
``PwsMap.swapped()`` and reflected back.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._newton import fd_jacobian, newton
from .center_manifold import nd_unfold, reduce
from .errors import BcpdError, DegeneracyError, SeedInvalid, StepFailure
from .orbit_lab import AttractorSample, RECURRENCE_TOL, MAX_DETECTED_PERIOD
from .pws_map import DEFAULT_ESCAPE_RADIUS, LEFT, RIGHT, HalfMapSeries1D, PwsMap
from .unfolding1d import unfold

CURVE_KINDS = ("BC_fixed", "PD_fixed", "BC_twocycle", "SN_twocycle")
VERIFY_TOL = 1e-9
SEED_KICK = 1e-3
MARGINAL_LYAPUNOV = 1e-2


@dataclass
class ContinuationOptions:
    step_init: float = 1e-3
    step_min: float = 1e-7
    step_max: float = 1e-2
    max_steps: int = 5000
    newton_tol: float = 1e-12
    newton_maxiter: int = 12
    mu_window: tuple[float, float] = (-0.3, 0.3)
    eta_window: tuple[float, float] = (-0.3, 0.3)
    allow_virtual: bool = False

    def in_window(self, z) -> bool:
        return (self.mu_window[0] <= z[0] <= self.mu_window[1]
                and self.eta_window[0] <= z[1] <= self.eta_window[1])


@dataclass
class CurvePoint:
    mu: float
    eta: float
    state: np.ndarray
    multipliers: np.ndarray
    admissible: bool
    residual: float


@dataclass
class SpecialPoint:
    type: str
    mu: float
    eta: float
    residual: float
    detail: str = ""


@dataclass
class BifurcationCurve:
    kind: str
    points: list[CurvePoint]
    special_points: list[SpecialPoint] = field(default_factory=list)
    side: str = LEFT
    stop_reasons: list[str] = field(default_factory=list)

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    @property
    def eta(self) -> np.ndarray:
        return np.array([p.eta for p in self.points])

    @property
    def max_residual(self) -> float:
        return max((p.residual for p in self.points), default=0.0)

    def special(self, kind: str) -> list[SpecialPoint]:
        return [s for s in self.special_points if s.type == kind]


# ---------------------------------------------------------------------------
# pseudo-arclength core
# ---------------------------------------------------------------------------


def _tangent(F, z, prev=None):
    J = np.atleast_2d(fd_jacobian(F, z))
    t = np.linalg.svd(J)[2][-1]
    if prev is not None and t @ prev < 0:
        t = -t
    return t


def _correct(F, z_pred, t, opts: ContinuationOptions):
    def H(z):
        return np.concatenate([np.atleast_1d(F(z)), [t @ (z - z_pred)]])

    with np.errstate(all="ignore"):
        z, res, ok = newton(H, z_pred, tol=opts.newton_tol, maxiter=opts.newton_maxiter)
    return z, ok


def _on_secant(F, za, zb, opts):
    """Corrected point at fraction ``tau`` of the chord ``za -> zb``."""
    d = zb - za
    t = d / np.linalg.norm(d)

    def point(tau):
        z, ok = _correct(F, za + tau * d, t, opts)
        if not ok:
            raise StepFailure("corrector failed while refining an event")
        return z

    return point


def _refine(F, za, zb, fn, opts):
    point = _on_secant(F, za, zb, opts)
    g = lambda tau: fn(point(tau))
    ga, gb = g(0.0), g(1.0)
    if ga == 0:
        return za
    if ga * gb > 0:
        return zb
    tau = brentq(g, 0.0, 1.0, xtol=1e-13)
    return point(tau)


@dataclass
class _Branch:
    zs: list
    specials: list
    stop: str


def _trace_branch(F, z0, t0, opts: ContinuationOptions, adm=None, monitor=None,
                  stop_fn=None) -> _Branch:
    """Continue ``F = 0`` from ``z0`` along ``t0``.

    ``adm(z) >= 0`` marks admissible points, ``monitor`` is a (value, type)
    pair of functions whose sign changes become special points and
    ``stop_fn(z)`` ends the branch when it becomes true.
    """
    zs = [np.asarray(z0, dtype=float)]
    specials = []
    t = t0 / np.linalg.norm(t0)
    h = opts.step_init
    mon_prev = monitor[0](zs[0]) if monitor else None
    stop = "max_steps"
    while len(zs) <= opts.max_steps:
        z = zs[-1]
        z_new, ok = _correct(F, z + h * t, t, opts)
        if not ok or np.linalg.norm(z_new - z) > 3 * h:
            h /= 2
            if h < opts.step_min:
                stop = "step_failure"
                break
            continue
        if not opts.in_window(z_new):
            stop = "window"
            break
        if stop_fn is not None and stop_fn(z_new):
            stop = "stop_condition"
            zs.append(z_new)
            break
        if adm is not None and adm(z_new) < 0 and adm(z) >= 0 and not opts.allow_virtual:
            zc = _refine(F, z, z_new, adm, opts)
            if np.linalg.norm(zc - zs[0]) > 1e-9:
                specials.append(SpecialPoint("AdmissibilityLoss", float(zc[0]), float(zc[1]),
                                             float(np.max(np.abs(F(zc))))))
                zs.append(zc)
            stop = "admissibility"
            break
        if monitor is not None:
            val = monitor[0](z_new)
            if mon_prev is not None and np.sign(val) != np.sign(mon_prev) and val != 0:
                zc = _refine(F, z, z_new, monitor[0], opts)
                specials.append(SpecialPoint(monitor[1], float(zc[0]), float(zc[1]),
                                             float(np.max(np.abs(F(zc))))))
            mon_prev = val
        t = _tangent(F, z_new, z_new - z)
        zs.append(z_new)
        h = min(1.5 * h, opts.step_max)
    return _Branch(zs, specials, stop)


def _trace_both(F, z0, opts, adm=None, monitor=None, direction: int = 0,
                stop_fn=None, t0=None):
    """Trace one or both orientations of the curve through ``z0``.

    ``direction`` = +1/-1 picks the orientation with increasing/decreasing
    ``mu`` (``eta`` if the curve is vertical); 0 traces both.
    """
    t = _tangent(F, z0) if t0 is None else np.asarray(t0, dtype=float)
    key = 0 if abs(t[0]) > 1e-8 else 1
    if t[key] < 0:
        t = -t
    orientations = [1, -1] if direction == 0 else [direction]
    branches = [(_trace_branch(F, z0, sgn * t, opts, adm, monitor, stop_fn), sgn) for sgn in orientations]
    return branches


def _stitch(branches):
    """Ordered point list through the start point, plus collected events."""
    zs, specials, stops = [], [], []
    for br, sgn in branches:
        specials += br.specials
        stops.append(br.stop)
    if len(branches) == 1:
        zs = branches[0][0].zs
    else:
        neg = [b for b, s in branches if s < 0][0]
        pos = [b for b, s in branches if s > 0][0]
        zs = neg.zs[::-1] + pos.zs[1:]
    return zs, specials, stops


def _oriented(m: PwsMap, side: str) -> PwsMap:
    return m.as_nd() if side == LEFT else m.as_nd().swapped()


def _reflect_state(x: np.ndarray, n: int) -> np.ndarray:
    x = np.array(x, dtype=float, copy=True)
    x[::n] *= -1.0  # first coordinate of every stacked state
    return x


def _finish(kind, side, n, F, zs, specials, stops, states_of, mults_of, adm):
    pts = []
    for z in zs:
        st = states_of(z)
        if side == RIGHT:
            st = _reflect_state(st, n)
        a = adm(z) >= -1e-12 if adm is not None else True
        pts.append(CurvePoint(float(z[0]), float(z[1]), st, mults_of(z), bool(a),
                              float(np.max(np.abs(F(z))))))
    return BifurcationCurve(kind, pts, specials, side, stops)


# ---------------------------------------------------------------------------
# defining systems
# ---------------------------------------------------------------------------


def _pd_system(nd: PwsMap):
    n = nd.dim
    I = np.eye(n)

    def F(z):
        fz = nd.left.freeze(z[0], z[1])
        x = z[2:]
        return np.concatenate([fz.f(x) - x, [np.linalg.det(fz.jac(x) + I)]])

    def mults(z):
        fz = nd.left.freeze(z[0], z[1])
        return np.linalg.eigvals(fz.jac(z[2:]))

    adm = lambda z: -z[2]
    return F, mults, adm


def _start_at_codim2(F, eta0: float, n: int) -> np.ndarray:
    z0 = np.concatenate([[0.0, eta0], np.zeros(n)])
    if np.max(np.abs(F(z0))) > VERIFY_TOL:
        raise SeedInvalid(f"(mu, eta) = (0, {eta0}) is not a codimension-two point")
    return z0


def _polish_seed(F, z0) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float)

    def Fix(z):
        return np.concatenate([np.atleast_1d(F(z)), [z[0] - z0[0]]])

    z, res, ok = newton(Fix, z0, tol=1e-12)
    if not ok or res > VERIFY_TOL:
        raise SeedInvalid(f"seed does not converge onto the defining system (residual {res:.3g})")
    return z


def trace_pd_curve(m: PwsMap, start=None, direction: int = 0, side: str = LEFT,
                   eta0: float = 0.0, opts: ContinuationOptions | None = None) -> BifurcationCurve:
    """Locus where the ``side`` fixed point has an eigenvalue -1.

    Without ``start`` the curve is started at the codimension-two point
    ``(0, eta0)``; otherwise ``start = (mu, eta, x...)`` is Newton-polished
    at fixed ``mu``.
    """
    opts = opts or ContinuationOptions()
    nd = _oriented(m, side)
    n = nd.dim
    F, mults, adm = _pd_system(nd)
    specials = []
    if start is None:
        z0 = _start_at_codim2(F, eta0, n)
        specials.append(SpecialPoint("Codim2_BCPD", 0.0, float(eta0), float(np.max(np.abs(F(z0))))))
    else:
        z0 = np.asarray(start, dtype=float).copy()
        if side == RIGHT:
            z0[2] = -z0[2]
        z0 = _polish_seed(F, z0)
    zs, sp, stops = _stitch(_trace_both(F, z0, opts, adm, direction=direction))
    return _finish("PD_fixed", side, n, F, zs, specials + sp, stops,
                   lambda z: z[2:].copy(), mults, adm)


def _g_1d(half: HalfMapSeries1D):
    def F(z):
        mu, eta = z[0], z[1]
        b, a, p, q = half.b(mu, eta), half.a(mu, eta), half.p(mu, eta), half.q(mu, eta)
        return np.array([b * (1.0 + a + mu * b * p + mu**2 * b**2 * q)])
    return F


def trace_bc_twocycle_curve(m: PwsMap, start=None, direction: int = 0, side: str = LEFT,
                            eta0: float = 0.0, mu_seed: float = 1e-3,
                            opts: ContinuationOptions | None = None) -> BifurcationCurve:
    """Locus where a point of the ``side``-``side`` two-cycle lies on ``s = 0``.

    1D maps use ``f_L(f_L(0)) / mu = 0``, which is regular at the origin. In
    higher dimensions the cycle point ``x0 = (0, y)`` is an unknown and the
    line ``mu = 0`` is a trivial solution branch, so the curve is seeded off
    the origin and the origin is appended when the trace returns to ``mu = 0``.
    """
    opts = opts or ContinuationOptions()
    nd = _oriented(m, side)
    n = nd.dim
    base = nd.shifted_eta(eta0) if eta0 != 0.0 else nd
    specials = [SpecialPoint("Codim2_BCPD", 0.0, float(eta0), 0.0)]

    if n == 1:
        half = base.left if isinstance(base.left, HalfMapSeries1D) else None
        if half is None:
            half = (m if side == LEFT else m.swapped())
            half = half.shifted_eta(eta0).left if eta0 else half.left
        g = _g_1d(half)
        F = lambda z: g(np.array([z[0], z[1] - eta0]))

        def states(z):
            fz = nd.left.freeze(z[0], z[1])
            x0 = np.zeros(1)
            return np.concatenate([x0, fz.f(x0)])

        def mults(z):
            fz = nd.left.freeze(z[0], z[1])
            x0 = np.zeros(1)
            return np.atleast_1d(fz.jac(fz.f(x0)) @ fz.jac(x0)).ravel()

        adm = lambda z: -states(z)[1]
        z0 = np.array([0.0, eta0]) if start is None else _polish_seed(F, np.asarray(start[:2], dtype=float))
        zs, sp, stops = _stitch(_trace_both(F, z0, opts, adm, direction=direction))
        return _finish("BC_twocycle", side, n, F, zs, specials + sp, stops, states, mults, adm)

    def x0_of(z):
        return np.concatenate([[0.0], z[2:]])

    def F(z):
        fz = nd.left.freeze(z[0], z[1])
        x0 = x0_of(z)
        return fz.f(fz.f(x0)) - x0

    def states(z):
        fz = nd.left.freeze(z[0], z[1])
        x0 = x0_of(z)
        return np.concatenate([x0, fz.f(x0)])

    def mults(z):
        fz = nd.left.freeze(z[0], z[1])
        x0 = x0_of(z)
        return np.linalg.eigvals(fz.jac(fz.f(x0)) @ fz.jac(x0))

    adm = lambda z: -states(z)[n]
    if start is None:
        shifted = PwsMap(base.left, base.right)
        un = nd_unfold(shifted)
        red = un.reduction
        lin, quad = un.h2_user()
        # admissible side of h2: mu_hat < 0
        mu0 = -math.copysign(abs(mu_seed), red.mu_hat_scale)
        z_seed = np.concatenate([[mu0, eta0 + lin * mu0 + quad * mu0**2], mu0 * red.zeta[1:]])
    else:
        # unknowns hold only y components, which the reflection leaves alone
        z_seed = np.asarray(start, dtype=float).copy()
        mu0 = z_seed[0]
    z0 = _polish_seed(F, z_seed)
    crossed = lambda z: np.sign(z[0]) != np.sign(mu0) and z[0] != 0
    branches = _trace_both(F, z0, opts, adm, direction=direction, stop_fn=crossed)
    # a branch that crossed mu = 0 ends at the codimension-two point
    origin = np.concatenate([[0.0, eta0], np.zeros(n - 1)])
    for br, _ in branches:
        if br.stop == "stop_condition":
            br.zs[-1] = origin
            br.stop = "codim2"
    zs, sp, stops = _stitch(branches)
    return _finish("BC_twocycle", side, n, F, zs, specials + sp, stops, states, mults, adm)


def sn_emanation_points(m: PwsMap, eta_window=(-0.3, 0.3), n_scan: int = 3001) -> list[float]:
    """Roots in ``eta`` of ``det(I - A_L A_R)(0, eta)``: RL two-cycles fold at ``mu = 0``."""
    nd = m.as_nd()
    I = np.eye(nd.dim)
    fn = lambda e: np.linalg.det(I - nd.left.linear_part(0.0, e) @ nd.right.linear_part(0.0, e))
    return _scan_roots(fn, eta_window, n_scan)


def _scan_roots(fn, window, n_scan) -> list[float]:
    grid = np.linspace(window[0], window[1], n_scan)
    vals = np.array([fn(e) for e in grid])
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(brentq(fn, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def _rl_system(nd: PwsMap):
    n = nd.dim
    I = np.eye(n)

    def parts(z):
        fz = nd.at(z[0], z[1])
        x0 = z[2:]
        x1 = fz.right.f(x0)
        D = fz.left.jac(x1) @ fz.right.jac(x0)
        return fz, x0, x1, D

    def F(z):
        fz, x0, x1, D = parts(z)
        return np.concatenate([fz.left.f(x1) - x0, [np.linalg.det(D - I)]])

    def states(z):
        _, x0, x1, _ = parts(z)
        return np.concatenate([x0, x1])

    def mults(z):
        return np.linalg.eigvals(parts(z)[3])

    def adm(z):
        _, x0, x1, _ = parts(z)
        return min(x0[0], -x1[0])

    def G_jac(z, x):
        fz = nd.at(z[0], z[1])
        return fz.left.jac(fz.right.f(x)) @ fz.right.jac(x) - I

    return F, states, mults, adm, G_jac


def _cusp_monitor(G_jac):
    """Quadratic fold coefficient ``w^T D^2G(v, v)`` with continuous orientation of ``w``."""
    prev = {"w": None}

    def value(z):
        x = z[2:]
        D = G_jac(z, x)
        U, _, Vt = np.linalg.svd(D)
        v, w = Vt[-1], U[:, -1]
        if prev["w"] is not None and w @ prev["w"] < 0:
            w = -w
        prev["w"] = w
        eps = 1e-5
        d2 = (G_jac(z, x + eps * v) - G_jac(z, x - eps * v)) @ v / (2 * eps)
        return float(w @ d2)

    return value


def trace_sn_twocycle_curve(m: PwsMap, start=None, direction: int = 0,
                            opts: ContinuationOptions | None = None,
                            eta_window=None, eta_sn: float | None = None) -> BifurcationCurve:
    """Fold locus of RL two-cycles, started where it leaves the ``eta`` axis.

    Without ``start`` the curve starts at the emanation point ``eta_sn``, by
    default the one closest to ``eta = 0`` in the window. Cusp points are
    located where the quadratic fold coefficient changes sign.
    """
    opts = opts or ContinuationOptions()
    nd = m.as_nd()
    n = nd.dim
    F, states, mults, adm, G_jac = _rl_system(nd)
    specials = []
    if start is None:
        if eta_sn is None:
            roots = sn_emanation_points(nd, eta_window or opts.eta_window)
            if not roots:
                raise SeedInvalid("det(I - A_L A_R) has no root on the eta-axis window")
            eta_sn = min(roots, key=abs)
        z0 = np.concatenate([[0.0, eta_sn], np.zeros(n)])
        specials.append(SpecialPoint("SN_emanation", 0.0, eta_sn, float(np.max(np.abs(F(z0))))))
    else:
        z0 = _polish_seed(F, np.asarray(start, dtype=float))
    branches = []
    for sgn in ([1, -1] if direction == 0 else [direction]):
        # fresh monitor state per orientation
        mon = (_cusp_monitor(G_jac), "Cusp")
        branches += _trace_both(F, z0, opts, adm, mon, direction=sgn)
    zs, sp, stops = _stitch(branches)
    return _finish("SN_twocycle", LEFT, n, F, zs, specials + sp, stops, states, mults, adm)


def trace_bc_fixed_curve(m: PwsMap, opts: ContinuationOptions | None = None,
                         n_points: int = 101) -> BifurcationCurve:
    """Border collision of fixed points: the ``eta``-axis ``mu = 0`` (origin on ``s = 0``)."""
    opts = opts or ContinuationOptions()
    nd = m.as_nd()
    pts = [CurvePoint(0.0, float(e), np.zeros(nd.dim),
                      np.linalg.eigvals(nd.left.linear_part(0.0, e)), True, 0.0)
           for e in np.linspace(opts.eta_window[0], opts.eta_window[1], n_points)]
    return BifurcationCurve("BC_fixed", pts, [], LEFT, ["window"])


# ---------------------------------------------------------------------------
# codimension-two points on the eta-axis
# ---------------------------------------------------------------------------


@dataclass
class Codim2Point:
    eta: float
    side: str
    report: object | None
    error: str = ""


def detect_codim2(m: PwsMap, eta_window=(-0.3, 0.3), n_scan: int = 3001) -> list[Codim2Point]:
    """Points ``(0, eta)`` where a half-map has an eigenvalue -1; each is re-unfolded.

    For the right half-map the map is mirrored first, so the reports always
    describe a left half-map with an eigenvalue -1 at the shifted origin.
    """
    nd = m.as_nd()
    I = np.eye(nd.dim)
    out = []
    for side in (LEFT, RIGHT):
        half = nd.half(side)
        fn = lambda e, h=half: np.linalg.det(I + h.linear_part(0.0, e))
        for eta in _scan_roots(fn, eta_window, n_scan):
            mm = m if side == LEFT else m.swapped()
            try:
                shifted = mm.shifted_eta(eta)
                rep = unfold(shifted) if m.dim == 1 else nd_unfold(shifted)
                out.append(Codim2Point(eta, side, rep))
            except BcpdError as exc:
                out.append(Codim2Point(eta, side, None, f"{type(exc).__name__}: {exc}"))
    return sorted(out, key=lambda c: (c.eta, c.side))


# ---------------------------------------------------------------------------
# one-parameter sweeps
# ---------------------------------------------------------------------------


@dataclass
class Transition:
    branch: int
    kind: str
    mu_lo: float
    mu_hi: float
    mu: float
    before: str
    after: str


@dataclass
class SweepResult:
    eta: float
    mu_grid: np.ndarray
    samples: list[list[AttractorSample]]  # [branch][cell]
    transitions: list[Transition]

    def classifications(self, branch: int = 0) -> list[str]:
        return [s.classification for s in self.samples[branch]]

    def lyapunov(self, branch: int = 0) -> np.ndarray:
        return np.array([np.nan if s.lyapunov is None else s.lyapunov for s in self.samples[branch]])

    def transitions_of(self, kind: str) -> list[Transition]:
        return [t for t in self.transitions if t.kind == kind]


@dataclass
class _Orbit:
    points: np.ndarray
    itinerary: str


def _lyap_from_states(fz, states: np.ndarray) -> float:
    """Mean log-stretching along a sampled orbit segment."""
    dim = states.shape[1]
    if dim == 1 and hasattr(fz.left, "df"):
        with np.errstate(divide="ignore"):
            return float(np.mean(np.log(np.abs(fz.df(states[:, 0])))))
    left = states[:, 0] <= 0
    J = np.where(left[:, None, None], fz.left.jac(states), fz.right.jac(states))
    u = np.ones(dim) / math.sqrt(dim)
    total = 0.0
    for Jk in J:
        u = Jk @ u
        nrm = np.linalg.norm(u)
        if nrm == 0:
            return -np.inf
        total += math.log(nrm)
        u /= nrm
    return total / len(J)


def _iterate_cell(m: PwsMap, mu, eta, x0, n_transient, n_sample, escape_radius, extend=True):
    fz = m.at(mu, eta)
    one_d = m.dim == 1
    x = float(np.ravel(x0)[0]) if one_d else np.asarray(x0, dtype=float).copy()
    for _ in range(n_transient):
        x = fz.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            return AttractorSample(np.empty((0, m.dim)), "escaped")
    states = np.empty((n_sample, m.dim))
    for k in range(n_sample):
        states[k] = x
        x = fz.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            return AttractorSample(states[:k + 1], "escaped")
    window = min(n_sample, 2 * MAX_DETECTED_PERIOD + 1)
    tail = states[-window:]
    for p in range(1, min(MAX_DETECTED_PERIOD, window - 1) + 1):
        if np.max(np.abs(tail[p:] - tail[:-p])) < RECURRENCE_TOL:
            name = "fixed" if p == 1 else f"period-{p}"
            return AttractorSample(tail[-p:].copy(), name, p, _lyap_from_states(fz, tail[-p:]))
    polished = _polish_periodic(m.as_nd(), mu, eta, states)
    if polished is not None:
        return polished
    lyap = _lyap_from_states(fz, states)
    if abs(lyap) < MARGINAL_LYAPUNOV and extend:
        # nearly neutral: most likely a slow approach to a periodic orbit
        return _iterate_cell(m, mu, eta, states[-1], 10 * n_transient, n_sample,
                             escape_radius, extend=False)
    return AttractorSample(states, "aperiodic", None, lyap)


POLISH_MAX_PERIOD = 16


def _polish_periodic(nd, mu, eta, states):
    """Slowly converging periodic attractors (multiplier near the unit circle)
    fail the recurrence test; try Newton on the last ``p`` states."""
    n = len(states)
    scale = 1e-3 * (1.0 + np.max(np.abs(states)))
    for p in range(1, POLISH_MAX_PERIOD + 1):
        tail = states[-p:]
        sample = _newton_cell(nd, mu, eta, _Orbit(tail, _itinerary(tail)))
        if sample is None:
            continue
        d_end = np.max(np.abs(sample.states - tail))
        # same phase of the orbit, half a sample window earlier
        start = n - p - p * ((n // 2) // p)
        d_mid = np.max(np.abs(sample.states - states[start:start + p]))
        if d_end < scale or d_end < 0.5 * d_mid:
            return sample
    return None


def _itinerary(points: np.ndarray) -> str:
    return "".join(LEFT if p[0] <= 0 else RIGHT for p in points)


def _orbit_status(nd: PwsMap, mu, eta, orbit: _Orbit):
    """Newton-continue a periodic orbit with fixed itinerary.

    Returns ``(points, reason)`` where ``reason`` is ``"ok"``, ``"unstable"``,
    ``"inadmissible"`` or ``"lost"`` and the multipliers.
    """
    fz = nd.at(mu, eta)
    word = orbit.itinerary
    halves = [fz.half(c) for c in word]
    n = nd.dim

    def chain(x):
        pts = [x]
        for h in halves[:-1]:
            pts.append(h.f(pts[-1]))
        return pts

    G = lambda x: halves[-1].f(chain(x)[-1]) - x

    def J(x):
        M = np.eye(n)
        for h, p in zip(halves, chain(x)):
            M = h.jac(p) @ M
        return M - np.eye(n)

    with np.errstate(all="ignore"):
        x, res, ok = newton(G, orbit.points[0], J, tol=1e-13, maxiter=30)
    if not ok:
        return None, "lost", None
    pts = np.array(chain(x))
    if np.max(np.abs(pts - orbit.points)) > 0.05 + 10 * np.max(np.abs(orbit.points)):
        return None, "lost", None
    mults = np.linalg.eigvals(J(x) + np.eye(n))
    for p, c in zip(pts, word):
        if (c == LEFT and p[0] > 1e-12) or (c == RIGHT and p[0] < -1e-12):
            return pts, "inadmissible", mults
    if np.max(np.abs(mults)) >= 1.0:
        return pts, "unstable", mults
    return pts, "ok", mults


def _newton_cell(nd: PwsMap, mu, eta, orbit: _Orbit):
    pts, reason, mults = _orbit_status(nd, mu, eta, orbit)
    if reason != "ok":
        return None
    p = len(pts)
    name = "fixed" if p == 1 else f"period-{p}"
    lyap = float(np.log(np.max(np.abs(mults))) / p) if np.max(np.abs(mults)) > 0 else -np.inf
    return AttractorSample(pts, name, p, lyap)


def _transition_kind(before: str, reason: str, mults) -> str:
    if reason == "inadmissible":
        return "BC_fixed" if before == "fixed" else "BC_twocycle" if before == "period-2" else "BC"
    if reason == "unstable" and mults is not None:
        lead = mults[int(np.argmax(np.abs(mults)))]
        if abs(lead.imag) > 1e-9:
            return "NS"
        if lead.real < 0:
            return "PD" if before == "fixed" else "PD_cycle"
        return "SN" if before != "fixed" else "fold"
    return "attractor_lost"


def _refine_periodic(nd, eta, orbit: _Orbit, mu_in, mu_out, before: str, tol: float = 1e-13):
    """Bisect for the parameter where a periodic attractor stops being present."""
    reason, mults = "lost", None
    for _ in range(200):
        if abs(mu_out - mu_in) <= tol * max(1.0, abs(mu_in)):
            break
        mid = 0.5 * (mu_in + mu_out)
        pts, r, mu_m = _orbit_status(nd, mid, eta, orbit)
        if r == "ok":
            mu_in, orbit = mid, _Orbit(pts, orbit.itinerary)
        else:
            mu_out, reason, mults = mid, r, mu_m
    return 0.5 * (mu_in + mu_out), _transition_kind(before, reason, mults)


def _refine_by_class(m, eta, x0, mu_in, mu_out, cls_in, n_transient, n_sample, escape_radius, n_iter=40):
    def same(mu):
        return _iterate_cell(m, mu, eta, x0, n_transient, n_sample, escape_radius).classification == cls_in

    for _ in range(n_iter):
        mid = 0.5 * (mu_in + mu_out)
        if same(mid):
            mu_in = mid
        else:
            mu_out = mid
    return 0.5 * (mu_in + mu_out)


def _sweep_branch(m: PwsMap, eta: float, mu_grid, seed, n_transient, n_sample,
                  escape_radius, refine, branch):
    nd = m.as_nd()
    cells: list[AttractorSample] = []
    prev_orbit: _Orbit | None = None
    x_next = np.atleast_1d(np.asarray(seed, dtype=float))
    for mu in mu_grid:
        sample = None
        if prev_orbit is not None:
            sample = _newton_cell(nd, mu, eta, prev_orbit)
        if sample is None:
            if prev_orbit is not None:
                # the old orbit still exists but repels: step off it
                x_next = x_next + SEED_KICK * (1.0 + np.max(np.abs(x_next)))
            sample = _iterate_cell(m, mu, eta, x_next, n_transient, n_sample, escape_radius)
        cells.append(sample)
        if sample.period is not None:
            prev_orbit = _Orbit(sample.states.copy(), _itinerary(sample.states))
        else:
            prev_orbit = None
        if not sample.escaped and len(sample.states):
            x_next = sample.states[-1].copy()
    transitions = []
    for i in range(len(mu_grid) - 1):
        a, b = cells[i], cells[i + 1]
        if a.classification == b.classification and (a.period is None or np.allclose(
                np.sort(a.states[:, 0]), np.sort(b.states[:, 0]), atol=0.05)):
            continue
        lo, hi = float(mu_grid[i]), float(mu_grid[i + 1])
        mu_t, kind = 0.5 * (lo + hi), "attractor_change"
        if refine:
            if a.period is not None:
                orbit = _Orbit(a.states, _itinerary(a.states))
                mu_t, kind = _refine_periodic(nd, eta, orbit, lo, hi, a.classification)
            elif b.period is not None:
                orbit = _Orbit(b.states, _itinerary(b.states))
                mu_t, kind = _refine_periodic(nd, eta, orbit, hi, lo, b.classification)
            elif not a.escaped:
                mu_t = _refine_by_class(m, eta, a.states[-1], lo, hi, a.classification,
                                        n_transient, n_sample, escape_radius)
                kind = "escape" if b.escaped else "attractor_change"
            else:
                mu_t = _refine_by_class(m, eta, b.states[-1], hi, lo, b.classification,
                                        n_transient, n_sample, escape_radius)
                kind = "escape"
        transitions.append(Transition(branch, kind, lo, hi, float(mu_t),
                                      a.classification, b.classification))
    return cells, transitions


def sweep_1param(m: PwsMap, eta_fixed: float, mu_grid, x_seeds=None, n_transient: int = 2000,
                 n_sample: int = 1000, escape_radius: float = DEFAULT_ESCAPE_RADIUS,
                 refine: bool = True) -> SweepResult:
    """Attractor diagram along ``mu`` at fixed ``eta``, one branch per seed.

    Each branch is continued from cell to cell: a periodic attractor is
    Newton-continued while it stays admissible and stable, otherwise the map
    is iterated from the previous attractor. Transitions between cells are
    root-found rather than left at grid resolution.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    if np.any(np.diff(mu_grid) <= 0):
        raise ValueError("mu_grid must be strictly increasing")
    if x_seeds is None:
        x0 = np.zeros(m.dim)
        x0[0] = -1e-2
        x_seeds = [x0]
    samples, transitions = [], []
    for k, seed in enumerate(x_seeds):
        cells, trans = _sweep_branch(m, eta_fixed, mu_grid, seed, n_transient, n_sample,
                                     escape_radius, refine, k)
        samples.append(cells)
        transitions += trans
    return SweepResult(float(eta_fixed), mu_grid, samples, transitions)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    v = complex(v)
    return repr(v.real) if v.imag == 0 else f"{v.real!r}{v.imag:+.17g}j"


def write_curves_csv(curves: list[BifurcationCurve], path, special_path=None):
    width = max((len(p.state) for c in curves for p in c.points), default=0)
    mwidth = max((len(p.multipliers) for c in curves for p in c.points), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "side", "index", "mu", "eta"] + [f"state{i}" for i in range(width)]
                   + [f"multiplier{i}" for i in range(mwidth)] + ["admissible", "residual"])
        for c in curves:
            for i, p in enumerate(c.points):
                st = [repr(float(v)) for v in p.state] + [""] * (width - len(p.state))
                mu_ = [_fmt(v) for v in p.multipliers] + [""] * (mwidth - len(p.multipliers))
                w.writerow([c.kind, c.side, i, repr(p.mu), repr(p.eta)] + st + mu_
                           + [int(p.admissible), f"{p.residual:.3e}"])
    if special_path is not None:
        with open(special_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "side", "type", "mu", "eta", "residual", "detail"])
            for c in curves:
                for s in c.special_points:
                    w.writerow([c.kind, c.side, s.type, repr(s.mu), repr(s.eta),
                                f"{s.residual:.3e}", s.detail])


def write_sweep_csv(result: SweepResult, path, transitions_path=None):
    dim = next((len(s.states[0]) for cells in result.samples for s in cells if len(s.states)), 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "eta", "branch_index"] + [f"x{i}" for i in range(dim)]
                   + ["classification", "lyapunov"])
        for b, cells in enumerate(result.samples):
            for mu, s in zip(result.mu_grid, cells):
                lyap = "" if s.lyapunov is None else repr(float(s.lyapunov))
                if len(s.states) == 0:
                    w.writerow([repr(float(mu)), repr(result.eta), b] + [""] * dim + [s.classification, lyap])
                for st in s.states:
                    w.writerow([repr(float(mu)), repr(result.eta), b] + [repr(float(v)) for v in st]
                               + [s.classification, lyap])
    if transitions_path is not None:
        with open(transitions_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["branch_index", "kind", "mu", "mu_lo", "mu_hi", "before", "after"])
            for t in result.transitions:
                w.writerow([t.branch, t.kind, repr(t.mu), repr(t.mu_lo), repr(t.mu_hi), t.before, t.after])


def write_plot_recipe(path, files: dict[str, str], kind: str):
    """Generic plotting recipe: data files plus line-style conventions."""
    recipe = {
        "figure": kind,
        "files": files,
        "style": {
            "PD_fixed": {"color": "blue"},
            "SN_twocycle": {"color": "red"},
            "BC_twocycle": {"color": "black"},
            "BC_fixed": {"color": "black"},
            "admissible": {"linestyle": "solid"},
            "virtual": {"linestyle": "dashed"},
            "stable": {"linestyle": "solid"},
            "unstable": {"linestyle": "dashed"},
        },
        "axes": {"x": "mu", "y": "eta" if kind == "curves" else "x0"},
    }
    with open(path, "w") as fh:
        json.dump(recipe, fh, indent=2, sort_keys=True)
