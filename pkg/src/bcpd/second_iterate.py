"""Two-cycles near the period-doubling / border-collision point.

Two itineraries matter: ``LL`` (both points left of the switching manifold,
born in the period doubling) and ``RL`` (one point on each side, born in the
border collision at ``mu = 0``). Cycles are computed by Newton's method on the
branch composition, then their signs are checked against the itinerary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._newton import newton
from .errors import ConfigurationError, NoConvergence, WrongItinerary, ZeroSign
from .linalg_bc import half_fixed_point
from .pws_map import LEFT, RIGHT, HalfMapSeries1D, PwsMap
from .unfolding1d import h1_curve, h2_curve, unfold

SIGN_TOL = 1e-12
COLLAPSE_TOL = 1e-9


@dataclass
class TwoCycle:
    points: np.ndarray  # shape (2, n): x0 and x1 = f(x0)
    itinerary: str
    multipliers: np.ndarray
    admissible: bool
    residual: float

    @property
    def stable(self) -> bool:
        return bool(np.max(np.abs(self.multipliers)) < 1.0)

    def to_record(self) -> dict:
        rec = {"itinerary": self.itinerary, "admissible": self.admissible,
               "residual": self.residual, "stable": self.stable}
        for k, pt in enumerate(self.points):
            for i, v in enumerate(pt):
                rec[f"x{k}_{i}"] = float(v)
        for i, lam in enumerate(self.multipliers):
            rec[f"multiplier_{i}"] = complex(lam).real if abs(complex(lam).imag) < 1e-14 else str(complex(lam))
        return rec


def _check_1d(m: PwsMap):
    if m.dim != 1 or not isinstance(m.left, HalfMapSeries1D):
        raise ConfigurationError("this operation needs a one-dimensional map")


def g_function(m: PwsMap, mu, eta):
    """``f_L(f_L(0)) / mu``, evaluated without dividing by ``mu``."""
    _check_1d(m)
    L = m.left
    b, a, p, q = L.b(mu, eta), L.a(mu, eta), L.p(mu, eta), L.q(mu, eta)
    return b * (1.0 + a + mu * b * p + mu**2 * b**2 * q)


def h2_numeric(m: PwsMap, mu: float, width: float | None = None) -> float:
    """Root ``eta`` of ``f_L^2(0; mu, eta) = 0`` near the quadratic prediction."""
    _check_1d(m)
    report = unfold(m)
    guess = h2_curve(report, mu, validity_radius=np.inf)
    w = width if width is not None else max(abs(mu), 1e-6) / abs(report.eta_scale)
    fn = lambda e: g_function(m, mu, e)
    for _ in range(60):
        lo, hi = guess - w, guess + w
        if fn(lo) * fn(hi) <= 0:
            return float(brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
        w *= 2
    raise NoConvergence(f"no sign change of g(mu={mu}, eta) around {guess}")


@dataclass
class F2LocalForm:
    left_slope: float
    right_slope: float
    eta_hat_coeff: float
    eta: float


def f2_local_form(m: PwsMap, mu: float) -> F2LocalForm:
    """One-sided slopes of the second iterate at ``x = 0`` on ``eta = h2(mu)``."""
    _check_1d(m)
    eta = 0.0 if mu == 0 else h2_numeric(m, mu)
    fz = m.at(mu, eta)
    y = fz.left.f(0.0)
    left_slope = fz.left.df(y) * fz.left.df(0.0)
    y_r = fz.right.f(0.0)
    side = fz.left if y_r <= 0 else fz.right
    right_slope = side.df(y_r) * fz.right.df(0.0)
    eta_coeff = m.left.d_eta(y, mu, eta) + fz.left.df(y) * m.left.d_eta(0.0, mu, eta)
    return F2LocalForm(float(left_slope), float(right_slope), float(eta_coeff), float(eta))


def _composite(fz, itinerary: str):
    first, second = fz.half(itinerary[0]), fz.half(itinerary[1])

    def G(x):
        return second.f(first.f(x)) - x

    def J(x):
        return second.jac(first.f(x)) @ first.jac(x) - np.eye(x.size)

    return G, J


def _signs_ok(points: np.ndarray, itinerary: str) -> bool:
    for pt, side in zip(points, itinerary):
        s = pt[0]
        if side == LEFT and s > SIGN_TOL:
            return False
        if side == RIGHT and s < -SIGN_TOL:
            return False
    return True


def rl_seed(m: PwsMap, mu: float, eta: float) -> np.ndarray:
    """Linear predictor of the right-hand point of the RL cycle."""
    nd = m.as_nd()
    A_L = nd.left.linear_part(0.0, eta)
    A_R = nd.right.linear_part(0.0, eta)
    b = nd.left.offset(0.0, eta)
    I = np.eye(A_L.shape[0])
    return np.linalg.solve(I - A_L @ A_R, (I + A_L) @ b) * mu


def _ll_seeds(m: PwsMap, mu: float, eta: float, c0: float | None) -> list[np.ndarray]:
    fp = half_fixed_point(m.left, LEFT, mu, eta)
    nd = m.as_nd()
    J = nd.left.jacobian(fp.x_star, mu, eta)
    w, V = np.linalg.eig(J)
    k = int(np.argmin(np.abs(w + 1.0)))
    v = np.real(V[:, k])
    v = v / (v[0] if abs(v[0]) > 1e-12 else np.linalg.norm(v))
    eps = abs(w[k].real + 1.0)
    if m.dim == 1 and c0 is None:
        try:
            c0 = unfold(m).c0
        except Exception:
            c0 = None
    amps = [np.sqrt(eps / abs(c0))] if c0 else []
    amps += [np.sqrt(eps) * f for f in (1.0, 0.3, 3.0)]
    seeds = []
    for amp in amps:
        seeds += [fp.x_star - amp * v, fp.x_star + amp * v]
    return seeds


def find_two_cycle(m: PwsMap, mu: float, eta: float, itinerary: str, seed=None,
                   c0: float | None = None, require_admissible: bool = False) -> TwoCycle:
    """Newton solution of the two-cycle with the given itinerary (``LL`` or ``RL``).

    The returned cycle may be virtual (``admissible=False``) unless
    ``require_admissible`` is set, in which case a sign mismatch raises
    :class:`WrongItinerary`.
    """
    if itinerary not in ("LL", "RL"):
        raise ConfigurationError("itinerary must be 'LL' or 'RL'")
    nd = m.as_nd()
    fz = nd.at(mu, eta)
    G, J = _composite(fz, itinerary)
    if seed is not None:
        seeds = [np.atleast_1d(np.asarray(seed, dtype=float))]
    elif itinerary == "RL":
        seeds = [rl_seed(m, mu, eta)]
    else:
        seeds = _ll_seeds(m, mu, eta, c0)
    last = None
    for x0 in seeds:
        x, res, ok = newton(G, x0, J, tol=1e-13, maxiter=60)
        if not ok:
            last = f"residual {res:.3g}"
            continue
        x1 = fz.half(itinerary[0]).f(x)
        if np.max(np.abs(x1 - x)) <= COLLAPSE_TOL * (1.0 + np.max(np.abs(x))):
            last = "collapsed onto a fixed point"
            continue
        points = np.stack([x, x1])
        mults = np.linalg.eigvals(J(x) + np.eye(x.size))
        residual = float(np.max(np.abs(fz.half(itinerary[1]).f(x1) - x)))
        admissible = _signs_ok(points, itinerary)
        if require_admissible and not admissible:
            raise WrongItinerary(
                f"{itinerary} cycle found with s-values {points[:, 0]} (virtual)")
        return TwoCycle(points, itinerary, mults, admissible, residual)
    raise NoConvergence(f"no {itinerary} two-cycle at mu={mu}, eta={eta}: {last}")


def rl_admissibility_value(m: PwsMap, h: float = 1e-6) -> float:
    """``det(I - A_L) d/deta det(I + A_L) / det(I - A_L A_R)`` at the origin."""
    nd = m.as_nd()
    A_L = nd.left.linear_part(0.0, 0.0)
    A_R = nd.right.linear_part(0.0, 0.0)
    I = np.eye(A_L.shape[0])
    dplus = (np.linalg.det(I + nd.left.linear_part(0.0, h))
             - np.linalg.det(I + nd.left.linear_part(0.0, -h))) / (2 * h)
    return float(np.linalg.det(I - A_L) * dplus / np.linalg.det(I - A_L @ A_R))


def rl_admissibility_sign(m: PwsMap) -> int:
    """Sign ``sigma``: the RL cycle is admissible for ``mu_hat <= 0`` and
    ``sigma * (eta - h2) <= 0``, with ``eta`` the unscaled parameter."""
    val = rl_admissibility_value(m)
    if not np.isfinite(val) or abs(val) <= 1e-10:
        raise ZeroSign("RL admissibility expression vanishes")
    return 1 if val > 0 else -1


def _ll_bc_system(nd: PwsMap, mu: float):
    n = nd.dim

    def F(z):
        x0 = np.concatenate([[0.0], z[: n - 1]])
        eta = z[-1]
        fz = nd.at(mu, eta)
        return fz.left.f(fz.left.f(x0)) - x0

    return F


def h2_numeric_nd(m: PwsMap, mu: float, eta_seed: float, y_seed=None) -> tuple[float, np.ndarray]:
    """``eta`` where the LL cycle touches ``s = 0`` at fixed ``mu`` (any dimension).

    Returns ``(eta, x0)`` with ``x0`` the cycle point on the switching manifold.
    """
    nd = m.as_nd()
    n = nd.dim
    if n == 1:
        return h2_numeric(m, mu), np.zeros(1)
    y0 = np.zeros(n - 1) if y_seed is None else np.asarray(y_seed, dtype=float)
    z, res, ok = newton(_ll_bc_system(nd, mu), np.concatenate([y0, [eta_seed]]), tol=1e-13)
    if not ok:
        raise NoConvergence(f"LL border-collision system did not converge (residual {res:.3g})")
    return float(z[-1]), np.concatenate([[0.0], z[:-1]])


def h1_numeric(m: PwsMap, mu: float, eta_seed: float | None = None) -> float:
    """``eta`` where the left fixed point has multiplier -1 at fixed ``mu``."""
    nd = m.as_nd()
    n = nd.dim
    if eta_seed is None:
        eta_seed = h1_curve(unfold(m), mu, validity_radius=np.inf)

    def F(z):
        x, eta = z[:n], z[n]
        fz = nd.left.freeze(mu, eta)
        return np.concatenate([fz.f(x) - x, [np.linalg.det(fz.jac(x) + np.eye(n))]])

    x0 = half_fixed_point(m.left, LEFT, mu, eta_seed).x_star
    z, res, ok = newton(F, np.concatenate([x0, [eta_seed]]), tol=1e-13)
    if not ok:
        raise NoConvergence(f"period-doubling system did not converge (residual {res:.3g})")
    return float(z[n])
