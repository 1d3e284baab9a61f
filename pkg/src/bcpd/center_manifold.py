"""Center-manifold reduction of an N-dimensional left half-map.

The manifold is written as a graph over ``s = e_1^T x``::

    x = H(s; mu, eta),   e_1^T H = s,

and the reduced map ``s -> r(s; mu, eta)`` follows from the invariance
equation ``H(r(s)) = f_L(H(s))``. Both are expanded as truncated power series
in ``(s, mu, eta)`` and solved monomial by monomial; each step is a bordered
linear system ``[[lambda^a I - A, v], [e_1^T, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionsNotMet, ResonantMonomial
from .linalg_bc import adjugate
from .poly import (Poly2, series_eval, series_from_tables, series_monomials, series_mul,
                   series_truncate, series_zeros)
from .pws_map import HalfMapSeries1D, HalfMapSeriesND, PwsMap
from .second_iterate import rl_admissibility_sign
from .unfolding1d import UnfoldingReport, report_from_half

COND_TOL = 1e-8
RESONANCE_TOL = 1e-10
ORDER = 3


@dataclass
class ConditionRecord:
    """Reduction conditions (i)-(v) with their numeric margins."""

    eigenvalue: float
    simple: bool
    other_margin: float  # distance of the remaining spectrum to the unit circle
    rho_b: float
    d_lambda_d_eta: float
    e1_v: float  # |e_1^T v| for unit-norm v
    det_I_minus_ALAR: float

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "i": self.simple and abs(self.eigenvalue + 1.0) <= COND_TOL and self.other_margin > COND_TOL,
            "ii": abs(self.rho_b) > COND_TOL,
            "iii": abs(self.d_lambda_d_eta) > COND_TOL,
            "iv": self.e1_v > COND_TOL,
            "v": abs(self.det_I_minus_ALAR) > COND_TOL,
        }

    def failed(self, which: str = "i ii iii iv v") -> list[str]:
        return [k for k in which.split() if not self.checks[k]]

    def to_record(self) -> dict:
        rec = dict(self.__dict__)
        rec.update({f"cond_{k}": v for k, v in self.checks.items()})
        return rec


def _left_right_eig(A: np.ndarray):
    w, V = np.linalg.eig(A)
    k = int(np.argmin(np.abs(w + 1.0)))
    v = np.real(V[:, k])
    wl, U = np.linalg.eig(A.T)
    kl = int(np.argmin(np.abs(wl - w[k])))
    u = np.real(U[:, kl])
    return w, k, v, u


def check_conditions(m: PwsMap) -> ConditionRecord:
    nd = m.as_nd()
    A_L = nd.left.linear_part(0.0, 0.0)
    A_R = nd.right.linear_part(0.0, 0.0)
    b0 = nd.left.offset(0.0, 0.0)
    n = A_L.shape[0]
    I = np.eye(n)
    w, k, v, u = _left_right_eig(A_L)
    near = np.abs(w + 1.0) <= 1e-6
    others = np.delete(w, k)
    margin = float(np.min(np.abs(np.abs(others) - 1.0))) if others.size else np.inf
    dA = nd.left.d_eta_linear_part(0.0, 0.0)
    dlam = float(u @ dA @ v / (u @ v)) if abs(u @ v) > 0 else 0.0
    return ConditionRecord(
        eigenvalue=float(w[k].real),
        simple=bool(np.count_nonzero(near) == 1 and abs(w[k].imag) < 1e-12),
        other_margin=margin,
        rho_b=float(adjugate(I - A_L)[0] @ b0),
        d_lambda_d_eta=dlam,
        e1_v=float(abs(v[0]) / np.linalg.norm(v)),
        det_I_minus_ALAR=float(np.linalg.det(I - A_L @ A_R)),
    )


# ---------------------------------------------------------------------------
# series arithmetic for the invariance equation
# ---------------------------------------------------------------------------


def _mu_series(order: int) -> np.ndarray:
    out = series_zeros(order)
    out[0, 1, 0] = 1.0
    return out


def _apply_half(half: HalfMapSeriesND, H: np.ndarray, order: int) -> np.ndarray:
    """``f_L(H)`` as a series, ``H`` of shape ``(n,) + (order+1,)*3``."""
    n = half.n
    b = series_from_tables(half.b, order)
    A = series_from_tables(half.A, order)
    out = series_mul(_mu_series(order), b, order)
    for k in range(n):
        for l in range(n):
            out[k] += series_mul(A[k, l], H[l], order)
    if half.Q is not None or half.C is not None:
        HH = [[series_mul(H[i], H[j], order) for j in range(n)] for i in range(n)]
    if half.Q is not None:
        Q = series_from_tables(half.Q, order)
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    if np.any(Q[k, i, j]):
                        out[k] += series_mul(Q[k, i, j], HH[i][j], order)
    if half.C is not None:
        C = series_from_tables(half.C, order)
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    for l in range(n):
                        if np.any(C[k, i, j, l]):
                            out[k] += series_mul(C[k, i, j, l], series_mul(HH[i][j], H[l], order), order)
    return out


def _compose(H: np.ndarray, r: np.ndarray, order: int) -> np.ndarray:
    """``H(r(s, mu, eta), mu, eta)``."""
    powers = [series_zeros(order)]
    powers[0][0, 0, 0] = 1.0
    for _ in range(order):
        powers.append(series_mul(powers[-1], r, order))
    out = np.zeros_like(H)
    for a, b, c in series_monomials(order):
        coeff = H[..., a, b, c]
        if not np.any(coeff):
            continue
        shifted = np.zeros_like(powers[a])
        shifted[:, b:, c:] = powers[a][:, : order + 1 - b, : order + 1 - c]
        out += coeff[..., None, None, None] * series_truncate(shifted, order)
    return series_truncate(out, order)


def _solve_order(half: HalfMapSeriesND, lam: float, v: np.ndarray, order: int):
    n = half.n
    A0 = half.linear_part(0.0, 0.0)
    H = series_zeros(order, (n,))
    r = series_zeros(order)
    H[:, 1, 0, 0] = v
    r[1, 0, 0] = lam
    e1 = np.zeros(n)
    e1[0] = 1.0
    cond = 1.0
    monos = sorted((m for m in series_monomials(order) if sum(m) >= 1 and m != (1, 0, 0)),
                   key=lambda m: (sum(m), -m[0]))
    for m in monos:
        res = (_compose(H, r, order) - _apply_half(half, H, order))[(slice(None),) + m]
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = lam ** m[0] * np.eye(n) - A0
        M[:n, n] = v
        M[n, :n] = e1
        c = np.linalg.cond(M)
        if not np.isfinite(c) or 1.0 / c < RESONANCE_TOL:
            raise ResonantMonomial(f"homological system for s^{m[0]} mu^{m[1]} eta^{m[2]} is singular")
        cond = max(cond, c)
        sol = np.linalg.solve(M, np.concatenate([-res, [0.0]]))
        H[(slice(None),) + m] = sol[:n]
        r[m] = sol[n]
    return H, r, cond


def _poly_from_series(r: np.ndarray, a: int, shift_mu: int = 0, deg: int = 2) -> Poly2:
    order = r.shape[-1] - 1
    c = np.zeros((deg + 1, deg + 1))
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            if a + i + shift_mu + j <= order:
                c[i, j] = r[a, i + shift_mu, j]
    return Poly2(c, deg)


def reduced_half(r: np.ndarray) -> HalfMapSeries1D:
    """1D half-map ``mu b + a s + p s^2 + q s^3`` read off the reduced series."""
    return HalfMapSeries1D(b=_poly_from_series(r, 0, shift_mu=1), a=_poly_from_series(r, 1),
                           p=_poly_from_series(r, 2), q=_poly_from_series(r, 3))


@dataclass
class CenterManifoldResult:
    lam: float
    v: np.ndarray
    d_lambda_d_eta: float
    phi: np.ndarray
    zeta: np.ndarray
    H: np.ndarray  # series coefficients H[k, a, b, c] of s^a mu^b eta^c
    r: np.ndarray  # reduced map series in the original (s, mu, eta)
    reduced: HalfMapSeries1D  # hatted coordinates
    reduced_user: HalfMapSeries1D  # original coordinates
    mu_hat_scale: float
    eta_hat_scale: float
    conditions: ConditionRecord
    cond_number: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def H2(self) -> dict[str, np.ndarray]:
        names = {(2, 0, 0): "s2", (1, 1, 0): "smu", (1, 0, 1): "seta",
                 (0, 2, 0): "mu2", (0, 1, 1): "mueta", (0, 0, 2): "eta2"}
        return {name: self.H[(slice(None),) + m].copy() for m, name in names.items()}

    @property
    def c0(self) -> float:
        return float(self.reduced.p[0, 0] ** 2 + self.reduced.q[0, 0])

    def manifold(self, s, mu, eta, order: int = ORDER) -> np.ndarray:
        """Point ``H(s; mu, eta)`` from the series truncated at ``order``."""
        return np.moveaxis(series_eval(series_truncate(self.H, order), s, mu, eta), 0, -1)

    def reduced_map(self, s, mu, eta, order: int = ORDER):
        return series_eval(series_truncate(self.r, order), s, mu, eta)

    def invariance_residual(self, half: HalfMapSeriesND, s, mu, eta, order: int = 2) -> float:
        """``|H(r(s)) - f_L(H(s))|`` with ``H`` and ``r`` truncated at ``order``."""
        x = self.manifold(s, mu, eta, order)
        lhs = self.manifold(self.reduced_map(s, mu, eta, order), mu, eta, order)
        rhs = half(x, mu, eta)
        return float(np.max(np.abs(lhs - rhs)))

    def coefficient_table(self) -> list[tuple[str, float]]:
        """Nonzero coefficients of the reduced map in hatted variables."""
        rows = []
        red = self.reduced
        for s_deg, name, poly, shift in ((0, "", red.b, 1), (1, "s", red.a, 0),
                                         (2, "s^2", red.p, 0), (3, "s^3", red.q, 0)):
            for i in range(poly.deg + 1):
                for j in range(poly.deg + 1 - i):
                    c = poly[i, j]
                    if c == 0.0 or s_deg + i + shift + j > ORDER:
                        continue
                    parts = [p for p in (name,
                                         f"mu^{i + shift}" if i + shift > 1 else "mu" if i + shift == 1 else "",
                                         f"eta^{j}" if j > 1 else "eta" if j == 1 else "") if p]
                    rows.append(("*".join(parts) or "1", float(c)))
        return rows

    def to_record(self) -> dict:
        rec = {"lambda": self.lam, "d_lambda_d_eta": self.d_lambda_d_eta,
               "mu_hat_scale": self.mu_hat_scale, "eta_hat_scale": self.eta_hat_scale,
               "c0": self.c0, "cond_number": self.cond_number}
        for name, vec in (("v", self.v), ("phi", self.phi), ("zeta", self.zeta)):
            rec.update({f"{name}_{i}": float(x) for i, x in enumerate(vec)})
        for key, vec in self.H2.items():
            rec.update({f"H_{key}_{i}": float(x) for i, x in enumerate(vec)})
        rec.update({f"coef[{k}]": c for k, c in self.coefficient_table()})
        rec.update(self.conditions.to_record())
        return rec


def reduce(m: PwsMap, order: int = ORDER) -> CenterManifoldResult:
    """Center-manifold reduction of the left half-map at ``mu = eta = 0``."""
    nd = m.as_nd()
    conds = check_conditions(nd)
    failed = conds.failed("i ii iii iv")
    if failed:
        raise PreconditionsNotMet([f"condition ({k})" for k in failed])
    half = nd.left
    n = half.n
    A0 = half.linear_part(0.0, 0.0)
    b0 = half.offset(0.0, 0.0)
    w, k, v, _ = _left_right_eig(A0)
    v = v / v[0]
    lam = float(w[k].real)
    H, r, cond = _solve_order(half, lam, v, order)
    phi = np.linalg.solve(np.eye(n) - A0, b0)
    zeta = phi - phi[0] * v
    kappa = float(r[0, 1, 0])
    lam_eta = float(r[1, 0, 1])
    user = reduced_half(r)
    hatted = user.reparameterized(1.0 / kappa, 1.0 / lam_eta)
    return CenterManifoldResult(
        lam=lam, v=v, d_lambda_d_eta=conds.d_lambda_d_eta, phi=phi, zeta=zeta,
        H=H, r=r, reduced=hatted, reduced_user=user, mu_hat_scale=kappa,
        eta_hat_scale=lam_eta, conditions=conds, cond_number=float(cond))


def effective_a0R(m: PwsMap) -> float:
    """``a_0^(R)`` analogue: minus the dominant eigenvalue of ``A_L A_R`` at the origin.

    In 1D ``a_L a_R = -a_R`` at the codimension-two point, so this reproduces
    the right slope exactly.
    """
    nd = m.as_nd()
    P = nd.left.linear_part(0.0, 0.0) @ nd.right.linear_part(0.0, 0.0)
    w = np.linalg.eigvals(P)
    lead = w[int(np.argmax(np.abs(w)))]
    return float(-lead.real)


@dataclass
class NDUnfolding:
    report: UnfoldingReport  # hatted h-curves, with user scales attached
    reduction: CenterManifoldResult
    rl_sign: int | None
    a0R_effective: float

    def h1_user(self) -> tuple[float, float]:
        from .unfolding1d import user_coefficients
        return user_coefficients(self.report, 1)

    def h2_user(self) -> tuple[float, float]:
        from .unfolding1d import user_coefficients
        return user_coefficients(self.report, 2)

    def to_record(self) -> dict:
        rec = self.report.to_record()
        rec.update(rl_sign=self.rl_sign, a0R_effective=self.a0R_effective,
                   mu_hat_scale=self.reduction.mu_hat_scale,
                   eta_hat_scale=self.reduction.eta_hat_scale)
        return rec


def nd_unfold(m: PwsMap) -> NDUnfolding:
    """Unfolding data of an ND map via its reduced 1D left half-map."""
    red = reduce(m)
    a0R = effective_a0R(m)
    report = report_from_half(red.reduced, a0R, red.mu_hat_scale, red.eta_hat_scale)
    try:
        sign = rl_admissibility_sign(m) if red.conditions.checks["v"] else None
    except Exception:
        sign = None
    return NDUnfolding(report, red, sign, a0R)
