"""Border-collision linear algebra: half-map fixed points, the shared
adjugate row, admissibility and Feigin's classification at ``mu = 0``."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContinuityError, NoConvergence, SingularLinearization
from .pws_map import LEFT, RIGHT, HalfMap, PwsMap

EIG_TOL = 1e-8
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50


def _cofactor_adjugate(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1))
    adj = np.empty_like(M)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, i, axis=0), j, axis=1)
            adj[j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def adjugate(M) -> np.ndarray:
    """Classical adjoint, ``adj(M) @ M = det(M) I``; defined as 1 for 1x1."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("adjugate needs a square matrix")
    n = M.shape[0]
    if n <= 4:
        return _cofactor_adjugate(M)
    if np.linalg.cond(M) > 1e10:
        return _cofactor_adjugate(M)
    return np.linalg.det(M) * np.linalg.inv(M)


def varrho(A_L, A_R, tol: float = 1e-10) -> np.ndarray:
    """First row of ``adj(I - A_L)``, checked against ``adj(I - A_R)``."""
    A_L = np.atleast_2d(np.asarray(A_L, dtype=float))
    A_R = np.atleast_2d(np.asarray(A_R, dtype=float))
    n = A_L.shape[0]
    if n > 1 and not np.allclose(A_L[:, 1:], A_R[:, 1:], rtol=0, atol=tol):
        raise ContinuityError(["A_L and A_R differ outside column 1"])
    rho_l = adjugate(np.eye(n) - A_L)[0]
    rho_r = adjugate(np.eye(n) - A_R)[0]
    scale = 1.0 + np.max(np.abs(rho_l))
    if np.max(np.abs(rho_l - rho_r)) > tol * scale:
        raise ContinuityError([f"adjugate rows differ by {np.max(np.abs(rho_l - rho_r)):.3g}"])
    return rho_l


@dataclass
class FixedPointResult:
    x_star: np.ndarray
    s_star: float
    side: str
    admissible: bool
    multipliers: np.ndarray
    residual: float


def _linear_data(half: HalfMap, mu, eta):
    return half.offset(mu, eta), half.linear_part(mu, eta)


def half_fixed_point(half: HalfMap, side: str, mu: float, eta: float) -> FixedPointResult:
    """Fixed point of one half-map near the origin, refined by Newton."""
    b0, A0 = _linear_data(half, 0.0, eta)
    n = A0.shape[0]
    eig = np.linalg.eigvals(A0)
    if np.min(np.abs(eig - 1.0)) < EIG_TOL:
        raise SingularLinearization(f"A_{side}(0, {eta}) has an eigenvalue at 1")
    x = np.linalg.solve(np.eye(n) - A0, b0) * mu
    fz = half.to_nd().freeze(mu, eta)
    for _ in range(NEWTON_MAXITER):
        r = fz.f(x) - x
        if np.max(np.abs(r)) <= NEWTON_TOL:
            break
        x = x - np.linalg.solve(fz.jac(x) - np.eye(n), r)
    else:
        r = fz.f(x) - x
        if np.max(np.abs(r)) > NEWTON_TOL:
            raise NoConvergence(f"fixed point of {side} half-map: residual {np.max(np.abs(r)):.3g}")
    residual = float(np.max(np.abs(fz.f(x) - x)))
    mults = np.linalg.eigvals(fz.jac(x))
    s = float(x[0])
    admissible = s <= 0 if side == LEFT else s >= 0
    return FixedPointResult(x, s, side, bool(admissible), mults, residual)


def s_star_slope(half: HalfMap, side: str = LEFT) -> float:
    """``d s*/d mu`` at the origin: ``rho^T b / det(I - A)``."""
    b0, A0 = _linear_data(half, 0.0, 0.0)
    n = A0.shape[0]
    d = np.linalg.det(np.eye(n) - A0)
    if abs(d) < EIG_TOL:
        raise SingularLinearization(f"I - A_{side}(0,0) is singular")
    rho = adjugate(np.eye(n) - A0)[0]
    return float(rho @ b0 / d)


@dataclass
class FeiginReport:
    sigma_plus_L: int
    sigma_plus_R: int
    sigma_minus_L: int
    sigma_minus_R: int
    fixed_point_scenario: str
    two_cycle_exists: bool
    degenerate_flags: list[str] = field(default_factory=list)
    eta: float = 0.0

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["degenerate_flags"] = ";".join(self.degenerate_flags)
        return rec


def _count(eig: np.ndarray, label: str, flags: list[str]) -> tuple[int, int]:
    plus = minus = 0
    for lam in eig:
        real = abs(lam.imag) <= 1e-12 * max(1.0, abs(lam))
        if abs(abs(lam) - 1.0) <= EIG_TOL:
            flags.append(f"{label} eigenvalue {complex(lam):.6g} on unit circle")
            continue
        if real and lam.real > 1.0:
            plus += 1
        elif real and lam.real < -1.0:
            minus += 1
    return plus, minus


def feigin_classify(m: PwsMap, eta: float = 0.0) -> FeiginReport:
    """Feigin's classification of the border collision at ``mu = 0``."""
    b0 = m.left.offset(0.0, eta)
    A_L = m.left.linear_part(0.0, eta)
    A_R = m.right.linear_part(0.0, eta)
    n = A_L.shape[0]
    I = np.eye(n)
    flags: list[str] = []
    pL, mL = _count(np.linalg.eigvals(A_L), "A_L", flags)
    pR, mR = _count(np.linalg.eigvals(A_R), "A_R", flags)
    for label, M in (("I - A_L", I - A_L), ("I - A_R", I - A_R), ("I - A_L A_R", I - A_L @ A_R)):
        if abs(np.linalg.det(M)) < EIG_TOL:
            flags.append(f"{label} singular")
    rho = adjugate(I - A_L)[0]
    if abs(rho @ b0) < EIG_TOL:
        flags.append("rho^T b = 0")
    scenario = "Persistence" if (pL + pR) % 2 == 0 else "NonsmoothFold"
    return FeiginReport(pL, pR, mL, mR, scenario, (mL + mR) % 2 == 1, flags, float(eta))


def sides_admissible(m: PwsMap, mu: float, eta: float) -> dict[str, FixedPointResult]:
    """Admissible half-map fixed points at ``(mu, eta)`` keyed by side."""
    out = {}
    for side in (LEFT, RIGHT):
        fp = half_fixed_point(m.half(side), side, mu, eta)
        if fp.admissible:
            out[side] = fp
    return out

