"""Unfolding of the simultaneous border-collision / period-doubling point of a
one-dimensional piecewise-smooth map.

After normalization (``a_L(0,0) = -1``, ``b(0,0) = 1``, ``da_L/deta(0,0) = 1``)
the left half-map is written with the coefficients

    a_L = -1 + alpha1 mu + eta + alpha3 mu^2 + alpha4 mu eta + alpha5 eta^2
    b   =  1 + beta1 mu + beta2 eta
    p   = gamma0 + gamma1 mu + gamma2 eta
    q   = delta0

and every quantity below is a closed-form function of these ten numbers.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateUnfolding, SingularityMissing
from .linalg_bc import half_fixed_point
from .pws_map import LEFT, HalfMapSeries1D, PwsMap

SINGULARITY_TOL = 1e-8
C0_TOL = 1e-10
A0R_TOL = 1e-8
VALIDITY_RADIUS = 0.1


@dataclass(frozen=True)
class NormalizedCoeffs:
    alpha1: float
    alpha3: float
    alpha4: float
    alpha5: float
    beta1: float
    beta2: float
    gamma0: float
    gamma1: float
    gamma2: float
    delta0: float

    @classmethod
    def from_half(cls, half: HalfMapSeries1D) -> "NormalizedCoeffs":
        a, b, p, q = half.a, half.b, half.p, half.q
        return cls(alpha1=a[1, 0], alpha3=a[2, 0], alpha4=a[1, 1], alpha5=a[0, 2],
                   beta1=b[1, 0], beta2=b[0, 1],
                   gamma0=p[0, 0], gamma1=p[1, 0], gamma2=p[0, 1], delta0=q[0, 0])


@dataclass(frozen=True)
class PDConditions:
    singularity_ok: bool
    transversality: float
    nondegeneracy: float

    @property
    def transversality_ok(self) -> bool:
        return abs(self.transversality) > C0_TOL

    @property
    def nondegeneracy_ok(self) -> bool:
        return abs(self.nondegeneracy) > C0_TOL


@dataclass(frozen=True)
class UnfoldingReport:
    """Series data of the unfolding, in normalized coordinates.

    ``mu_scale`` and ``eta_scale`` relate them to the user's parameters:
    ``mu_norm = mu_scale * mu`` and ``eta_norm = eta_scale * eta``.
    """

    a0R: float
    c0: float
    k1: float
    k2: float
    k3: float
    h1_lin: float
    l1: float
    h2_lin: float
    l2: float
    pd_conditions: PDConditions
    panel: str
    mu_scale: float
    eta_scale: float
    coeffs: NormalizedCoeffs

    def to_record(self) -> dict:
        rec = {k: v for k, v in asdict(self).items() if k not in ("pd_conditions", "coeffs")}
        pdc = self.pd_conditions
        rec.update(singularity_ok=pdc.singularity_ok, transversality=pdc.transversality,
                   transversality_ok=pdc.transversality_ok, nondegeneracy=pdc.nondegeneracy,
                   nondegeneracy_ok=pdc.nondegeneracy_ok)
        rec.update({f"coeff_{k}": v for k, v in asdict(self.coeffs).items()})
        lin, quad = user_coefficients(self, 1)
        rec.update(h1_user_lin=lin, h1_user_quad=quad)
        lin, quad = user_coefficients(self, 2)
        rec.update(h2_user_lin=lin, h2_user_quad=quad)
        return rec


PANEL_LEGEND = {
    "A": "a0R < -1, c0 < 0",
    "B": "a0R < -1, c0 > 0",
    "C": "|a0R| < 1, c0 < 0",
    "D": "|a0R| < 1, c0 > 0",
    "E": "a0R > 1, c0 < 0 (chaos for mu < 0, eta < h2)",
    "F": "a0R > 1, c0 > 0 (chaos for mu < 0, eta < h2)",
}


def scenario_panel(a0R: float, c0: float) -> str:
    """Letter of the unfolding scenario; 'Degenerate' on the boundaries."""
    if abs(c0) <= C0_TOL or abs(a0R - 1.0) <= A0R_TOL or abs(a0R + 1.0) <= A0R_TOL:
        return "Degenerate"
    if a0R < -1.0:
        pair = "AB"
    elif a0R < 1.0:
        pair = "CD"
    else:
        pair = "EF"
    return pair[1] if c0 > 0 else pair[0]


def normalize(m: PwsMap) -> tuple[PwsMap, float, float]:
    """Rescale ``mu`` and ``eta`` so that ``b(0,0) = 1`` and ``da_L/deta(0,0) = 1``.

    Returns the rescaled map and ``(mu_scale, eta_scale)`` with
    ``mu_norm = mu_scale*mu`` and ``eta_norm = eta_scale*eta``.
    """
    if m.dim != 1 or not isinstance(m.left, HalfMapSeries1D):
        raise ConfigurationError("normalize needs a one-dimensional map")
    a00 = m.left.a[0, 0]
    if abs(a00 + 1.0) > SINGULARITY_TOL:
        raise SingularityMissing(f"a_L(0,0) = {a00:.12g}, expected -1")
    b00 = m.left.b[0, 0]
    a_eta = m.left.a[0, 1]
    if abs(b00) < SINGULARITY_TOL:
        raise DegenerateUnfolding("b(0,0) = 0: mu does not unfold the border collision")
    if abs(a_eta) < SINGULARITY_TOL:
        raise DegenerateUnfolding("da_L/deta(0,0) = 0: eta does not unfold the period doubling")
    if b00 == 1.0 and a_eta == 1.0:
        return m, 1.0, 1.0
    return m.reparameterized(1.0 / b00, 1.0 / a_eta), float(b00), float(a_eta)


def fixed_point_series(c: NormalizedCoeffs) -> tuple[float, float, float]:
    """``x*_L = mu/2 + k1 mu^2 + k2 mu eta + k3 eta^2 + O(3)``."""
    k1 = c.beta1 / 2 + c.alpha1 / 4 + c.gamma0 / 8
    k2 = (2 * c.beta2 + 1) / 4
    return k1, k2, 0.0


def l1_coefficient(c: NormalizedCoeffs) -> float:
    k1, k2, _ = fixed_point_series(c)
    L = c.alpha1 + c.gamma0
    return (-(c.alpha3 + 2 * k1 * c.gamma0 + c.gamma1 + 3 * c.delta0 / 4)
            + (c.alpha4 + 2 * k2 * c.gamma0 + c.gamma2) * L
            - c.alpha5 * L**2)


def l2_coefficient(c: NormalizedCoeffs) -> float:
    L = c.alpha1 + c.gamma0
    return (-(c.alpha1 * c.beta1 + c.alpha3 + 2 * c.beta1 * c.gamma0 + c.gamma1 + c.delta0)
            + (c.beta1 + c.alpha1 * c.beta2 + c.alpha4 + 2 * c.beta2 * c.gamma0 + c.gamma2) * L
            - (c.beta2 + c.alpha5) * L**2)


def multiplier_series(c: NormalizedCoeffs, mu, eta):
    """Second-order series for the multiplier of the left fixed point."""
    k1, k2, _ = fixed_point_series(c)
    return (-1 + (c.alpha1 + c.gamma0) * mu + eta
            + (c.alpha3 + 2 * k1 * c.gamma0 + c.gamma1 + 3 * c.delta0 / 4) * mu**2
            + (c.alpha4 + 2 * k2 * c.gamma0 + c.gamma2) * mu * eta
            + c.alpha5 * eta**2)


def pd_conditions(half: HalfMapSeries1D) -> PDConditions:
    """The three period-doubling conditions evaluated at the origin."""
    sing = abs(half.a(0.0, 0.0) + 1.0) <= SINGULARITY_TOL
    f_eta = half.d_eta(0.0, 0.0, 0.0)
    f_xx = half.dxx(0.0, 0.0, 0.0)
    f_xeta = half.a.d_eta()(0.0, 0.0)
    f_xxx = half.dxxx(0.0, 0.0, 0.0)
    transversality = f_eta * f_xx + 2.0 * f_xeta
    nondegeneracy = 0.5 * f_xx**2 + f_xxx / 3.0
    return PDConditions(bool(sing), float(transversality), float(nondegeneracy))


def report_from_half(left: HalfMapSeries1D, a0R: float, mu_scale: float = 1.0,
                     eta_scale: float = 1.0) -> UnfoldingReport:
    """Unfolding data of an already-normalized left half-map."""
    c = NormalizedCoeffs.from_half(left)
    k1, k2, k3 = fixed_point_series(c)
    lin = -(c.alpha1 + c.gamma0)
    c0 = c.gamma0**2 + c.delta0
    return UnfoldingReport(
        a0R=float(a0R), c0=float(c0), k1=k1, k2=k2, k3=k3,
        h1_lin=lin, l1=l1_coefficient(c), h2_lin=lin, l2=l2_coefficient(c),
        pd_conditions=pd_conditions(left), panel=scenario_panel(a0R, c0),
        mu_scale=float(mu_scale), eta_scale=float(eta_scale), coeffs=c)


def unfold(m: PwsMap) -> UnfoldingReport:
    """Unfolding data of a 1D map (normalizing it first)."""
    nm, mu_scale, eta_scale = normalize(m)
    return report_from_half(nm.left, nm.right.a[0, 0], mu_scale, eta_scale)


def user_coefficients(report: UnfoldingReport, which: int) -> tuple[float, float]:
    """Linear and quadratic coefficients of ``h_which`` in user coordinates."""
    lin, quad = (report.h1_lin, report.l1) if which == 1 else (report.h2_lin, report.l2)
    ms, es = report.mu_scale, report.eta_scale
    return lin * ms / es, quad * ms**2 / es


def _curve(report: UnfoldingReport, mu, which: int, validity_radius: float):
    mu_n = report.mu_scale * np.asarray(mu, dtype=float)
    if np.any(np.abs(mu_n) > validity_radius):
        warnings.warn(f"|mu| beyond the series validity radius {validity_radius}; "
                      "use continuation for accurate curves", stacklevel=3)
    lin, quad = user_coefficients(report, which)
    mu = np.asarray(mu, dtype=float)
    out = lin * mu + quad * mu**2
    return out if out.ndim else float(out)


def h1_curve(report: UnfoldingReport, mu, validity_radius: float = VALIDITY_RADIUS):
    """Quadratic predictor of the period-doubling locus ``eta = h1(mu)`` (user coordinates)."""
    return _curve(report, mu, 1, validity_radius)


def h2_curve(report: UnfoldingReport, mu, validity_radius: float = VALIDITY_RADIUS):
    """Quadratic predictor of the two-cycle border-collision locus ``eta = h2(mu)``."""
    return _curve(report, mu, 2, validity_radius)


def invert_curve(report: UnfoldingReport, eta: float, which: int = 1) -> float:
    """Smallest-magnitude root ``mu`` of the quadratic predictor ``h(mu) = eta``."""
    lin, quad = user_coefficients(report, which)
    if quad == 0.0:
        return eta / lin
    disc = lin**2 + 4 * quad * eta
    if disc < 0:
        raise ValueError(f"quadratic h{which} never reaches eta = {eta}")
    roots = [(-lin + sgn * np.sqrt(disc)) / (2 * quad) for sgn in (1, -1)]
    return float(min(roots, key=abs))


def multiplier_at_fixed_point(m: PwsMap, mu: float, eta: float) -> float:
    """Exact multiplier of the Newton-refined left fixed point."""
    fp = half_fixed_point(m.left, LEFT, mu, eta)
    return float(fp.multipliers[0].real)
