"""Brute-force dynamics of a piecewise-smooth map.

Periodic orbits are enumerated by itinerary: every primitive L/R word up to a
given length is turned into a smooth composed map and solved by multi-start
Newton (1D maps additionally get a dense sign-change scan). Chaos is
certified numerically on the trapping interval of the second iterate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from ._newton import newton
from .errors import CostGuard, Escaped, InvarianceFailed, NoConvergence, PreconditionsNotMet
from .pws_map import DEFAULT_ESCAPE_RADIUS, LEFT, RIGHT, PwsMap
from .second_iterate import h2_numeric
from .unfolding1d import VALIDITY_RADIUS, unfold

N_MAX_LIMIT = 12
RESIDUAL_TOL = 1e-10
SIGN_TOL = 1e-12
RECURRENCE_TOL = 1e-8
MAX_DETECTED_PERIOD = 64


def lyndon_words(n_max: int, alphabet: str = "LR") -> list[str]:
    """Primitive necklace representatives of length ``1..n_max`` (Duval's algorithm)."""
    k = len(alphabet)
    words = []
    w = [-1]
    while w:
        w[-1] += 1
        words.append("".join(alphabet[i] for i in w))
        m = len(w)
        while len(w) < n_max:
            w.append(w[len(w) - m])
        while w and w[-1] == k - 1:
            w.pop()
    return sorted(words, key=lambda s: (len(s), s))


def necklaces(n_max: int, alphabet: str = "LR") -> list[str]:
    """One word per rotation class, repetitions included (``LL`` carries period-2 orbits)."""
    lyndon = lyndon_words(n_max, alphabet)
    out = []
    for n in range(1, n_max + 1):
        out += [w * (n // len(w)) for w in lyndon if n % len(w) == 0]
    return out


def default_domain(mu: float) -> float:
    return max(VALIDITY_RADIUS, 3.0 * abs(mu))


@dataclass
class PeriodicOrbit:
    period: int
    points: np.ndarray  # (period, dim)
    itinerary: str
    multipliers: np.ndarray
    residual: float

    @property
    def multiplier(self):
        """Scalar multiplier in 1D, eigenvalues of the composed Jacobian otherwise."""
        if self.points.shape[1] == 1:
            return float(self.multipliers[0].real)
        return self.multipliers

    @property
    def stable(self) -> bool:
        return bool(np.max(np.abs(self.multipliers)) < 1.0)

    def key(self) -> tuple:
        return tuple(sorted(tuple(np.round(p, 9)) for p in self.points))

    def to_record(self) -> dict:
        rec = {"period": self.period, "itinerary": self.itinerary,
               "residual": self.residual, "stable": self.stable}
        for k, pt in enumerate(self.points):
            rec.update({f"x{k}_{i}": float(v) for i, v in enumerate(pt)})
        return rec


@dataclass
class OrbitSearch:
    orbits: list[PeriodicOrbit]
    unresolved: list[str] = field(default_factory=list)  # words where every seed failed

    def by_period(self, n: int) -> list[PeriodicOrbit]:
        return [o for o in self.orbits if o.period == n]


def _word_map(fz, word: str):
    halves = [fz.half(c) for c in word]

    def orbit(x):
        pts = [x]
        for h in halves[:-1]:
            pts.append(h.f(pts[-1]))
        return pts

    def G(x):
        return halves[-1].f(orbit(x)[-1]) - x

    def J(x):
        M = np.eye(x.size)
        for h, p in zip(halves, orbit(x)):
            M = h.jac(p) @ M
        return M - np.eye(x.size)

    return orbit, G, J


def _seeds(word: str, dim: int, domain: float, n_seeds: int) -> list[np.ndarray]:
    side = -1.0 if word[0] == LEFT else 1.0
    fr = (np.arange(n_seeds) + 0.5) / n_seeds
    seeds = []
    for i, t in enumerate(fr):
        x = np.zeros(dim)
        x[0] = side * t * domain
        if dim > 1:
            # deterministic spread over the remaining coordinates
            x[1:] = domain * np.sin(2.3 * (i + 1) * np.arange(1, dim))
        seeds.append(x)
    return seeds


def _scan_roots_1d(fz, word: str, domain: float, n_grid: int = 2001) -> list[np.ndarray]:
    side = -1.0 if word[0] == LEFT else 1.0
    xs = side * np.linspace(0.0, domain, n_grid)[:, None]
    y = xs.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for c in word:
            y = fz.half(c).f(y)
    g = (y - xs)[:, 0]
    xs = xs[:, 0]
    out = []
    ok = np.isfinite(g)
    for i in np.nonzero(ok[:-1] & ok[1:] & (np.sign(g[:-1]) != np.sign(g[1:])))[0]:
        out.append(np.array([0.5 * (xs[i] + xs[i + 1])]))
    return out


def _signs_match(points: np.ndarray, word: str) -> bool:
    for p, c in zip(points, word):
        if c == LEFT and p[0] > SIGN_TOL:
            return False
        if c == RIGHT and p[0] < -SIGN_TOL:
            return False
    return True


def _min_period(points: np.ndarray) -> int:
    n = len(points)
    for d in range(1, n):
        if n % d == 0 and np.max(np.abs(np.roll(points, -d, axis=0) - points)) <= 1e-9:
            return d
    return n


def search_periodic_orbits(m: PwsMap, mu: float, eta: float, n_max: int,
                           domain: float | None = None, n_min: int = 1,
                           seeds_per_word: int = 5) -> OrbitSearch:
    """Itinerary-complete multi-start search for periodic orbits in ``|x| <= domain``.

    Orbits whose minimal period is shorter than their word (a fixed point
    solving ``LL``, say) are dropped; they are found under the shorter word.
    """
    if n_max > N_MAX_LIMIT:
        raise CostGuard(f"n_max={n_max} exceeds {N_MAX_LIMIT} (2^n itineraries)")
    domain = default_domain(mu) if domain is None else domain
    nd = m.as_nd()
    dim = nd.dim
    fz = nd.at(mu, eta)
    found: dict[tuple, PeriodicOrbit] = {}
    unresolved = []
    for word in necklaces(n_max):
        if len(word) < n_min:
            continue
        orbit, G, J = _word_map(fz, word)
        seeds = _seeds(word, dim, domain, seeds_per_word)
        if dim == 1:
            seeds = _scan_roots_1d(fz, word, domain) + seeds
        any_converged = False
        for x0 in seeds:
            with np.errstate(over="ignore", invalid="ignore"):
                x, res, ok = newton(G, x0, J, tol=1e-13, maxiter=40, max_norm=10 * domain)
            if not ok:
                continue
            any_converged = True
            pts = np.array(orbit(x))
            if np.max(np.abs(pts)) > domain or not _signs_match(pts, word):
                continue
            if _min_period(pts) != len(word):
                continue
            mults = np.linalg.eigvals(J(x) + np.eye(dim))
            po = PeriodicOrbit(len(word), pts, word, mults, float(res))
            found.setdefault(po.key(), po)
        if not any_converged:
            unresolved.append(word)
    orbits = sorted(found.values(), key=lambda o: (o.period, o.itinerary, float(o.points[0, 0])))
    return OrbitSearch(orbits, unresolved)


def find_periodic_orbits(m: PwsMap, mu: float, eta: float, n_max: int,
                         domain: float | None = None) -> list[PeriodicOrbit]:
    return search_periodic_orbits(m, mu, eta, n_max, domain).orbits


# ---------------------------------------------------------------------------
# Lyapunov exponents and attractor sampling
# ---------------------------------------------------------------------------


def lyapunov_exponent(m: PwsMap, mu: float, eta: float, x0, n_transient: int = 1000,
                      n_sample: int = 20000,
                      escape_radius: float = DEFAULT_ESCAPE_RADIUS) -> float:
    """Largest Lyapunov exponent along the orbit of ``x0``."""
    nd = m.as_nd()
    fz = nd.at(mu, eta)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    for _ in range(n_transient):
        x = fz.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            raise Escaped(f"orbit escaped during the transient at mu={mu}, eta={eta}")
    u = np.ones(x.size) / math.sqrt(x.size)
    total = 0.0
    for _ in range(n_sample):
        u = fz.jac(x) @ u
        x = fz.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            raise Escaped(f"orbit escaped at mu={mu}, eta={eta}")
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return -np.inf
        total += math.log(norm)
        u /= norm
    return total / n_sample


@dataclass
class AttractorSample:
    states: np.ndarray
    classification: str  # fixed, period-n, aperiodic, escaped
    period: int | None = None
    lyapunov: float | None = None

    @property
    def escaped(self) -> bool:
        return self.classification == "escaped"


def attractor_sample(m: PwsMap, mu: float, eta: float, x0, n_transient: int = 2000,
                     n_sample: int = 1000, escape_radius: float = DEFAULT_ESCAPE_RADIUS,
                     with_lyapunov: bool = True) -> AttractorSample:
    nd = m.as_nd()
    fz = nd.at(mu, eta)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    for _ in range(n_transient):
        x = fz.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            return AttractorSample(np.empty((0, x.size)), "escaped")
    states = np.empty((n_sample, x.size))
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
            lyap = None
            if with_lyapunov:
                lyap = lyapunov_exponent(m, mu, eta, tail[-1], 0, 50 * p, escape_radius)
            return AttractorSample(tail[-p:].copy(), name, p, lyap)
    lyap = lyapunov_exponent(m, mu, eta, x, 0, 10000, escape_radius) if with_lyapunov else None
    return AttractorSample(states, "aperiodic", None, lyap)


def write_attractor_csv(path, rows: Iterable[tuple[float, float, int, AttractorSample]], dim: int):
    """Stream ``(mu, eta, branch_index, x..., classification)`` rows to ``path``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "eta", "branch_index"] + [f"x{i}" for i in range(dim)] + ["classification"])
        for mu, eta, branch, sample in rows:
            if sample.escaped and len(sample.states) == 0:
                w.writerow([repr(mu), repr(eta), branch] + [""] * dim + [sample.classification])
                continue
            for state in sample.states:
                w.writerow([repr(mu), repr(eta), branch] + [repr(float(v)) for v in state]
                           + [sample.classification])


# ---------------------------------------------------------------------------
# chaos certificate
# ---------------------------------------------------------------------------


@dataclass
class ChaosCertificate:
    rho: float
    T: tuple[float, float]
    forward_invariant: bool
    invariance_margin: float
    expansion_bound: float
    M: int
    lyapunov: float
    n_grid: int

    @property
    def holds(self) -> bool:
        return self.forward_invariant and self.expansion_bound > 1.0

    def to_record(self) -> dict:
        return {"rho": self.rho, "T_lo": self.T[0], "T_hi": self.T[1],
                "forward_invariant": self.forward_invariant,
                "invariance_margin": self.invariance_margin,
                "expansion_bound": self.expansion_bound, "M": self.M,
                "lyapunov": self.lyapunov, "n_grid": self.n_grid, "holds": self.holds}


def _left_preimage(fz, y: float, scale: float) -> float:
    """``x <= 0`` with ``f_L(x) = y``, assuming ``f_L`` decreasing near 0."""
    g = lambda x: fz.left.f(x) - y
    if g(0.0) > 0:
        raise NoConvergence("f_L(0) already exceeds the target value")
    lo = -scale
    for _ in range(80):
        if g(lo) >= 0:
            return float(brentq(g, lo, 0.0, xtol=1e-16, rtol=4 * np.finfo(float).eps))
        lo *= 2
    raise NoConvergence("could not bracket the left preimage")


def _second_iterate_with_derivative(fz, x: np.ndarray):
    d = np.ones_like(x)
    for _ in range(2):
        d = d * fz.df(x)
        x = fz.f(x)
    return x, d


def chaos_certificate(m: PwsMap, mu: float, eta: float, n_grid: int = 10_000,
                      critical_radius: float = 1e-9, raise_on_failure: bool = True) -> ChaosCertificate:
    """Trapping interval plus sampled expansion of ``f^(2M)`` for a 1D map."""
    report = unfold(m)
    failed = []
    if not report.a0R > 1.0:
        failed.append(f"a0R = {report.a0R:.6g} is not > 1")
    if not mu < 0:
        failed.append(f"mu = {mu} is not < 0")
    else:
        h2 = h2_numeric(m, mu)
        if not eta < h2:
            failed.append(f"eta = {eta} is not below h2(mu) = {h2:.12g}")
    if failed:
        raise PreconditionsNotMet(failed)
    fz = m.at(mu, eta)
    rho = float(fz.f(fz.f(0.0)))
    if rho <= 0:
        raise PreconditionsNotMet([f"rho = f^2(0) = {rho:.3g} is not positive"])
    t_lo = _left_preimage(fz, float(fz.f(2 * rho)), 2 * rho)
    t_hi = 2 * rho
    xs = np.linspace(t_lo, t_hi, n_grid)
    img, _ = _second_iterate_with_derivative(fz, xs)
    margin = float(min(np.min(img - t_lo), np.min(t_hi - img)))
    invariant = margin >= 1e-12 * max(1.0, t_hi - t_lo) if margin > 0 else False
    if not invariant and raise_on_failure:
        k = int(np.argmin(np.minimum(img - t_lo, t_hi - img)))
        raise InvarianceFailed(float(xs[k]), float(img[k]), (t_lo, t_hi))
    M = math.ceil(2 * report.a0R + 2)
    x = xs.copy()
    deriv = np.ones_like(x)
    near_critical = np.zeros(x.shape, dtype=bool)
    for _ in range(M):
        near_critical |= np.abs(x) < critical_radius
        x, d = _second_iterate_with_derivative(fz, x)
        deriv *= d
    expansion = float(np.min(np.abs(deriv[~near_critical]))) if np.any(~near_critical) else 0.0
    lyap = lyapunov_exponent(m, mu, eta, 0.5 * (t_lo + t_hi), 1000, 20000)
    return ChaosCertificate(rho, (float(t_lo), float(t_hi)), bool(invariant), margin,
                            expansion, M, float(lyap), n_grid)
