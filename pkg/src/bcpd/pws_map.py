"""Piecewise-smooth continuous maps built from two polynomial half-maps.

The switching manifold is the plane ``s = x[0] = 0``. States with ``s <= 0``
are mapped by the left half-map, states with ``s > 0`` by the right one.
Half-maps are exact polynomial truncations: whatever coefficients are given
*are* the map.

One-dimensional half-maps have the form
``f(x) = mu*b + a*x + p*x**2 + q*x**3`` with ``b, a, p, q`` polynomials in
``(mu, eta)``. N-dimensional half-maps are
``f(x) = mu*b + A x + Q[x, x] + C[x, x, x]``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ConfigurationError, ContinuityError
from .poly import Poly2, format_exponent_key, monomials, pad_tables

LEFT, RIGHT = "L", "R"
DEFAULT_ESCAPE_RADIUS = 1e3


def _as_poly(value, deg=None) -> Poly2:
    if isinstance(value, Poly2):
        return value
    if isinstance(value, dict):
        return Poly2.from_dict(value, deg)
    if np.ndim(value) == 0:
        return Poly2.constant(float(value), deg or 2)
    return Poly2(value, deg)


# ---------------------------------------------------------------------------
# frozen half-maps: all parameter dependence evaluated, only x remains
# ---------------------------------------------------------------------------


class Frozen1D:
    """Cubic ``c0 + c1 x + c2 x^2 + c3 x^3``; coefficients may be arrays (batched)."""

    __slots__ = ("c0", "c1", "c2", "c3")

    def __init__(self, c0, c1, c2, c3):
        self.c0, self.c1, self.c2, self.c3 = c0, c1, c2, c3

    def f(self, x):
        return self.c0 + x * (self.c1 + x * (self.c2 + x * self.c3))

    def df(self, x):
        return self.c1 + x * (2.0 * self.c2 + 3.0 * self.c3 * x)

    def jac(self, x):
        return np.asarray(self.df(x))[..., None]


class FrozenND:
    __slots__ = ("b", "A", "Q", "C")

    def __init__(self, b, A, Q=None, C=None):
        self.b, self.A, self.Q, self.C = b, A, Q, C

    def f(self, x):
        out = self.b + np.einsum("...kl,...l->...k", self.A, x)
        if self.Q is not None:
            out = out + np.einsum("...kij,...i,...j->...k", self.Q, x, x)
        if self.C is not None:
            out = out + np.einsum("...kijl,...i,...j,...l->...k", self.C, x, x, x)
        return out

    def jac(self, x):
        J = self.A
        if self.Q is not None:
            J = J + 2.0 * np.einsum("...kij,...j->...ki", self.Q, x)
        if self.C is not None:
            J = J + 3.0 * np.einsum("...kijl,...j,...l->...ki", self.C, x, x)
        return J


# ---------------------------------------------------------------------------
# half-maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HalfMapSeries1D:
    """One smooth half-map ``mu b + a x + p x^2 + q x^3`` of a 1D map."""

    b: Poly2
    a: Poly2
    p: Poly2 = field(default_factory=Poly2.zero)
    q: Poly2 = field(default_factory=Poly2.zero)

    def __post_init__(self):
        for name in ("b", "a", "p", "q"):
            object.__setattr__(self, name, _as_poly(getattr(self, name)))

    dim = 1

    def freeze(self, mu, eta) -> Frozen1D:
        return Frozen1D(mu * self.b(mu, eta), self.a(mu, eta), self.p(mu, eta), self.q(mu, eta))

    def __call__(self, x, mu, eta):
        return self.freeze(mu, eta).f(x)

    def dx(self, x, mu, eta):
        return self.freeze(mu, eta).df(x)

    def dxx(self, x, mu, eta):
        return 2.0 * self.p(mu, eta) + 6.0 * self.q(mu, eta) * x

    def dxxx(self, x, mu, eta):
        return 6.0 * self.q(mu, eta)

    def d_eta(self, x, mu, eta):
        """Partial derivative with respect to ``eta`` at fixed ``x, mu``."""
        return (mu * self.b.d_eta()(mu, eta) + self.a.d_eta()(mu, eta) * x
                + self.p.d_eta()(mu, eta) * x**2 + self.q.d_eta()(mu, eta) * x**3)

    def d_mu(self, x, mu, eta):
        return (self.b(mu, eta) + mu * self.b.d_mu()(mu, eta) + self.a.d_mu()(mu, eta) * x
                + self.p.d_mu()(mu, eta) * x**2 + self.q.d_mu()(mu, eta) * x**3)

    def linear_part(self, mu, eta):
        return np.array([[self.a(mu, eta)]], dtype=float)

    def offset(self, mu, eta):
        return np.array([self.b(mu, eta)], dtype=float)

    def to_nd(self) -> "HalfMapSeriesND":
        d = max(self.b.deg, self.a.deg, self.p.deg, self.q.deg)
        return HalfMapSeriesND(
            b=pad_tables(self.b.coeffs, d)[None],
            A=pad_tables(self.a.coeffs, d)[None, None],
            Q=pad_tables(self.p.coeffs, d)[None, None, None],
            C=pad_tables(self.q.coeffs, d)[None, None, None, None],
        )

    def reparameterized(self, mu_factor: float, eta_factor: float) -> "HalfMapSeries1D":
        """Half-map in new parameters with ``mu = mu_factor*mu_new``, ``eta = eta_factor*eta_new``.

        The offset is rewritten so that it keeps the ``mu_new * b_new`` form.
        """
        b = self.b.scaled(mu_factor, eta_factor) * mu_factor
        return HalfMapSeries1D(b=b, a=self.a.scaled(mu_factor, eta_factor),
                               p=self.p.scaled(mu_factor, eta_factor),
                               q=self.q.scaled(mu_factor, eta_factor))

    def shifted_eta(self, eta0: float) -> "HalfMapSeries1D":
        return HalfMapSeries1D(*(getattr(self, k).shifted_eta(eta0) for k in "bapq"))

    def reflected(self) -> "HalfMapSeries1D":
        """Conjugate by ``x -> -x``."""
        return HalfMapSeries1D(b=-self.b, a=self.a, p=-self.p, q=self.q)


@dataclass(frozen=True)
class HalfMapSeriesND:
    """N-dimensional half-map with stacked ``(mu, eta)`` coefficient tables.

    ``b[k]``, ``A[k, l]``, ``Q[k, i, j]`` and ``C[k, i, j, l]`` are each a table
    of shape ``(deg+1, deg+1)`` (trailing axes). ``Q`` and ``C`` are symmetric in
    their ``x`` indices, and the quadratic term of output ``k`` is
    ``sum_ij Q[k, i, j] x_i x_j``.
    """

    b: np.ndarray
    A: np.ndarray
    Q: np.ndarray | None = None
    C: np.ndarray | None = None

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        A = np.asarray(self.A, dtype=float)
        n = b.shape[0]
        if b.ndim != 3 or A.shape[:2] != (n, n) or A.ndim != 4:
            raise ConfigurationError("b must be (n, d+1, d+1) and A (n, n, d+1, d+1)")
        tables = [b, A]
        Q = None if self.Q is None else np.asarray(self.Q, dtype=float)
        C = None if self.C is None else np.asarray(self.C, dtype=float)
        if Q is not None and Q.shape[:3] != (n, n, n):
            raise ConfigurationError("Q must have shape (n, n, n, d+1, d+1)")
        if C is not None and C.shape[:4] != (n, n, n, n):
            raise ConfigurationError("C must have shape (n, n, n, n, d+1, d+1)")
        d = max(t.shape[-1] - 1 for t in tables + [t for t in (Q, C) if t is not None])
        d = max(d, 2)
        b, A = pad_tables(b, d), pad_tables(A, d)
        if Q is not None:
            Q = pad_tables(Q, d)
            if not np.allclose(Q, np.swapaxes(Q, 1, 2), atol=0, rtol=1e-14):
                raise ConfigurationError("Q must be symmetric in its x indices")
            if not np.any(Q):
                Q = None
        if C is not None:
            C = pad_tables(C, d)
            for perm in itertools.permutations((1, 2, 3)):
                if not np.allclose(C, np.transpose(C, (0,) + perm + (4, 5)), atol=0, rtol=1e-14):
                    raise ConfigurationError("C must be symmetric in its x indices")
            if not np.any(C):
                C = None
        for arr in (b, A, Q, C):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "C", C)

    @classmethod
    def build(cls, b, A, nonlinear: dict | None = None) -> "HalfMapSeriesND":
        """Build from nested lists of Poly2-likes and a dict of x-monomials.

        ``nonlinear`` maps an output index to ``{exponents: poly}`` where
        ``exponents`` is a string of ``n`` digits (``"20"`` is ``s**2`` in 2D).
        """
        bp = [_as_poly(v) for v in b]
        Ap = [[_as_poly(v) for v in row] for row in A]
        n = len(bp)
        if len(Ap) != n or any(len(row) != n for row in Ap):
            raise ConfigurationError(f"A must be {n}x{n}")
        polys = {}
        for k, terms in (nonlinear or {}).items():
            for expo, poly in terms.items():
                polys[(int(k), str(expo))] = _as_poly(poly)
        d = max([p.deg for p in bp] + [p.deg for row in Ap for p in row]
                + [p.deg for p in polys.values()] + [2])
        bt = np.stack([pad_tables(p.coeffs, d) for p in bp])
        At = np.stack([np.stack([pad_tables(p.coeffs, d) for p in row]) for row in Ap])
        Qt = np.zeros((n, n, n, d + 1, d + 1))
        Ct = np.zeros((n, n, n, n, d + 1, d + 1))
        for (k, expo), p in polys.items():
            if not 0 <= k < n:
                raise ConfigurationError(f"output index {k} out of range")
            if len(expo) != n or not expo.isdigit():
                raise ConfigurationError(f"x-monomial key {expo!r} must have {n} digits")
            idx = [i for i, e in enumerate(expo) for _ in range(int(e))]
            table = pad_tables(p.coeffs, d)
            perms = set(itertools.permutations(idx))
            if len(idx) == 2:
                for perm in perms:
                    Qt[(k,) + perm] += table / len(perms)
            elif len(idx) == 3:
                for perm in perms:
                    Ct[(k,) + perm] += table / len(perms)
            else:
                raise ConfigurationError(f"x-monomial {expo!r} must have degree 2 or 3")
        return cls(bt, At, Qt, Ct)

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def dim(self) -> int:
        return self.n

    @property
    def deg(self) -> int:
        return self.b.shape[-1] - 1

    def b_poly(self, k: int) -> Poly2:
        return Poly2(self.b[k], self.deg)

    def A_poly(self, k: int, l: int) -> Poly2:
        return Poly2(self.A[k, l], self.deg)

    def _mono(self, mu, eta):
        return monomials(mu, eta, self.deg)

    def offset(self, mu, eta) -> np.ndarray:
        """``b(mu, eta)``."""
        return np.einsum("kij,...ij->...k", self.b, self._mono(mu, eta))

    def linear_part(self, mu, eta) -> np.ndarray:
        """``A(mu, eta)``."""
        return np.einsum("klij,...ij->...kl", self.A, self._mono(mu, eta))

    def freeze(self, mu, eta) -> FrozenND:
        M = self._mono(mu, eta)
        b = np.asarray(mu, dtype=float)[..., None] * np.einsum("kij,...ij->...k", self.b, M)
        A = np.einsum("klij,...ij->...kl", self.A, M)
        Q = None if self.Q is None else np.einsum("kabij,...ij->...kab", self.Q, M)
        C = None if self.C is None else np.einsum("kabcij,...ij->...kabc", self.C, M)
        return FrozenND(b, A, Q, C)

    def __call__(self, x, mu, eta):
        return self.freeze(mu, eta).f(np.asarray(x, dtype=float))

    def jacobian(self, x, mu, eta):
        return self.freeze(mu, eta).jac(np.asarray(x, dtype=float))

    def d_eta_linear_part(self, mu, eta) -> np.ndarray:
        """``dA/deta`` by exact differentiation of the coefficient tables."""
        d = self.deg
        dA = np.zeros_like(self.A)
        dA[..., :, :-1] = self.A[..., :, 1:] * np.arange(1, d + 1)
        return np.einsum("klij,...ij->...kl", dA, self._mono(mu, eta))

    def _transform_tables(self, fn) -> "HalfMapSeriesND":
        return HalfMapSeriesND(
            fn(self.b), fn(self.A),
            None if self.Q is None else fn(self.Q),
            None if self.C is None else fn(self.C),
        )

    def reparameterized(self, mu_factor: float, eta_factor: float) -> "HalfMapSeriesND":
        i, j = np.indices((self.deg + 1, self.deg + 1))
        w = mu_factor**i * eta_factor**j
        out = self._transform_tables(lambda t: t * w)
        return HalfMapSeriesND(out.b * mu_factor, out.A, out.Q, out.C)

    def shifted_eta(self, eta0: float) -> "HalfMapSeriesND":
        d = self.deg
        T = np.zeros((d + 1, d + 1))  # T[j, k]: eta^j -> sum_k T[j,k] eta^k
        for j in range(d + 1):
            for k in range(j + 1):
                T[j, k] = math.comb(j, k) * eta0 ** (j - k)
        return self._transform_tables(lambda t: np.einsum("...ij,jk->...ik", t, T))

    def reflected(self) -> "HalfMapSeriesND":
        """Conjugate by ``x -> P x`` with ``P = diag(-1, 1, ..., 1)``."""
        p = np.ones(self.n)
        p[0] = -1.0
        b = self.b * p[:, None, None]
        A = self.A * (p[:, None] * p[None, :])[..., None, None]
        Q = None if self.Q is None else self.Q * np.einsum("k,i,j->kij", p, p, p)[..., None, None]
        C = None if self.C is None else self.C * np.einsum("k,i,j,l->kijl", p, p, p, p)[..., None, None]
        return HalfMapSeriesND(b, A, Q, C)

    def to_nd(self) -> "HalfMapSeriesND":
        return self


HalfMap = Union[HalfMapSeries1D, HalfMapSeriesND]


# ---------------------------------------------------------------------------
# the piecewise map
# ---------------------------------------------------------------------------


def _continuity_violations(left: HalfMap, right: HalfMap, tol: float = 1e-12) -> list[str]:
    bad = []

    def differ(x, y):
        return not np.allclose(x, y, rtol=tol, atol=tol)

    def tables(x, y, label):
        d = max(x.shape[-1], y.shape[-1]) - 1
        x, y = pad_tables(x, d), pad_tables(y, d)
        for i in range(d + 1):
            for j in range(d + 1 - i):
                if differ(x[..., i, j], y[..., i, j]):
                    bad.append(f"{label}:{format_exponent_key(i, j)}")

    if isinstance(left, HalfMapSeries1D):
        tables(left.b.coeffs, right.b.coeffs, "b")
        return bad
    n = left.n
    for k in range(n):
        tables(left.b[k], right.b[k], f"b[{k}]")
        for l in range(1, n):
            tables(left.A[k, l], right.A[k, l], f"A[{k}][{l}]")
    zQ = np.zeros((n, n, n, left.deg + 1, left.deg + 1))
    zC = np.zeros((n, n, n, n, left.deg + 1, left.deg + 1))
    for name, lt, rt, z in (("Q", left.Q, right.Q, zQ), ("C", left.C, right.C, zC)):
        d = max(left.deg, right.deg)
        lt = pad_tables(z if lt is None else lt, d)
        rt = pad_tables(z if rt is None else rt, d)
        for idx in np.ndindex(*lt.shape[1:-2]):
            if 0 in idx or list(idx) != sorted(idx):
                continue
            for k in range(n):
                expo = [0] * n
                for i in idx:
                    expo[i] += 1
                label = f"{name}[{k}](x^{''.join(map(str, expo))})"
                tables(lt[(k,) + idx], rt[(k,) + idx], label)
    return bad


class FrozenMap:
    """A :class:`PwsMap` with the parameters fixed."""

    __slots__ = ("left", "right", "dim")

    def __init__(self, left, right, dim):
        self.left, self.right, self.dim = left, right, dim

    def half(self, side: str):
        return self.left if side == LEFT else self.right

    def side_of(self, x) -> str:
        s = x if self.dim == 1 and np.ndim(x) == 0 else x[0]
        return LEFT if s <= 0 else RIGHT

    def f(self, x):
        if self.dim == 1:
            fl, fr = self.left.f(x), self.right.f(x)
            return np.where(np.asarray(x) <= 0, fl, fr) if np.ndim(x) else (fl if x <= 0 else fr)
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.left.f(x) if x[0] <= 0 else self.right.f(x)
        fl, fr = self.left.f(x), self.right.f(x)
        return np.where((x[..., 0] <= 0)[..., None], fl, fr)

    def df(self, x):
        """Derivative of the branch selected by ``x`` (1D, elementwise)."""
        dl, dr = self.left.df(x), self.right.df(x)
        return np.where(np.asarray(x) <= 0, dl, dr) if np.ndim(x) else (dl if x <= 0 else dr)

    def jac(self, x):
        x = np.asarray(x, dtype=float)
        return self.half(self.side_of(x)).jac(x)


@dataclass(frozen=True)
class PwsMap:
    """Two half-maps joined continuously across ``s = 0``."""

    left: HalfMap
    right: HalfMap
    name: str = ""

    def __post_init__(self):
        if type(self.left) is not type(self.right):
            raise ConfigurationError("left and right half-maps must have the same type")
        if self.left.dim != self.right.dim:
            raise ConfigurationError(
                f"dimension mismatch: left {self.left.dim}, right {self.right.dim}")
        bad = _continuity_violations(self.left, self.right)
        if bad:
            raise ContinuityError(bad)

    @property
    def dim(self) -> int:
        return self.left.dim

    def half(self, side: str) -> HalfMap:
        if side not in (LEFT, RIGHT):
            raise ConfigurationError(f"side must be 'L' or 'R', got {side!r}")
        return self.left if side == LEFT else self.right

    def at(self, mu, eta) -> FrozenMap:
        return FrozenMap(self.left.freeze(mu, eta), self.right.freeze(mu, eta), self.dim)

    def eval(self, x, mu, eta):
        return evaluate(self, x, mu, eta)

    def as_nd(self) -> "PwsMap":
        if self.dim == 1 and isinstance(self.left, HalfMapSeries1D):
            return PwsMap(self.left.to_nd(), self.right.to_nd(), self.name)
        return self

    def reparameterized(self, mu_factor: float, eta_factor: float) -> "PwsMap":
        return PwsMap(self.left.reparameterized(mu_factor, eta_factor),
                      self.right.reparameterized(mu_factor, eta_factor), self.name)

    def shifted_eta(self, eta0: float) -> "PwsMap":
        return PwsMap(self.left.shifted_eta(eta0), self.right.shifted_eta(eta0), self.name)

    def swapped(self) -> "PwsMap":
        """Mirror image: the old right half-map becomes the new left one."""
        return PwsMap(self.right.reflected(), self.left.reflected(), self.name)


def _check_dim(m: PwsMap, x):
    if m.dim == 1:
        return
    if np.shape(x)[-1:] != (m.dim,):
        raise ConfigurationError(f"state has shape {np.shape(x)}, map dimension is {m.dim}")


def evaluate(m: PwsMap, x, mu: float, eta: float):
    """Apply the piecewise map once.

    On ``s = 0`` the left half-map is used; for a single state the right
    half-map is evaluated too and required to agree.
    """
    _check_dim(m, x)
    fm = m.at(mu, eta)
    out = fm.f(x)
    single = np.ndim(x) == 0 or (m.dim > 1 and np.ndim(x) == 1)
    if single:
        s = x if np.ndim(x) == 0 else x[0]
        if s == 0:
            other = fm.right.f(x)
            scale = 1.0 + np.max(np.abs(out))
            if np.max(np.abs(other - out)) > 1e-12 * scale:
                raise ContinuityError([f"evaluation at s=0 differs by {np.max(np.abs(other - out)):.3g}"])
    return out


def jacobian(half: HalfMap, x, mu: float, eta: float):
    """Exact derivative of a half-map in ``x`` (scalar in 1D)."""
    if isinstance(half, HalfMapSeries1D):
        return half.dx(x, mu, eta)
    return half.jacobian(x, mu, eta)


@dataclass(frozen=True)
class IterationResult:
    states: np.ndarray
    escaped: bool

    def __len__(self):
        return len(self.states)


def iterate(m: PwsMap, x0, mu: float, eta: float, k: int,
            escape_radius: float = DEFAULT_ESCAPE_RADIUS) -> IterationResult:
    """Orbit ``x0, f(x0), ..., f^k(x0)``, truncated once ``|x|`` exceeds the radius."""
    if k < 0:
        raise ConfigurationError("iteration count must be non-negative")
    _check_dim(m, x0)
    fm = m.at(mu, eta)
    x = float(x0) if m.dim == 1 else np.asarray(x0, dtype=float)
    out = [x]
    for _ in range(k):
        x = fm.f(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > escape_radius:
            return IterationResult(np.array(out), True)
        out.append(x)
    return IterationResult(np.array(out), False)


# ---------------------------------------------------------------------------
# built-in maps and map files
# ---------------------------------------------------------------------------


def fig2_map() -> PwsMap:
    """1D map with ``b = 1, a_L = eta - 1, a_R = 3/2, p = -1, q = 3/2``.

    The quadratic and cubic terms belong to the left half-map only; the right
    half-map is affine.
    """
    left = HalfMapSeries1D(b={"00": 1.0}, a={"00": -1.0, "01": 1.0},
                           p={"00": -1.0}, q={"00": 1.5})
    right = HalfMapSeries1D(b={"00": 1.0}, a={"00": 1.5})
    return PwsMap(left, right, "fig2")


def pdmapex_map() -> PwsMap:
    """2D map ``s' = -mu/2 - s/2 + y``, ``y' = s/3 - |s|/6 - 3/2 eta s + s^2/4``."""
    b = [{"00": -0.5}, {}]
    left = HalfMapSeriesND.build(
        b, [[{"00": -0.5}, {"00": 1.0}], [{"00": 0.5, "01": -1.5}, {}]],
        {1: {"20": {"00": 0.25}}})
    right = HalfMapSeriesND.build(
        b, [[{"00": -0.5}, {"00": 1.0}], [{"00": 1.0 / 6.0, "01": -1.5}, {}]],
        {1: {"20": {"00": 0.25}}})
    return PwsMap(left, right, "pdmapex")


BUILTIN_MAPS = {"fig2": fig2_map, "pdmapex": pdmapex_map}

_HALF_KEYS_1D = {"b", "a", "p", "q"}
_HALF_KEYS_ND = {"b", "A", "nonlinear"}


def _half_from_dict(d: dict, dim: int, label: str) -> HalfMap:
    if not isinstance(d, dict):
        raise ConfigurationError(f"section [{label}] must be a table")
    allowed = _HALF_KEYS_1D if dim == 1 else _HALF_KEYS_ND
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in [{label}]: {sorted(unknown)}")
    try:
        if dim == 1:
            if "b" not in d or "a" not in d:
                raise ConfigurationError(f"[{label}] needs at least 'b' and 'a'")
            return HalfMapSeries1D(**{k: _as_poly(v) for k, v in d.items()})
        if "b" not in d or "A" not in d:
            raise ConfigurationError(f"[{label}] needs 'b' and 'A'")
        nonlinear = {int(k): v for k, v in d.get("nonlinear", {}).items()}
        half = HalfMapSeriesND.build(d["b"], d["A"], nonlinear)
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"[{label}]: {exc}") from exc
    if half.n != dim:
        raise ConfigurationError(f"[{label}] has dimension {half.n}, expected {dim}")
    return half


def map_from_dict(d: dict, name: str = "") -> PwsMap:
    unknown = set(d) - {"dimension", "left", "right", "name"}
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    if "dimension" not in d:
        raise ConfigurationError("map definition needs 'dimension'")
    dim = int(d["dimension"])
    if dim < 1:
        raise ConfigurationError("dimension must be >= 1")
    for side in ("left", "right"):
        if side not in d:
            raise ConfigurationError(f"map definition needs a [{side}] section")
    left = _half_from_dict(d["left"], dim, "left")
    right = _half_from_dict(d["right"], dim, "right")
    return PwsMap(left, right, d.get("name", name))


def _poly_dict(p: Poly2) -> dict:
    return p.to_dict()


def map_to_dict(m: PwsMap) -> dict:
    out = {"dimension": m.dim, "name": m.name}
    for side, half in (("left", m.left), ("right", m.right)):
        if isinstance(half, HalfMapSeries1D):
            out[side] = {k: _poly_dict(getattr(half, k)) for k in "bapq"}
            continue
        n, d = half.n, half.deg
        sec = {"b": [Poly2(half.b[k], d).to_dict() for k in range(n)],
               "A": [[Poly2(half.A[k, l], d).to_dict() for l in range(n)] for k in range(n)]}
        nonlinear = {}
        for name, T, order in (("Q", half.Q, 2), ("C", half.C, 3)):
            if T is None:
                continue
            for k in range(n):
                for idx in itertools.combinations_with_replacement(range(n), order):
                    mult = len(set(itertools.permutations(idx)))
                    table = T[(k,) + idx] * mult
                    if not np.any(table):
                        continue
                    expo = [0] * n
                    for i in idx:
                        expo[i] += 1
                    nonlinear.setdefault(str(k), {})["".join(map(str, expo))] = Poly2(table, d).to_dict()
        if nonlinear:
            sec["nonlinear"] = nonlinear
        out[side] = sec
    return out


def load_map(path) -> PwsMap:
    """Read a map definition from a TOML or JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read map file {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(text)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    return map_from_dict(data, name=path.stem)


def resolve_map(source: str) -> PwsMap:
    """``builtin:<name>`` or a path to a map file."""
    if source.startswith("builtin:"):
        key = source.split(":", 1)[1]
        if key not in BUILTIN_MAPS:
            raise ConfigurationError(
                f"unknown builtin map {key!r}; choose from {sorted(BUILTIN_MAPS)}")
        return BUILTIN_MAPS[key]()
    return load_map(source)
