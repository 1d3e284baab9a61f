"""Bivariate coefficient polynomials in the parameters (mu, eta).

A :class:`Poly2` stores ``c[i, j]``, the coefficient of ``mu**i * eta**j``.
Every coefficient function of a half-map (``b``, ``a_L``, ``p``, ``q`` and the
matrix entries in N dimensions) is one of these tables.
"""

from __future__ import annotations

import math
import re

import numpy as np

_KEY_RE = re.compile(r"^\s*(\d+)\s*[,;]\s*(\d+)\s*$")


def parse_exponent_key(key: str) -> tuple[int, int]:
    """Parse ``"ij"`` (single digits) or ``"i,j"`` into an exponent pair."""
    key = str(key)
    m = _KEY_RE.match(key)
    if m:
        return int(m.group(1)), int(m.group(2))
    if len(key) == 2 and key.isdigit():
        return int(key[0]), int(key[1])
    raise ValueError(f"bad monomial key {key!r}; expected 'ij' or 'i,j'")


def format_exponent_key(i: int, j: int) -> str:
    if i < 10 and j < 10:
        return f"{i}{j}"
    return f"{i},{j}"


def monomials(mu, eta, deg: int) -> np.ndarray:
    """Table ``M[..., i, j] = mu**i * eta**j`` for ``0 <= i, j <= deg``."""
    mu = np.asarray(mu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    powers = np.arange(deg + 1)
    mp = mu[..., None] ** powers
    ep = eta[..., None] ** powers
    return mp[..., :, None] * ep[..., None, :]


def _pad(c: np.ndarray, deg: int) -> np.ndarray:
    out = np.zeros(c.shape[:-2] + (deg + 1, deg + 1))
    out[..., : c.shape[-2], : c.shape[-1]] = c
    return out


def pad_tables(c: np.ndarray, deg: int) -> np.ndarray:
    """Zero-pad the trailing two axes of a stacked coefficient table to ``deg``."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] > deg + 1 or c.shape[-2] > deg + 1:
        raise ValueError("cannot pad a table to a smaller degree")
    return _pad(c, deg)


def total_degree_mask(deg: int) -> np.ndarray:
    i, j = np.indices((deg + 1, deg + 1))
    return i + j <= deg


class Poly2:
    """Real polynomial in ``(mu, eta)`` of total degree at most ``deg``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, deg: int | None = None):
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if c.ndim != 2:
            raise ValueError("Poly2 coefficients must form a 2D table")
        d = max(2, max(c.shape) - 1) if deg is None else deg
        if d < 2:
            raise ValueError("Poly2 degree must be at least 2")
        if np.any(c[d + 1 :, :]) or np.any(c[:, d + 1 :]):
            raise ValueError("coefficients beyond the declared degree")
        c = _pad(c[: d + 1, : d + 1], d)
        if np.any(c[~total_degree_mask(d)]):
            raise ValueError("coefficients beyond the declared total degree")
        c.setflags(write=False)
        self.coeffs = c

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, deg: int = 2) -> "Poly2":
        c = np.zeros((deg + 1, deg + 1))
        c[0, 0] = value
        return cls(c, deg)

    @classmethod
    def zero(cls, deg: int = 2) -> "Poly2":
        return cls(np.zeros((deg + 1, deg + 1)), deg)

    @classmethod
    def from_dict(cls, terms: dict, deg: int | None = None) -> "Poly2":
        """Build from ``{"ij": value}``; e.g. ``{"00": -1, "01": 1}`` is ``eta - 1``."""
        pairs = [(parse_exponent_key(k), float(v)) for k, v in terms.items()]
        need = max([i + j for (i, j), _ in pairs] + [2])
        d = need if deg is None else deg
        if need > d:
            raise ValueError(f"monomial of degree {need} exceeds deg={d}")
        c = np.zeros((d + 1, d + 1))
        for (i, j), v in pairs:
            c[i, j] += v
        return cls(c, d)

    def to_dict(self) -> dict[str, float]:
        out = {}
        for i, j in zip(*np.nonzero(self.coeffs)):
            out[format_exponent_key(int(i), int(j))] = float(self.coeffs[i, j])
        return out

    # basic properties -------------------------------------------------
    @property
    def deg(self) -> int:
        return self.coeffs.shape[0] - 1

    def __getitem__(self, ij) -> float:
        i, j = ij
        if i + j > self.deg or i < 0 or j < 0:
            return 0.0
        return float(self.coeffs[i, j])

    def __call__(self, mu, eta):
        """Evaluate by nested Horner (outer in ``mu``, inner in ``eta``)."""
        mu = np.asarray(mu, dtype=float)
        eta = np.asarray(eta, dtype=float)
        c = self.coeffs
        out = np.zeros(np.broadcast(mu, eta).shape)
        for i in range(self.deg, -1, -1):
            row = np.zeros_like(out)
            for j in range(self.deg - i, -1, -1):
                row = row * eta + c[i, j]
            out = out * mu + row
        return out if out.ndim else float(out)

    def evaluate_naive(self, mu: float, eta: float) -> float:
        return float(sum(self.coeffs[i, j] * mu**i * eta**j
                         for i in range(self.deg + 1) for j in range(self.deg + 1 - i)))

    def derivative_at_origin(self, i: int, j: int) -> float:
        """``d^(i+j) / dmu^i deta^j`` evaluated at ``(0, 0)``."""
        return math.factorial(i) * math.factorial(j) * self[i, j]

    # algebra ----------------------------------------------------------
    def d_mu(self) -> "Poly2":
        c = np.zeros_like(self.coeffs)
        c[:-1, :] = self.coeffs[1:, :] * np.arange(1, self.deg + 1)[:, None]
        return Poly2(c, self.deg)

    def d_eta(self) -> "Poly2":
        c = np.zeros_like(self.coeffs)
        c[:, :-1] = self.coeffs[:, 1:] * np.arange(1, self.deg + 1)[None, :]
        return Poly2(c, self.deg)

    def scaled(self, mu_factor: float, eta_factor: float) -> "Poly2":
        """Substitute ``mu -> mu_factor*mu`` and ``eta -> eta_factor*eta``."""
        i, j = np.indices(self.coeffs.shape)
        return Poly2(self.coeffs * mu_factor**i * eta_factor**j, self.deg)

    def shifted_eta(self, eta0: float) -> "Poly2":
        """Substitute ``eta -> eta + eta0`` (exact binomial expansion)."""
        d = self.deg
        c = np.zeros_like(self.coeffs)
        for i in range(d + 1):
            for j in range(d + 1 - i):
                for k in range(j + 1):
                    c[i, k] += self.coeffs[i, j] * math.comb(j, k) * eta0 ** (j - k)
        return Poly2(c, d)

    def _coerce(self, other) -> "Poly2":
        if isinstance(other, Poly2):
            return other
        return Poly2.constant(float(other), self.deg)

    def __add__(self, other) -> "Poly2":
        other = self._coerce(other)
        d = max(self.deg, other.deg)
        return Poly2(_pad(self.coeffs, d) + _pad(other.coeffs, d), d)

    __radd__ = __add__

    def __neg__(self) -> "Poly2":
        return Poly2(-self.coeffs, self.deg)

    def __sub__(self, other) -> "Poly2":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly2":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Poly2":
        if not isinstance(other, Poly2):
            return Poly2(self.coeffs * float(other), self.deg)
        d = self.deg + other.deg
        c = np.zeros((d + 1, d + 1))
        for (i, j), v in np.ndenumerate(self.coeffs):
            if v:
                c[i : i + other.deg + 1, j : j + other.deg + 1] += v * other.coeffs
        return Poly2(c, d)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly2):
            return NotImplemented
        d = max(self.deg, other.deg)
        return bool(np.array_equal(_pad(self.coeffs, d), _pad(other.coeffs, d)))

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self) -> str:
        return f"Poly2({self.to_dict()})"


# ---------------------------------------------------------------------------
# truncated power series in (s, mu, eta), used by the center-manifold reduction
# ---------------------------------------------------------------------------


def series_monomials(order: int) -> list[tuple[int, int, int]]:
    """All exponents ``(a, b, c)`` with ``a + b + c <= order``."""
    return [(a, b, c)
            for a in range(order + 1)
            for b in range(order + 1 - a)
            for c in range(order + 1 - a - b)]


def series_zeros(order: int, shape=()) -> np.ndarray:
    """Coefficient array of shape ``shape + (order+1,)*3``."""
    return np.zeros(tuple(shape) + (order + 1,) * 3)


def series_mul(x: np.ndarray, y: np.ndarray, order: int) -> np.ndarray:
    """Product of two (possibly stacked) series, truncated at ``order``."""
    shape = np.broadcast_shapes(x.shape[:-3], y.shape[:-3])
    out = series_zeros(order, shape)
    for a1, b1, c1 in series_monomials(order):
        xv = x[..., a1, b1, c1]
        if not np.any(xv):
            continue
        for a2, b2, c2 in series_monomials(order - a1 - b1 - c1):
            out[..., a1 + a2, b1 + b2, c1 + c2] += xv * y[..., a2, b2, c2]
    return out


def series_from_poly2(p: Poly2, order: int) -> np.ndarray:
    """Embed a parameter polynomial as a series with no ``s`` dependence."""
    out = series_zeros(order)
    for i in range(min(p.deg, order) + 1):
        for j in range(min(p.deg, order) + 1 - i):
            out[0, i, j] = p[i, j]
    return out


def series_from_tables(tables: np.ndarray, order: int) -> np.ndarray:
    """Stacked version of :func:`series_from_poly2` for ``(..., d+1, d+1)`` tables."""
    d = tables.shape[-1] - 1
    out = series_zeros(order, tables.shape[:-2])
    for i in range(min(d, order) + 1):
        for j in range(min(d, order) + 1 - i):
            out[..., 0, i, j] = tables[..., i, j]
    return out


def series_eval(x: np.ndarray, s, mu, eta) -> np.ndarray:
    order = x.shape[-1] - 1
    total = 0.0
    for a, b, c in series_monomials(order):
        total = total + x[..., a, b, c] * (s**a * mu**b * eta**c)
    return total


def series_truncate(x: np.ndarray, order: int) -> np.ndarray:
    """Zero every coefficient above total degree ``order`` (shape unchanged)."""
    out = x.copy()
    n = x.shape[-1] - 1
    for a, b, c in series_monomials(n):
        if a + b + c > order:
            out[..., a, b, c] = 0.0
    return out
