"""Small dense Newton solver shared by the orbit and continuation code."""

from __future__ import annotations

import numpy as np


def fd_jacobian(F, z: np.ndarray, f0: np.ndarray | None = None, h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of ``F`` at ``z`` (rows: outputs)."""
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.size):
        step = h * max(1.0, abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += step
        zm[i] -= step
        cols.append((np.asarray(F(zp)) - np.asarray(F(zm))) / (2 * step))
    return np.stack(cols, axis=-1)


def newton(F, z0, jac=None, tol: float = 1e-12, maxiter: int = 50, max_norm: float = 1e6):
    """Solve ``F(z) = 0``; returns ``(z, residual, converged)``.

    ``jac`` defaults to central differences. Non-square systems are solved in
    the least-squares sense at each step.
    """
    z = np.array(z0, dtype=float, copy=True)
    r = np.atleast_1d(np.asarray(F(z), dtype=float))
    res = float(np.max(np.abs(r)))
    for _ in range(maxiter):
        if res <= tol:
            return z, res, True
        J = np.atleast_2d(jac(z) if jac is not None else fd_jacobian(F, z))
        try:
            if J.shape[0] == J.shape[1]:
                dz = np.linalg.solve(J, r)
            else:
                dz = np.linalg.lstsq(J, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            return z, res, False
        z = z - dz
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > max_norm:
            return z, np.inf, False
        r = np.atleast_1d(np.asarray(F(z), dtype=float))
        res = float(np.max(np.abs(r)))
    return z, res, res <= tol
