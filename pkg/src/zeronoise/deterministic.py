"""Extremal classical solutions psi_+ and psi_- of dX/dt = a(X), X(0) = 0."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from zeronoise.calculus import Antiderivative, antiderivative_A, osgood_integral


@dataclass(eq=False)
class ExtremalSolution:
    """psi on a time grid.

    Attributes
    ----------
    side : {'plus', 'minus'}
    t, values : ndarray
        Time grid starting at 0 and the solution on it.
    singular_point : float or None
        R_+ (or R_-) when a vanishes ahead of the origin.
    plateau_time : float or None
        t_+ = A(R_+) when finite; the solution equals R_+ from then on.
    flag : str
        'ok', 'zero' (a vanishes on the side), 'wrong-sign' (a points back
        towards 0), 'osgood-divergent' (only the zero solution leaves 0) or
        'exits-window' (values past the drift window are nan).
    """

    side: str
    t: np.ndarray
    values: np.ndarray
    singular_point: Optional[float] = None
    plateau_time: Optional[float] = None
    flag: str = "ok"
    antiderivative: Optional[Antiderivative] = field(default=None, repr=False)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        """Linear interpolation on the stored grid."""
        return np.interp(t, self.t, self.values)

    def at(self, t):
        """Exact evaluation: inversion of A with the plateau rule."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.zeros_like(t)
        if self.antiderivative is None:
            return float(out[0]) if scalar else out
        F = self.antiderivative
        flat = np.zeros(len(t), dtype=bool)
        if self.plateau_time is not None:
            flat = t >= self.plateau_time
            out[flat] = self.singular_point
        beyond = ~flat & (t > F.max_value)
        out[beyond] = np.nan
        live = ~flat & ~beyond & (t > 0)
        if live.any():
            out[live] = F.inverse(t[live])
        return float(out[0]) if scalar else out

    def restart(self, x0: float, t):
        """Solution from ``x0`` (on this side, away from the plateau) after time ``t``."""
        F = self.antiderivative
        return self.at(np.asarray(F.exact(x0)) + np.asarray(t))

    def to_rows(self):
        return [(float(a), float(b)) for a, b in zip(self.t, self.values)]


def default_time_grid(T: float, n_uniform: int = 501, n_geom: int = 60) -> np.ndarray:
    """0, then geometric nodes from 1e-8 T up to T/500, then uniform to T."""
    geom = np.geomspace(1e-8 * T, T / (n_uniform - 1), n_geom, endpoint=False)
    uni = np.linspace(0.0, T, n_uniform)
    return np.unique(np.concatenate([uni, geom]))


def _side_R(drift, side):
    lo, hi = getattr(drift, "window", (-10.0, 10.0))
    return hi if side == "plus" else -lo


def extremal_solution(drift, side: str, T: float, grid=None, R: Optional[float] = None,
                      tol: float = 1e-10, delta0: float = 0.5) -> ExtremalSolution:
    """psi_+ (side='plus') or psi_- (side='minus') of dX/dt = a(X) from 0.

    psi(t) = A^{-1}(t) with A(x) = int_0^x dz / a(z) until the singular point
    R is reached at t = A(R), and R afterwards.  psi_- is obtained by solving
    for x -> -a(-x) and negating.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    t = default_time_grid(T) if grid is None else np.asarray(grid, dtype=float)
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must start at 0 and increase strictly")
    oside = "right" if side == "plus" else "left"
    R = _side_R(drift, side) if R is None else R
    g = drift if side == "plus" else drift.reflected()
    probe = g(np.concatenate([min(delta0, R) * 2.0 ** -np.arange(61),
                              np.linspace(0, min(delta0, R), 1001)[1:]]))
    if np.all(probe == 0):
        return ExtremalSolution(side, t, np.zeros_like(t), flag="zero")
    if np.any(probe < 0):
        return ExtremalSolution(side, t, np.zeros_like(t), flag="wrong-sign")
    if osgood_integral(g, "right", min(delta0, R), tol).verdict == "divergent":
        return ExtremalSolution(side, t, np.zeros_like(t), flag="osgood-divergent")
    A = antiderivative_A(drift, oside, R, tol)
    plateau = None
    if A.singular_point is not None and math.isfinite(A.value_at_span):
        plateau = float(A.value_at_span)
        tp = np.array([plateau]) if 0 < plateau < t[-1] else np.empty(0)
        if grid is None:
            t = np.unique(np.concatenate([t, tp]))
    sol = ExtremalSolution(side, t, np.zeros_like(t), singular_point=A.singular_point,
                           plateau_time=plateau, antiderivative=A)
    sol.values = sol.at(t)
    if np.any(np.isnan(sol.values)):
        sol.flag = "exits-window"
    live = (t > 0) & np.isfinite(sol.values) & (np.abs(sol.values) > A.resolved_floor)
    if plateau is not None:
        live &= t < plateau
    if live.any():
        back = A.exact(sol.values[live])
        bad = np.abs(back - t[live]) > 100 * tol * (1 + t[live])
        if bad.any():
            raise ArithmeticError(f"inversion residual {np.max(np.abs(back - t[live])):.3g}")
    return sol


def residual(drift, sol: ExtremalSolution) -> float:
    """Weighted max of |slope - a(psi)| over interior grid points.

    Slopes are three-point finite differences on the (possibly non-uniform)
    grid; t = 0, the grid ends and plateau points are excluded.
    """
    t, x = sol.t, sol.values
    if len(t) < 3:
        return 0.0
    t0, t1, t2 = t[:-2], t[1:-1], t[2:]
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    h1, h2 = t1 - t0, t2 - t1
    slope = (-h2 / (h1 * (h1 + h2)) * x0 + (h2 - h1) / (h1 * h2) * x1
             + h1 / (h2 * (h1 + h2)) * x2)
    keep = (t0 > 0) & np.isfinite(x0) & np.isfinite(x2)
    if sol.plateau_time is not None:
        keep &= t2 < sol.plateau_time
    if not keep.any():
        return 0.0
    a = drift(x1[keep])
    return float(np.max(np.abs(slope[keep] - a) / (1 + np.abs(a))))
