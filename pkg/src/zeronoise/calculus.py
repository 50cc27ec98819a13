"""Quadrature, sampled antiderivatives and monotone inversion.

Everything here takes plain vectorised callables or duck-typed drifts (an
object that is callable on arrays and may offer ``breakpoints(lo, hi, cap)``
and ``reflected()``), so the module does not depend on the expression layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

# Gauss-Kronrod 7/15 on [-1, 1]
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
NODES = np.concatenate([-_XK[:-1], [0.0], _XK[:-1][::-1]])
W_KRONROD = np.concatenate([_WK[:-1], [_WK[-1]], _WK[:-1][::-1]])
_GAUSS_IDX = np.array([1, 3, 5, 7, 9, 11, 13])
W_GAUSS = np.concatenate([_WG[:3], [_WG[3]], _WG[:3][::-1]])


def _cumulative_matrix(x):
    # M[k, j] = int_{-1}^{x_k} L_j, L_j the Lagrange basis on the nodes x
    from numpy.polynomial import legendre as L

    n = len(x)
    Vinv = np.linalg.inv(L.legvander(x, n - 1))
    out = np.empty((n, n))
    for j in range(n):
        out[:, j] = L.legval(x, L.legint(Vinv[:, j], lbnd=-1))
    return out


# int from the left panel end to each Kronrod node, on the reference panel [-1, 1]
CUMULATIVE_GK = _cumulative_matrix(NODES)

MAX_DEPTH = 60
DIVERGENCE_CAP = 1e6
STALL_RATIO = 0.98
STALL_COUNT = 12


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    verdict: str  # converged | divergent | max-depth
    n_eval: int = 0
    unresolved: bool = False
    cells: tuple = ()

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


class RangeError(ValueError):
    """Inversion target outside the range of the monotone function."""


class SignViolation(ValueError):
    """The drift has the wrong sign on the side being integrated."""


def _gk15(f, a, b):
    """Kronrod value and |K - G| for each panel [a_i, b_i]."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = h * (fx @ W_KRONROD)
    g = h * (fx[:, _GAUSS_IDX] @ W_GAUSS)
    err = np.abs(k - g)
    bad = ~np.isfinite(k)
    err[bad] = np.inf
    # roundoff floor
    err = np.maximum(err, 50 * np.finfo(float).eps * np.abs(h) * (np.abs(fx) @ W_KRONROD))
    return k, err


def adaptive_intervals(f, lo, hi, tol, max_depth: int = MAX_DEPTH, max_panels: int = 2_000_000):
    """Integrate ``f`` over each of the independent intervals ``[lo_i, hi_i]``.

    The error budget ``tol`` is shared by all intervals; the panels carrying
    the largest error estimates are bisected until the total estimate fits.

    Returns
    -------
    values, errors : ndarray
        Per-interval integral and error estimate.
    verdict : str
        ``converged`` or ``max-depth``.
    n_eval : int
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = len(lo)
    if n == 0:
        return np.zeros(0), np.zeros(0), "converged", 0
    a, b = lo.copy(), hi.copy()
    owner = np.arange(n)
    depth = np.zeros(n, dtype=np.int64)
    val, err = _gk15(f, a, b)
    n_eval = 15 * n
    verdict = "converged"
    while True:
        total = err.sum()
        if total <= tol:
            break
        splittable = (depth < max_depth) & (b - a > 4 * np.finfo(float).eps *
                                            np.maximum(np.abs(a), np.abs(b)))
        cand = np.flatnonzero(splittable & (err > 0))
        if len(cand) == 0:
            verdict = "max-depth"
            break
        order = cand[np.argsort(-err[cand])]
        csum = np.cumsum(err[order])
        # bisect the smallest set of worst panels that could bring us within budget
        need = total - 0.5 * tol
        m = int(np.searchsorted(csum, need) + 1)
        m = max(1, min(m, len(order)))
        if len(a) + m > max_panels:
            verdict = "max-depth"
            break
        pick = np.zeros(len(a), dtype=bool)
        pick[order[:m]] = True
        mid = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], mid])
        nb = np.concatenate([mid, b[pick]])
        nv, ne = _gk15(f, na, nb)
        n_eval += 15 * len(na)
        keep = ~pick
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        owner = np.concatenate([owner[keep], owner[pick], owner[pick]])
        depth = np.concatenate([depth[keep], depth[pick] + 1, depth[pick] + 1])
    values = np.bincount(owner, weights=val, minlength=n)
    errors = np.bincount(owner, weights=err, minlength=n)
    if not np.all(np.isfinite(values)):
        verdict = "max-depth"
    return values, errors, verdict, n_eval


def dense_intervals(f, lo, hi, n: int = 4096):
    """Midpoint rule on each interval; error from the half-resolution rule.

    Used for cells whose discontinuities are too many to resolve.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if len(lo) == 0:
        return np.zeros(0), np.zeros(0)
    t = (np.arange(n) + 0.5) / n
    vals = np.empty(len(lo))
    errs = np.empty(len(lo))
    block = max(1, 2_000_000 // n)
    for s in range(0, len(lo), block):
        a, b = lo[s:s + block], hi[s:s + block]
        x = a[:, None] + (b - a)[:, None] * t[None, :]
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        full = fx.mean(axis=1) * (b - a)
        t2 = fx.reshape(len(a), n // 2, 2)
        # every second sample is the same rule at half the resolution
        half = 0.5 * (t2[:, :, 0].mean(axis=1) + t2[:, :, 1].mean(axis=1)) * (b - a)
        coarse = t2[:, :, 0].mean(axis=1) * (b - a)
        vals[s:s + block] = full
        errs[s:s + block] = np.abs(full - coarse)
        del half
    return vals, errs


def _cells_with_points(lo, hi, points):
    edges = np.unique(np.concatenate([[lo, hi], np.asarray(points, dtype=float)]))
    edges = edges[(edges >= lo) & (edges <= hi)]
    return edges[:-1], edges[1:]


def _piecewise(f, lo, hi, tol, breakpoints, cap, max_depth):
    """Integral over each cell [lo_i, hi_i] split at breakpoints when they are few."""
    lo = np.atleast_1d(lo)
    hi = np.atleast_1d(hi)
    pieces_a, pieces_b, owner = [], [], []
    dense = []
    budget = cap
    for i, (a, b) in enumerate(zip(lo, hi)):
        pts = np.empty(0)
        if breakpoints is not None:
            pts = breakpoints(a, b, max(budget, 0)) if budget > 0 else None
        if pts is None:
            dense.append(i)
            continue
        budget -= len(pts)
        pa, pb = _cells_with_points(a, b, pts)
        pieces_a.append(pa)
        pieces_b.append(pb)
        owner.append(np.full(len(pa), i))
    values = np.zeros(len(lo))
    errors = np.zeros(len(lo))
    verdict = "converged"
    n_eval = 0
    if pieces_a:
        pa = np.concatenate(pieces_a)
        pb = np.concatenate(pieces_b)
        ow = np.concatenate(owner)
        v, e, verdict, n_eval = adaptive_intervals(f, pa, pb, tol, max_depth)
        values += np.bincount(ow, weights=v, minlength=len(lo))
        errors += np.bincount(ow, weights=e, minlength=len(lo))
    unresolved = np.zeros(len(lo), dtype=bool)
    if dense:
        idx = np.array(dense)
        v, e = dense_intervals(f, lo[idx], hi[idx])
        values[idx] = v
        errors[idx] = e
        unresolved[idx] = True
        n_eval += 4096 * len(idx)
    return values, errors, verdict, n_eval, unresolved


def _endpoint_ladder(f, anchor, width, direction, tol, breakpoints, cap, max_depth,
                     divergence_cap, max_cells=1100):
    """Sum of dyadic cells approaching the singular endpoint ``anchor``.

    Cell j spans distances [width 2^-(j+1), width 2^-j] from ``anchor``;
    ``direction`` is +1 when the cells lie to the right of the anchor.
    The tail beyond the last cell is extrapolated geometrically.
    """
    total = 0.0
    err_total = 0.0
    cells = []
    stall = 0
    prev = None
    prev_tail = None
    n_eval = 0
    unresolved = False
    verdict = "max-depth"
    j = 0
    block = 16
    while j < max_cells:
        js = np.arange(j, min(j + block, max_cells))
        near = width * 2.0 ** (-(js + 1).astype(float))
        far = width * 2.0 ** (-js.astype(float))
        if direction > 0:
            a, b = anchor + near, anchor + far
        else:
            a, b = anchor - far, anchor - near
        # stop where the cells drop below the floating-point resolution at the anchor
        ok = (b - a) > 2.0 ** 12 * np.finfo(float).eps * abs(anchor)
        if not ok.all():
            js, a, b = js[ok], a[ok], b[ok]
            if len(js) == 0:
                break
        cell_tol = tol * np.maximum(2.0 ** (-(js + 2).astype(float)), 1.0 / 512)
        v, e, vd, ne, unr = _piecewise(f, a, b, float(cell_tol.sum()), breakpoints, cap, max_depth)
        n_eval += ne
        unresolved |= bool(unr.any())
        order = range(len(js)) if direction < 0 else range(len(js))
        finished = False
        for i in order:
            c = float(v[i])
            cells.append(c)
            total += c
            err_total += float(e[i])
            if not math.isfinite(total) or abs(total) > divergence_cap:
                return QuadratureResult(total, math.inf, "divergent", n_eval, unresolved, tuple(cells))
            if prev is not None and prev != 0.0:
                q = c / prev
                stall = stall + 1 if abs(q) >= STALL_RATIO else 0
                if stall >= STALL_COUNT:
                    return QuadratureResult(total, math.inf, "divergent", n_eval, unresolved,
                                            tuple(cells))
                if 0.0 <= q < STALL_RATIO:
                    tail = c * q / (1.0 - q)
                    change = abs(tail - prev_tail) if prev_tail is not None else math.inf
                    if abs(tail) <= tol / 4 or (change <= tol / 4 and len(cells) >= 4):
                        total += tail
                        err_total += max(change if math.isfinite(change) else abs(tail), 0.0)
                        verdict = "converged"
                        finished = True
                        break
                    prev_tail = tail
                else:
                    prev_tail = None
            elif prev is not None and prev == 0.0 and c == 0.0:
                verdict = "converged"
                finished = True
                break
            prev = c
        if finished:
            break
        j += block
    if verdict != "converged" and len(cells) >= 2 and cells[-2] != 0:
        q = cells[-1] / cells[-2]
        if 0.0 <= q < STALL_RATIO:
            tail = cells[-1] * q / (1.0 - q)
            total += tail
            err_total += abs(tail)
            if abs(tail) <= tol:
                verdict = "converged"
    elif verdict != "converged" and cells and abs(cells[-1]) <= tol:
        verdict = "converged"
    return QuadratureResult(total, err_total, verdict, n_eval, unresolved, tuple(cells))


def integrate(f: Callable, lo: float, hi: float, tol: float = 1e-10, *,
              points: Optional[Sequence[float]] = None,
              breakpoints: Optional[Callable] = None,
              singular: Optional[str] = None,
              max_depth: int = MAX_DEPTH,
              divergence_cap: float = DIVERGENCE_CAP,
              breakpoint_cap: int = 200_000) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of a vectorised ``f`` over [lo, hi].

    Parameters
    ----------
    f : callable
        Maps float arrays to float arrays.
    lo, hi : float
        Limits with ``lo < hi``.
    tol : float
        Absolute error budget.
    points : sequence, optional
        Known discontinuities; panels are started at them.
    breakpoints : callable, optional
        ``breakpoints(a, b, cap)`` returning discontinuities in (a, b), or
        None when there are more than ``cap``.
    singular : {'lo', 'hi', 'both'}, optional
        Endpoints where ``f`` may blow up.  Those ends are approached through
        dyadic cells and divergence is detected from the cell ladder.
    """
    if not lo < hi:
        raise ValueError("integrate requires lo < hi")
    if singular is None:
        if points is not None:
            a, b = _cells_with_points(lo, hi, points)
        else:
            a, b = np.array([lo]), np.array([hi])
        if breakpoints is not None:
            v, e, vd, ne, unr = _piecewise(f, a, b, tol, breakpoints, breakpoint_cap, max_depth)
        else:
            v, e, vd, ne = adaptive_intervals(f, a, b, tol, max_depth)
            unr = np.zeros(1, dtype=bool)
        value, err = float(v.sum()), float(e.sum())
        if vd == "converged" and err > tol:
            vd = "max-depth"
        return QuadratureResult(value, err, vd, ne, bool(unr.any()))
    if singular not in ("lo", "hi", "both"):
        raise ValueError(f"singular must be 'lo', 'hi' or 'both', got {singular!r}")
    bp = breakpoints
    if points is not None:
        pts = np.asarray(points, dtype=float)
        user = bp

        def bp(a, b, cap, pts=pts, user=user):
            inner = pts[(pts > a) & (pts < b)]
            if user is None:
                return inner
            more = user(a, b, cap)
            return None if more is None else np.concatenate([inner, more])

    parts = []
    if singular == "both":
        mid = 0.5 * (lo + hi)
        parts.append(_endpoint_ladder(f, lo, mid - lo, +1, tol / 2, bp, breakpoint_cap,
                                      max_depth, divergence_cap))
        parts.append(_endpoint_ladder(f, hi, hi - mid, -1, tol / 2, bp, breakpoint_cap,
                                      max_depth, divergence_cap))
    elif singular == "lo":
        parts.append(_endpoint_ladder(f, lo, hi - lo, +1, tol, bp, breakpoint_cap,
                                      max_depth, divergence_cap))
    else:
        parts.append(_endpoint_ladder(f, hi, hi - lo, -1, tol, bp, breakpoint_cap,
                                      max_depth, divergence_cap))
    value = sum(p.value for p in parts)
    err = sum(p.abs_error_estimate for p in parts)
    verdicts = {p.verdict for p in parts}
    if "divergent" in verdicts:
        verdict = "divergent"
    elif verdicts == {"converged"}:
        verdict = "converged"
    else:
        verdict = "max-depth"
    cells = tuple(c for p in parts for c in p.cells)
    return QuadratureResult(value, err, verdict, sum(p.n_eval for p in parts),
                            any(p.unresolved for p in parts), cells)


# ---------------------------------------------------------------------------
# drifts seen from the right

def _oriented(drift, side: str):
    if side in ("right", "plus", "+"):
        return drift, 1.0
    if side in ("left", "minus", "-"):
        return drift.reflected(), -1.0
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _bp_of(drift):
    return getattr(drift, "breakpoints", None)


def _check_sign(g, R, n=2000):
    u = np.concatenate([R * 2.0 ** -np.arange(61), np.linspace(0, R, n + 1)[1:]])
    vals = g(u)
    if np.any(vals < 0):
        bad = u[vals < 0][0]
        raise SignViolation(f"drift has the wrong sign at distance {bad:g} from 0")
    return vals


def osgood_integral(drift, side: str, R: float, tol: float = 1e-8) -> QuadratureResult:
    """One-sided Osgood integral towards 0.

    Right: int_0^R dz / a(z).  Left: -int_{-R}^0 dz / a(z); both are
    non-negative for a drift with the expected sign.
    """
    g, _ = _oriented(drift, side)
    vals = _check_sign(g, R)
    if np.any(vals == 0):
        return QuadratureResult(math.inf, math.inf, "divergent")

    def inv(u):
        with np.errstate(divide="ignore"):
            return 1.0 / g(u)

    return integrate(inv, 0.0, R, tol, breakpoints=_bp_of(g), singular="lo")


# ---------------------------------------------------------------------------
# antiderivatives

@dataclass(eq=False)
class Antiderivative:
    """F(x) = int_0^x f on one side of 0, stored in the distance u = |x|.

    ``kind`` is 'A' (f = 1/a) or 'B' (f = a).  Values are non-negative and
    increasing in u on both sides; ``sign`` maps u back to x.  ``span`` is
    the largest u covered; for A with a singular point R this is R itself
    when the integral stays finite there, ``value_at_span`` then equals
    A(R) (the plateau time), otherwise it is inf.
    """

    side: str
    kind: str
    u: np.ndarray
    values: np.ndarray
    integrand: Callable
    sign: float
    span: float
    singular_point: Optional[float] = None
    value_at_span: float = math.nan
    resolved_floor: float = 0.0
    unresolved: bool = False
    tol: float = 1e-10
    breakpoints: Optional[Callable] = None
    edge_u: Optional[np.ndarray] = field(default=None, repr=False)
    edge_values: Optional[np.ndarray] = field(default=None, repr=False)
    tail_model: Optional[tuple] = None
    _interp: object = field(default=None, repr=False)
    _inv: object = field(default=None, repr=False)

    def __post_init__(self):
        self._interp = PchipInterpolator(self.u, self.values, extrapolate=False)
        vals, keep = np.unique(self.values, return_index=True)
        # signed B need not be monotone; it then has no inverse
        if len(vals) >= 2 and np.all(np.diff(self.values) >= 0):
            self._inv = PchipInterpolator(vals, self.u[keep], extrapolate=False)
        if self.edge_u is None:
            self.edge_u, self.edge_values = self.u, self.values

    @property
    def x(self) -> np.ndarray:
        return self.sign * self.u

    @property
    def max_value(self) -> float:
        return float(self.values[-1])

    def _dist(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x * self.sign < 0):
            raise ValueError(f"{self.side} antiderivative evaluated on the wrong side of 0")
        return np.abs(x)

    def __call__(self, x):
        """Interpolated value (monotone piecewise cubic)."""
        u = self._dist(x)
        return self._eval_u(u, exact=False)

    def exact(self, x):
        """Node value plus an adaptive quadrature from the nearest node."""
        return self._eval_u(self._dist(x), exact=True)

    def _eval_u(self, u, exact):
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(u)
        if np.any(u > self.span * (1 + 1e-12)):
            raise RangeError(f"|x| beyond the covered span {self.span:g}")
        out = np.empty_like(u)
        top = u >= self.u[-1]
        low = u <= self.u[0]
        mid = ~(top | low)
        out[top] = self.values[-1]
        if exact and self.resolved_floor > 0:
            # unresolved cells: fitted power law, else the interpolant
            deep = mid & (u < self.resolved_floor)
            if deep.any():
                if self.tail_model is not None:
                    K, q = self.tail_model
                    out[deep] = K * (u[deep] / self.resolved_floor) ** q
                else:
                    out[deep] = self._interp(u[deep])
                mid = mid & ~deep
        if exact and mid.any():
            eu, ev = self.edge_u, self.edge_values
            i = np.clip(np.searchsorted(eu, u[mid], side="right") - 1, 0, len(eu) - 2)
            base_u = eu[i]
            q = u[mid] > base_u
            res = ev[i].copy()
            if q.any():
                depth = 40
                # per-query budget, so that large batches are not over-resolved
                v, _, _, _ = adaptive_intervals(self.integrand, base_u[q], u[mid][q],
                                                self.tol * 1e-2 * q.sum(), max_depth=depth)
                res[q] += v
            out[mid] = res
        elif mid.any():
            out[mid] = self._interp(u[mid])
        if low.any():
            if self.tail_model is not None:
                K, q = self.tail_model
                out[low] = K * (u[low] / self.resolved_floor) ** q
            else:
                out[low] = self._below_first(u[low])
        return float(out[0]) if scalar else out

    def _below_first(self, u):
        # power-law interpolation through (0, 0) and the first two nodes
        u0, u1 = self.u[0], self.u[1]
        v0, v1 = self.values[0], self.values[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            k = (math.log(v1 / v0) / math.log(u1 / u0)
                 if v0 * v1 > 0 and abs(v1) > abs(v0) else 1.0)
        return np.where(u > 0, v0 * (u / u0) ** k, 0.0)

    def _below_first_inverse(self, y):
        u0, u1 = self.u[0], self.u[1]
        v0, v1 = self.values[0], self.values[1]
        k = (math.log(v1 / v0) / math.log(u1 / u0)
             if v0 * v1 > 0 and abs(v1) > abs(v0) else 1.0)
        return u0 * (np.asarray(y) / v0) ** (1.0 / k)

    def derivative(self, x):
        u = self._dist(x)
        return self.integrand(np.atleast_1d(u))

    def inverse(self, y, tol: Optional[float] = None):
        """x with F(x) = y, located by safeguarded Newton on the exact values."""
        tol = self.tol * 10 if tol is None else tol
        if self._inv is None:
            raise ValueError("antiderivative is not increasing; no inverse")
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < 0) or np.any(y > self.max_value * (1 + 1e-12)):
            raise RangeError(f"value outside the range [0, {self.max_value:g}]")
        out = np.zeros_like(y)
        pos = y > 0
        yy = np.minimum(y[pos], self.max_value)
        if len(yy):
            out[pos] = self._newton(yy, tol)
        out = self.sign * out
        return float(out[0]) if scalar else out

    def _newton(self, y, tol):
        vals = self.values
        i = np.clip(np.searchsorted(vals, y, side="left"), 1, len(vals) - 1)
        lo = self.u[i - 1].copy()
        hi = self.u[i].copy()
        small = y <= vals[0]
        lo[small] = 0.0
        hi[small] = self.u[0]
        guess = self._inv(np.clip(y, vals[0], vals[-1]))
        guess = np.where(np.isfinite(guess), guess, 0.5 * (lo + hi))
        guess[small] = 0.5 * hi[small]
        x = np.clip(guess, lo, hi)
        target = tol * np.abs(y)
        active = np.ones(len(y), dtype=bool)
        if small.any() and vals[0] > 0:
            # the extrapolation below the first node inverts in closed form
            x[small] = self._below_first_inverse(y[small])
            active &= ~small
        if self.resolved_floor > 0:
            # below the resolved floor only the interpolant is available
            coarse = x <= self.resolved_floor
            active &= ~coarse
        for _ in range(80):
            fx = self._eval_u(x[active], exact=True) - y[active]
            ok = np.abs(fx) <= target[active]
            idx = np.flatnonzero(active)
            lo[idx[fx < 0]] = x[idx[fx < 0]]
            hi[idx[fx > 0]] = x[idx[fx > 0]]
            with np.errstate(divide="ignore", invalid="ignore"):
                d = self.integrand(x[idx])
                step = x[idx] - fx / d
            bad = ~np.isfinite(step) | (step <= lo[idx]) | (step >= hi[idx])
            step[bad] = 0.5 * (lo[idx][bad] + hi[idx][bad])
            x[idx[~ok]] = step[~ok]
            active[idx[ok]] = False
            # a bracket collapsed to rounding level is as good as it gets
            tiny = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(hi, 1e-300)
            active &= ~tiny
            if not active.any():
                break
        return x


def _first_zero(g, R, rel=1e-12, n=20000):
    """First u in (0, R] where g(u) <= rel * max g, refined by bisection."""
    u = np.linspace(0, R, n + 1)[1:]
    vals = g(u)
    sup = float(np.max(np.abs(vals))) if len(vals) else 0.0
    thr = rel * sup
    hit = np.flatnonzero(vals <= thr)
    if len(hit) == 0:
        return None
    k = hit[0]
    a = u[k - 1] if k > 0 else 0.0
    b = u[k]
    if k == 0:
        return float(b)
    for _ in range(200):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        if g(np.array([m]))[0] <= thr:
            b = m
        else:
            a = m
    return float(b)


def _node_grid(R, singular: Optional[float], per_octave: int = 4, octaves: int = 60,
               n_uniform: int = 256):
    top = R if singular is None else singular
    geo = top * 2.0 ** (-np.arange(0, per_octave * octaves + 1) / per_octave)
    uni = np.linspace(0, top, n_uniform + 1)[1:]
    nodes = [geo, uni]
    if singular is not None:
        gap = singular * 2.0 ** (-np.arange(per_octave, per_octave * octaves + 1) / per_octave)
        gap = gap[gap > 2.0 ** 22 * np.finfo(float).eps * singular]
        near = singular - gap
        nodes.append(near[near < singular])
    u = np.unique(np.concatenate(nodes))
    return u[(u > 0) & (u <= top)]


def _tail_model(edge_u, edge_values, floor, dense_value, span=4.0, n=33):
    """Power law K (u/floor)^q for the unresolved cells below ``floor``.

    Fitted to the resolved increments on [floor, span * floor]; returns
    (K, q) or None when the fit is poor or disagrees with the dense sum.
    """
    from scipy.optimize import curve_fit

    top = span * floor
    if edge_u[-1] < top:
        return None
    pick = np.searchsorted(edge_u, floor * np.geomspace(1.0, span, n))
    pick = np.unique(np.clip(pick, 0, len(edge_u) - 1))
    uu, vv = edge_u[pick], edge_values[pick]
    if uu[0] != floor or len(uu) < 8:
        return None
    t = uu / floor
    D = vv - vv[0]
    scale = abs(D[-1])
    if not scale > 0:
        return None
    q0 = 1.0 + math.log(abs((D[-1] - D[-2]) / (t[-1] - t[-2])) / abs(D[1] / (t[1] - 1))) / math.log(t[-1])
    q0 = q0 if math.isfinite(q0) and q0 > 0 else 1.0
    model = lambda x, K, q: K * (x ** q - 1.0)
    try:
        (K, q), _ = curve_fit(model, t, D / scale, p0=(1.0 / max(span ** q0 - 1, 1e-3), q0),
                              xtol=1e-15, ftol=1e-15, maxfev=2000)
    except (RuntimeError, ValueError):
        return None
    resid = np.max(np.abs(model(t, K, q) - D / scale))
    K *= scale
    if not (q > 0 and K * np.sign(D[-1]) > 0 and resid < 1e-4):
        return None
    # the dense sum is noisy but must agree to within a few percent
    if abs(K - dense_value) > 0.05 * abs(dense_value):
        return None
    return float(K), float(q)


def _antiderivative(drift, side, R, tol, kind, piece_cap=200_000):
    g, sign = _oriented(drift, side)
    bp = _bp_of(g)
    singular = None
    if kind == "A":
        _check_sign(g, R)
        singular = _first_zero(g, R)

        def f(u):
            with np.errstate(divide="ignore"):
                return 1.0 / g(u)
    else:
        f = g
    nodes = _node_grid(R, singular)
    if singular is not None and len(nodes) and nodes[-1] >= singular:
        nodes = nodes[nodes < singular]
    # cells between consecutive nodes, with breakpoints while the budget lasts
    a = nodes[:-1]
    b = nodes[1:]
    order = np.argsort(-a)  # resolve from the top down
    v = np.zeros(len(a))
    unresolved = np.zeros(len(a), dtype=bool)
    budget = piece_cap
    resolved_floor = 0.0
    pa, pb, ow, dense = [], [], [], []
    for i in order:
        pts = np.empty(0)
        if bp is not None and budget > 0:
            pts = bp(a[i], b[i], budget)
        elif bp is not None:
            pts = None
        if pts is None:
            budget = 0
            dense.append(i)
            resolved_floor = max(resolved_floor, b[i])
            continue
        budget -= len(pts)
        ca, cb = _cells_with_points(a[i], b[i], pts)
        pa.append(ca)
        pb.append(cb)
        ow.append(np.full(len(ca), i))
    starts, ends, pvals = [], [], []
    if pa:
        ca, cb = np.concatenate(pa), np.concatenate(pb)
        vals, errs, verdict, _ = adaptive_intervals(f, ca, cb, tol / 2)
        starts.append(ca)
        ends.append(cb)
        pvals.append(vals)
    if dense:
        idx = np.array(dense)
        dv, _ = dense_intervals(f, a[idx], b[idx])
        starts.append(a[idx])
        ends.append(b[idx])
        pvals.append(dv)
        unresolved[idx] = True
    # integral from 0 to the first node
    if kind == "A":
        head = integrate(f, 0.0, nodes[0], tol / 4, breakpoints=bp, singular="lo")
        if head.verdict == "divergent":
            raise ValueError("the Osgood integral diverges at 0 on this side")
        head_val = head.value
    else:
        head = integrate(f, 0.0, nodes[0], tol / 4)
        head_val = head.value
    # cumulative values on every piece edge; nodes are a subset of the edges
    starts = np.concatenate(starts) if starts else np.empty(0)
    ends = np.concatenate(ends) if ends else np.empty(0)
    pvals = np.concatenate(pvals) if pvals else np.empty(0)
    order = np.argsort(starts)
    edge_u = np.concatenate([[nodes[0]], ends[order]])
    edge_values = head_val + np.concatenate([[0.0], np.cumsum(pvals[order])])
    tail = None
    if dense and resolved_floor > 0:
        tail = _tail_model(edge_u, edge_values, resolved_floor, float(np.sum(dv)) + head_val)
        if tail is not None:
            K, q = tail
            below = edge_u < resolved_floor
            shift = K - np.interp(resolved_floor, edge_u, edge_values)
            edge_values = edge_values + shift
            edge_values[below] = K * (edge_u[below] / resolved_floor) ** q
    values = edge_values[np.searchsorted(edge_u, nodes)]
    span = float(nodes[-1])
    value_at_span = math.nan
    if singular is not None:
        tail = integrate(f, nodes[-1], singular, tol / 4, breakpoints=bp, singular="hi")
        if tail.verdict == "divergent":
            value_at_span = math.inf
        else:
            value_at_span = values[-1] + tail.value
            nodes = np.append(nodes, singular)
            values = np.append(values, value_at_span)
            edge_u = np.append(edge_u, singular)
            edge_values = np.append(edge_values, value_at_span)
            span = singular
    return Antiderivative(side="right" if sign > 0 else "left", kind=kind, u=nodes, values=values,
                          integrand=f, sign=sign, span=span,
                          singular_point=None if singular is None else sign * singular,
                          value_at_span=value_at_span, resolved_floor=resolved_floor,
                          unresolved=bool(unresolved.any()), tol=tol, breakpoints=bp,
                          edge_u=edge_u, edge_values=edge_values, tail_model=tail)


def antiderivative_A(drift, side: str, R: float, tol: float = 1e-10) -> Antiderivative:
    """A(x) = int_0^x dz / a(z) on one side, up to R or the first zero of a."""
    return _antiderivative(drift, side, R, tol, "A")


def antiderivative_B(drift, side: str, R: float, tol: float = 1e-12,
                     signed: bool = False) -> Antiderivative:
    """B(x) = int_0^x a(z) dz on one side (no factor 2).

    With ``signed=True`` the drift may take either sign; the result is then
    not monotone and must not be inverted.
    """
    if not signed:
        g, _ = _oriented(drift, side)
        _check_sign(g, R)
    return _antiderivative(drift, side, R, tol, "B")


def invert_monotone(F, y, tol: float = 1e-10, bracket: Optional[tuple] = None):
    """Solve F(x) = y for a monotone F.

    ``F`` is an :class:`Antiderivative` or an increasing callable, in which
    case ``bracket`` must enclose the root.
    """
    if isinstance(F, Antiderivative):
        return F.inverse(y, tol)
    if bracket is None:
        raise ValueError("a bracket is required for a plain callable")
    from scipy.optimize import brentq

    lo, hi = bracket
    flo, fhi = float(F(lo)), float(F(hi))
    if not min(flo, fhi) <= y <= max(flo, fhi):
        raise RangeError(f"{y} outside [{min(flo, fhi)}, {max(flo, fhi)}]")
    if y == flo:
        return float(lo)
    if y == fhi:
        return float(hi)
    return brentq(lambda x: float(F(x)) - y, lo, hi, xtol=tol * 1e-2, rtol=4 * np.finfo(float).eps)
