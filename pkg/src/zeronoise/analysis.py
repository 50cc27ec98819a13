"""Analytic side of the zero-noise limit.

Scale functions, exit probabilities, expected exit times, the Green
function, the weights p_eps, their limit p through mu'(0), the closed
forms for regularly varying drifts and the approximate-identity operator.

All quantities built from exp(-2 B / eps^2) are handled in the log domain:
integrals of exp(E) with E = -2 B / eps^2 are accumulated piecewise with
per-piece offsets, so ratios stay finite for eps far below the point where
exp(E) itself under- or overflows.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from zeronoise.calculus import (
    CUMULATIVE_GK,
    NODES,
    W_GAUSS,
    W_KRONROD,
    _GAUSS_IDX,
    Antiderivative,
    adaptive_intervals,
    antiderivative_B,
)

_LOCK = threading.Lock()


class RegimeMismatch(ValueError):
    """The drift does not have the sign pattern the formula needs."""


# ---------------------------------------------------------------------------
# B on both sides, cached on the drift

def _cache_of(drift):
    return getattr(drift, "_cache", None)


def drift_B(drift, side: str, R: float, signed: bool = True) -> Antiderivative:
    """B on one side covering at least distance R, memoised on the drift."""
    cache = _cache_of(drift)
    key = ("B", side, signed)
    if cache is not None:
        with _LOCK:
            got = cache.get(key)
        if got is not None and got.span >= R * (1 - 1e-12):
            return got
    B = antiderivative_B(drift, side, R, signed=signed)
    if cache is not None:
        with _LOCK:
            cache[key] = B
    return B


def B_values(drift, z, R: Optional[float] = None):
    """B(z) = int_0^z a for an array of z of either sign."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    lim = float(np.max(np.abs(z))) if R is None else R
    pos, neg = z > 0, z < 0
    if pos.any():
        out[pos] = drift_B(drift, "right", lim).exact(z[pos])
    if neg.any():
        out[neg] = drift_B(drift, "left", lim).exact(z[neg])
    return out


# ---------------------------------------------------------------------------
# log-domain integrals of exp(E)

def _log_gk(E, a, b, rtol=1e-12, max_depth=40, max_panels=400_000, E_panel=None):
    """log int_a^b exp(E) for each interval, each to relative accuracy rtol.

    Panels are bisected while their Kronrod-Gauss gap exceeds rtol relative
    to their own value; once ``max_panels`` are live, the remaining ones are
    accepted as they stand.  ``E_panel(a, b)``, when given, returns E at the
    Kronrod nodes of each panel directly.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    out = np.full(n, -np.inf)
    if n == 0:
        return out
    pa, pb = a.copy(), b.copy()
    owner = np.arange(n)
    depth = np.zeros(n, dtype=int)
    acc_owner, acc_log = [], []
    while len(pa):
        c = 0.5 * (pa + pb)
        h = 0.5 * (pb - pa)
        if E_panel is not None:
            ex = E_panel(pa, pb)
        else:
            x = c[:, None] + h[:, None] * NODES[None, :]
            ex = np.asarray(E(x.ravel()), dtype=float).reshape(x.shape)
        off = np.max(ex, axis=1)
        off = np.where(np.isfinite(off), off, 0.0)
        w = np.exp(ex - off[:, None])
        k = h * (w @ W_KRONROD)
        g = h * (w[:, _GAUSS_IDX] @ W_GAUSS)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(k - g) / k
        rel = np.where(k > 0, rel, 0.0)
        tiny = (pb - pa) <= 8 * np.finfo(float).eps * np.maximum(np.abs(pa), np.abs(pb))
        ok = (rel <= rtol) | (depth >= max_depth) | tiny
        if 2 * np.count_nonzero(~ok) > max_panels:
            ok[:] = True
        with np.errstate(divide="ignore"):
            logk = np.log(np.maximum(k, 0.0)) + off
        acc_owner.append(owner[ok])
        acc_log.append(logk[ok])
        split = ~ok
        mid = c[split]
        pa = np.concatenate([pa[split], mid])
        pb = np.concatenate([mid, pb[split]])
        owner = np.concatenate([owner[split], owner[split]])
        depth = np.concatenate([depth[split] + 1, depth[split] + 1])
    ow = np.concatenate(acc_owner)
    lg = np.concatenate(acc_log)
    order = np.lexsort((lg, ow))
    ow, lg = ow[order], lg[order]
    # per-owner logsumexp
    starts = np.flatnonzero(np.r_[True, ow[1:] != ow[:-1]])
    mx = np.maximum.reduceat(lg, starts)
    mx_full = np.repeat(mx, np.diff(np.r_[starts, len(lg)]))
    safe = np.where(np.isfinite(mx_full), mx_full, 0.0)
    sums = np.add.reduceat(np.exp(lg - safe), starts)
    res = np.where(np.isfinite(mx), np.log(np.where(sums > 0, sums, 1.0)) + np.where(np.isfinite(mx), mx, 0), -np.inf)
    out[ow[starts]] = res
    return out


def _geometric_around(c, lo, hi, per_octave=4, octaves=50):
    d = (hi - lo) * 2.0 ** (-np.arange(0, per_octave * octaves + 1) / per_octave)
    pts = np.concatenate([c - d, c + d])
    return pts[(pts > lo) & (pts < hi)]


class LogExpTable:
    """Piecewise log-integrals of exp(E) on [lo, hi].

    ``log_integral(anchor, y)`` returns log |int_anchor^y exp(E)| where the
    anchor is one of the table's edges (lo, hi or any point passed in
    ``points``); sums are accumulated outward from the anchor so no
    differences of large numbers occur.
    """

    def __init__(self, E: Callable, lo: float, hi: float, points: Sequence[float] = (),
                 centers: Sequence[float] = (), rtol: float = 1e-12, n_uniform: int = 256,
                 E_panel: Optional[Callable] = None, cuts: Optional[np.ndarray] = None):
        self.E = E
        self.lo, self.hi = float(lo), float(hi)
        self.rtol = rtol
        fixed = [np.linspace(lo, hi, n_uniform + 1)]
        for c in list(centers) + [lo, hi]:
            if lo <= c <= hi:
                fixed.append(_geometric_around(float(c), lo, hi))
        pts = np.asarray(list(points), dtype=float)
        fixed.append(pts[(pts >= lo) & (pts <= hi)])
        if cuts is not None:
            fixed.append(cuts[(cuts > lo) & (cuts < hi)])
        edges = np.unique(np.concatenate(fixed))
        self.edges = edges
        self.E_panel = E_panel
        self.logv = _log_gk(E, edges[:-1], edges[1:], rtol, E_panel=E_panel)
        self._anchors = {}

    @property
    def log_total(self) -> float:
        return float(self._cum(0)[1][-1])

    def _edge_index(self, x0: float) -> int:
        i = int(np.searchsorted(self.edges, x0))
        if i >= len(self.edges) or self.edges[i] != x0:
            raise ValueError(f"{x0} is not an edge of the table")
        return i

    def _cum(self, i):
        """(backward, forward) log-cumulatives from edge i, indexed by edge."""
        got = self._anchors.get(i)
        if got is not None:
            return got
        n = len(self.edges)
        fwd = np.full(n, -np.inf)
        bwd = np.full(n, -np.inf)
        if i < n - 1:
            fwd[i + 1:] = np.logaddexp.accumulate(self.logv[i:])
        if i > 0:
            bwd[:i] = np.logaddexp.accumulate(self.logv[:i][::-1])[::-1]
        self._anchors[i] = (bwd, fwd)
        return bwd, fwd

    def log_integral(self, anchor: float, y):
        """log of int between the edge ``anchor`` and each y (either side)."""
        i0 = self._edge_index(anchor)
        bwd, fwd = self._cum(i0)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < self.lo) or np.any(y > self.hi):
            raise ValueError("query outside the table")
        out = np.full(len(y), -np.inf)
        right = y > anchor
        left = y < anchor
        if right.any():
            yr = y[right]
            j = np.clip(np.searchsorted(self.edges, yr, side="right") - 1, i0, len(self.edges) - 1)
            base = fwd[j]
            part = np.full(len(yr), -np.inf)
            m = yr > self.edges[j]
            if m.any():
                part[m] = _log_gk(self.E, self.edges[j][m], yr[m], self.rtol, E_panel=self.E_panel)
            out[right] = np.logaddexp(base, part)
        if left.any():
            yl = y[left]
            j = np.clip(np.searchsorted(self.edges, yl, side="left"), 0, i0)
            base = bwd[j]
            part = np.full(len(yl), -np.inf)
            m = yl < self.edges[j]
            if m.any():
                part[m] = _log_gk(self.E, yl[m], self.edges[j][m], self.rtol, E_panel=self.E_panel)
            out[left] = np.logaddexp(base, part)
        return out


# ---------------------------------------------------------------------------
# scale function

@dataclass(eq=False)
class ScaleFunction:
    """s(r) = int_0^r exp(-2 B(z) / eps^2) dz on [lo, hi] (which is widened to hold 0).

    Values are exposed both raw (may overflow) and scaled by exp(-L) with
    the shared log-offset L = max(-2B/eps^2) over the interval.
    """

    drift: object
    eps: float
    lo: float
    hi: float
    points: tuple = ()
    rtol: float = 1e-12
    table: LogExpTable = field(init=False, repr=False)
    log_offset: float = field(init=False)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.lo = min(float(self.lo), 0.0)
        self.hi = max(float(self.hi), 0.0)
        R = max(-self.lo, self.hi)
        k = 2.0 / self.eps ** 2
        drift = self.drift

        def E(z):
            return -k * B_values(drift, z, R)

        self.E = E
        grid = np.linspace(self.lo, self.hi, 4001)
        ev = E(grid)
        centers = [0.0, float(grid[int(np.argmax(ev))])]
        pts = tuple(self.points) + (0.0, self.lo, self.hi)
        # piece edges of B (drift breakpoints included) keep every panel smooth
        cuts, floors = [], []
        for side, sgn, lim in (("right", 1.0, self.hi), ("left", -1.0, -self.lo)):
            if lim <= 0:
                floors.append(0.0)
                continue
            Bs = drift_B(drift, side, R)
            eu = Bs.edge_u[(Bs.edge_u >= Bs.resolved_floor) & (Bs.edge_u <= lim)]
            cuts.append(sgn * eu)
            floors.append(Bs.resolved_floor)
        fp, fm = floors

        def E_panel(a, b):
            # B at the Kronrod nodes from B(a) plus a spectral cumulative rule
            c, h = 0.5 * (a + b), 0.5 * (b - a)
            x = c[:, None] + h[:, None] * NODES[None, :]
            rough = (b > -fm) & (a < fp)
            out = np.empty(x.shape)
            if rough.any():
                out[rough] = E(x[rough].ravel()).reshape(-1, len(NODES))
            ok = ~rough
            if ok.any():
                fa = np.asarray(drift(x[ok].ravel()), dtype=float).reshape(-1, len(NODES))
                Ba = B_values(drift, a[ok], R)
                out[ok] = -k * (Ba[:, None] + h[ok, None] * (fa @ CUMULATIVE_GK.T))
            return out

        self.table = LogExpTable(E, self.lo, self.hi, points=pts, centers=centers, rtol=self.rtol,
                                 E_panel=E_panel, cuts=np.concatenate(cuts) if cuts else None)
        self.log_offset = float(max(np.max(ev), np.max(E(self.table.edges))))

    def log_abs(self, r):
        """log |s(r)|."""
        return self.table.log_integral(0.0, r)

    def scaled(self, r):
        """s(r) exp(-L)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return np.sign(r) * np.exp(self.log_abs(r) - self.log_offset)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore"):
            out = np.sign(np.atleast_1d(r)) * np.exp(self.log_abs(r))
        return float(out[0]) if r.ndim == 0 else out

    def log_derivative(self, y):
        """log s'(y) = -2 B(y) / eps^2."""
        return self.E(np.atleast_1d(np.asarray(y, dtype=float)))

    def log_between(self, anchor: float, y):
        """log int between an edge ``anchor`` and y of s'."""
        return self.table.log_integral(anchor, y)


def scale_function(drift, eps: float, r, tol: float = 1e-12, lo: Optional[float] = None,
                   hi: Optional[float] = None):
    """s_eps(r) = int_0^r exp(-(2/eps^2) int_0^z a) dz (raw value, may be inf)."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    lo = float(min(r_arr.min(), 0.0)) if lo is None else lo
    hi = float(max(r_arr.max(), 0.0)) if hi is None else hi
    S = ScaleFunction(drift, eps, lo, hi, rtol=tol)
    return S(r)


def _check_interval(x1, x2):
    if not x1 < x2:
        raise ValueError("degenerate interval: need x1 < x2")


def exit_probability(drift, eps: float, x, x1: float, x2: float, tol: float = 1e-12):
    """Pr^x(tau^{x1} < tau^{x2}) = (s(x2) - s(x)) / (s(x2) - s(x1))."""
    _check_interval(x1, x2)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < x1) or np.any(xa > x2):
        raise ValueError("x must lie in [x1, x2]")
    S = ScaleFunction(drift, eps, x1, x2, points=(x1, x2), rtol=tol)
    num = S.log_between(x2, np.atleast_1d(xa))
    den = S.log_between(x2, np.array([x1]))[0]
    out = np.exp(num - den)
    return float(out[0]) if xa.ndim == 0 else out


def _sign_profile(drift, alpha, beta, n=2001):
    left = drift(-np.abs(alpha) * np.linspace(0, 1, n)[1:])
    right = drift(beta * np.linspace(0, 1, n)[1:])
    return left, right


def weight_p_eps(drift, eps: float, alpha: float, beta: float, tol: float = 1e-12,
                 check: bool = True) -> float:
    """p_eps = -s(alpha) / (s(beta) - s(alpha)): weight of psi_+ at noise eps."""
    if not alpha < 0 < beta:
        raise ValueError("need alpha < 0 < beta")
    if check:
        left, right = _sign_profile(drift, alpha, beta)
        if np.any(left > 0) or np.any(right < 0):
            raise RegimeMismatch("weight_p_eps needs a <= 0 left of 0 and a >= 0 right of it")
    S = ScaleFunction(drift, eps, alpha, beta, points=(alpha, beta), rtol=tol)
    num = S.log_between(alpha, np.array([0.0]))[0]
    den = S.log_between(alpha, np.array([beta]))[0]
    return float(np.exp(num - den))


# ---------------------------------------------------------------------------
# Green function and exit times

class GreenKernel:
    """G_I(x, y) and the speed density on I = (x1, x2) for one eps."""

    def __init__(self, drift, eps, x1, x2, points=(), rtol=1e-12):
        _check_interval(x1, x2)
        self.x1, self.x2, self.eps = float(x1), float(x2), float(eps)
        self.S = ScaleFunction(drift, eps, x1, x2, points=tuple(points) + (x1, x2), rtol=rtol)
        self.log_den = float(self.S.log_between(self.x1, np.array([self.x2]))[0])

    def log_green(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        lo = np.minimum(x, y).ravel()
        hi = np.maximum(x, y).ravel()
        a = self.S.log_between(self.x1, lo)
        b = self.S.log_between(self.x2, hi)
        return (a + b - self.log_den).reshape(x.shape)

    def green(self, x, y):
        with np.errstate(over="ignore"):
            return np.exp(self.log_green(x, y))

    def log_speed(self, y):
        """log of the speed density 2 / (s'(y) eps^2)."""
        return math.log(2.0 / self.eps ** 2) - self.S.log_derivative(y)

    def occupation(self, x: float, f: Optional[Callable] = None, rtol: float = 1e-10) -> float:
        """int G(x, y) f(y) m(dy); f = 1 gives the expected exit time."""
        x = float(x)
        if x <= self.x1 or x >= self.x2:
            return 0.0
        edges = np.unique(np.concatenate([self.S.table.edges, [x]]))
        edges = edges[(edges >= self.x1) & (edges <= self.x2)]

        def integrand(y):
            val = np.exp(self.log_green(x, y) + self.log_speed(y))
            return val if f is None else val * f(y)

        a, b = edges[:-1], edges[1:]
        v0, _, _, _ = adaptive_intervals(integrand, a, b, np.inf)
        est = abs(float(v0.sum()))
        v, _, _, _ = adaptive_intervals(integrand, a, b, rtol * est + 1e-300)
        return float(v.sum())


def green_function(drift, eps: float, x1: float, x2: float, x, y, tol: float = 1e-12):
    """G_I(x, y) = (s(x^y) - s(x1)) (s(x2) - s(x v y)) / (s(x2) - s(x1))."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if (np.any(xa < x1) or np.any(xa > x2) or np.any(ya < x1) or np.any(ya > x2)):
        raise ValueError("x and y must lie in [x1, x2]")
    K = GreenKernel(drift, eps, x1, x2, rtol=tol)
    out = K.green(xa, ya)
    return float(out) if np.ndim(out) == 0 else out


def speed_density(drift, eps: float, y, x1: float, x2: float):
    """m(dy)/dy = 2 / (s'(y) eps^2), with s normalised at 0."""
    S = ScaleFunction(drift, eps, x1, x2)
    with np.errstate(over="ignore"):
        return np.exp(math.log(2.0 / eps ** 2) - S.log_derivative(y))


def _rel_integral(f, edges, rtol):
    a, b = edges[:-1], edges[1:]
    v0, _, _, _ = adaptive_intervals(f, a, b, np.inf)
    est = float(np.abs(v0).sum())
    v, _, _, _ = adaptive_intervals(f, a, b, rtol * est + 1e-300)
    return v


def _exit_time_phi(drift, eps, x, x1, x2, rtol=1e-12):
    """Double-integral formula with Phi(y) = exp(-int 2a / eps^2).

    With the inner integral anchored at the starting point x,

        u(x) = (2/eps^2) [p P + (1 - p) N],
        P = int_x^{x2} Phi(w) int_x^w dz/Phi(z) dw,
        N = int_{x1}^x Phi(w) int_w^x dz/Phi(z) dw,

    where p = Pr^x(tau^{x2} < tau^{x1}).  Anchoring anywhere else adds a
    multiple of the scale function that cancels in exact arithmetic but
    loses about (max E - min E)/ln 10 digits in floating point; with the
    anchor at x every term is positive and everything stays in logs.
    Returns (u, condition), the condition being the ratio of the summed
    absolute terms to |u|.
    """
    k = 2.0 / eps ** 2
    S = ScaleFunction(drift, eps, x1, x2, points=(x, x1, x2), rtol=rtol)
    T = S.table
    cuts = T.edges[(T.edges > S.lo) & (T.edges < S.hi)]
    inv = LogExpTable(lambda z: -S.E(z), S.lo, S.hi, points=(x, x1, x2), rtol=rtol,
                      E_panel=lambda a, b: -T.E_panel(a, b), cuts=cuts)

    def log_outer(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return S.E(w) + inv.log_integral(x, w)

    def log_part(a, b):
        edges = T.edges[(T.edges >= a) & (T.edges <= b)]
        edges = np.unique(np.concatenate([edges, [a, b]]))
        if len(edges) < 2:
            return -np.inf
        probe = log_outer(edges)
        c = float(np.max(probe[np.isfinite(probe)])) if np.isfinite(probe).any() else 0.0
        vals = _rel_integral(lambda w: np.exp(log_outer(w) - c), edges, rtol)
        tot = float(np.sum(vals))
        return c + math.log(tot) if tot > 0 else -np.inf

    logP = log_part(x, x2)
    logN = log_part(x1, x)
    lo = float(S.log_between(x, np.array([x1]))[0])
    hi = float(S.log_between(x, np.array([x2]))[0])
    tot = np.logaddexp(lo, hi)
    log_p, log_q = lo - tot, hi - tot  # p = share of the lower piece
    terms = np.array([log_p + logP, log_q + logN])
    log_u = math.log(k) + float(np.logaddexp(*terms))
    u = math.exp(log_u) if log_u < 709.0 else math.inf
    cond = float(np.exp(terms - np.logaddexp(*terms)).sum())
    return u, cond


def expected_exit_time(drift, eps: float, x, x1: float, x2: float, tol: float = 1e-10,
                       method: str = "auto", return_method: bool = False):
    """u(x) = E^x(tau^{x1} ^ tau^{x2}) for dX = a dt + eps dW.

    method='phi' evaluates the double-integral formula with
    Phi(y) = exp(-int 2a/eps^2), anchored at x so that no terms cancel;
    method='green' evaluates int G(x, y) m(dy) instead.  method='auto'
    uses the former and falls back to the latter if the result is not
    finite or its condition number exceeds 1e6.
    """
    _check_interval(x1, x2)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < x1) or np.any(xs > x2):
        raise ValueError("x must lie in [x1, x2]")
    out = np.zeros(len(xs))
    used = []
    kernel = None
    for i, xi in enumerate(xs):
        if xi == x1 or xi == x2:
            used.append("boundary")
            continue
        m = method
        if m in ("auto", "phi"):
            u, cond = _exit_time_phi(drift, eps, float(xi), x1, x2, rtol=min(tol, 1e-12))
            if m == "phi" or (math.isfinite(u) and cond < 1e6):
                out[i] = u
                used.append("phi")
                continue
            m = "green"
        if m != "green":
            raise ValueError(f"unknown method {method!r}")
        if kernel is None:
            kernel = GreenKernel(drift, eps, x1, x2, points=tuple(xs))
        out[i] = kernel.occupation(float(xi), rtol=tol)
        used.append("green")
    res = float(out[0]) if np.ndim(x) == 0 else out
    if return_method:
        return res, used[0] if np.ndim(x) == 0 else used
    return res


# ---------------------------------------------------------------------------
# mu and the limit weight

def mu_function(drift, x, R: Optional[float] = None):
    """mu(x) = B_-^{-1}(B_+(x)) <= 0 for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("mu is defined for x >= 0")
    lim = float(np.max(x)) if R is None else R
    Bp = drift_B(drift, "right", max(lim, 1e-300), signed=False)
    Bm = drift_B(drift, "left", max(lim, 1e-300) * 4, signed=False)
    vals = Bp.exact(np.atleast_1d(x))
    out = Bm.inverse(vals)
    return float(out[0]) if x.ndim == 0 else out


@dataclass
class LimitWeight:
    """Extrapolated mu'(0) and the resulting weight.

    ``p`` is None when the ladder did not stabilise; ``trace`` then holds
    the raw ratios for inspection.
    """

    p: Optional[float]
    mu_prime: Optional[float]
    status: str  # converged | to-minus-infinity | to-zero | non-convergent
    u: np.ndarray
    ratios: np.ndarray
    accelerated: np.ndarray

    def trace(self):
        return [(float(a), float(b)) for a, b in zip(self.u, self.ratios)]


def aitken(seq) -> np.ndarray:
    """Aitken delta-squared transform; falls back to the raw term when the
    second difference vanishes."""
    s = np.asarray(seq, dtype=float)
    if len(s) < 3:
        return s.copy()
    x0, x1, x2 = s[:-2], s[1:-1], s[2:]
    d2 = x2 - 2 * x1 + x0
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = x2 - (x2 - x1) ** 2 / d2
    small = np.abs(d2) <= 1e-14 * np.maximum(np.abs(x2), 1e-300)
    return np.where(small | ~np.isfinite(acc), x2, acc)


def limit_weight(drift, alpha: float = -1.0, beta: float = 1.0, ladder=None, n: int = 41,
                 agree_tol: float = 1e-4, guard: float = 0.1) -> LimitWeight:
    """p = -mu'(0) / (1 - mu'(0)) with mu'(0) = lim B_-^{-1}(u) / B_+^{-1}(u).

    The ratio is evaluated on u_j = u_0 2^{-j} with u_0 = B_+(beta)/8 and
    accelerated by Aitken's delta-squared process.  Ladder points whose
    preimages fall below the resolved floor of either antiderivative are
    dropped.  A power-law trend of |ratio| in u (fitted on the tail) that
    persists without stabilising sends mu'(0) to -inf (p = 1) or 0 (p = 0).
    """
    Bp = drift_B(drift, "right", beta, signed=False)
    Bm = drift_B(drift, "left", -alpha, signed=False)
    if ladder is None:
        u0 = min(Bp.max_value, Bm.max_value) / 8
        ladder = u0 * 2.0 ** -np.arange(n)
    u = np.asarray(ladder, dtype=float)
    u = u[(u <= Bp.max_value) & (u <= Bm.max_value) & (u > 0)]
    # stay above the smallest resolved values on both sides
    floor_p = Bp.exact(max(Bp.resolved_floor, Bp.u[1]))
    floor_m = Bm.exact(-max(Bm.resolved_floor, Bm.u[1]))
    u = u[(u >= floor_p) & (u >= floor_m)]
    if len(u) < 4:
        return LimitWeight(None, None, "non-convergent", u, np.full(len(u), np.nan), np.empty(0))
    xp = Bp.inverse(u)
    xm = Bm.inverse(u)
    r = xm / xp
    acc = aitken(r)
    status, mu = "non-convergent", None
    # convergence: three consecutive accelerated values agree and stay close to the raw ratios
    for j in range(len(acc) - 2, 0, -1):
        win = acc[j - 1:j + 2]
        raw = r[j + 1:j + 4] if j + 4 <= len(r) else r[-3:]
        if (np.ptp(win) <= agree_tol and
                np.all(np.abs(win - raw[:len(win)]) <= np.maximum(agree_tol, guard * np.abs(raw[:len(win)])))):
            status, mu = "converged", float(win[-1])
            break
    if status != "converged":
        tail = slice(max(0, len(r) - 12), len(r))
        lr = np.log(np.abs(r[tail]))
        lu = np.log(u[tail])
        slope, icpt = np.polyfit(lu, lr, 1)
        resid = np.max(np.abs(lr - (slope * lu + icpt)))
        steps = np.diff(lr)
        grows = np.all(steps > 0) and lr[-1] - lr[0] >= math.log(1.5)
        shrinks = np.all(steps < 0) and lr[0] - lr[-1] >= math.log(1.5)
        if (grows or slope < -1e-2) and resid < 0.25 * abs(slope * (lu[0] - lu[-1])) and np.all(steps > 0):
            status, mu = "to-minus-infinity", -math.inf
        elif (shrinks or slope > 1e-2) and resid < 0.25 * abs(slope * (lu[0] - lu[-1])) and np.all(steps < 0):
            status, mu = "to-zero", 0.0
    if status == "converged":
        p = -mu / (1 - mu)
    elif status == "to-minus-infinity":
        p = 1.0
    elif status == "to-zero":
        p = 0.0
    else:
        p = None
    return LimitWeight(p, mu, status, u, r, acc)


def limit_weight_regvar(kind: str, rho_plus: float, rho_minus: Optional[float] = None,
                        c: float = 1.0, printed_oscillating: bool = False) -> float:
    """Closed-form limit weight for regularly varying B or a.

    kind='B': B_pm(pm x) regularly varying of index rho, c = lim B_-(-x)/B_+(x),
    p = c^(-1/rho) / (1 + c^(-1/rho)).
    kind='a': a(pm x) of index rho, c = lim -a(-x)/a(x), exponent -1/(1 + rho).
    kind='oscillating': b(x) + |x|^gamma g(1/x) with b of index rho; same
    exponent as kind='a'.  ``printed_oscillating=True`` uses +1/(1 + rho)
    instead.  Unequal indices give 1 if rho_+ < rho_- and 0 otherwise.
    """
    rho_minus = rho_plus if rho_minus is None else rho_minus
    if rho_plus <= 0 or rho_minus <= 0:
        raise ValueError("indices must be positive")
    if kind not in ("B", "a", "oscillating"):
        raise ValueError(f"unknown kind {kind!r}")
    if rho_plus != rho_minus:
        return 1.0 if rho_plus < rho_minus else 0.0
    if not c > 0:
        raise ValueError("c must be positive (or inf)")
    if math.isinf(c):
        return 0.0
    if kind == "B":
        e = -1.0 / rho_plus
    else:
        e = (1.0 if (kind == "oscillating" and printed_oscillating) else -1.0) / (1.0 + rho_plus)
    q = c ** e
    return q / (1.0 + q)


# ---------------------------------------------------------------------------
# approximate identity

class _Shifted:
    """u -> f(base + sign * u) as a duck-typed drift for the antiderivative code."""

    def __init__(self, f, base, sign):
        self.f, self.base, self.sign = f, base, sign

    def __call__(self, u):
        return np.asarray(self.f(self.base + self.sign * np.asarray(u, dtype=float)), dtype=float)

    def reflected(self):
        raise NotImplementedError


class ApproxIdentity:
    """g_eps(y) = int_y^beta exp(-int_y^z f/eps^2) (f(z)/eps^2) g(z) dz.

    side='left' gives the mirrored operator
    int_alpha^y exp(-int_z^y f/eps^2) (f(z)/eps^2) g(z) dz.  Both are
    evaluated after the substitution w = (F(z) - F(y)) / eps^2 with
    F = int f, which turns the kernel into exp(-w) on (0, W).
    """

    def __init__(self, fpos: Callable, g: Callable, alpha: float, beta: float,
                 side: str = "right", tol: float = 1e-12):
        if not alpha < beta:
            raise ValueError("need alpha < beta")
        self.g, self.alpha, self.beta, self.side = g, float(alpha), float(beta), side
        if side == "right":
            base, sgn = self.alpha, 1.0
        elif side == "left":
            base, sgn = self.beta, -1.0
        else:
            raise ValueError("side must be 'right' or 'left'")
        self.base, self.sgn = base, sgn
        # F measured from the far end so that the kernel direction is increasing
        self.F = antiderivative_B(_Shifted(fpos, base, sgn), "right", self.beta - self.alpha, tol)

    def __call__(self, eps: float, y, n_panels: int = 24):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(y < self.alpha) or np.any(y > self.beta):
            raise ValueError("y outside [alpha, beta]")
        # distance t from the base; the kernel runs away from it
        t = self.sgn * (y - self.base)
        Fy = self.F.exact(np.clip(t, 0, self.F.span))
        W = (self.F.max_value - Fy) / eps ** 2  # kernel mass lies in w in (0, W)
        Wc = np.minimum(W, 60.0)
        # geometric panels in w, denser near 0
        frac = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, n_panels)])
        a = Wc[:, None] * frac[None, :-1]
        b = Wc[:, None] * frac[None, 1:]
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        w = c[..., None] + h[..., None] * NODES
        target = Fy[:, None, None] + eps ** 2 * w
        target = np.clip(target, 0.0, self.F.max_value)
        flat = target.ravel()
        tz = np.zeros_like(flat)
        pos = flat > 0
        tz[pos] = self.F.inverse(flat[pos])
        z = self.base + self.sgn * tz.reshape(w.shape)
        gz = np.asarray(self.g(z.ravel()), dtype=float).reshape(w.shape)
        vals = np.exp(-w) * gz
        out = np.einsum("ijk,k,ij->i", vals, W_KRONROD, h)
        return out


def approx_identity(fpos: Callable, g: Callable, eps: float, y, alpha: float, beta: float,
                    tol: float = 1e-12, side: str = "right"):
    """Approximate-identity smoothing g_eps(y); see :class:`ApproxIdentity`."""
    op = ApproxIdentity(fpos, g, alpha, beta, side, tol)
    out = op(eps, y)
    return float(out[0]) if np.ndim(y) == 0 else out


def approx_identity_l1(op: ApproxIdentity, eps: float, n_panels: int = 64) -> float:
    """L1 distance between g_eps and g on (alpha, beta), composite Gauss-Kronrod
    on panels refined geometrically towards both ends."""
    lo, hi = op.alpha, op.beta
    L = hi - lo
    d = L * 2.0 ** (-np.arange(1, 60) / 2)
    edges = np.unique(np.concatenate([np.linspace(lo, hi, n_panels + 1), lo + d, hi - d]))
    a, b = edges[:-1], edges[1:]
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    y = (c[:, None] + h[:, None] * NODES).ravel()
    diff = np.abs(op(eps, y) - np.asarray(op.g(y), dtype=float)).reshape(len(a), 15)
    return float(np.sum(h * (diff @ W_KRONROD)))


# ---------------------------------------------------------------------------
# limit law

@dataclass
class LimitLaw:
    """(1 - p) delta_{psi_-} + p delta_{psi_+}."""

    p: Optional[float]
    psi_minus: object
    psi_plus: object
    method: str
    regime: str
    p_eps_trace: list = field(default_factory=list)
    mu_prime_trace: list = field(default_factory=list)
    exit_times: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "p": self.p,
            "p_method": self.method,
            "p_eps_trace": [list(map(float, t)) for t in self.p_eps_trace],
            "mu_prime_trace": [list(map(float, t)) for t in self.mu_prime_trace],
            "exit_times": [list(map(float, t)) for t in self.exit_times],
            "diagnostics": self.diagnostics,
        }


def default_eps_ladder(n: int = 17):
    return [2.0 ** -i for i in range(n)]


def is_odd(drift, R: float, n: int = 4001) -> bool:
    x = np.linspace(0, R, n)[1:]
    return bool(np.allclose(drift(-x), -drift(x), rtol=1e-13, atol=0))


def limit_law(drift, alpha: float = -0.5, beta: float = 0.5, T: float = 0.5,
              eps_ladder: Optional[Sequence[float]] = None, trace: bool = True,
              exit_times: bool = False, delta0: float = 0.5) -> LimitLaw:
    """Classify the drift and assemble the limit law with its diagnostics."""
    from zeronoise.deterministic import extremal_solution
    from zeronoise.dsl import classify_near_zero

    cls = classify_near_zero(drift, delta0=delta0)
    psi_plus = extremal_solution(drift, "plus", T)
    psi_minus = extremal_solution(drift, "minus", T)
    diag = {"classification": cls.__dict__.copy()}
    ladder = list(default_eps_ladder() if eps_ladder is None else eps_ladder)
    law = LimitLaw(None, psi_minus, psi_plus, "none", cls.regime, diagnostics=diag)
    if cls.regime == "positive-drift":
        law.p, law.method = 1.0, "positive-drift"
    elif cls.regime == "negative-drift":
        law.p, law.method = 0.0, "negative-drift"
    elif cls.regime == "repulsive":
        lw = limit_weight(drift, alpha, beta)
        law.mu_prime_trace = lw.trace()
        diag["mu_prime_status"] = lw.status
        diag["mu_prime"] = lw.mu_prime
        if is_odd(drift, max(-alpha, beta)):
            law.p, law.method = 0.5, "symmetric"
        elif lw.p is not None:
            law.p, law.method = lw.p, "mu-derivative"
        if trace:
            law.p_eps_trace = [(e, weight_p_eps(drift, e, alpha, beta, check=False)) for e in ladder]
        if exit_times:
            law.exit_times = [(e, expected_exit_time(drift, e, 0.0, alpha, beta)) for e in ladder]
    else:
        diag["reason"] = ("no limit theorem applies: "
                          f"left {cls.left_sign}/{cls.osgood_left}, right {cls.right_sign}/{cls.osgood_right}")
    return law
