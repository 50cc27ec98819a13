"""Euler-Maruyama ensembles for dX = a(X) dt + eps dW.

Every path owns a Philox stream whose key is derived from
(master_seed, eps_index, path_index) with the splitmix64 finalizer, and
normals are drawn with numpy's ziggurat sampler.  A path's increments do
not depend on how paths are grouped into chunks or on the number of
worker threads, so ensembles are bit-reproducible.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
# largest number of stored path values in full-paths mode
FULL_PATH_CAP = 50_000_000
_TIME_BLOCK = 1024


def splitmix64(x: int) -> int:
    """The splitmix64 output function (a bijective 64-bit mixer)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def path_key(master_seed: int, eps_index: int, path_index: int) -> int:
    """64-bit stream key of one path."""
    k = splitmix64(master_seed & MASK64)
    k = splitmix64(k ^ (eps_index & MASK64))
    return splitmix64(k ^ (path_index & MASK64))


def path_generator(key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([key, 0x5A45524F], dtype=np.uint64)))


@dataclass
class SimConfig:
    """Ensemble settings.

    Parameters
    ----------
    eps_list : sequence of float
        Noise levels; eps = 0 gives the deterministic Euler scheme.
    dt, t_final : float
        Step size and horizon; the grid is k dt for k = 0..round(t_final/dt).
    n_paths : int
    master_seed : int
    record : {'summaries', 'full-paths'}
    x0 : float
    levels : sequence of float
        Levels whose first hitting times are recorded.
    exit_interval : (float, float) or None
        Record the first exit from this interval (time and side).
    stop_on_exit : bool
        Freeze paths once they leave ``exit_interval``.
    threshold : float
        Split fractions count final values above it.
    chunk_size, workers : int
        Paths per task and thread count; neither affects the results.
    path_stride : int
        In full-paths mode keep every ``path_stride``-th grid value.
    """

    eps_list: Sequence[float] = (0.1,)
    dt: float = 2.5e-3
    t_final: float = 0.5
    n_paths: int = 2000
    master_seed: int = 20240501
    record: str = "summaries"
    x0: float = 0.0
    levels: Sequence[float] = ()
    exit_interval: Optional[tuple] = None
    stop_on_exit: bool = False
    threshold: float = 0.0
    chunk_size: int = 256
    workers: Optional[int] = None
    path_stride: int = 1

    def __post_init__(self):
        self.eps_list = [float(e) for e in self.eps_list]
        self.levels = [float(v) for v in self.levels]
        if not self.dt > 0 or not self.t_final > 0:
            raise ValueError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if any(e < 0 for e in self.eps_list):
            raise ValueError("eps must be non-negative")
        if self.record not in ("summaries", "full-paths"):
            raise ValueError("record must be 'summaries' or 'full-paths'")
        if self.exit_interval is not None:
            lo, hi = self.exit_interval
            if not lo < hi:
                raise ValueError("exit_interval needs lo < hi")
            self.exit_interval = (float(lo), float(hi))
        if self.stop_on_exit and self.exit_interval is None:
            raise ValueError("stop_on_exit needs an exit_interval")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def stored_times(self) -> np.ndarray:
        return self.times[::self.path_stride]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps_list"] = list(self.eps_list)
        d["levels"] = list(self.levels)
        return d


@dataclass
class Path:
    eps: float
    index: int
    times: np.ndarray
    values: np.ndarray
    seed: int


@dataclass
class HittingTimeSample:
    level: float
    time: float
    censored: bool
    path_index: int = 0


@dataclass
class EpsStats:
    """Per-eps ensemble summary; arrays are indexed by path."""

    eps: float
    eps_index: int
    final: np.ndarray
    running_max: np.ndarray
    running_min: np.ndarray
    hit_times: Dict[float, np.ndarray]
    exit_time: Optional[np.ndarray]
    exit_side: Optional[np.ndarray]
    sup_distance: Dict[str, np.ndarray]
    seeds: np.ndarray
    threshold: float = 0.0
    paths: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return len(self.final)

    @property
    def split_fraction(self) -> float:
        return float(np.mean(self.final > self.threshold))

    def hit_mean(self, level: float):
        """(mean, variance, n uncensored, n censored) of the hitting time."""
        t = self.hit_times[level]
        ok = np.isfinite(t)
        n = int(ok.sum())
        mean = float(t[ok].mean()) if n else math.nan
        var = float(t[ok].var(ddof=1)) if n > 1 else math.nan
        return mean, var, n, int((~ok).sum())

    def exit_mean(self):
        t = self.exit_time
        ok = np.isfinite(t)
        n = int(ok.sum())
        return (float(t[ok].mean()) if n else math.nan,
                float(t[ok].var(ddof=1)) if n > 1 else math.nan, n, int((~ok).sum()))

    def exit_fraction_hi(self) -> float:
        """Fraction of exited paths that left through the upper end."""
        s = self.exit_side
        done = s != 0
        return float(np.mean(s[done] > 0)) if done.any() else math.nan

    def cdf(self):
        return empirical_cdf(self.final)

    def summary(self) -> dict:
        out = {"eps": self.eps, "n_paths": self.n_paths, "split_fraction": self.split_fraction,
               "final_mean": float(self.final.mean()), "final_std": float(self.final.std())}
        for lv in self.hit_times:
            m, v, n, c = self.hit_mean(lv)
            out[f"tau_{lv:g}"] = {"mean": m, "var": v, "n": n, "censored": c}
        if self.exit_time is not None:
            m, v, n, c = self.exit_mean()
            out["exit"] = {"mean": m, "var": v, "n": n, "censored": c,
                           "fraction_hi": self.exit_fraction_hi()}
        for name, d in self.sup_distance.items():
            out[f"sup_{name}_median"] = float(np.median(d))
        return out


@dataclass
class EnsembleStats:
    config: SimConfig
    per_eps: list
    drift_name: str = ""

    def __getitem__(self, i) -> EpsStats:
        return self.per_eps[i]

    def to_json(self) -> dict:
        return {"drift": self.drift_name, "config": self.config.to_dict(),
                "per_eps": [s.summary() for s in self.per_eps],
                "seeds": {"master_seed": self.config.master_seed,
                          "key_function": "splitmix64 chain over (master_seed, eps_index, path_index)"}}


def _fmt_time(t) -> str:
    return "censored" if not np.isfinite(t) else repr(float(t))


# ---------------------------------------------------------------------------
# the engine

def _reference_values(ref, times):
    if hasattr(ref, "at"):
        return np.asarray(ref.at(times), dtype=float)
    return np.asarray(ref(times), dtype=float)


def _first_cross(prev, new, level, t_prev, dt):
    """Interpolated crossing times where [prev, new] contains ``level`` (nan elsewhere)."""
    d0 = prev - level
    d1 = new - level
    cross = (d0 * d1 <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(d0 == d1, 0.0, d0 / (d0 - d1))
    return np.where(cross, t_prev + dt * np.clip(frac, 0.0, 1.0), np.nan)


def _simulate_chunk(drifts, eps, cfg: SimConfig, eps_index, idx, refs, keep_paths, violation_tol=None):
    """Simulate coupled copies (one per drift) of the paths ``idx`` with shared noise."""
    m = len(idx)
    K = len(drifts)
    n = cfg.n_steps
    dt = cfg.dt
    sig = eps * math.sqrt(dt)
    keys = np.array([path_key(cfg.master_seed, eps_index, int(i)) for i in idx], dtype=np.uint64)
    gens = [path_generator(int(k)) for k in keys] if sig > 0 else []
    x = np.full((K, m), float(cfg.x0))
    rmax = x.copy()
    rmin = x.copy()
    hits = {lv: np.full((K, m), np.nan) for lv in cfg.levels}
    for lv in cfg.levels:
        hits[lv][:, :] = np.where(x == lv, 0.0, np.nan)
    ex_t = ex_s = None
    active = np.ones(m, dtype=bool)
    if cfg.exit_interval is not None:
        lo, hi = cfg.exit_interval
        ex_t = np.full((K, m), np.nan)
        ex_s = np.zeros((K, m), dtype=np.int8)
        out0 = (x[0] <= lo) | (x[0] >= hi)
        ex_t[:, out0] = 0.0
        ex_s[:, out0] = np.where(x[0, out0] >= hi, 1, -1)
        if cfg.stop_on_exit:
            active &= ~out0
    sup = {name: np.zeros((K, m)) for name in refs}
    for name, rv in refs.items():
        sup[name] = np.abs(x - rv[0])
    stride = cfg.path_stride
    paths = np.empty((K, m, n // stride + 1)) if keep_paths else None
    if keep_paths:
        paths[:, :, 0] = x
    viol = np.zeros(m, dtype=np.int64) if violation_tol is not None else None
    maxviol = np.zeros(m) if violation_tol is not None else None
    Z = None
    for k0 in range(0, n, _TIME_BLOCK):
        if not active.any():
            break
        nb = min(_TIME_BLOCK, n - k0)
        if sig > 0:
            Z = np.empty((nb, m))
            for j, g in enumerate(gens):
                Z[:, j] = g.standard_normal(nb)
        for kk in range(nb):
            k = k0 + kk
            t_prev = k * dt
            if cfg.stop_on_exit:
                act = np.flatnonzero(active)
                if len(act) == 0:
                    break
            else:
                act = slice(None)
            xa = x[:, act]
            noise = sig * Z[kk, act] if sig > 0 else 0.0
            new = np.empty_like(xa)
            for d in range(K):
                new[d] = xa[d] + drifts[d](xa[d]) * dt + noise
            for lv in cfg.levels:
                h = hits[lv][:, act]
                tc = _first_cross(xa, new, lv, t_prev, dt)
                first = np.isnan(h) & ~np.isnan(tc)
                if first.any():
                    h[first] = tc[first]
                    hits[lv][:, act] = h
            if ex_t is not None:
                lo, hi = cfg.exit_interval
                et = ex_t[:, act]
                es = ex_s[:, act]
                out_hi = (new >= hi) & np.isnan(et)
                out_lo = (new <= lo) & np.isnan(et)
                if out_hi.any() or out_lo.any():
                    th = _first_cross(xa, new, hi, t_prev, dt)
                    tl = _first_cross(xa, new, lo, t_prev, dt)
                    et[out_hi] = th[out_hi]
                    es[out_hi] = 1
                    et[out_lo] = tl[out_lo]
                    es[out_lo] = -1
                    ex_t[:, act] = et
                    ex_s[:, act] = es
            x[:, act] = new
            if keep_paths and (k + 1) % stride == 0:
                paths[:, :, (k + 1) // stride] = x
            rmax[:, act] = np.maximum(rmax[:, act], new)
            rmin[:, act] = np.minimum(rmin[:, act], new)
            for name, rv in refs.items():
                sup[name][:, act] = np.maximum(sup[name][:, act], np.abs(new - rv[k + 1]))
            if viol is not None:
                gap = new[0] - new[1]
                bad = gap > violation_tol
                viol[act] += bad
                maxviol[act] = np.maximum(maxviol[act], np.where(bad, gap, 0.0))
            if cfg.stop_on_exit:
                done = ~np.isnan(ex_t[:, act]).any(axis=0) if K == 1 else ~np.isnan(ex_t[:, act]).all(axis=0)
                active[act[done]] = False
    return dict(final=x, rmax=rmax, rmin=rmin, hits=hits, exit_time=ex_t, exit_side=ex_s,
                sup=sup, seeds=keys, paths=paths, violations=viol, max_violation=maxviol)


def _run(drifts, cfg: SimConfig, eps, eps_index, refs, keep_paths=False, violation_tol=None):
    n = cfg.n_paths
    chunks = [np.arange(s, min(s + cfg.chunk_size, n)) for s in range(0, n, cfg.chunk_size)]
    job = lambda idx: _simulate_chunk(drifts, eps, cfg, eps_index, idx, refs, keep_paths, violation_tol)
    workers = cfg.workers if cfg.workers is not None else min(8, os.cpu_count() or 1)
    if workers <= 1 or len(chunks) == 1:
        parts = [job(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))  # map keeps chunk order

    def cat(key, axis=-1):
        vals = [p[key] for p in parts]
        if vals[0] is None:
            return None
        return np.concatenate(vals, axis=axis)

    out = {k: cat(k) for k in ("final", "rmax", "rmin", "exit_time", "exit_side")}
    out["seeds"] = cat("seeds", axis=0)
    out["hits"] = {lv: np.concatenate([p["hits"][lv] for p in parts], axis=1) for lv in cfg.levels}
    out["sup"] = {nm: np.concatenate([p["sup"][nm] for p in parts], axis=1) for nm in refs}
    out["paths"] = cat("paths", axis=1) if keep_paths else None
    if violation_tol is not None:
        out["violations"] = cat("violations", axis=0)
        out["max_violation"] = cat("max_violation", axis=0)
    return out


def simulate_ensemble(drift, config: SimConfig, references: Optional[dict] = None) -> EnsembleStats:
    """n_paths Euler-Maruyama paths per eps with the requested statistics.

    ``references`` maps names to time functions (e.g. an ExtremalSolution);
    the sup-distance of each path to each of them over the grid is kept.
    """
    refs_raw = references or {}
    times = config.times
    refs = {nm: _reference_values(r, times) for nm, r in refs_raw.items()}
    keep = config.record == "full-paths"
    if keep and config.n_paths * len(config.eps_list) * (config.n_steps // config.path_stride + 1) > FULL_PATH_CAP:
        raise MemoryError(f"full-paths mode is limited to {FULL_PATH_CAP} stored values")
    per = []
    for ei, eps in enumerate(config.eps_list):
        r = _run([drift], config, eps, ei, refs, keep_paths=keep)
        per.append(EpsStats(
            eps=eps, eps_index=ei, final=r["final"][0], running_max=r["rmax"][0],
            running_min=r["rmin"][0], hit_times={lv: h[0] for lv, h in r["hits"].items()},
            exit_time=None if r["exit_time"] is None else r["exit_time"][0],
            exit_side=None if r["exit_side"] is None else r["exit_side"][0],
            sup_distance={nm: v[0] for nm, v in r["sup"].items()}, seeds=r["seeds"],
            threshold=config.threshold, paths=None if r["paths"] is None else r["paths"][0]))
    return EnsembleStats(config, per, getattr(drift, "name", ""))


def em_path(drift, eps: float, config: SimConfig, path_index: int, eps_index: int = 0) -> Path:
    """One Euler-Maruyama path X[k+1] = X[k] + a(X[k]) dt + eps sqrt(dt) Z_k.

    It coincides bit for bit with the same path inside an ensemble.
    """
    cfg = SimConfig(eps_list=[eps], dt=config.dt, t_final=config.t_final, n_paths=path_index + 1,
                    master_seed=config.master_seed, x0=config.x0)
    r = _simulate_chunk([drift], eps, cfg, eps_index, np.array([path_index]), {}, True)
    return Path(eps, path_index, cfg.times, r["paths"][0, 0], int(r["seeds"][0]))


def hitting_time(path, level: float, t_final: Optional[float] = None) -> HittingTimeSample:
    """First crossing of ``level`` on the grid, linearly interpolated in the step."""
    t = np.asarray(path.times, dtype=float)
    x = np.asarray(path.values, dtype=float)
    idx = getattr(path, "index", 0)
    if x[0] == level:
        return HittingTimeSample(level, float(t[0]), False, idx)
    d = x - level
    cross = np.flatnonzero(d[:-1] * d[1:] <= 0)
    if len(cross) == 0:
        return HittingTimeSample(level, float(t[-1] if t_final is None else t_final), True, idx)
    k = int(cross[0])
    frac = d[k] / (d[k] - d[k + 1]) if d[k] != d[k + 1] else 0.0
    return HittingTimeSample(level, float(t[k] + (t[k + 1] - t[k]) * frac), False, idx)


def empirical_cdf(samples):
    """Step nodes (value, cumulative fraction) of the empirical distribution."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if len(s) == 0:
        raise ValueError("need at least one sample")
    vals, counts = np.unique(s, return_counts=True)
    return list(zip(vals.tolist(), (np.cumsum(counts) / len(s)).tolist()))


# ---------------------------------------------------------------------------
# coupling checks

@dataclass
class ComparisonReport:
    eps: float
    n_paths: int
    n_points: int
    n_violations: int
    max_violation: float
    tol: float

    @property
    def fraction(self) -> float:
        return self.n_violations / self.n_points if self.n_points else 0.0


def _check_order(drift1, drift2, window, n=20001):
    lo, hi = window
    x = np.linspace(lo, hi, n)
    gap = np.asarray(drift1(x)) - np.asarray(drift2(x))
    if np.any(gap > 0):
        raise ValueError(f"a1 <= a2 fails on the grid (max excess {gap.max():.3g})")


def coupled_comparison(drift1, drift2, config: SimConfig, tol: float = 1e-12,
                       x0_pair: Optional[tuple] = None, window=None) -> list:
    """Paths of both drifts driven by the same increments; counts X1 > X2 + tol.

    One report per eps in the config; grid points exclude t = 0.
    """
    window = window or getattr(drift1, "window", (-10.0, 10.0))
    _check_order(drift1, drift2, window)
    if x0_pair is not None and x0_pair[0] > x0_pair[1]:
        raise ValueError("need x1(0) <= x2(0)")
    if x0_pair is not None and x0_pair[0] != x0_pair[1]:
        raise NotImplementedError("distinct starting points are not supported")
    out = []
    for ei, eps in enumerate(config.eps_list):
        r = _run([drift1, drift2], config, eps, ei, {}, violation_tol=tol)
        npts = config.n_paths * config.n_steps
        out.append(ComparisonReport(eps, config.n_paths, npts, int(r["violations"].sum()),
                                    float(r["max_violation"].max()), tol))
    return out


def perturbation_convergence_check(drift_seq: Sequence, drift_limit, config: SimConfig,
                                   eps_index: int = 0) -> list:
    """Median over paths of sup_t |X_n - X| under shared noise, per drift a_n."""
    eps = config.eps_list[eps_index]
    cfg = SimConfig(**{**config.to_dict(), "record": "full-paths", "levels": [],
                       "exit_interval": None, "stop_on_exit": False, "path_stride": 1})
    if cfg.n_paths * (cfg.n_steps + 1) * (len(drift_seq) + 1) > FULL_PATH_CAP:
        raise MemoryError("ensemble too large for the coupled check")
    r = _run([drift_limit, *drift_seq], cfg, eps, eps_index, {}, keep_paths=True)
    base = r["paths"][0]
    return [float(np.median(np.max(np.abs(r["paths"][j + 1] - base), axis=1)))
            for j in range(len(drift_seq))]
