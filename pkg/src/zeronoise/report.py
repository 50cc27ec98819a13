"""CSV, JSON and SVG emitters.

Every artifact carries the SHA-256 of the canonical JSON of its run
configuration and the master seed: CSV files in ``#`` header comments,
JSON files in a ``provenance`` block, SVG files in a comment.  Output is
deterministic (no timestamps), so artifacts can be diffed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from zeronoise import __version__


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def provenance(config: dict) -> dict:
    seed = config.get("sim", {}).get("master_seed") if isinstance(config.get("sim"), dict) else None
    return {"config_sha256": config_hash(config), "master_seed": seed,
            "version": __version__, "config": _jsonable(config)}


def tagged(value, method: str) -> dict:
    """A numeric entry with its method tag (analytic, quadrature or monte-carlo)."""
    if method not in ("analytic", "quadrature", "monte-carlo"):
        raise ValueError(f"unknown method tag {method!r}")
    return {"value": _jsonable(value), "method": method}


def write_json(path: str, payload: dict, config: dict) -> str:
    out = dict(payload)
    out["provenance"] = provenance(config)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(out), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence], config: dict) -> str:
    prov = provenance(config)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={prov['config_sha256']}\n")
        fh.write(f"# master_seed={prov['master_seed']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "censored" if math.isnan(v) else repr(v)
        return repr(v)
    return v


def read_csv(path: str):
    """(header, rows) of a file written by :func:`write_csv`, comments skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# ensemble files

def write_ensemble(stats, directory: str, config: dict) -> list:
    """paths.csv (one summary row per path), cdf_eps<i>.csv and summary.json."""
    os.makedirs(directory, exist_ok=True)
    cfg = stats.config
    levels = list(cfg.levels)
    refs = sorted(stats.per_eps[0].sup_distance) if stats.per_eps else []
    head = ["eps", "path", "seed", "final_value", "running_min", "running_max"]
    head += [f"tau_{lv:g}" for lv in levels]
    if cfg.exit_interval is not None:
        head += ["exit_time", "exit_side"]
    head += [f"sup_{r}" for r in refs]

    def rows():
        for s in stats.per_eps:
            for i in range(s.n_paths):
                row = [s.eps, i, int(s.seeds[i]), s.final[i], s.running_min[i], s.running_max[i]]
                row += [s.hit_times[lv][i] for lv in levels]
                if s.exit_time is not None:
                    row += [s.exit_time[i], int(s.exit_side[i])]
                row += [s.sup_distance[r][i] for r in refs]
                yield row

    written = [write_csv(os.path.join(directory, "paths.csv"), head, rows(), config)]
    for s in stats.per_eps:
        p = os.path.join(directory, f"cdf_eps{s.eps_index}.csv")
        written.append(write_csv(p, ["value", "fraction"], s.cdf(), config))
    summary = {"drift": stats.drift_name,
               "per_eps": [{k: tagged(v, "monte-carlo") if isinstance(v, float) else v
                            for k, v in s.summary().items()} for s in stats.per_eps]}
    written.append(write_json(os.path.join(directory, "summary.json"), summary, config))
    return written


def write_psi_table(path: str, psi_minus, psi_plus, config: dict) -> str:
    t = psi_plus.t if len(psi_plus.t) >= len(psi_minus.t) else psi_minus.t
    rows = zip(t, psi_minus.at(t) if psi_minus.antiderivative is not None else np.zeros_like(t),
               psi_plus.at(t) if psi_plus.antiderivative is not None else np.zeros_like(t))
    return write_csv(path, ["t", "psi_minus", "psi_plus"], rows, config)


# ---------------------------------------------------------------------------
# SVG

def _gray(level: float) -> str:
    g = int(round(255 * min(max(level, 0.0), 1.0)))
    return f"#{g:02x}{g:02x}{g:02x}"


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


class _Panel:
    def __init__(self, x0, y0, w, h, xr, yr):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xr, self.yr = xr, yr

    def pts(self, xs, ys):
        (a, b), (c, d) = self.xr, self.yr
        px = self.x0 + (np.asarray(xs) - a) / (b - a) * self.w
        py = self.y0 + self.h - (np.asarray(ys) - c) / (d - c) * self.h
        return " ".join(f"{_fmt(u)},{_fmt(v)}" for u, v in zip(px, py))

    def frame(self, xlabel, ylabel):
        (a, b), (c, d) = self.xr, self.yr
        out = [f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" '
               f'height="{_fmt(self.h)}" fill="none" stroke="black" stroke-width="1"/>']
        for k in range(5):
            fx, fy = a + (b - a) * k / 4, c + (d - c) * k / 4
            px = self.x0 + self.w * k / 4
            py = self.y0 + self.h - self.h * k / 4
            out.append(f'<text x="{_fmt(px)}" y="{_fmt(self.y0 + self.h + 14)}" font-size="10" '
                       f'text-anchor="middle">{fx:.3g}</text>')
            out.append(f'<text x="{_fmt(self.x0 - 4)}" y="{_fmt(py + 3)}" font-size="10" '
                       f'text-anchor="end">{fy:.3g}</text>')
        out.append(f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 + self.h + 30)}" '
                   f'font-size="11" text-anchor="middle">{xlabel}</text>')
        out.append(f'<text x="{_fmt(self.x0 - 40)}" y="{_fmt(self.y0 + self.h / 2)}" font-size="11" '
                   f'text-anchor="middle" transform="rotate(-90 {_fmt(self.x0 - 40)} '
                   f'{_fmt(self.y0 + self.h / 2)})">{ylabel}</text>')
        return out


def figure_svg(times, paths_by_eps: Sequence, eps_values: Sequence[float], final_samples,
               psi_minus=None, psi_plus=None, title: str = "", config: Optional[dict] = None,
               max_paths: int = 150) -> str:
    """Sample paths shaded by eps (left) and the final-time CDF (right).

    Larger eps are drawn in lighter gray; the smallest eps is drawn in red
    on top.  ``paths_by_eps[i]`` is an (n_paths, len(times)) array.
    """
    times = np.asarray(times, dtype=float)
    order = np.argsort(eps_values)[::-1]  # largest first, smallest on top
    allv = [np.asarray(paths_by_eps[i])[:max_paths] for i in order]
    vals = np.concatenate([v.ravel() for v in allv]) if allv else np.zeros(1)
    vals = vals[np.isfinite(vals)]
    lo, hi = float(np.min(vals)), float(np.max(vals))
    for psi in (psi_minus, psi_plus):
        if psi is not None:
            pv = np.asarray(psi(times))
            lo, hi = min(lo, float(pv.min())), max(hi, float(pv.max()))
    if hi - lo < 1e-12:
        lo, hi = lo - 1, hi + 1
    pad = 0.05 * (hi - lo)
    ylim = (lo - pad, hi + pad)
    W, H = 900, 380
    left = _Panel(70, 30, 350, 300, (float(times[0]), float(times[-1])), ylim)
    right = _Panel(520, 30, 350, 300, ylim, (0.0, 1.0))
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    if config is not None:
        prov = provenance(config)
        out.append(f"<!-- config_sha256={prov['config_sha256']} master_seed={prov['master_seed']} -->")
    out.append('<rect width="100%" height="100%" fill="white"/>')
    if title:
        out.append(f'<text x="{W / 2}" y="18" font-size="13" text-anchor="middle">{title}</text>')
    n = len(order)
    for rank, (i, paths) in enumerate(zip(order, allv)):
        smallest = rank == n - 1
        color = "#d62728" if smallest else _gray(0.85 - 0.6 * rank / max(n - 1, 1))
        for row in paths:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="0.6" '
                       f'points="{left.pts(times, row)}"/>')
    for psi, dash in ((psi_minus, "4,3"), (psi_plus, "4,3")):
        if psi is not None:
            out.append(f'<polyline fill="none" stroke="black" stroke-width="1.4" '
                       f'stroke-dasharray="{dash}" points="{left.pts(times, psi(times))}"/>')
    out += left.frame("t", "X(t)")
    s = np.sort(np.asarray(final_samples, dtype=float))
    if len(s):
        q = np.arange(1, len(s) + 1) / len(s)
        xs = np.concatenate([[ylim[0]], np.repeat(s, 2), [ylim[1]]])
        ys = np.concatenate([[0.0, 0.0], np.repeat(q, 2)[:-1], [1.0]])
        ys = ys[:len(xs)]
        xs = np.clip(xs, *ylim)
        out.append(f'<polyline fill="none" stroke="#d62728" stroke-width="1.2" '
                   f'points="{right.pts(xs, ys)}"/>')
    out += right.frame("X(T)", "empirical CDF")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str, svg: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return path


def format_table(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    """Plain-text table for terminal output."""
    cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
