"""Command-line interface.

Subcommands::

    zeronoise analyze    --drift TEXT | --builtin NAME  [--param k=v ...]
    zeronoise simulate   --drift TEXT | --builtin NAME  --eps 0.1,0.01 ...
    zeronoise reproduce  example1 | example2
    zeronoise verify     [--filter TAG] [--tighten [FACTOR]]

Settings resolve as defaults < ``--config FILE.json`` < ``ZERONOISE_*``
environment variables < command-line flags.  Exit codes: 0 success,
1 runtime error, 2 unsupported regime, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np

from zeronoise import analysis as an
from zeronoise import report
from zeronoise.deterministic import extremal_solution
from zeronoise.dsl import DriftSyntaxError, builtin_drift, drift_from_text
from zeronoise.montecarlo import SimConfig, simulate_ensemble

EXIT_OK, EXIT_ERROR, EXIT_UNSUPPORTED, EXIT_ACCEPTANCE = 0, 1, 2, 3
ENV_PREFIX = "ZERONOISE_"
DEFAULT_SIM_EPS = [0.1, 0.03, 0.01]


@dataclass
class RunConfig:
    """Resolved settings shared by the subcommands."""

    drift: Optional[str] = None
    builtin: Optional[str] = None
    params: dict = field(default_factory=dict)
    alpha: float = -0.5
    beta: float = 0.5
    horizon: float = 0.5
    eps: Optional[List[float]] = None
    dt: float = 2.5e-3
    n_paths: int = 2000
    seed: int = 20240501
    record: str = "full-paths"
    path_stride: int = 1
    chunk_size: int = 256
    workers: Optional[int] = None
    out: str = "zeronoise-out"
    exit_times: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def sim_config(self) -> SimConfig:
        eps = self.eps if self.eps else DEFAULT_SIM_EPS
        return SimConfig(eps, dt=self.dt, t_final=self.horizon, n_paths=self.n_paths,
                         master_seed=self.seed, record=self.record, path_stride=self.path_stride,
                         chunk_size=self.chunk_size, workers=self.workers)


def _coerce(name: str, raw):
    """Convert a string (env or flag) to the type of RunConfig.<name>."""
    if not isinstance(raw, str):
        return raw
    if name == "eps":
        return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
    if name == "params":
        return _parse_params(raw.split(","))
    if name in ("alpha", "beta", "horizon", "dt"):
        return float(raw)
    if name in ("n_paths", "seed", "path_stride", "chunk_size", "workers"):
        return int(raw)
    if name == "exit_times":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return raw


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        item = item.strip()
        if not item:
            continue
        k, sep, v = item.partition("=")
        if not sep:
            raise ValueError(f"parameter {item!r} is not of the form name=value")
        out[k.strip()] = float(v)
    return out


def resolve(flags: dict, config_path: Optional[str] = None, env=None,
            base: Optional[RunConfig] = None) -> RunConfig:
    """Merge the configuration layers into a RunConfig."""
    env = os.environ if env is None else env
    cfg = base or RunConfig()
    names = [f.name for f in fields(RunConfig)]
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            data = json.load(fh)
        unknown = set(data) - set(names)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(cfg, k, _coerce(k, v))
    for k in names:
        key = ENV_PREFIX + k.upper()
        if key in env:
            setattr(cfg, k, _coerce(k, env[key]))
    for k, v in flags.items():
        if k in names and v is not None:
            if k == "params":
                merged = dict(cfg.params)
                merged.update(v)
                v = merged
            setattr(cfg, k, _coerce(k, v))
    return cfg


def make_drift(cfg: RunConfig):
    if cfg.builtin:
        return builtin_drift(cfg.builtin, **cfg.params)
    if cfg.drift:
        return drift_from_text(cfg.drift, cfg.params)
    raise ValueError("give a drift with --drift TEXT or --builtin NAME")


# ---------------------------------------------------------------------------
# subcommands

def _provenance_config(cfg: RunConfig, sim: Optional[SimConfig] = None) -> dict:
    out = {"run": cfg.to_dict()}
    out["sim"] = sim.to_dict() if sim is not None else {"master_seed": cfg.seed}
    return out


def _analysis_payload(law) -> dict:
    d = law.to_dict()
    d["p"] = report.tagged(law.p, "quadrature") if law.p is not None else None
    d["p_eps_trace"] = [{"eps": e, **report.tagged(p, "quadrature")} for e, p in law.p_eps_trace]
    d["psi_plus"] = {"flag": law.psi_plus.flag, "plateau_time": law.psi_plus.plateau_time,
                     "singular_point": law.psi_plus.singular_point}
    d["psi_minus"] = {"flag": law.psi_minus.flag, "plateau_time": law.psi_minus.plateau_time,
                      "singular_point": law.psi_minus.singular_point}
    return d


def _do_analyze(cfg: RunConfig, drift, eps_ladder=None, echo=print):
    law = an.limit_law(drift, cfg.alpha, cfg.beta, cfg.horizon, eps_ladder=eps_ladder,
                       exit_times=cfg.exit_times)
    os.makedirs(cfg.out, exist_ok=True)
    pcfg = _provenance_config(cfg)
    report.write_json(os.path.join(cfg.out, "analysis.json"),
                      {"drift": drift.describe(), "limit_law": _analysis_payload(law)}, pcfg)
    report.write_psi_table(os.path.join(cfg.out, "psi.csv"), law.psi_minus, law.psi_plus, pcfg)
    echo(f"drift: {drift.name}")
    echo(f"regime: {law.regime}")
    if law.p is None:
        echo(f"limit weight: unavailable ({law.diagnostics.get('reason', 'unsupported regime')})")
    else:
        echo(f"limit weight p = {law.p:.6g} ({law.method})")
    if law.p_eps_trace:
        rows = [(f"{e:.4g}", f"{p:.8f}") for e, p in law.p_eps_trace]
        echo(report.format_table(rows, ["eps", "p_eps"]))
    return law


def _do_simulate(cfg: RunConfig, drift, psi_minus=None, psi_plus=None, echo=print, title=""):
    sim = cfg.sim_config()
    if psi_plus is None:
        psi_plus = extremal_solution(drift, "plus", cfg.horizon)
    if psi_minus is None:
        psi_minus = extremal_solution(drift, "minus", cfg.horizon)
    refs = {n: p for n, p in (("minus", psi_minus), ("plus", psi_plus))
            if p.antiderivative is not None}
    stats = simulate_ensemble(drift, sim, references=refs or None)
    pcfg = _provenance_config(cfg, sim)
    report.write_ensemble(stats, cfg.out, pcfg)
    rows = []
    for s in stats.per_eps:
        rows.append((f"{s.eps:.4g}", f"{s.split_fraction:.4f}",
                     f"{np.mean(s.final):.4g}", f"{np.std(s.final):.4g}"))
    echo(report.format_table(rows, ["eps", "fraction > 0", "mean X(T)", "sd X(T)"]))
    if sim.record == "full-paths":
        small = int(np.argmin(sim.eps_list))
        svg = report.figure_svg(sim.stored_times, [s.paths for s in stats.per_eps], sim.eps_list,
                                stats.per_eps[small].final, psi_minus, psi_plus,
                                title=title or drift.name, config=pcfg)
        report.write_svg(os.path.join(cfg.out, "figure.svg"), svg)
    return stats


REPRODUCE = {
    "example1": dict(builtin="example1", params={"rho": 0.5}, alpha=-0.5, beta=0.5, horizon=0.5,
                     eps=[3.0 ** -i / math.e for i in range(2, 10)], dt=2.5e-3, n_paths=2000,
                     record="full-paths", path_stride=1),
    "example2": dict(builtin="example2", params={"beta": 0.5}, alpha=-0.5, beta=0.5, horizon=0.5,
                     eps=[2.0 ** -4, 2.0 ** -8, 2.0 ** -12, 2.0 ** -16], dt=1e-5, n_paths=2000,
                     record="full-paths", path_stride=100, chunk_size=500),
}


def cmd_analyze(cfg, args, echo):
    drift = make_drift(cfg)
    law = _do_analyze(cfg, drift, eps_ladder=cfg.eps, echo=echo)
    return EXIT_OK if law.p is not None else EXIT_UNSUPPORTED


def cmd_simulate(cfg, args, echo):
    _do_simulate(cfg, make_drift(cfg), echo=echo)
    echo(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_reproduce(cfg, args, echo):
    drift = make_drift(cfg)
    law = _do_analyze(cfg, drift, eps_ladder=cfg.eps if args.example == "example1" else [],
                      echo=echo)
    _do_simulate(cfg, drift, law.psi_minus, law.psi_plus, echo=echo, title=args.example)
    echo(f"wrote {cfg.out}")
    return EXIT_OK


def cmd_verify(cfg, args, echo):
    from zeronoise import acceptance

    chosen = acceptance.select(args.filter)
    if not chosen:
        raise ValueError(f"no acceptance criterion matches {args.filter!r}")
    results = acceptance.run(args.filter, tighten=args.tighten, echo=echo)
    failed = [r for r in results if not r.passed]
    echo(f"{len(results) - len(failed)}/{len(results)} passed")
    if failed:
        echo("failed: " + ", ".join(f"{r.number:02d} {r.name}" for r in failed))
    if args.json:
        report.write_json(args.json, {"results": [r.to_dict() for r in results],
                                      "tighten": args.tighten}, _provenance_config(cfg))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(p, sim: bool):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--drift", help="drift expression, e.g. 'sign(x)*abs(x)^0.5'")
    p.add_argument("--builtin", help="builtin drift: example1, example2, power, constant")
    p.add_argument("--param", action="append", dest="params", metavar="NAME=VALUE",
                   help="drift parameter (repeatable)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--horizon", "-T", type=float, help="time horizon")
    p.add_argument("--out", "-o", help="output directory")
    if sim:
        p.add_argument("--eps", help="comma-separated noise levels")
        p.add_argument("--dt", type=float)
        p.add_argument("--paths", type=int, dest="n_paths")
        p.add_argument("--seed", type=int)
        p.add_argument("--record", choices=("summaries", "full-paths"))
        p.add_argument("--path-stride", type=int, dest="path_stride")
        p.add_argument("--chunk-size", type=int, dest="chunk_size")
        p.add_argument("--workers", type=int)
    else:
        p.add_argument("--eps", help="comma-separated eps ladder for the p_eps trace")
        p.add_argument("--exit-times", action="store_const", const=True, dest="exit_times")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeronoise",
                                     description="Zero-noise limits of non-Lipschitz 1-D ODEs.")
    parser.add_argument("--version", action="version", version=f"zeronoise {report.__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("analyze", help="analytic limit law of a drift"), sim=False)
    _add_common(sub.add_parser("simulate", help="Euler-Maruyama ensemble"), sim=True)
    rp = sub.add_parser("reproduce", help="rerun a worked example")
    rp.add_argument("example", choices=sorted(REPRODUCE))
    _add_common(rp, sim=True)
    vp = sub.add_parser("verify", help="run the acceptance suite")
    vp.add_argument("--filter", help="criterion number, name or tag (e.g. exit-time)")
    vp.add_argument("--tighten", nargs="?", type=float, const=1e-6, default=1.0, metavar="FACTOR",
                    help="scale all tolerances by FACTOR (default 1e-6 when given)")
    vp.add_argument("--json", help="write results to this JSON file")
    vp.add_argument("--config", help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    echo = lambda s: print(s, flush=True)
    try:
        flags = {k: v for k, v in vars(args).items() if v is not None}
        if "params" in flags:
            flags["params"] = _parse_params(flags["params"])
        base = None
        if args.command == "reproduce":
            base = RunConfig(**REPRODUCE[args.example], out=f"reproduce-{args.example}")
        cfg = resolve(flags, getattr(args, "config", None), base=base)
        handler = {"analyze": cmd_analyze, "simulate": cmd_simulate,
                   "reproduce": cmd_reproduce, "verify": cmd_verify}[args.command]
        return handler(cfg, args, echo)
    except DriftSyntaxError as exc:
        print(f"zeronoise: drift syntax error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:
        print(f"zeronoise: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
