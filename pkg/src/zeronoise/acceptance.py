"""The acceptance suite: twelve end-to-end checks with their budgets.

Each check returns a :class:`CriterionResult`; a check passes when its
numerical condition holds and it finished within its time budget.
``tighten`` scales every tolerance down (values below 1 force failures).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from zeronoise import analysis as an
from zeronoise.deterministic import extremal_solution
from zeronoise.dsl import builtin_drift, builtin_example1, builtin_example2, drift_from_text
from zeronoise.montecarlo import SimConfig, coupled_comparison, simulate_ensemble

SEED = 20240501


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime: float
    budget: Optional[float]
    detail: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.runtime <= self.budget

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        budget = f"/{self.budget:g}s" if self.budget is not None else ""
        keys = ", ".join(f"{k}={_short(v)}" for k, v in self.detail.items() if k != "notes")
        return f"[{flag}] {self.number:02d} {self.name} ({self.runtime:.1f}s{budget}) {keys}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "runtime": self.runtime, "budget": self.budget, "detail": self.detail}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


@dataclass
class Criterion:
    number: int
    name: str
    tags: tuple
    budget: Optional[float]
    check: Callable

    def matches(self, pattern: Optional[str]) -> bool:
        if not pattern:
            return True
        if pattern.isdigit():
            return int(pattern) == self.number
        return pattern in self.name or pattern in self.tags

    def run(self, tighten: float = 1.0) -> CriterionResult:
        t0 = time.perf_counter()
        ok, detail = self.check(tighten)
        dt = time.perf_counter() - t0
        res = CriterionResult(self.number, self.name, False, dt, self.budget, detail)
        res.passed = bool(ok) and res.within_budget
        if not res.within_budget:
            detail["notes"] = "over the time budget"
        return res


def _binom_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------------------

def c01(tighten):
    tol = 1e-3 * tighten
    ps, refs, status = [], [], []
    for rho in (0.3, 0.5, 0.8):
        lw = an.limit_weight(builtin_example1(rho), -1.0, 1.0)
        ref = an.limit_weight_regvar("oscillating", rho, rho, 1.0)
        ps.append(lw.p if lw.p is not None else math.nan)
        refs.append(ref)
        status.append(lw.status)
    ok = all(abs(p - 0.5) <= tol and abs(p - r) <= tol for p, r in zip(ps, refs))
    return ok, {"p": ps, "closed_form": refs, "status": status}


def c02(tighten):
    eps = 3.0 ** -9 / math.e
    cfg = SimConfig([eps], dt=2.5e-3, t_final=0.5, n_paths=2000, master_seed=SEED)
    frac = simulate_ensemble(builtin_example1(0.5), cfg)[0].split_fraction
    return abs(frac - 0.5) <= 0.034 * tighten, {"eps": eps, "fraction_positive": frac}


def c03(tighten):
    tol = 1e-3 * tighten
    detail, ok = {}, True
    for rho, c in ((1.0, 4.0), (0.5, 0.25)):
        d = builtin_drift("power", rho=rho, c=c)
        lw = an.limit_weight(d, -1.0, 1.0)
        ref = an.limit_weight_regvar("a", rho, rho, c)
        p = lw.p if lw.p is not None else math.nan
        ok &= abs(p - ref) <= tol
        if (rho, c) == (1.0, 4.0):
            ok &= abs(p - 1 / 3) <= tol and abs(ref - 1 / 3) <= tol
        cfg = SimConfig([2.0 ** -8], dt=1e-3, t_final=30.0, n_paths=2000, master_seed=SEED,
                        exit_interval=(-1.0, 1.0), stop_on_exit=True, chunk_size=2000)
        e = simulate_ensemble(d, cfg)[0]
        frac = e.exit_fraction_hi()
        band = 3 * _binom_sigma(ref, e.n_paths) * tighten
        ok &= abs(frac - ref) <= band and e.exit_mean()[3] == 0
        detail[f"rho={rho:g},c={c:g}"] = [p, ref, frac]
    return ok, detail


def c04(tighten):
    d = drift_from_text("1+ind(0,10)")
    psi = extremal_solution(d, "plus", 0.5)
    eps = [2.0 ** -2, 2.0 ** -4, 2.0 ** -6, 2.0 ** -8]
    cfg = SimConfig(eps, dt=2.5e-3, t_final=0.5, n_paths=500, master_seed=SEED)
    s = simulate_ensemble(d, cfg, references={"plus": psi})
    med = [float(np.median(e.sup_distance["plus"])) for e in s.per_eps]
    ok = all(b < a for a, b in zip(med, med[1:])) and med[-1] <= 0.05 * tighten
    return ok, {"median_sup": med}


def c05(tighten):
    dt = 1e-3
    cfg = SimConfig([2.0 ** -6], dt=dt, t_final=1.5, n_paths=2000, master_seed=SEED, levels=[0.4])
    m, v, n, cens = simulate_ensemble(drift_from_text("1"), cfg)[0].hit_mean(0.4)
    se = math.sqrt(v / n)
    band = (3 * se + 2 * dt) * tighten
    return abs(m - 0.4) <= band and cens == 0, {"mean": m, "band": band, "censored": cens}


def c06(tighten):
    d = drift_from_text("sign(x)*abs(x)^0.5")
    u, method = an.expected_exit_time(d, 0.5, 0.0, -1.0, 1.0, return_method=True)
    dt = 1e-4
    cfg = SimConfig([0.5], dt=dt, t_final=30.0, n_paths=5000, master_seed=SEED,
                    exit_interval=(-1.0, 1.0), stop_on_exit=True, chunk_size=1250)
    m, v, n, cens = simulate_ensemble(d, cfg)[0].exit_mean()
    band = (3 * math.sqrt(v / n) + 2 * dt) * tighten
    return abs(m - u) <= band and cens == 0, {"formula": u, "method": method, "mc_mean": m,
                                              "band": band, "censored": cens}


def c07(tighten):
    rng = np.random.default_rng(7)
    d = drift_from_text("0")
    worst_p = worst_u = 0.0
    for _ in range(50):
        x1, x, x2 = np.sort(rng.uniform(-3.0, 3.0, 3))
        eps = float(rng.uniform(0.25, 2.0))
        p = an.exit_probability(d, eps, x, x1, x2)
        worst_p = max(worst_p, abs(p - (x2 - x) / (x2 - x1)))
        u = an.expected_exit_time(d, eps, x, x1, x2, method="phi")
        exact = (x - x1) * (x2 - x) / eps ** 2
        worst_u = max(worst_u, abs(u - exact) / exact)
    ok = worst_p <= 1e-10 * tighten and worst_u <= 1e-8 * tighten
    return ok, {"max_abs_err_prob": worst_p, "max_rel_err_time": worst_u}


def c08(tighten):
    drifts = [drift_from_text("sign(x)*abs(x)^0.5"), builtin_drift("power", rho=0.5, c=4.0),
              drift_from_text("1+0.5*x")]
    worst, methods = 0.0, set()
    for d in drifts:
        for eps in (1.0, 0.5, 0.25):
            u, m = an.expected_exit_time(d, eps, 0.1, -1.0, 1.0, method="phi", return_method=True)
            g = an.GreenKernel(d, eps, -1.0, 1.0, points=(0.1,)).occupation(0.1)
            methods.add(m)
            worst = max(worst, abs(u - g) / abs(g))
    return worst <= 1e-4 * tighten and methods == {"phi"}, {"max_rel_err": worst,
                                                             "u_method": sorted(methods)}


def c09(tighten):
    cfg = SimConfig([2.0 ** -4], dt=2.5e-3, t_final=0.5, n_paths=1000, master_seed=SEED)
    pairs = [("0", "1"), ("sign(x)*abs(x)^0.5", "sign(x)*abs(x)^0.5+0.1"),
             ("sign(x)*abs(x)^0.5*(1+0.5*phi(1/x))", "sign(x)*abs(x)^0.5*(1+0.5*phi(1/x))+0.05")]
    fr, ok = [], True
    for i, (a1, a2) in enumerate(pairs):
        if i == 2:
            d1 = builtin_example1(0.5)
            d2 = d1.shifted(0.05)
        else:
            d1, d2 = drift_from_text(a1), drift_from_text(a2)
        r = coupled_comparison(d1, d2, cfg)[0]
        fr.append(r.fraction)
        ok &= r.fraction <= 1e-3 * tighten
        if i == 0:
            ok &= r.n_violations == 0
    return ok, {"violation_fraction": fr}


def c10(tighten):
    op = an.ApproxIdentity(lambda x: 2 * np.abs(x) ** 0.5, lambda x: 1 / np.abs(x) ** 0.5, 0.0, 1.0)
    l1 = [an.approx_identity_l1(op, 2.0 ** -i) for i in range(1, 7)]
    ok = all(b < a for a, b in zip(l1, l1[1:])) and l1[-1] <= 0.05 * tighten
    return ok, {"l1": l1}


def c11(tighten):
    d = builtin_example2(0.5)
    T = 0.5
    psi = extremal_solution(d, "plus", T)
    thr = 0.1 * float(psi.at(T))
    eps = min(an.default_eps_ladder())
    cfg = SimConfig([eps], dt=1e-5, t_final=T, n_paths=2000, master_seed=SEED, chunk_size=500)
    e = simulate_ensemble(d, cfg, references={"plus": psi})[0]
    near = np.abs(e.final) < thr
    frac = float(near.mean())
    sup = e.sup_distance["plus"][~near]
    worst = float(sup.max()) if len(sup) else 0.0
    ok = abs(frac - 0.5) <= 0.034 * tighten and worst <= thr * tighten
    return ok, {"eps": eps, "fraction_near_0": frac, "threshold": thr,
                "max_sup_to_psi_plus_complement": worst,
                "fraction_negative": float(np.mean(e.final < 0))}


def c12(tighten):
    eps = [2.0 ** -2, 2.0 ** -3, 2.0 ** -4, 2.0 ** -5]
    cfg = SimConfig(eps, dt=1e-3, t_final=3.0, n_paths=2000, master_seed=SEED, levels=[0.4])
    s = simulate_ensemble(drift_from_text("1"), cfg)
    var = [e.hit_mean(0.4)[1] for e in s.per_eps]
    slope = float(np.polyfit(np.log(eps), np.log(var), 1)[0])
    half = 0.5 * tighten
    return 2.0 - half <= slope <= 2.0 + half, {"slope": slope, "var": var}


CRITERIA: List[Criterion] = [
    Criterion(1, "example1-limit-weight", ("limit-weight", "analytic", "example1"), 10, c01),
    Criterion(2, "example1-mc-split", ("monte-carlo", "example1", "split"), 60, c02),
    Criterion(3, "regular-variation", ("limit-weight", "regvar", "monte-carlo", "split"), 90, c03),
    Criterion(4, "uniform-convergence", ("monte-carlo", "positive-drift"), 30, c04),
    Criterion(5, "hitting-time-mean", ("monte-carlo", "hitting-time"), 30, c05),
    Criterion(6, "exit-time-vs-mc", ("exit-time", "monte-carlo"), 60, c06),
    Criterion(7, "zero-drift-exact", ("exit-time", "exit-probability", "zero-drift", "analytic"), None, c07),
    Criterion(8, "green-identity", ("exit-time", "green", "analytic"), 20, c08),
    Criterion(9, "comparison-coupling", ("monte-carlo", "comparison"), 30, c09),
    Criterion(10, "approximate-identity", ("analytic", "approx-identity"), 10, c10),
    Criterion(11, "example2-split", ("monte-carlo", "example2", "split"), 90, c11),
    Criterion(12, "variance-scaling", ("monte-carlo", "hitting-time", "variance"), 60, c12),
]


def select(pattern: Optional[str] = None) -> List[Criterion]:
    return [c for c in CRITERIA if c.matches(pattern)]


def run(pattern: Optional[str] = None, tighten: float = 1.0, echo: Optional[Callable] = None):
    out = []
    for c in select(pattern):
        try:
            r = c.run(tighten)
        except Exception as exc:  # a crash is a failure, not an abort
            r = CriterionResult(c.number, c.name, False, 0.0, c.budget,
                                {"error": f"{type(exc).__name__}: {exc}"})
        out.append(r)
        if echo is not None:
            echo(r.line())
    return out
