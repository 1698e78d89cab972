"""Closed-form instability thresholds, table reproduction and (m, e) sweeps."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .blocks import block_ids, reduced_block
from .coefficients import Scenario, global_coefficients, q_max, sigma_n, trig_sums
from .errors import DomainError, GoldenMismatch, IntegrationFailure
from .monodromy import E_CAP, TOL_CIRCLE, Verdict, block_report, overall_verdict
from .morse import K_DEFAULT, ONE, RHO_GRID_DEFAULT, eta_derivatives, min_eigenvalue, positivity_certificate

# Named constant taken as given (its derivation is external); not recomputed.
BETA0 = 0.7237

GOLDEN_TOL = 5e-4


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    closed_left: bool = False

    @property
    def nonempty(self) -> bool:
        return self.lo < self.hi

    def __contains__(self, m: float) -> bool:
        left = m >= self.lo if self.closed_left else m > self.lo
        return left and m < self.hi

    def sample(self, fractions=(0.25, 0.5, 0.75)) -> list[float]:
        return [self.lo + f * (self.hi - self.lo) for f in fractions]


@dataclass(frozen=True)
class BlockThreshold:
    l: int
    interval: Interval
    zeta: float | None = None
    xi: float | None = None
    # the two inequality templates whose extremes define zeta and xi
    branch_a: Interval | None = None
    branch_b: Interval | None = None


@dataclass
class ThresholdTable:
    n: int
    blocks: dict  # l -> BlockThreshold
    beta0: float
    large_m_threshold: float

    def interval(self, l: int) -> Interval:
        return self.blocks[l].interval

    def unstable_blocks(self, m: float) -> list[int]:
        return [l for l, b in self.blocks.items() if b.interval.nonempty and m in b.interval]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta0": self.beta0,
            "large_m_threshold": self.large_m_threshold,
            "blocks": {
                str(l): {
                    "lo": b.interval.lo,
                    "hi": b.interval.hi,
                    "closed_left": b.interval.closed_left,
                    "nonempty": b.interval.nonempty,
                    "zeta": b.zeta,
                    "xi": b.xi,
                }
                for l, b in self.blocks.items()
            },
        }


def _branches(n: int, l: int, beta0: float):
    P, S, Q = trig_sums(n, l)
    if 2 * l == n:
        S = 0.0
    w = beta0 * min(sigma_n(n), 4.0 * (P - S))
    a = Interval((3.0 * Q + S - P) / 2.0, 3.0 * Q + P - S)
    b = Interval((6.0 * Q - w) / (3.0 + 2.0 * beta0), (6.0 * Q + w) / (3.0 - 2.0 * beta0))
    return a, b


def thresholds(n: int, beta0: float = BETA0) -> ThresholdTable:
    if int(n) != n or n < 3:
        raise DomainError(f"thresholds need an integer n >= 3, got {n!r}")
    n = int(n)
    P1 = trig_sums(n, 1)[0]
    blocks = {1: BlockThreshold(1, Interval(0.0, P1 / 2.0, closed_left=True))}
    for l in range(2, n // 2 + 1):
        a, b = _branches(n, l, beta0)
        zeta = min(a.lo, b.lo)
        xi = max(a.hi, b.hi)
        blocks[l] = BlockThreshold(l, Interval(max(0.0, zeta), xi), zeta, xi, a, b)
    return ThresholdTable(n, blocks, beta0, 2.0 * q_max(n))


# -- golden tables --------------------------------------------------------------


@lru_cache(maxsize=1)
def goldens() -> dict:
    text = resources.files("gonstab").joinpath("data/goldens.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass
class TableReport:
    which: str
    rows: list  # (label, computed, golden, deviation)
    tolerance: float
    provenance: str

    @property
    def max_deviation(self) -> float:
        return max(r[3] for r in self.rows)

    @property
    def worst(self):
        return max(self.rows, key=lambda r: r[3])

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "provenance": self.provenance,
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "passed": self.passed,
            "rows": [{"entry": a, "computed": b, "golden": c, "deviation": d} for a, b, c, d in self.rows],
        }


def reproduce_tables(which: str, strict: bool = True) -> TableReport:
    """Regenerate a published table and compare against the embedded goldens.

    With ``strict`` a deviation above 5e-4 raises GoldenMismatch; the report's
    own ``tolerance`` is the per-table acceptance level.
    """
    g = goldens()
    if which == "sigma":
        rows = [(f"sigma_{n}", sigma_n(n), v, abs(sigma_n(n) - v)) for n, v in zip(g["sigma"]["n"], g["sigma"]["values"])]
    elif which == "dcheck":
        rows = []
        for n, v in zip(g["dcheck"]["n"], g["dcheck"]["values"]):
            d = global_coefficients(Scenario(n, 0.0)).d_check
            rows.append((f"dcheck_{n}", d, v, abs(d - v)))
    elif which == "instability":
        rows = []
        for r in g["instability"]["rows"]:
            iv = thresholds(r["n"]).interval(r["block"])
            for end, val in (("lo", iv.lo), ("hi", iv.hi)):
                gold = r[end]
                if gold == 0.0 and end == "lo":
                    continue  # only the finite nonzero endpoints are compared
                rows.append((f"n={r['n']} l={r['block']} {end}", val, gold, abs(val - gold)))
    else:
        raise DomainError(f"unknown table {which!r}")
    rep = TableReport(which, rows, g[which]["tolerance"], g[which]["provenance"])
    if strict and rep.max_deviation > GOLDEN_TOL:
        label, comp, gold, dev = rep.worst
        raise GoldenMismatch(f"{which}: {label} computed {comp:.6f}, table {gold:.4f}", dev)
    return rep


def published_interval(n: int, l: int) -> Interval:
    for r in goldens()["instability"]["rows"]:
        if r["n"] == n and r["block"] == l:
            return Interval(r["lo"], r["hi"], r["bracket"].startswith("["))
    raise KeyError((n, l))


def perturbation_goldens() -> dict:
    return goldens()["perturbation_n8"]


def perturbation_deviation() -> dict:
    g = perturbation_goldens()
    a, b, c = eta_derivatives(8)
    return {
        key: {"printed": g[key], "analytic": val, "deviation": abs(val - g[key])}
        for key, val in (("alpha_prime", a), ("beta_prime", b), ("gamma_prime", c))
    }


# -- large-m certificates ---------------------------------------------------


@dataclass
class LargeMReport:
    n: int
    e: float
    m: float
    large_m_threshold: float
    margins: dict  # l -> margin of the smallest omega = 1 eigenvalue over eps_null

    @property
    def positive(self) -> dict:
        return {l: mg > 0 for l, mg in self.margins.items()}

    @property
    def all_positive(self) -> bool:
        return all(self.positive.values())


def large_m_certificates(n: int, e: float, m: float | None = None, K: int = K_DEFAULT) -> LargeMReport:
    """omega = 1 positivity for blocks l >= 2 above 2 Q_max (and block 1 when n >= 9)."""
    if n < 4:
        raise DomainError("large-m certificates need n >= 4")
    thr = 2.0 * q_max(n)
    if m is None:
        m = 1.1 * thr if thr > 0 else 1.0
    scen = Scenario(n, m, e)
    ids = [l for l in block_ids(n) if l >= 2 or n >= 9]
    margins = {}
    for l in ids:
        mn, eps = min_eigenvalue(reduced_block(scen, l).R, e, ONE, K)
        margins[l] = mn - eps
    return LargeMReport(n, e, m, thr, margins)


def m1_proxy(e: float, n: int = 8, m_lo: float = 1e-3, m_hi: float = 1e3, K: int = 32, tol: float = 1e-3) -> dict:
    """Numerical stand-in for the existence-only block-1 mass bound.

    Finds the smallest m in [m_lo, m_hi] above which (on a log grid, then by
    bisection) block 1 stays positive at omega = 1.  The upper end is capped
    because the emerging eigenvalues shrink like 1/m and eventually fall under
    the null threshold, which would fake a failure.
    """

    def ok(m):
        mn, eps = min_eigenvalue(reduced_block(Scenario(n, m, e), 1).R, e, ONE, K)
        return mn - eps > 0

    grid = np.geomspace(m_lo, m_hi, 25)
    flags = [ok(m) for m in grid]
    if not flags[-1]:
        return {"e": e, "n": n, "m1_proxy": math.inf, "holds_on_whole_range": False}
    bad = [i for i, f in enumerate(flags) if not f]
    if not bad:
        return {"e": e, "n": n, "m1_proxy": float(m_lo), "holds_on_whole_range": True}
    lo, hi = grid[bad[-1]], grid[bad[-1] + 1]
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if not ok(mid) else (lo, mid)
    return {"e": e, "n": n, "m1_proxy": float(hi), "holds_on_whole_range": False}


# -- sweeps ---------------------------------------------------------------------

CSV_COLUMNS = ("n", "m", "e", "block", "verdict", "max_log_multiplier", "margin")


@dataclass
class SweepCell:
    n: int
    m: float
    e: float
    block: int
    verdict: str
    max_log_multiplier: float = math.nan
    margin: float = math.nan
    closed_form: str = "Undetermined"
    consistent: bool | None = None
    exploratory: bool = False
    error: str | None = None

    def csv_row(self) -> list[str]:
        return [
            str(self.n),
            repr(float(self.m)),
            repr(float(self.e)),
            str(self.block),
            self.verdict,
            f"{self.max_log_multiplier:.6e}",
            f"{self.margin:.6e}",
        ]


@dataclass
class SweepConfig:
    mode: str = "both"
    rel_tol: float = 1e-11
    K: int = 32
    rho_grid: int = RHO_GRID_DEFAULT
    certificates: bool = True
    tol_circle: float = TOL_CIRCLE
    allow_extreme_e: bool = False


def _closed_form_verdict(table: ThresholdTable, m: float, l: int) -> str:
    iv = table.interval(l)
    return "Hyperbolic" if iv.nonempty and m in iv else "Undetermined"


def _cell(args) -> SweepCell:
    n, m, e, l, cfg = args
    table = thresholds(n)
    cf = _closed_form_verdict(table, m, l)
    cell = SweepCell(n, m, e, l, verdict=cf, closed_form=cf, exploratory=(cf == "Undetermined"))
    scen = Scenario(n, m, e)
    if cfg.certificates:
        cert = positivity_certificate(reduced_block(scen, l).R, e, cfg.rho_grid, cfg.K)
        cell.margin = cert.min_margin
    if cfg.mode in ("monodromy", "both"):
        try:
            rep = block_report(scen, l, cfg.rel_tol)
        except IntegrationFailure as exc:
            cell.error = f"IntegrationFailure: {exc}"
            cell.verdict = "Error"
            return cell
        cell.verdict = rep.verdict.value
        cell.max_log_multiplier = rep.max_log_multiplier
        if cfg.mode == "both" and cf == "Hyperbolic":
            cell.consistent = rep.verdict is Verdict.HYPERBOLIC
    return cell


def sweep(n: int, m_values, e_values, mode: str = "both", config: SweepConfig | None = None, workers: int = 1) -> list[SweepCell]:
    cfg = config or SweepConfig(mode=mode)
    cfg.mode = mode
    if mode not in ("closed_form", "monodromy", "both"):
        raise DomainError(f"unknown sweep mode {mode!r}")
    thresholds(n)  # validates n
    m_values = [float(m) for m in m_values]
    e_values = [float(e) for e in e_values]
    cap = 0.999999 if cfg.allow_extreme_e else E_CAP
    for e in e_values:
        if not 0.0 <= e <= cap:
            raise DomainError(f"e = {e} outside [0, {cap}] (use allow_extreme_e to go higher)")
    for m in m_values:
        if not (m >= 0 and math.isfinite(m)):
            raise DomainError(f"invalid mass {m!r}")
    jobs = [(n, m, e, l, cfg) for m in m_values for e in e_values for l in block_ids(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell, jobs))
    else:
        cells = [_cell(j) for j in jobs]
    cells.sort(key=lambda c: (c.m, c.e, c.block))
    return cells


def overall_by_cell(cells) -> dict:
    groups: dict = {}
    for c in cells:
        groups.setdefault((c.m, c.e), []).append(c)
    out = {}
    for key, cs in groups.items():
        try:
            out[key] = overall_verdict(Verdict(c.verdict) for c in cs)
        except ValueError:
            out[key] = "Undetermined"
    return out


def write_sweep(cells, path: str, config: SweepConfig, extra: dict | None = None) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for c in cells:
            w.writerow(c.csv_row())
    sidecar = path + ".json"
    meta = {
        "config": asdict(config),
        "columns": list(CSV_COLUMNS),
        "cells": len(cells),
        "exploratory_cells": sum(c.exploratory for c in cells),
        "inconsistent_cells": sum(c.consistent is False for c in cells),
        "errors": [asdict(c) for c in cells if c.error],
    }
    if extra:
        meta.update(extra)
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=str)
    return sidecar


def monotone_escape(n: int, e: float, m_samples=None, rel_tol: float = 1e-11) -> dict:
    """Check 'LinearlyStable for every sampled m >= 10 max(2 Q_max, m1 proxy)'."""
    from .monodromy import gon_verdict

    thr = 2.0 * q_max(n)
    proxy = m1_proxy(e)["m1_proxy"] if n == 8 else 0.0
    floor = 10.0 * max(thr, proxy)
    if m_samples is None:
        m_samples = floor * np.array([1.0, 3.0, 10.0])
    failures = []
    for m in m_samples:
        v = gon_verdict(Scenario(n, float(m), e), rel_tol)
        if v.overall != "LinearlyStable":
            failures.append((float(m), v.overall))
    return {"n": n, "e": e, "floor": floor, "samples": [float(m) for m in m_samples], "failures": failures,
            "holds": not failures}
