"""Density sweeps over a lambda grid comparing the formula, stabilized and resolvent routes."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from ..core import Kind
from ..critical import DEFAULT_SEEDS as CRITICAL_SEEDS
from ..critical import rho_critical
from ..errors import JacobiError, OutsideBand
from ..noncritical import DEFAULT_SEEDS as NONCRITICAL_SEEDS
from ..noncritical import rho_noncritical
from ..stabilized import StabilizedModel, resolvent_density, rho_stabilized, rho_via_phi
from .config import RunConfig

OUTSIDE = "OutsideBand"


@dataclass
class Row:
    lam: float
    rho_formula: float | None = None
    rho_formula_unc: float | None = None
    rho_stabilized: dict = field(default_factory=dict)   # N -> float | error name
    rho_resolvent: float | None = None
    rho_resolvent_unc: float | None = None
    errors: dict = field(default_factory=dict)           # route -> error name

    @property
    def delta_oracle_rel(self) -> float | None:
        if self.rho_formula is None or self.rho_resolvent is None:
            return None
        return abs(self.rho_formula - self.rho_resolvent) / abs(self.rho_resolvent)

    def stabilized_deltas(self) -> list[float]:
        if self.rho_formula is None:
            return []
        return [abs(v - self.rho_formula) / abs(self.rho_formula)
                for _, v in sorted(self.rho_stabilized.items()) if isinstance(v, float)]

    @property
    def rel_delta_stabilized_final(self) -> float | None:
        if not self.rho_stabilized or self.rho_formula is None:
            return None
        last = self.rho_stabilized[max(self.rho_stabilized)]
        if not isinstance(last, float):
            return None
        return abs(last - self.rho_formula) / abs(self.rho_formula)

    @property
    def trend_flag(self) -> bool | None:
        d = self.stabilized_deltas()
        if len(d) < 2:
            return None
        return all(b <= a for a, b in zip(d, d[1:]))

    @property
    def status(self) -> str:
        if not self.errors:
            return "ok"
        return ";".join(f"{k}:{v}" for k, v in sorted(self.errors.items()))


@dataclass
class ComparisonReport:
    config: RunConfig
    rows: list[Row]
    routes: tuple[str, ...]

    def summary(self) -> dict:
        tol = self.config.tolerances
        d_or = [r.delta_oracle_rel for r in self.rows if r.delta_oracle_rel is not None]
        d_fin = [r.rel_delta_stabilized_final for r in self.rows
                 if r.rel_delta_stabilized_final is not None]
        flags = [r.trend_flag for r in self.rows if r.trend_flag is not None]
        out = {
            "rows": len(self.rows),
            "failures": sum(1 for r in self.rows
                            if any(v != OUTSIDE for v in r.errors.values())),
            "max_delta_oracle": max(d_or) if d_or else None,
            "median_delta_oracle": statistics.median(d_or) if d_or else None,
            "max_delta_stabilized_final": max(d_fin) if d_fin else None,
            "median_delta_stabilized_final": statistics.median(d_fin) if d_fin else None,
            "trend_fraction": (sum(flags) / len(flags)) if flags else None,
        }
        checks = {}
        if d_or:
            checks["oracle"] = out["max_delta_oracle"] <= tol["oracle"]
        if d_fin:
            checks["stabilized_final"] = out["max_delta_stabilized_final"] <= tol["stabilized_final"]
        if flags and self.config.family.kind is not Kind.EXPLICIT:
            checks["trend"] = out["trend_fraction"] >= tol["trend_fraction"]
        out["checks"] = checks
        out["passed"] = all(checks.values())
        return out

    @property
    def passed(self) -> bool:
        return self.summary()["passed"]

    @property
    def numerical_failure(self) -> bool:
        return any(v != OUTSIDE for r in self.rows for v in r.errors.values())


def _formula(cfg: RunConfig, lam: float):
    fam = cfg.family
    if fam.kind is Kind.CRITICAL:
        r = rho_critical(fam, lam, window=cfg.window,
                         seeds=cfg.N_seed_schedule or CRITICAL_SEEDS, n1=cfg.h_checkpoint)
        return r.value, r.uncertainty
    if fam.kind is Kind.NONCRITICAL:
        r = rho_noncritical(fam, lam, seeds=cfg.N_seed_schedule or NONCRITICAL_SEEDS,
                            lambda_cap=cfg.lambda_cap)
        return r.value, r.uncertainty
    # constant tail: the stabilized matrix at the tail index is the matrix itself
    N = max(len(fam.a_table), len(fam.b_table))
    return rho_via_phi(fam, N, lam), 0.0


def compute_row(cfg: RunConfig, lam: float, routes) -> Row:
    """All configured routes at one lambda; failures are recorded, never raised."""
    row = Row(float(lam))
    if "formula" in routes:
        try:
            row.rho_formula, row.rho_formula_unc = _formula(cfg, lam)
        except OutsideBand:
            row.errors["formula"] = OUTSIDE
        except (JacobiError, ValueError, ArithmeticError) as exc:
            row.errors["formula"] = type(exc).__name__
    if "stabilized" in routes:
        for N in cfg.N_schedule:
            if not StabilizedModel.of(cfg.family, N).inside(lam, cfg.margin):
                row.rho_stabilized[N] = OUTSIDE
                continue
            try:
                row.rho_stabilized[N] = rho_stabilized(cfg.family, N, lam, cfg.margin).value
            except (JacobiError, ValueError, ArithmeticError) as exc:
                row.rho_stabilized[N] = type(exc).__name__
                row.errors[f"stabilized_{N}"] = type(exc).__name__
    if "resolvent" in routes:
        try:
            r = resolvent_density(cfg.family, lam, eps=cfg.eps_schedule,
                                  tol=cfg.resolvent_tol)
            row.rho_resolvent, row.rho_resolvent_unc = r.value, r.uncertainty
        except (JacobiError, ValueError, ArithmeticError) as exc:
            row.errors["resolvent"] = type(exc).__name__
    return row


def _job(args):
    cfg, lam, routes = args
    return compute_row(cfg, lam, routes)


def run_density_sweep(cfg: RunConfig, routes=None, jobs: int = 1) -> ComparisonReport:
    routes = tuple(routes or cfg.routes)
    work = [(cfg, lam, routes) for lam in cfg.grid()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_job, work))
    else:
        rows = [_job(w) for w in work]
    rows.sort(key=lambda r: r.lam)
    return ComparisonReport(cfg, rows, routes)


# ---------------------------------------------------------------------------
# emission

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.17e}"
    return str(v)


def csv_columns(report: ComparisonReport) -> list[str]:
    cols = ["lambda", "rho_formula", "rho_formula_unc"]
    cols += [f"rho_stab_{n}" for n in report.config.N_schedule] if "stabilized" in report.routes else []
    cols += ["rho_resolvent", "rho_resolvent_unc", "delta_oracle_rel", "trend_flag", "status"]
    return cols


def row_record(report: ComparisonReport, r: Row) -> dict:
    rec = {"lambda": r.lam, "rho_formula": r.rho_formula, "rho_formula_unc": r.rho_formula_unc}
    if "formula" in r.errors and r.rho_formula is None:
        rec["rho_formula"] = r.errors["formula"]
    if "stabilized" in report.routes:
        for n in report.config.N_schedule:
            rec[f"rho_stab_{n}"] = r.rho_stabilized.get(n)
    rec.update(rho_resolvent=r.rho_resolvent, rho_resolvent_unc=r.rho_resolvent_unc,
               delta_oracle_rel=r.delta_oracle_rel, trend_flag=r.trend_flag, status=r.status)
    return rec


def to_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = csv_columns(report)
    w.writerow(cols)
    for r in report.rows:
        rec = row_record(report, r)
        w.writerow([_fmt(rec[c]) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def to_json(report: ComparisonReport, timestamp: str | None = None) -> str:
    rows = []
    for r in report.rows:
        rec = row_record(report, r)
        rec["rel_delta_stabilized_final"] = r.rel_delta_stabilized_final
        rows.append(rec)
    doc = {"config": report.config.to_dict(), "routes": list(report.routes), "rows": rows,
           "summary": report.summary()}
    if timestamp is not None:
        doc["timestamp"] = timestamp
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def with_routes(cfg: RunConfig, routes) -> RunConfig:
    return replace(cfg, routes=tuple(routes))
