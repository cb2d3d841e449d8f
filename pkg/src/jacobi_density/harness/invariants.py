"""Invariant suite: identity checks aggregated into a machine-readable pass/fail report."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import critical, noncritical
from ..core import Kind, arg_jumps, coeff_arrays, orthopoly, recurrence_residual
from ..errors import JacobiError
from ..levinson import chain_arrays
from ..stabilized import StabilizedModel, rho_stabilized, rho_via_phi, z_branch
from .config import RunConfig


@dataclass
class InvariantEntry:
    name: str
    passed: bool
    value: float | None
    tolerance: float | None
    detail: str = ""


@dataclass
class InvariantReport:
    family: str
    entries: list[InvariantEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, name, passed, value=None, tolerance=None, detail=""):
        v = None if value is None else float(value)
        self.entries.append(InvariantEntry(name, bool(passed), v, tolerance, detail))

    def get(self, name) -> InvariantEntry:
        return next(e for e in self.entries if e.name == name)

    def to_json(self) -> str:
        doc = {"family": self.family, "passed": self.passed,
               "entries": [asdict(e) for e in self.entries]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _subgrid(cfg: RunConfig) -> list[float]:
    g = cfg.grid()
    k = min(cfg.invariant_points, len(g))
    idx = np.unique(np.round(np.linspace(0, len(g) - 1, k)).astype(int))
    return [g[i] for i in idx]


def _guard(report: InvariantReport, name: str, fn):
    """Run one check; a numerical exception becomes a failed entry."""
    try:
        fn()
    except (JacobiError, ValueError, ArithmeticError) as exc:
        report.add(name, False, detail=f"{type(exc).__name__}: {exc}")


def _branch_z(report, cfg):
    grid = np.asarray(cfg.grid())
    worst = 0.0
    for N in cfg.N_schedule:
        model = StabilizedModel.of(cfg.family, N)
        lam = grid[[model.inside(x, cfg.margin) for x in grid]]
        if lam.size > 1:
            z = np.array([z_branch(x, model.a_N, model.b_N).z for x in lam])
            worst = max(worst, float(arg_jumps(z).max()))
    tol = cfg.tolerances["branch_jump"]
    report.add("branch_z", worst < tol, worst, tol)


def _critical_suite(report: InvariantReport, cfg: RunConfig):
    fam, tol = cfg.family, cfg.tolerances
    seeds = cfg.N_seed_schedule or critical.DEFAULT_SEEDS
    N0 = critical.resolve_N0(fam, cfg.window)
    pts = _subgrid(cfg)
    ns = np.unique(np.geomspace(2, cfg.invariant_n_max, 25).astype(int))

    def wronskian():
        const, ident, trend, sign = [], [], True, True
        for lam in pts:
            w = critical.wronskian_identity_check(fam, lam, cfg.window, N0, seeds, ns,
                                                  cfg.h_checkpoint, cfg.seed_factor)
            const.append(max(w.constancy))
            ident.append(w.extrapolated_deviation)
            trend &= w.decreasing
            sign &= w.sign_ok
        report.add("wronskian_constancy", max(const) <= tol["wronskian_constancy"], max(const),
                   tol["wronskian_constancy"])
        report.add("wronskian_identity", max(ident) <= tol["wronskian_identity"], max(ident),
                   tol["wronskian_identity"])
        report.add("wronskian_seed_trend", trend, detail="deviation decreases as N_seed doubles")
        report.add("wronskian_sign", sign, detail="Re(i W) > 0")

    def decomposition():
        worst, shrinks = 0.0, True
        for lam in pts:
            e3 = critical.decomposition_check(fam, lam, (1000, 2000), cfg.window, N0,
                                              seeds[-1], n1=cfg.h_checkpoint).max_error
            e4 = critical.decomposition_check(fam, lam, (10_000, 20_000), cfg.window, N0,
                                              seeds[-1], n1=cfg.h_checkpoint).max_error
            worst = max(worst, e4)
            shrinks &= e4 < e3
        report.add("decomposition", worst <= tol["decomposition"], worst, tol["decomposition"])
        report.add("decomposition_shrinks", shrinks, detail="error at 1e4 < error at 1e3")

    def residual():
        lam = pts[len(pts) // 2]
        tr = critical.u_minus(fam, lam, seeds[0], seeds[0], N0=N0, window=cfg.window)
        a, b = coeff_arrays(fam, seeds[0] + 1)
        r = float(np.max(recurrence_residual(a, b, lam, tr.values(), np.arange(2, seeds[0]))))
        report.add("recurrence_residual", r <= 1e-10, r, 1e-10)

    def chain():
        lam = pts[len(pts) // 2]
        ns_ = seeds[0]
        tb = critical.u_minus(fam, lam, ns_, ns_, N0=N0, window=cfg.window)
        tc = critical.u_minus(fam, lam, ns_, ns_, N0=N0, window=cfg.window,
                              method=critical.Method.CHAIN_VOLTERRA, n_chain=4 * ns_)
        n = np.arange(N0, ns_ + 1)
        rb = tb.values(n) / tb.values(ns_)
        rc = tc.values(n) / tc.values(ns_)
        diff = float(np.max(np.abs(rb - rc) / np.abs(rb)))
        bound = float(tc.volterra.tail_bound[ns_ - N0])
        report.add("chain_volterra_agreement", diff <= bound, diff, bound)

    def n0_invariance():
        lam = pts[len(pts) // 2]
        vals = []
        for n0 in (N0, N0 + 1):
            h = critical.H_of(fam, lam, n0, cfg.h_checkpoint).H
            tr = critical.u_minus(fam, lam, seeds[0], seeds[0], N0=n0, window=cfg.window)
            vals.append(h ** 2 / abs(tr.values(0)) ** 2)
        rel = abs(vals[1] - vals[0]) / vals[0]
        report.add("n0_invariance", rel <= 1e-12, rel, 1e-12)

    def branches():
        grid = np.asarray(cfg.grid())
        worst = 0.0
        for n in (N0, 8 * N0, seeds[-1]):
            worst = max(worst, float(arg_jumps(chain_arrays(fam, float(n), grid).sqrt_chi).max()))
        report.add("branch_sqrt_chi", worst < tol["branch_jump"], worst, tol["branch_jump"])
        _branch_z(report, cfg)

    for name, fn in (("wronskian", wronskian), ("decomposition", decomposition),
                     ("recurrence_residual", residual), ("chain_volterra_agreement", chain),
                     ("n0_invariance", n0_invariance), ("branches", branches)):
        _guard(report, name, fn)


def _noncritical_suite(report: InvariantReport, cfg: RunConfig):
    fam, tol = cfg.family, cfg.tolerances
    seeds = cfg.N_seed_schedule or noncritical.DEFAULT_SEEDS
    grid = cfg.grid()
    pts = _subgrid(cfg)

    def m_stab():
        worst = max(_m_drift(fam, lam) for lam in grid)
        report.add("m_stabilization", worst <= tol["m_stabilization"], worst,
                   tol["m_stabilization"])

    def determinant():
        n = np.arange(2, 2000, dtype=float)
        worst = 0.0
        a, _ = coeff_arrays(fam, 2000)
        for lam in pts:
            mp, mm = noncritical.mu_pm_arrays(fam, n, lam)
            r = a[1:1999] / a[2:2000]
            worst = max(worst, float(np.max(np.abs(mp * mm - r) / r)))
        report.add("mu_determinant", worst <= 1e-14, worst, 1e-14)

    def wronskian():
        ident, trend = [], True
        for lam in pts:
            w = noncritical.wronskian_check(fam, lam, seeds)
            ident.append(w.extrapolated_deviation)
            trend &= w.decreasing
        report.add("wronskian_identity", max(ident) <= tol["wronskian_identity"], max(ident),
                   tol["wronskian_identity"])
        report.add("wronskian_seed_trend", trend, detail="deviation decreases as N_seed doubles")

    def decomposition():
        worst, shrinks = 0.0, True
        for lam in pts:
            e3 = noncritical.decomposition_check(fam, lam, (1000, 2000), seeds[-1]).max_error
            e4 = noncritical.decomposition_check(fam, lam, (10_000, 20_000), seeds[-1]).max_error
            worst = max(worst, e4)
            shrinks &= e4 <= e3
        report.add("decomposition", worst <= tol["decomposition"], worst, tol["decomposition"])
        report.add("decomposition_shrinks", shrinks, detail="error at 1e4 <= error at 1e3")

    def branches():
        g = np.asarray(grid)
        worst = 0.0
        for n in (2, 16, 1024, seeds[-1]):
            mm = np.array([noncritical.mu_pm(fam, n, x)[1] for x in g])
            worst = max(worst, float(arg_jumps(mm).max()))
        report.add("branch_mu_minus", worst < tol["branch_jump"], worst, tol["branch_jump"])
        _branch_z(report, cfg)

    for name, fn in (("m_stabilization", m_stab), ("mu_determinant", determinant),
                     ("wronskian", wronskian), ("decomposition", decomposition),
                     ("branches", branches)):
        _guard(report, name, fn)


def _m_drift(fam, lam) -> float:
    """Relative drift of the partial products at ``L`` and ``10 L`` from M."""
    mv = noncritical.M_of(fam, lam, check=False)
    p1 = noncritical._log_partial(fam, lam, mv.L)
    p2 = noncritical._log_partial(fam, lam, 10 * mv.L)
    return max(abs(math.expm1(p - math.log(mv.M))) for p in (p1, p2))


def _explicit_suite(report: InvariantReport, cfg: RunConfig):
    fam = cfg.family
    pts = _subgrid(cfg)
    N = max(len(fam.a_table), len(fam.b_table))

    def pq_wronskian():
        worst = 0.0
        n = np.arange(1, 200)
        for lam in pts:
            w = orthopoly(fam, lam, 200).wronskian(n)
            worst = max(worst, float(np.max(np.abs(w - 1))))
        report.add("pq_wronskian", worst <= 1e-10, worst, 1e-10)

    def phi_form():
        worst = 0.0
        model = StabilizedModel.of(fam, N)
        for lam in pts:
            if model.inside(lam, cfg.margin):
                a = rho_stabilized(fam, N, lam).value
                worst = max(worst, abs(rho_via_phi(fam, N, lam) - a) / a)
        report.add("phi_form_agreement", worst <= 1e-12, worst, 1e-12)

    for name, fn in (("pq_wronskian", pq_wronskian), ("phi_form_agreement", phi_form),
                     ("branches", lambda: _branch_z(report, cfg))):
        _guard(report, name, fn)


def run_invariant_suite(cfg: RunConfig) -> InvariantReport:
    report = InvariantReport(cfg.family.kind.value)
    if cfg.family.kind is Kind.CRITICAL:
        _critical_suite(report, cfg)
    elif cfg.family.kind is Kind.NONCRITICAL:
        _noncritical_suite(report, cfg)
    else:
        _explicit_suite(report, cfg)
    return report
