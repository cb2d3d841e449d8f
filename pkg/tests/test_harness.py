import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from jacobi_density.core import Kind
from jacobi_density.errors import CriticalParameter, HypothesisViolation, ParseError
from jacobi_density.harness import cli
from jacobi_density.harness.config import DEFAULT_TOLERANCES, parse_text, validate_config
from jacobi_density.harness.invariants import run_invariant_suite
from jacobi_density.harness.sweep import compute_row, run_density_sweep, to_csv, to_json
from jacobi_density.stabilized import rho_stabilized

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CRIT = """family.kind = critical
family.alpha = 0.5
window = [-3, -1]
grid_points = {points}
schedule.n = [1000, 4000]
schedule.seed = [16384, 65536, 262144]
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ---------------------------------------------------------------------------
# configuration

def test_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.cfg")):
        validate_config(path.read_text())


def test_perturbation_summable_accepted():
    cfg = validate_config("family.kind = critical\nfamily.alpha = 0.5\nfamily.p = [1, 1]\n"
                          "window = [-4, -0.5]\n")
    assert cfg.family.kind is Kind.CRITICAL
    assert cfg.family.p.exponent == 1.0


def test_perturbation_slow_rejected():
    with pytest.raises(HypothesisViolation, match="exponent"):
        validate_config("family.kind = critical\nfamily.alpha = 0.5\nfamily.p = [1, 0.5]\n"
                        "window = [-4, -0.5]\n")


def test_noncritical_d_one_rejected():
    with pytest.raises(CriticalParameter):
        validate_config("family.kind = noncritical\nfamily.beta = 0.5\nfamily.d = 1\n"
                        "window = [-1, 1]\n")


@pytest.mark.parametrize("text", [
    "family.kind = free\nwindow = [-1, 1]\nbogus = 3\n",
    "family.kind = free\nwindow = [-1, 1]\nwindow = [-1, 1]\n",
    "family.kind = free\nwindow = [1, -1]\n",
    "family.kind = free\n",
    "family.kind = free\nwindow = [-1, 1]\ngrid_points = 1\n",
    "family.kind = free\nwindow = [-1, 1]\nschedule.n = [8, 4]\n",
    "family.kind = free\nwindow = [-1, 1]\nroutes = [\"nope\"]\n",
    "family.kind = free\nwindow = [-1, 1]\ntolerance.bogus = 1\n",
    "family.kind = free\nwindow = [-1, 1]\nthis line has no equals\n",
    "family.kind = martian\nwindow = [-1, 1]\n",
])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        validate_config(text)


@pytest.mark.parametrize("window", ["[-4, 0]", "[-4, -0.01]", "[-1, 1]"])
def test_critical_window_near_zero(window):
    with pytest.raises(HypothesisViolation):
        validate_config(f"family.kind = critical\nfamily.alpha = 0.5\nwindow = {window}\n")


def test_min_r_floor():
    with pytest.raises(HypothesisViolation):
        validate_config("family.kind = critical\nfamily.alpha = 0.5\nwindow = [-4, -0.5]\n"
                        "min_r = 0.01\n")


def test_parse_comments_and_values():
    raw = parse_text("# comment\nfamily.kind = free  \n\nwindow = [-1, 1]\n")
    assert raw == {"family.kind": "free", "window": [-1, 1]}


def test_defaults():
    cfg = validate_config("family.kind = critical\nfamily.alpha = 0.5\nwindow = [-4, -0.5]\n")
    assert cfg.grid_points == 36
    assert cfg.tolerances == DEFAULT_TOLERANCES
    np.testing.assert_allclose(cfg.grid(), np.linspace(-4, -0.5, 36))


def test_subsequence_rule():
    cfg = validate_config("family.kind = critical\nfamily.alpha = 0.5\nwindow = [-4, -0.5]\n"
                          "schedule.rule = subsequence\nschedule.n1 = 100\nschedule.count = 3\n")
    assert cfg.N_schedule == (100, 200, 400)


# ---------------------------------------------------------------------------
# sweeps and output

@pytest.fixture(scope="module")
def free_cfg():
    return validate_config((CONFIGS / "free.cfg").read_text())


def test_row_recomputable(free_cfg):
    rep = run_density_sweep(free_cfg)
    r = rep.rows[17]
    again = compute_row(free_cfg, r.lam, rep.routes)
    assert again.rho_formula == r.rho_formula
    assert again.rho_stabilized == r.rho_stabilized
    assert r.rho_stabilized[8] == rho_stabilized(free_cfg.family, 8, r.lam).value


def test_csv_layout(free_cfg):
    text = to_csv(run_density_sweep(free_cfg))
    assert "\r" not in text
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 101
    assert list(rows[0]) == ["lambda", "rho_formula", "rho_formula_unc", "rho_stab_1",
                             "rho_stab_2", "rho_stab_8", "rho_resolvent",
                             "rho_resolvent_unc", "delta_oracle_rel", "trend_flag", "status"]
    assert all(r["status"] == "ok" for r in rows)


def test_outside_band_cells():
    cfg = validate_config("family.kind = explicit\nfamily.a = [1.0]\nfamily.b = [1.0, 0.0]\n"
                          "window = [2.5, 3]\ngrid_points = 3\nschedule.n = [1, 2]\n"
                          "routes = [\"stabilized\"]\n")
    rep = run_density_sweep(cfg)
    assert rep.rows[0].rho_stabilized[2] == "OutsideBand"
    assert rep.rows[0].rho_stabilized[1] != "OutsideBand"   # b_1 = 1 shifts the band
    assert not rep.numerical_failure
    assert "OutsideBand" in to_csv(rep)


def test_json_nan_free(free_cfg):
    doc = json.loads(to_json(run_density_sweep(free_cfg), timestamp="t"))
    assert doc["timestamp"] == "t"
    assert doc["summary"]["passed"]
    assert len(doc["rows"]) == 101


# ---------------------------------------------------------------------------
# CLI

def test_cli_deterministic(tmp_path):
    cfg = str(CONFIGS / "rank_one.cfg")
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}.json"
        rc = cli.main(["compare", "--config", cfg, "--out", str(out), "--format", "json",
                       "--no-timestamp"])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert b"timestamp" not in outs[0]


def test_cli_timestamp_present(tmp_path):
    out = tmp_path / "o.json"
    cli.main(["compare", "--config", str(CONFIGS / "free.cfg"), "--out", str(out),
              "--format", "json"])
    assert "timestamp" in json.loads(out.read_text())


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["validate", "--config", write(tmp_path, "family.kind = free\n")]) == 2
    assert cli.main(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["density-critical", "--config", str(CONFIGS / "free.cfg")]) == 2
    tight = (CONFIGS / "free.cfg").read_text().replace("tolerance.oracle = 1e-4",
                                                       "tolerance.oracle = 1e-12")
    out = str(tmp_path / "t.csv")
    assert cli.main(["compare", "--config", write(tmp_path, tight, "tight.cfg"),
                     "--out", out]) == 1
    assert cli.main(["compare", "--config", str(CONFIGS / "free.cfg"), "--out", out]) == 0
    capsys.readouterr()


def test_cli_numerical_failure(tmp_path):
    # seeds below 8 N0 make every formula cell fail
    text = CRIT.format(points=2).replace("[16384, 65536, 262144]", "[1024, 2048, 4096]")
    rc = cli.main(["density-critical", "--config", write(tmp_path, text),
                   "--out", str(tmp_path / "o.csv")])
    assert rc == 3


def test_cli_jobs_identical(tmp_path):
    path = write(tmp_path, CRIT.format(points=4))
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}.csv"
        cli.main(["density-critical", "--config", path, "--out", str(out), "--jobs", jobs])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# invariant suite

@pytest.fixture(scope="module")
def small_critical():
    return validate_config(CRIT.format(points=3) + "invariants.points = 2\n")


def test_invariants_pass(small_critical):
    rep = run_invariant_suite(small_critical)
    bad = [e for e in rep.entries if not e.passed]
    assert not bad, bad
    names = {e.name for e in rep.entries}
    assert {"wronskian_constancy", "wronskian_identity", "decomposition", "branch_z",
            "branch_sqrt_chi", "chain_volterra_agreement", "n0_invariance"} <= names


def test_invariants_corrupted_seed(tmp_path):
    cfg = validate_config(CRIT.format(points=3) + "invariants.points = 2\n"
                          "invariants.seed_factor = 1.01\n")
    rep = run_invariant_suite(cfg)
    assert rep.get("wronskian_constancy").passed
    assert not rep.get("wronskian_identity").passed
    rc = cli.main(["invariants", "--config",
                   write(tmp_path, CRIT.format(points=3) + "invariants.points = 2\n"
                         "invariants.seed_factor = 1.01\n"),
                   "--out", str(tmp_path / "inv.json")])
    assert rc == 1
    doc = json.loads((tmp_path / "inv.json").read_text())
    assert doc["passed"] is False


def test_invariants_noncritical():
    cfg = validate_config((CONFIGS / "hermite.cfg").read_text() + "invariants.points = 3\n")
    rep = run_invariant_suite(cfg)
    assert rep.passed, [e for e in rep.entries if not e.passed]


def test_invariants_explicit(free_cfg):
    rep = run_invariant_suite(free_cfg)
    assert rep.passed, [e for e in rep.entries if not e.passed]
