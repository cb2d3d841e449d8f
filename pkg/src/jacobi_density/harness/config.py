"""Run configuration: flat ``dotted.key = value`` text.

Values are Python literals (numbers, lists, quoted strings); bare words are
kept as strings.  ``#`` starts a comment.  Example::

    family.kind = critical
    family.alpha = 0.5
    family.p = [1.0, 1.2]        # coef, exponent of p_n = coef * n^-exponent
    window = [-4, -0.5]
    grid_points = 36
    schedule.n = [1000, 4000, 16000, 64000]
"""
from __future__ import annotations

import ast
import enum
import math
from dataclasses import asdict, dataclass, field

from ..core import CoefficientFamily, Kind, Perturbation
from ..errors import CriticalParameter, HypothesisViolation, ParseError


class OutputFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


ROUTES = ("formula", "stabilized", "resolvent")

DEFAULT_TOLERANCES = {
    "oracle": 1e-2,
    "stabilized_final": 1e-2,
    "trend_fraction": 0.8,
    "wronskian_constancy": 1e-10,
    "wronskian_identity": 1e-3,
    "decomposition": 5e-2,
    "m_stabilization": 1e-14,
    "branch_jump": math.pi / 2,
}

_KNOWN = {
    "family.kind", "family.alpha", "family.p", "family.q", "family.beta", "family.d",
    "family.a", "family.b", "window", "grid_points", "routes", "schedule.n",
    "schedule.rule", "schedule.n1", "schedule.count", "schedule.eps", "schedule.seed",
    "schedule.h_checkpoint", "stabilized.margin", "lambda_cap", "min_r", "output.path",
    "output.format", "resolvent.tol", "invariants.points", "invariants.seed_factor", "invariants.n_max",
}


@dataclass(frozen=True)
class RunConfig:
    family: CoefficientFamily
    window: tuple[float, float]
    grid_points: int = 36
    routes: tuple[str, ...] = ROUTES
    N_schedule: tuple[int, ...] = (1000, 4000, 16000, 64000)
    eps_schedule: tuple[float, ...] = (1e-3, 2e-3, 4e-3)
    N_seed_schedule: tuple[int, ...] = ()
    h_checkpoint: int = 1 << 20
    resolvent_tol: float = 1e-3
    margin: float = 0.01
    lambda_cap: float | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    invariant_points: int = 6
    seed_factor: complex = 1.0
    invariant_n_max: int = 100_000
    output_path: str | None = None
    output_format: OutputFormat = OutputFormat.CSV

    def grid(self) -> list[float]:
        lo, hi = self.window
        k = self.grid_points - 1
        return [lo + (hi - lo) * i / k for i in range(self.grid_points)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = _family_dict(self.family)
        d["output_format"] = self.output_format.value
        d["seed_factor"] = repr(self.seed_factor)
        return d


def _family_dict(f: CoefficientFamily) -> dict:
    d = {"kind": f.kind.value}
    if f.kind is Kind.CRITICAL:
        d.update(alpha=f.alpha, p=asdict(f.p), q=asdict(f.q))
    elif f.kind is Kind.NONCRITICAL:
        d.update(beta=f.beta, d=f.d)
    else:
        d.update(a=list(f.a_table), b=list(f.b_table))
    return d


def parse_text(text: str) -> dict:
    """Flat key/value parse; raises :class:`ParseError` with the line number."""
    out: dict = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {i}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or any(not part.isidentifier() for part in key.split(".")):
            raise ParseError(f"line {i}: bad key {key!r}")
        if key in out:
            raise ParseError(f"line {i}: duplicate key {key!r}")
        if not val:
            raise ParseError(f"line {i}: missing value for {key!r}")
        try:
            out[key] = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            out[key] = val
    return out


def _number(raw, key, cast=float):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{key} must be a number, got {v!r}")
    if cast is int and v != int(v):
        raise ParseError(f"{key} must be an integer")
    return cast(v)


def _list(raw, key, cast=float):
    v = raw[key]
    if not isinstance(v, (list, tuple)) or not v:
        raise ParseError(f"{key} must be a non-empty list")
    try:
        return tuple(cast(x) for x in v)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{key}: {exc}") from None


def _increasing(vals, key):
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ParseError(f"{key} must be strictly increasing")


def _perturbation(raw, key) -> Perturbation:
    if key not in raw:
        return Perturbation()
    v = raw[key]
    if v in (0, "zero", None):
        return Perturbation()
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Perturbation.power(float(v[0]), float(v[1]))
    raise ParseError(f"{key} must be 0 or [coef, exponent]")


def _family(raw) -> CoefficientFamily:
    kind = raw.get("family.kind")
    if kind == "critical":
        if "family.alpha" not in raw:
            raise ParseError("family.alpha is required for a critical family")
        alpha = _number(raw, "family.alpha")
        if not 0 < alpha < 1:
            raise HypothesisViolation(f"alpha = {alpha} must lie in (0, 1)")
        p, q = _perturbation(raw, "family.p"), _perturbation(raw, "family.q")
        for name, pert in (("p", p), ("q", q)):
            if not pert.is_zero and not pert.weighted_l1(alpha):
                raise HypothesisViolation(
                    f"{name}_n / n^(alpha/2) is not summable: need exponent {pert.exponent} "
                    f"> 1 - alpha/2 = {1 - alpha / 2}")
        return CoefficientFamily.critical(alpha, p, q)
    if kind == "noncritical":
        for k in ("family.beta", "family.d"):
            if k not in raw:
                raise ParseError(f"{k} is required for a non-critical family")
        beta, d = _number(raw, "family.beta"), _number(raw, "family.d")
        if abs(d) >= 1:
            raise CriticalParameter(
                f"|d| = {abs(d)} >= 1: the non-critical formula fails; "
                "use family.kind = critical for d = -1")
        if not 0 < beta <= 1:
            raise HypothesisViolation(
                f"beta = {beta}: need a_n -> infinity with sum 1/a_n divergent (0 < beta <= 1)")
        return CoefficientFamily.noncritical(beta, d)
    if kind == "explicit":
        a, b = _list(raw, "family.a"), _list(raw, "family.b")
        if min(a) <= 0:
            raise HypothesisViolation("off-diagonal entries a_n must be positive")
        return CoefficientFamily.explicit(a, b)
    if kind == "free":
        return CoefficientFamily.free()
    raise ParseError(f"family.kind must be critical, noncritical, explicit or free, got {kind!r}")


def validate_config(text: str) -> RunConfig:
    """Parse and check a configuration; see the module docstring for the format."""
    raw = parse_text(text)
    unknown = [k for k in raw if k not in _KNOWN and not k.startswith("tolerance.")]
    if unknown:
        raise ParseError(f"unknown keys: {', '.join(sorted(unknown))}")
    family = _family(raw)
    if "window" not in raw:
        raise ParseError("window is required")
    window = _list(raw, "window")
    if len(window) != 2 or not window[0] < window[1]:
        raise ParseError("window must be [lo, hi] with lo < hi")
    min_r = _number(raw, "min_r") if "min_r" in raw else 0.05
    if min_r < 0.05:
        raise HypothesisViolation("min_r below 0.05 is refused: no control of H, u0 near 0")
    if family.kind is Kind.CRITICAL:
        if window[0] <= 0 <= window[1] or window[1] > 0:
            raise HypothesisViolation("critical windows must lie in lambda < 0 and avoid 0")
        if window[1] > -min_r:
            raise HypothesisViolation(
                f"critical window reaches |lambda| < r = {min_r}; H and u0 are only "
                "controlled on compacts away from 0")
    kw: dict = {"family": family, "window": window}
    if "grid_points" in raw:
        kw["grid_points"] = _number(raw, "grid_points", int)
        if kw["grid_points"] < 2:
            raise ParseError("grid_points must be >= 2")
    if "routes" in raw:
        routes = _list(raw, "routes", str)
        bad = [r for r in routes if r not in ROUTES]
        if bad:
            raise ParseError(f"unknown routes {bad}")
        kw["routes"] = routes
    if "schedule.n" in raw and "schedule.rule" in raw:
        raise ParseError("give either schedule.n or schedule.rule, not both")
    if "schedule.n" in raw:
        kw["N_schedule"] = _list(raw, "schedule.n", int)
    elif raw.get("schedule.rule") == "subsequence":
        if family.kind is not Kind.CRITICAL:
            raise ParseError("schedule.rule = subsequence needs a critical family")
        from ..critical import pick_subsequence
        n1 = _number(raw, "schedule.n1", int) if "schedule.n1" in raw else 1000
        count = _number(raw, "schedule.count", int) if "schedule.count" in raw else 4
        kw["N_schedule"] = tuple(pick_subsequence(family, count, n1))
    elif "schedule.rule" in raw:
        raise ParseError("schedule.rule must be 'subsequence'")
    for key, name, cast in (("schedule.eps", "eps_schedule", float),
                            ("schedule.seed", "N_seed_schedule", int)):
        if key in raw:
            kw[name] = _list(raw, key, cast)
            _increasing(kw[name], key)
    if "N_schedule" in kw:
        _increasing(kw["N_schedule"], "schedule.n")
        if min(kw["N_schedule"]) < 1:
            raise ParseError("schedule.n entries must be >= 1")
    if "eps_schedule" in kw and min(kw["eps_schedule"]) <= 0:
        raise ParseError("schedule.eps entries must be positive")
    if "schedule.h_checkpoint" in raw:
        kw["h_checkpoint"] = _number(raw, "schedule.h_checkpoint", int)
    if "resolvent.tol" in raw:
        kw["resolvent_tol"] = _number(raw, "resolvent.tol")
        if not 0 < kw["resolvent_tol"] < 1:
            raise ParseError("resolvent.tol must lie in (0, 1)")
    if "stabilized.margin" in raw:
        kw["margin"] = _number(raw, "stabilized.margin")
        if not 0 <= kw["margin"] < 0.5:
            raise ParseError("stabilized.margin must lie in [0, 0.5)")
    if "lambda_cap" in raw:
        kw["lambda_cap"] = _number(raw, "lambda_cap")
    elif family.kind is Kind.NONCRITICAL:
        kw["lambda_cap"] = 16.0
    if kw.get("lambda_cap") is not None and max(abs(w) for w in window) > kw["lambda_cap"]:
        raise ParseError(f"window exceeds lambda_cap = {kw['lambda_cap']}")
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in raw.items():
        if k.startswith("tolerance."):
            name = k.split(".", 1)[1]
            if name not in tol:
                raise ParseError(f"unknown tolerance {name!r}")
            tol[name] = _number(raw, k)
    kw["tolerances"] = tol
    if "invariants.points" in raw:
        kw["invariant_points"] = _number(raw, "invariants.points", int)
    if "invariants.seed_factor" in raw:
        v = raw["invariants.seed_factor"]
        if not isinstance(v, (int, float, complex)) or isinstance(v, bool):
            raise ParseError("invariants.seed_factor must be a number")
        kw["seed_factor"] = complex(v)
    if "invariants.n_max" in raw:
        kw["invariant_n_max"] = _number(raw, "invariants.n_max", int)
    if "output.path" in raw:
        kw["output_path"] = str(raw["output.path"])
    if "output.format" in raw:
        try:
            kw["output_format"] = OutputFormat(raw["output.format"])
        except ValueError:
            raise ParseError("output.format must be csv or json") from None
    return RunConfig(**kw)
