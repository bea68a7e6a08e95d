"""Verification suites, flat key=value configs and CSV reporting.

Each suite expands a :class:`SuiteConfig` into tasks.  A task owns one or
more check ids, draws its randomness from a substream derived from its first
check id, and returns one :class:`CheckResult` per id.  Failures inside a
task become failed checks with a reason, never an abort.
"""
from __future__ import annotations

import csv
import enum
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, ParameterError, ScopeError, StableCondError
from .harmonic import HKind, green_boundary_ratio, lemma31_residual, v1, v_total
from .hitting_laws import (
    HittingWindow,
    Side,
    circ_closest_reach_mass,
    closest_reach_asymptote,
    closest_reach_mass,
    entrance_window_asymptote,
    entrance_window_mass,
    first_entrance_mass,
)
from .harmonic import avoid_zero_e
from .pathsim import (
    CompactSet,
    Conditioning,
    ConditioningKind,
    EstimateWithCI,
    SimConfig,
    conditional_law_estimator,
    doob_chain_batch,
    exit_weights,
    n_workers,
    weighted_time_t_estimator,
)
from .stable_model import RngStream, StableParams, validate_params

__all__ = [
    "Suite",
    "Rule",
    "SuiteConfig",
    "CheckResult",
    "parse_config",
    "load_config",
    "default_config",
    "build_tasks",
    "list_checks",
    "run_suite",
    "run_identity_suite",
    "run_asymptotics_suite",
    "run_harmonicity_mc_suite",
    "run_absorption_suite",
    "run_conditioning_suite",
    "write_csv",
    "read_csv",
    "CSV_FIELDS",
]


class Suite(enum.Enum):
    IDENTITY = "identity"
    ASYMPTOTICS = "asymptotics"
    HARMONICITY_MC = "harmonicity"
    ABSORPTION = "absorption"
    CONDITIONING = "conditioning"


class Rule(enum.Enum):
    """How ``observed`` is compared with ``expected``."""

    ABS = "abs"          # |obs - exp| <= tol
    REL = "rel"          # |obs - exp| <= tol * |exp|
    MIN = "min"          # obs >= exp - tol
    MAX = "max"          # obs <= exp + tol
    OUTSIDE = "outside"  # |obs - exp| > tol (negative controls)
    REPORT = "report"    # informational, always passes


# ---------------------------------------------------------------------------
# results


CSV_FIELDS = ["check_id", "alpha", "rho", "x", "eps_or_delta", "expected", "observed",
              "std_error", "tolerance", "passed", "runtime_ms", "reason", "rule"]


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    inputs: dict
    expected: float
    observed: float
    tolerance: float
    passed: bool
    runtime_ms: int
    std_error: float = float("nan")
    rule: Rule = Rule.ABS
    reason: str = ""

    @property
    def skipped(self) -> bool:
        return self.reason.startswith("skipped")

    @staticmethod
    def judge(rule: Rule, expected: float, observed: float, tol: float) -> bool:
        if rule is Rule.REPORT:
            return True
        if not (math.isfinite(observed) and math.isfinite(expected)):
            return False
        d = observed - expected
        if rule is Rule.ABS:
            return abs(d) <= tol
        if rule is Rule.REL:
            return abs(d) <= tol * abs(expected)
        if rule is Rule.MIN:
            return d >= -tol
        if rule is Rule.MAX:
            return d <= tol
        return abs(d) > tol

    def consistent(self) -> bool:
        """``passed`` agrees with the declared rule (skipped rows pass by definition)."""
        if self.skipped:
            return self.passed
        if self.reason.startswith("error"):
            return not self.passed
        return self.passed == self.judge(self.rule, self.expected, self.observed, self.tolerance)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(results: list[CheckResult], path) -> None:
    """Write results sorted by check id."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_FIELDS)
        for r in sorted(results, key=lambda r: r.check_id):
            w.writerow([r.check_id] + [_fmt(float(r.inputs.get(k, float("nan"))))
                                       for k in ("alpha", "rho", "x", "eps_or_delta")]
                       + [_fmt(float(r.expected)), _fmt(float(r.observed)), _fmt(float(r.std_error)),
                          _fmt(float(r.tolerance)), _fmt(bool(r.passed)),
                          str(int(r.runtime_ms)), r.reason, r.rule.value])


def read_csv(path) -> list[CheckResult]:
    out = []
    with Path(path).open(newline="") as f:
        for row in csv.DictReader(f):
            inputs = {k: float(row[k]) for k in ("alpha", "rho", "x", "eps_or_delta")}
            out.append(CheckResult(
                check_id=row["check_id"], inputs=inputs, expected=float(row["expected"]),
                observed=float(row["observed"]), tolerance=float(row["tolerance"]),
                passed=row["passed"] == "1", runtime_ms=int(row["runtime_ms"]),
                std_error=float(row["std_error"]), rule=Rule(row["rule"]), reason=row["reason"]))
    return out


# ---------------------------------------------------------------------------
# configuration


@dataclass
class SuiteConfig:
    """Declarative description of one suite run.

    ``lists`` holds repeated numeric keys (``x``, ``y``, ``delta``, ``eps``...),
    ``values`` single numeric settings and ``tolerances`` the per-check gates.
    """

    suite: Suite
    params: list[StableParams]
    points: list[float]
    lists: dict[str, list[float]] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "results"
    checks: list[str] = field(default_factory=list)  # id prefixes; empty means all

    def __post_init__(self):
        if not self.params:
            raise ConfigError("at least one (alpha, rho) pair is required")
        if not self.points:
            raise ConfigError("at least one start point is required")

    def get(self, key: str) -> float:
        return float(self.values[key])

    def sim(self, **kw) -> SimConfig:
        d = dict(dt=self.get("dt"), horizon=self.get("horizon"),
                 n_paths=int(self.get("n_paths")), rng=RngStream(self.seed),
                 boundary_cutoff=self.values.get("cutoff", 1e-4))
        d.update(kw)
        return SimConfig(**d)


_GRID = [(0.5, 0.5), (0.5, 0.3), (1.2, 0.45), (1.5, 0.5), (1.8, 0.52)]

_DEFAULTS: dict[Suite, dict] = {
    Suite.IDENTITY: dict(
        params=_GRID, points=[1.1, -1.1, 2.0, -2.0, 5.0, -5.0, 20.0, -20.0],
        lists=dict(y=[1.05, 1.5, 3.0], delta=[1e-4, 1e-5, 1e-6]),
        values={}, tolerances=dict(green_v1=1e-8, boundary_limit=1e-3)),
    Suite.ASYMPTOTICS: dict(
        params=[(0.5, 0.5), (0.5, 0.3), (1.0, 0.5), (1.5, 0.45), (1.5, 0.5)],
        points=[2.0, -2.0, 3.0, -3.0],
        lists=dict(eps_closest=[1e-3, 1e-4, 1e-5], eps_entrance=[1e-2, 1e-3, 1e-4],
                   eps_circ=[1e-3, 1e-4, 1e-5], eps_slope=[1e-2, 1e-3, 1e-4]),
        values={}, tolerances=dict(asymptote=1e-3, slope=0.1, norm=1e-8, circ_norm=1e-6)),
    Suite.HARMONICITY_MC: dict(
        params=[(0.5, 0.5), (1.5, 0.5)], points=[2.0],
        lists=dict(t=[0.1, 0.5]),
        values=dict(dt=1e-4, horizon=200.0, n_paths=100_000, k_inner=1.2, k_outer=3.0,
                    dt_time=1e-3, n_paths_time=20_000, t_invariant=0.25),
        tolerances=dict(se=3.0, drift=0.02)),
    Suite.ABSORPTION: dict(
        params=[(1.5, 0.5), (0.5, 0.5)], points=[2.0],
        lists=dict(dt_levels=[1e-2, 1e-3], cutoff_levels=[1e-3, 1e-4]),
        values=dict(dt=1e-3, horizon=50.0, n_paths=10_000, cutoff=1e-4, top=1.1),
        tolerances=dict(killed=0.99, inside=0.95, se=3.0)),
    Suite.CONDITIONING: dict(
        params=[(0.5, 0.5), (1.5, 0.5)], points=[3.0],
        lists=dict(eps=[0.2, 0.1, 0.05]),
        values=dict(dt=1e-3, horizon=5.0, n_paths=100_000, t=0.5, delta=0.3, level=2.0),
        tolerances=dict(se=3.0, budget=0.1)),
}


def default_config(suite: Suite | str, **overrides) -> SuiteConfig:
    """Configuration reproducing the acceptance settings of ``suite``."""
    suite = Suite(suite) if not isinstance(suite, Suite) else suite
    d = _DEFAULTS[suite]
    cfg = SuiteConfig(
        suite=suite,
        params=[validate_params(a, r) for a, r in d["params"]],
        points=list(d["points"]),
        lists={k: list(v) for k, v in d["lists"].items()},
        values=dict(d["values"]),
        tolerances=dict(d["tolerances"]),
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


def parse_config(text: str, suite: Suite | str | None = None) -> SuiteConfig:
    """Parse flat ``key = value`` text; repeated keys build lists.

    Recognised keys: ``suite``, ``param = alpha, rho``, ``x``, ``seed``,
    ``out_dir``, ``check`` (id prefix filter), ``tol.<name>``, any list key of
    the suite defaults (repeated) and any scalar key of the defaults.
    Unlisted keys fall back to the suite defaults.
    """
    entries: list[tuple[str, str]] = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k or not v:
            raise ConfigError(f"line {n}: empty key or value")
        entries.append((k, v))
    names = [v for k, v in entries if k == "suite"]
    if suite is None:
        if not names:
            raise ConfigError("no suite given")
        suite = names[-1]
    try:
        suite = Suite(suite) if not isinstance(suite, Suite) else suite
    except ValueError:
        raise ConfigError(f"unknown suite {suite!r}") from None
    cfg = default_config(suite)
    lists: dict[str, list[float]] = {}
    params, points = [], []
    try:
        for k, v in entries:
            if k == "suite":
                continue
            if k == "param":
                a, r = (float(s) for s in v.split(","))
                params.append(validate_params(a, r))
            elif k == "x":
                points.append(float(v))
            elif k == "seed":
                cfg.seed = int(v)
            elif k == "out_dir":
                cfg.out_dir = v
            elif k == "check":
                cfg.checks.append(v)
            elif k.startswith("tol."):
                cfg.tolerances[k[4:]] = float(v)
            elif k in cfg.lists:
                lists.setdefault(k, []).append(float(v))
            elif k in cfg.values:
                cfg.values[k] = float(v)
            else:
                raise ConfigError(f"unknown key {k!r} for suite {suite.value}")
    except ParameterError as exc:
        raise ConfigError(f"invalid parameters: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if params:
        cfg.params = params
    if points:
        cfg.points = points
    cfg.lists.update(lists)
    for k, v in cfg.lists.items():
        if not v:
            raise ConfigError(f"list {k!r} is empty")
    return cfg


def load_config(path, suite=None) -> SuiteConfig:
    return parse_config(Path(path).read_text(), suite)


# ---------------------------------------------------------------------------
# tasks


Row = tuple  # (expected, observed, std_error, tolerance, rule, reason)


@dataclass
class _Task:
    ids: list[str]
    inputs: list[dict]
    fn: Callable[[RngStream], list[Row]]


def _pid(p: StableParams) -> str:
    return f"a{p.alpha:g}_r{p.rho:g}"


def _inp(p: StableParams, x=float("nan"), e=float("nan")) -> dict:
    return dict(alpha=p.alpha, rho=p.rho, x=float(x), eps_or_delta=float(e))


def _stream_for(check_id: str, seed: int) -> RngStream:
    return RngStream(seed, zlib.crc32(check_id.encode()))


# identity ------------------------------------------------------------------


def _identity_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = []
    tl, tc = cfg.tolerances["green_v1"], cfg.tolerances["boundary_limit"]
    ys = cfg.lists["y"]
    deltas = sorted(cfg.lists["delta"], reverse=True)
    for p in cfg.params:
        for x in cfg.points:
            for y in ys:
                if not (x > y > 1.0 or x < -1.0):
                    continue
                cid = f"identity.green_v1.{_pid(p)}.x{x:g}.y{y:g}"

                def fn(rng, p=p, x=x, y=y):
                    res = lemma31_residual(p, x, y)
                    return [(0.0, res, float("nan"), tl * max(1.0, float(v1(p, x))), Rule.ABS, "")]
                tasks.append(_Task([cid], [_inp(p, x, y)], fn))
            ids = [f"identity.boundary_limit.{_pid(p)}.x{x:g}.d{d:g}" for d in deltas]
            ids.append(f"identity.boundary_limit_decay.{_pid(p)}.x{x:g}")

            def fn(rng, p=p, x=x):
                target = float(v1(p, x))
                rows, errs = [], []
                for d in deltas:
                    r = green_boundary_ratio(p, x, d)
                    errs.append(abs(r / target - 1.0))
                    rows.append((target, r, float("nan"), tc, Rule.REL, ""))
                worst = max(np.diff(errs)) if len(errs) > 1 else -1.0
                rows.append((0.0, float(worst), float("nan"), 0.0, Rule.MAX,
                             "max increase of relative error along the delta ladder"))
                return rows
            tasks.append(_Task(ids, [_inp(p, x, d) for d in deltas] + [_inp(p, x)], fn))
    if not tasks:
        raise ConfigError("identity grid is empty")
    return tasks


# asymptotics ---------------------------------------------------------------


def _ratio_rows(ladder, get, tol):
    """Relative-error rows along an eps ladder; only the smallest eps is gated."""
    rows, errs = [], []
    for j, e in enumerate(ladder):
        obs, exp = get(e)
        errs.append(abs(obs / exp - 1.0))
        gated = j == len(ladder) - 1
        rows.append((exp, obs, float("nan"), tol if gated else math.inf, Rule.REL,
                     "" if gated else "ladder point"))
    return rows, errs


def _asymptotics_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = []
    ta = cfg.tolerances["asymptote"]
    L = cfg.lists
    sides = (Side.POSITIVE, Side.NEGATIVE, Side.BOTH)
    for p in cfg.params:
        pid = _pid(p)
        for x in cfg.points:
            if p.alpha < 1.0:
                lad = sorted(L["eps_closest"], reverse=True)
                for side in sides:
                    ids = [f"asymptotics.closest.{pid}.x{x:g}.{side.value}.e{e:g}" for e in lad]

                    def fn(rng, p=p, x=x, side=side, lad=lad):
                        target = closest_reach_asymptote(p, x, side)
                        rows, _ = _ratio_rows(
                            lad, lambda e: (closest_reach_mass(p, x, HittingWindow(1, 1 + e, side)) / e,
                                            target), ta)
                        return rows
                    tasks.append(_Task(ids, [_inp(p, x, e) for e in lad], fn))
                cid = f"asymptotics.closest_norm.{pid}.x{x:g}"
                tasks.append(_Task([cid], [_inp(p, x)], lambda rng, p=p, x=x: [(
                    1.0, closest_reach_mass(p, x, HittingWindow(0.0, abs(x), Side.BOTH)),
                    float("nan"), cfg.tolerances["norm"], Rule.ABS, "")]))
            else:
                lad = sorted(L["eps_entrance"], reverse=True)
                for side in (Side.POSITIVE, Side.NEGATIVE):
                    ids = [f"asymptotics.entrance.{pid}.x{x:g}.{side.value}.e{e:g}" for e in lad]

                    def fn(rng, p=p, x=x, side=side, lad=lad):
                        C, k = entrance_window_asymptote(p, x, side)
                        rows, _ = _ratio_rows(
                            lad, lambda e: (entrance_window_mass(p, x, e, side) / e ** k, C), ta)
                        return rows
                    tasks.append(_Task(ids, [_inp(p, x, e) for e in lad], fn))
                cid = f"asymptotics.entrance_norm.{pid}.x{x:g}"
                tasks.append(_Task([cid], [_inp(p, x)], lambda rng, p=p, x=x: [(
                    1.0, first_entrance_mass(p, x), float("nan"), cfg.tolerances["norm"],
                    Rule.ABS, "")]))
                if p.rho != 0.5:
                    lad_s = sorted(L["eps_slope"], reverse=True)
                    cid = f"asymptotics.side_selection.{pid}.x{x:g}"

                    def fn(rng, p=p, x=x, lad_s=lad_s):
                        minor, major = (Side.NEGATIVE, Side.POSITIVE) if p.rho < 0.5 else \
                            (Side.POSITIVE, Side.NEGATIVE)
                        e = np.array(lad_s)
                        r = [entrance_window_mass(p, x, v, minor) / entrance_window_mass(p, x, v, major)
                             for v in e]
                        slope = float(np.polyfit(np.log(e), np.log(r), 1)[0])
                        return [(p.alpha * abs(p.rho_hat - p.rho), slope, float("nan"),
                                 cfg.tolerances["slope"], Rule.REL, "log-log slope of minor/major")]
                    tasks.append(_Task([cid], [_inp(p, x)], fn))
            # avoid-zero closest reach; alpha <= 1 is recorded as skipped
            lad = sorted(L["eps_circ"], reverse=True)
            ids = [f"asymptotics.circ.{pid}.x{x:g}.e{e:g}" for e in lad]
            ids.append(f"asymptotics.circ_norm.{pid}.x{x:g}")
            ids.append(f"asymptotics.circ_mass_1_to_x.{pid}.x{x:g}")

            def fn(rng, p=p, x=x, lad=lad):
                if p.alpha <= 1.0:
                    raise ScopeError("avoid-zero measure requires alpha > 1")
                target = (p.alpha - 1.0) / 2.0 * float(v1(p, x))
                ex = float(avoid_zero_e(p, x))
                side = Side.POSITIVE
                rows, _ = _ratio_rows(lad, lambda e: (
                    ex / e * circ_closest_reach_mass(p, x, HittingWindow(1, 1 + e, side), HKind.V1),
                    target), ta)
                full = circ_closest_reach_mass(p, x, HittingWindow(0.0, 1e300, Side.BOTH), HKind.V)
                rows.append((1.0, full, float("nan"), cfg.tolerances["circ_norm"], Rule.ABS,
                             "mass over (0, inf)"))
                part = circ_closest_reach_mass(p, x, HittingWindow(1.0, abs(x), Side.BOTH), HKind.V)
                rows.append((1.0, part, float("nan"), math.inf, Rule.REPORT,
                             "mass over (1, |x|); deviation from 1 reported only"))
                return rows
            tasks.append(_Task(ids, [_inp(p, x, e) for e in lad] + [_inp(p, x)] * 2, fn))
    return tasks


# harmonicity ---------------------------------------------------------------


def _harmonicity_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = []
    se_k, drift = cfg.tolerances["se"], cfg.tolerances["drift"]
    K = CompactSet.symmetric(cfg.get("k_inner"), cfg.get("k_outer"))
    kinds = [HKind.V1, HKind.VMINUS1, HKind.V]
    for p in cfg.params:
        pid = _pid(p)
        for x in cfg.points:
            ids = []
            for k in kinds:
                ids += [f"harmonicity.exit.{pid}.x{x:g}.{k.name}",
                        f"harmonicity.exit_drift.{pid}.x{x:g}.{k.name}"]
            ids.append(f"harmonicity.exit_negative_control.{pid}.x{x:g}")

            def fn(rng, p=p, x=x):
                c = cfg.sim(rng=rng)
                ws, (coarse, _) = exit_weights(p, x, K, kinds, c, halving=True,
                                               return_positions=True)
                rows = []
                for k in kinds:
                    wc, wf = ws[k]
                    ec = EstimateWithCI.from_samples(wc)
                    ef = EstimateWithCI.from_samples(wf)
                    rows.append((1.0, ec.value, ec.std_error, se_k * ec.std_error, Rule.ABS, ""))
                    rows.append((0.0, abs(ef.value / ec.value - 1.0), float("nan"), drift, Rule.MAX,
                                 "relative change when dt is halved"))
                one = np.where(np.isfinite(coarse) & (np.abs(coarse) > 1.0), 1.0, 0.0)
                e1 = EstimateWithCI.from_samples(one)
                rows.append((1.0, e1.value, e1.std_error, se_k * e1.std_error, Rule.OUTSIDE,
                             "negative control: h = 1 is killed by jumps into [-1, 1]"))
                return rows
            tasks.append(_Task(ids, [_inp(p, x, cfg.get("dt"))] * len(ids), fn))
            for t in cfg.lists["t"]:
                ids = [f"harmonicity.excessive.{pid}.x{x:g}.t{t:g}.{k.name}" for k in kinds]

                def fn(rng, p=p, x=x, t=t):
                    c = cfg.sim(rng=rng, dt=cfg.get("dt_time"), n_paths=int(cfg.get("n_paths_time")))
                    out = []
                    for k in kinds:
                        e = weighted_time_t_estimator(p, x, t, k, None, c)
                        out.append((1.0, e.value, e.std_error, se_k * e.std_error, Rule.MAX,
                                    "E[h(xi_t); t < T] / h(x) <= 1"))
                    return out
                tasks.append(_Task(ids, [_inp(p, x, t)] * 3, fn))
            cid = f"harmonicity.invariant_h.{pid}.x{x:g}"

            def fn(rng, p=p, x=x):
                if p.alpha <= 1.0:
                    raise ScopeError("h requires alpha > 1")
                c = cfg.sim(rng=rng, dt=cfg.get("dt_time"), n_paths=int(cfg.get("n_paths_time")))
                e = weighted_time_t_estimator(p, x, cfg.get("t_invariant"), HKind.H, None, c)
                return [(1.0, e.value, e.std_error, se_k * e.std_error, Rule.ABS, "")]
            tasks.append(_Task([cid], [_inp(p, x, cfg.get("t_invariant"))], fn))
    return tasks


# absorption ----------------------------------------------------------------


def _absorption_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = []
    dts, cuts = cfg.lists["dt_levels"], cfg.lists["cutoff_levels"]
    if len(dts) != len(cuts):
        raise ConfigError("dt_levels and cutoff_levels must have equal length")
    top = cfg.get("top")
    tol = cfg.tolerances
    for p in cfg.params:
        pid = _pid(p)
        for x in cfg.points:
            ids = [f"absorption.v1.{pid}.x{x:g}.killed",
                   f"absorption.v1.{pid}.x{x:g}.inside",
                   f"absorption.v1.{pid}.x{x:g}.refinement",
                   f"absorption.v1.{pid}.x{x:g}.no_late_negative"]
            ids += [f"absorption.v1.{pid}.x{x:g}.inside_level{j}" for j in range(len(dts))]

            def fn(rng, p=p, x=x):
                fr = []
                fin = None
                for dt_, cut in zip(dts, cuts):
                    s = doob_chain_batch(p, x, HKind.V1, cfg.sim(rng=rng, dt=dt_, boundary_cutoff=cut))
                    fr.append(s.fraction_in(1.0, top))
                    fin = s
                rows = [(tol["killed"], fin.killed_fraction, float("nan"), 0.0, Rule.MIN,
                         "killed fraction within the horizon"),
                        (tol["inside"], fr[-1], float("nan"), 0.0, Rule.MIN,
                         f"terminal positions in (1, {top:g}) at the finest level"),
                        (0.0, float(min(np.diff(fr))) if len(fr) > 1 else 0.0, float("nan"), 0.0,
                         Rule.MIN, "change of the inside fraction under refinement"),
                        (0.0, float(fin.late_negative.mean()), float("nan"), 0.0, Rule.MAX,
                         "chains near -1 during their final 10% of steps")]
                rows += [(tol["inside"], f, float("nan"), math.inf, Rule.REPORT, "level")
                         for f in fr]
                return rows
            tasks.append(_Task(ids, [_inp(p, x, cuts[-1])] * len(ids), fn))
            if p.is_symmetric:
                ids = [f"absorption.v.{pid}.x{x:g}.split_symmetric_start",
                       f"absorption.v.{pid}.x{x:g}.split_vs_v1_over_v"]

                def fn(rng, p=p, x=x):
                    c = cfg.sim(rng=rng)
                    half = max(1, c.n_paths // 2)
                    a = doob_chain_batch(p, x, HKind.V, c.with_(n_paths=half, rng=rng.child(1)))
                    b = doob_chain_batch(p, -x, HKind.V, c.with_(n_paths=half, rng=rng.child(2)))
                    term = np.concatenate([a.terminal[a.killed], b.terminal[b.killed]])
                    pos = float(np.mean(term > 0))
                    se = math.sqrt(0.25 / len(term))
                    ta = a.terminal[a.killed]
                    pa = float(np.mean(ta > 0))
                    sea = math.sqrt(max(pa * (1 - pa), 1e-12) / len(ta))
                    pred = float(v1(p, x) / v_total(p, x))
                    return [(0.5, pos, se, tol["se"] * se, Rule.ABS, "start at +-x with equal weight"),
                            (pred, pa, sea, math.inf, Rule.REPORT,
                             "start at x; target v1(x)/v(x)")]
                tasks.append(_Task(ids, [_inp(p, x, cuts[-1])] * 2, fn))
    return tasks


# conditioning --------------------------------------------------------------


def _conditioning_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = []
    eps = sorted(cfg.lists["eps"], reverse=True)
    t, delta, level = cfg.get("t"), cfg.get("delta"), cfg.get("level")
    se_k, budget = cfg.tolerances["se"], cfg.tolerances["budget"]
    if max(eps) >= delta:
        raise ConfigError("every eps must be smaller than delta")
    event = lambda y: y > level
    for p in cfg.params:
        pid = _pid(p)
        kinds = []
        if p.alpha < 1.0:
            kinds.append(("closest", ConditioningKind.CLOSEST_REACH_WINDOW, Side.POSITIVE,
                          HKind.V1, True))
            kinds.append(("closest_both", ConditioningKind.CLOSEST_REACH_WINDOW, Side.BOTH,
                          HKind.V, True))
        else:
            kinds.append(("entrance", ConditioningKind.ENTRANCE_WINDOW, Side.POSITIVE,
                          HKind.V1, True))
            dominant = HKind.V if p.rho == 0.5 else (HKind.V1 if p.rho < 0.5 else HKind.VMINUS1)
            kinds.append(("entrance_both", ConditioningKind.ENTRANCE_WINDOW, Side.BOTH,
                          dominant, True))
        if p.alpha > 1.0:
            kinds.append(("circ", ConditioningKind.CIRC_CLOSEST_REACH_WINDOW, Side.POSITIVE,
                          HKind.V1, False))
            kinds.append(("circ_both", ConditioningKind.CIRC_CLOSEST_REACH_WINDOW, Side.BOTH,
                          HKind.V, False))
        for x in cfg.points:
            for name, kind, side, hk, gate_trend in kinds:
                ids = [f"conditioning.{name}.{pid}.x{x:g}.e{e:g}" for e in eps]
                ids.append(f"conditioning.{name}_trend.{pid}.x{x:g}")

                def fn(rng, p=p, x=x, kind=kind, side=side, hk=hk, gate_trend=gate_trend):
                    c = cfg.sim(rng=rng)
                    w = weighted_time_t_estimator(p, x, t, hk, event, c, kill_radius=1.0 + delta)
                    rows, gaps = [], []
                    for e in eps:
                        ce = conditional_law_estimator(p, x, t, event, Conditioning(kind, e, side),
                                                       delta, c)
                        comb = math.hypot(ce.std_error, w.std_error)
                        gaps.append(abs(ce.value - w.value))
                        rows.append((w.value, ce.value, comb, se_k * comb + budget * e, Rule.ABS,
                                     f"{hk.name}-weighted estimate vs conditional estimate"))
                    worst = float(max(np.diff(gaps))) if len(gaps) > 1 else 0.0
                    rows.append((0.0, worst, float("nan"), 0.0,
                                 Rule.MAX if gate_trend else Rule.REPORT,
                                 "max increase of |gap| along the eps ladder"))
                    return rows
                tasks.append(_Task(ids, [_inp(p, x, e) for e in eps] + [_inp(p, x, delta)], fn))
    return tasks


_BUILDERS = {
    Suite.IDENTITY: _identity_tasks,
    Suite.ASYMPTOTICS: _asymptotics_tasks,
    Suite.HARMONICITY_MC: _harmonicity_tasks,
    Suite.ABSORPTION: _absorption_tasks,
    Suite.CONDITIONING: _conditioning_tasks,
}


def build_tasks(cfg: SuiteConfig) -> list[_Task]:
    tasks = _BUILDERS[cfg.suite](cfg)
    if cfg.checks:
        tasks = [tk for tk in tasks if any(i.startswith(pref) for i in tk.ids for pref in cfg.checks)]
    if not tasks:
        raise ConfigError("no checks enabled")
    return tasks


def list_checks(cfg: SuiteConfig) -> list[str]:
    return sorted(i for tk in build_tasks(cfg) for i in tk.ids)


def _run_task(tk: _Task, seed: int) -> list[CheckResult]:
    t0 = time.perf_counter()
    try:
        rows = tk.fn(_stream_for(tk.ids[0], seed))
        if len(rows) != len(tk.ids):
            raise RuntimeError("task returned a wrong number of rows")
        err = None
    except ScopeError as exc:
        rows, err = None, f"skipped: {exc}"
    except (StableCondError, ArithmeticError, ValueError, RuntimeError) as exc:
        rows, err = None, f"error: {type(exc).__name__}: {exc}"
    ms = int(round((time.perf_counter() - t0) * 1000))
    nan = float("nan")
    out = []
    for j, cid in enumerate(tk.ids):
        if rows is None:
            skipped = err.startswith("skipped")
            out.append(CheckResult(cid, tk.inputs[j], nan, nan, nan, skipped, ms,
                                   rule=Rule.REPORT if skipped else Rule.ABS, reason=err))
            continue
        exp, obs, se, tol, rule, reason = rows[j]
        exp, obs, tol = float(exp), float(obs), float(tol)
        out.append(CheckResult(cid, tk.inputs[j], exp, obs, tol,
                               CheckResult.judge(rule, exp, obs, tol), ms, float(se), rule, reason))
    return out


def run_suite(cfg: SuiteConfig, write: bool = True) -> list[CheckResult]:
    """Run every enabled check of ``cfg``; results sorted by check id.

    Tasks run on ``STABLECOND_WORKERS`` threads.  With ``write`` the CSV goes
    to ``<out_dir>/<suite>.csv``.
    """
    tasks = build_tasks(cfg)
    w = n_workers()
    if w > 1:
        with ThreadPoolExecutor(max_workers=w) as ex:
            chunks = list(ex.map(lambda tk: _run_task(tk, cfg.seed), tasks))
    else:
        chunks = [_run_task(tk, cfg.seed) for tk in tasks]
    results = sorted((r for ch in chunks for r in ch), key=lambda r: r.check_id)
    if write:
        write_csv(results, Path(cfg.out_dir) / f"{cfg.suite.value}.csv")
    return results


def run_identity_suite(cfg: SuiteConfig) -> list[CheckResult]:
    return run_suite(_as(cfg, Suite.IDENTITY))


def run_asymptotics_suite(cfg: SuiteConfig) -> list[CheckResult]:
    return run_suite(_as(cfg, Suite.ASYMPTOTICS))


def run_harmonicity_mc_suite(cfg: SuiteConfig) -> list[CheckResult]:
    return run_suite(_as(cfg, Suite.HARMONICITY_MC))


def run_absorption_suite(cfg: SuiteConfig) -> list[CheckResult]:
    return run_suite(_as(cfg, Suite.ABSORPTION))


def run_conditioning_suite(cfg: SuiteConfig) -> list[CheckResult]:
    return run_suite(_as(cfg, Suite.CONDITIONING))


def _as(cfg: SuiteConfig, suite: Suite) -> SuiteConfig:
    if cfg.suite is not suite:
        raise ConfigError(f"config is for suite {cfg.suite.value}, not {suite.value}")
    return cfg


def summary_lines(results_by_suite: dict[str, list[CheckResult]]) -> list[str]:
    lines = []
    for name, res in results_by_suite.items():
        n = len(res)
        ok = sum(r.passed for r in res)
        sk = sum(r.skipped for r in res)
        lines.append(f"{name}: {ok}/{n} passed ({sk} skipped)")
        lines += [f"  FAIL {r.check_id}: expected {r.expected:.6g}, observed {r.observed:.6g}, "
                  f"tolerance {r.tolerance:.3g} {r.reason}".rstrip()
                  for r in res if not r.passed]
    return lines
