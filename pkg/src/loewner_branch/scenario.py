"""Config-driven experiment runner: JSON scenarios in, reports and CSV out.

A scenario names one field (canonical, special-form, or generating family),
solver settings, a command list, and an output spec.  Commands execute in
order; each writes rows into report.json and its own CSV with a fixed column
contract, so plot scripts stay stable.  Numbers are decimal JSON with full
precision and runs are deterministic given the seed (the only varying report
field is the generated_at timestamp).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone

import jsonschema
import numpy as np

from . import analytics, montecarlo, pgf
from .bernstein import classify_fixed_points
from .errors import LoewnerBranchError, ParameterError, ScenarioError
from .evolution import (EvolutionSolver, composition_residual, evolve_error_estimate)
from .fields import (BRFPInfFamily, BRFPInfSegment, DW0Family, DW0Segment,
                     FieldSegment, HerglotzFieldBF, LevyFamily, from_brfp_inf,
                     from_dw0, from_generating_family)
from .measures import DensityPanel, DiscretizedMeasure, exponential_measure
from .montecarlo import FellerSchedule, RNGSeedPlan
from .pgf import GeneratingFamily, PGFSegment

__all__ = ["ScenarioConfig", "ReportRow", "SCENARIO_SCHEMA", "load_scenario",
           "run_scenario", "run_verification_suite", "schema_json"]

_MEASURE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "atoms": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "number", "exclusiveMinimum": 0},
                                {"type": "number", "minimum": 0}],
                "items": False,
                "minItems": 2, "maxItems": 2,
            },
        },
        "density_panels": {
            "type": "array",
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["x_lo", "x_hi", "nodes", "weights"],
                        "additionalProperties": False,
                        "properties": {
                            "x_lo": {"type": "number", "exclusiveMinimum": 0},
                            "x_hi": {"type": "number", "exclusiveMinimum": 0},
                            "nodes": {"type": "array", "items": {"type": "number"}},
                            "weights": {"type": "array",
                                        "items": {"type": "number", "minimum": 0}},
                        },
                    },
                    {
                        "type": "object",
                        "required": ["family", "rate"],
                        "additionalProperties": False,
                        "properties": {
                            "family": {"const": "exponential"},
                            "rate": {"type": "number", "exclusiveMinimum": 0},
                            "amplitude": {"type": "number", "minimum": 0},
                            "x_min": {"type": "number", "exclusiveMinimum": 0},
                            "x_max": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                ],
            },
        },
    },
}

_PAIRS = {"type": "array",
          "items": {"type": "array", "items": {"type": "number", "minimum": 0},
                    "minItems": 2, "maxItems": 2}}
_NUMBERS = {"type": "array", "items": {"type": "number"}}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "loewner-branch scenario",
    "type": "object",
    "required": ["field", "commands"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "field": {
            "type": "object",
            "required": ["type", "breakpoints", "segments"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["levy_family", "dw0_family",
                                  "brfp_inf_family", "generating_family"]},
                "breakpoints": {"type": "array", "items": {"type": "number", "minimum": 0},
                                "minItems": 1},
                "segments": {"type": "array", "minItems": 1, "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kill": {"type": "number", "minimum": 0},
                        "drift": {"type": "number"},
                        "linear": {"type": "number"},
                        "diffusion": {"type": "number", "minimum": 0},
                        "jumps": _MEASURE_SCHEMA,
                        "offspring": {
                            "type": "object",
                            "patternProperties": {
                                "^(0|[2-9]|[1-9][0-9]+)$": {"type": "number", "minimum": 0}},
                            "additionalProperties": False,
                        },
                    },
                }},
            },
        },
        "commands": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["command"],
                "properties": {
                    "command": {"enum": ["evolve", "moments", "extinction",
                                         "classify", "embed", "simulate", "verify"]},
                    "pairs": _PAIRS,
                    "thetas": _NUMBERS,
                    "z": _NUMBERS,
                    "s": {"type": "number", "minimum": 0},
                    "t": {"type": "number", "minimum": 0},
                    "x": {"type": "number", "minimum": 0},
                    "n0": {"type": "integer", "minimum": 0},
                    "n_paths": {"type": "integer", "minimum": 1},
                    "horizon_grid": _NUMBERS,
                    "quick": {"type": "boolean"},
                    "seed": {"type": "integer", "minimum": 0},
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
            },
        },
    },
}


@dataclass(frozen=True)
class ReportRow:
    command: str
    parameters: dict
    quantity: str
    value: float | str | None
    sigma: float | None = None
    certificate: str | None = None

    def as_dict(self):
        return {"command": self.command, "parameters": self.parameters,
                "quantity": self.quantity, "value": self.value,
                "sigma": self.sigma, "certificate": self.certificate}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    field_spec: dict
    solver_settings: dict
    commands: tuple
    output: dict
    seed: int


def schema_json():
    return json.dumps(SCENARIO_SCHEMA, indent=2, sort_keys=True)


def load_scenario(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise ScenarioError(f"schema violation at {where}: {err.message}", field_path=where)
    return ScenarioConfig(
        name=raw.get("name", os.path.splitext(os.path.basename(path))[0]),
        field_spec=raw["field"],
        solver_settings=raw.get("solver", {}),
        commands=tuple(raw["commands"]),
        output=raw.get("output", {}),
        seed=raw.get("seed", 0),
    )


def _build_measure(spec):
    spec = spec or {}
    atoms = tuple((x, m) for x, m in spec.get("atoms", ()))
    panels = []
    for panel in spec.get("density_panels", ()):
        if "family" in panel:
            m = exponential_measure(rate=panel["rate"],
                                    amplitude=panel.get("amplitude", 1.0),
                                    x_min=panel.get("x_min", 1e-8),
                                    x_max=panel.get("x_max"))
            panels.extend(m.panels)
        else:
            panels.append(DensityPanel(panel["x_lo"], panel["x_hi"],
                                       np.asarray(panel["nodes"], dtype=float),
                                       np.asarray(panel["weights"], dtype=float)))
    return DiscretizedMeasure(atoms=atoms, panels=tuple(panels))


def build_field(spec):
    """(field_or_none, generating_family_or_none) from a validated field spec."""
    kind = spec["type"]
    bps = tuple(spec["breakpoints"])
    try:
        if kind == "generating_family":
            segs = [PGFSegment(seg.get("kill", 0.0),
                               {int(n): w for n, w in seg.get("offspring", {}).items()})
                    for seg in spec["segments"]]
            return None, GeneratingFamily(bps, segs)
        if kind == "levy_family":
            segs = [FieldSegment(seg.get("kill", 0.0), seg.get("drift", 0.0),
                                 seg.get("diffusion", 0.0), _build_measure(seg.get("jumps")))
                    for seg in spec["segments"]]
            return HerglotzFieldBF(LevyFamily(bps, segs)), None
        if kind == "dw0_family":
            segs = [DW0Segment(seg.get("linear", 0.0), seg.get("diffusion", 0.0),
                               _build_measure(seg.get("jumps")))
                    for seg in spec["segments"]]
            return from_dw0(DW0Family(bps, segs)), None
        segs = [BRFPInfSegment(seg.get("kill", 0.0), seg.get("linear", 0.0),
                               _build_measure(seg.get("jumps")))
                for seg in spec["segments"]]
        return from_brfp_inf(BRFPInfFamily(bps, segs)), None
    except LoewnerBranchError as exc:
        raise ScenarioError(f"invalid field specification: {exc}") from exc


class _Runner:
    def __init__(self, config, out_dir, seed, rel_tol):
        self.config = config
        self.out_dir = out_dir or config.output.get("directory", ".")
        self.formats = config.output.get("formats", ["csv", "json"])
        self.seed = config.seed if seed is None else seed
        settings = dict(config.solver_settings)
        if rel_tol is not None:
            settings["rel_tol"] = rel_tol
        self.field, self.gf = build_field(config.field_spec)
        if self.field is not None:
            self.solver = EvolutionSolver(self.field, **settings)
            self.model = analytics.CSBPModel(self.field, self.solver)
        else:
            self.solver = None
            self.model = None
        self.entries = []
        self.failed_command = None

    def require_field(self, command):
        if self.model is None:
            raise ScenarioError(f"command {command!r} needs a continuous-state field, "
                                "not a generating family")

    def require_gf(self, command):
        if self.gf is None:
            raise ScenarioError(f"command {command!r} needs a generating family")

    # ---- commands ------------------------------------------------------
    def cmd_evolve(self, params):
        self.require_field("evolve")
        rows, csv_rows = [], []
        for s, t in params.get("pairs", [[0.0, 1.0]]):
            for theta in params.get("thetas", [1.0]):
                value, err = evolve_error_estimate(self.solver, complex(theta), s, t)
                rows.append(ReportRow("evolve", {"s": s, "t": t, "theta": theta},
                                      "laplace_exponent", value.real, sigma=err))
                csv_rows.append([s, t, theta, value.real, value.imag, err])
        return rows, ["s", "t", "theta", "re_v", "im_v", "abs_err_est"], csv_rows

    def cmd_moments(self, params):
        self.require_field("moments")
        x = params.get("x", 1.0)
        rows, csv_rows = [], []
        for s, t in params.get("pairs", [[0.0, 1.0]]):
            mu = analytics.mean(self.model, s, t, x)
            var = analytics.variance(self.model, s, t, x)
            rows.append(ReportRow("moments", {"s": s, "t": t, "x": x}, "mean", mu))
            rows.append(ReportRow("moments", {"s": s, "t": t, "x": x}, "variance", var))
            csv_rows.append([s, t, x, mu, var])
        return rows, ["s", "t", "x", "mean", "variance"], csv_rows

    def cmd_extinction(self, params):
        self.require_field("extinction")
        s = params.get("s", 0.0)
        x = params.get("x", 1.0)
        grid = params.get("horizon_grid", [1.0, 2.0, 4.0, 8.0])
        report = analytics.extinction_report(self.model, s, x, grid)
        rows, csv_rows = [], []
        for t, p in zip(report.times, report.probabilities):
            rows.append(ReportRow("extinction", {"s": s, "t": t, "x": x},
                                  "extinction_probability", p,
                                  certificate=report.certificate))
            csv_rows.append([t, p, report.certificate])
        rows.append(ReportRow("extinction", {"s": s, "x": x}, "horizon_limit",
                              report.horizon_limit, certificate=report.certificate))
        return rows, ["time", "probability", "certificate"], csv_rows

    def cmd_classify(self, params):
        self.require_field("classify")
        rows, csv_rows = [], []
        for s, t in params.get("pairs", [[0.0, 1.0]]):
            handle = _EvolvedMap(self.solver, s, t)
            rep = classify_fixed_points(handle)
            rows.append(ReportRow("classify", {"s": s, "t": t}, "dw_location",
                                  rep.dw_location))
            csv_rows.append([s, t, rep.dw_location,
                             rep.interior_point if rep.interior_point is not None else "",
                             rep.derivative_at_zero, rep.derivative_at_infinity,
                             rep.fixed_value_at_zero])
        return rows, ["s", "t", "dw_location", "interior_point", "derivative_at_zero",
                      "derivative_at_infinity", "fixed_value_at_zero"], csv_rows

    def cmd_embed(self, params):
        self.require_gf("embed")
        verdict = pgf.embeddability_test(self.gf)
        rows = [ReportRow("embed", {}, "embeddable", str(verdict.embeddable))]
        csv_rows = []
        if verdict.embeddable:
            for s, t in params.get("pairs", [[0.0, 1.0]]):
                thetas = params.get("thetas", [0.5, 1.0, 2.0])
                residual = pgf.round_trip_check(self.gf, s, t, thetas)
                rows.append(ReportRow("embed", {"s": s, "t": t}, "round_trip_residual",
                                      residual))
                csv_rows.append([s, t, residual])
        return rows, ["s", "t", "round_trip_residual"], csv_rows

    def cmd_simulate(self, params):
        s = params.get("s", 0.0)
        t = params.get("t", 1.0)
        n_paths = params.get("n_paths", 10_000)
        plan = RNGSeedPlan(params.get("seed", self.seed))
        rows, csv_rows = [], []

        def add(quantity, estimate, analytic):
            z = estimate.zscore(analytic)
            rows.append(ReportRow("simulate", {"s": s, "t": t, "n_paths": n_paths},
                                  quantity, estimate.value, sigma=estimate.stderr))
            csv_rows.append([quantity, estimate.value, estimate.stderr, analytic, z])

        if self.gf is not None:
            n0 = params.get("n0", 1)
            sample = montecarlo.simulate_discrete(self.gf, n0, s, t, plan, n_paths)
            for z_probe in params.get("z", [0.5]):
                est = montecarlo.estimate_pgf(sample, z_probe)
                analytic = pgf.evolve_pgf(self.gf, z_probe, s, t) ** n0
                add(f"pgf@z={z_probe}", est, analytic)
        else:
            x = params.get("x", 1.0)
            try:
                schedule = FellerSchedule.from_field(self.field)
            except ParameterError as exc:
                raise ScenarioError(f"simulate: {exc}") from exc
            sample = montecarlo.simulate_feller(schedule, x, s, t, plan, n_paths)
            est = montecarlo.estimate_mean(sample)
            add("mean", est, analytics.mean(self.model, s, t, x))
            for theta in params.get("thetas", [1.0]):
                est = montecarlo.estimate_laplace(sample, theta)
                add(f"laplace@theta={theta}",
                    est, analytics.transition_laplace(self.model, s, t, x, theta))
        return rows, ["quantity", "value", "stderr", "analytic", "zscore"], csv_rows

    def cmd_verify(self, params):
        quick = params.get("quick", False)
        checks = run_verification_suite(quick=quick, seed=self.seed, announce=print)
        rows, csv_rows = [], []
        ok = True
        for name, passed, detail in checks:
            ok &= passed
            rows.append(ReportRow("verify", {"quick": quick}, name,
                                  "pass" if passed else "fail", certificate=detail))
            csv_rows.append([name, "pass" if passed else "fail", detail])
        if not ok:
            self.failed_command = "verify"
        return rows, ["check", "passed", "detail"], csv_rows

    # ---- driver --------------------------------------------------------
    def run(self):
        os.makedirs(self.out_dir, exist_ok=True)
        handlers = {"evolve": self.cmd_evolve, "moments": self.cmd_moments,
                    "extinction": self.cmd_extinction, "classify": self.cmd_classify,
                    "embed": self.cmd_embed, "simulate": self.cmd_simulate,
                    "verify": self.cmd_verify}
        exit_code = 0
        for index, command in enumerate(self.config.commands):
            name = command["command"]
            try:
                rows, header, csv_rows = handlers[name](command)
                status = "ok"
            except ScenarioError:
                raise
            except LoewnerBranchError as exc:
                rows, header, csv_rows = [], None, []
                status = f"failed: {type(exc).__name__}: {exc}"
                self.failed_command = name
            self.entries.append({
                "command": name,
                "index": index,
                "status": status,
                "rows": [r.as_dict() for r in rows],
            })
            if header is not None and "csv" in self.formats:
                path = os.path.join(self.out_dir, f"{index:02d}_{name}.csv")
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(header)
                    for row in csv_rows:
                        writer.writerow([repr(float(v)) if isinstance(v, float) else v
                                         for v in row])
        if self.failed_command is not None:
            exit_code = 1
        if "json" in self.formats:
            report = {
                "scenario": self.config.name,
                "seed": self.seed,
                "solver": self.config.solver_settings,
                "commands": self.entries,
                "generated_at": datetime.now(timezone.utc).isoformat(),
            }
            with open(os.path.join(self.out_dir, "report.json"), "w") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return exit_code


class _EvolvedMap:
    """Callable v_{s,t} handle for fixed-point classification of solved maps."""

    def __init__(self, solver, s, t):
        self.solver = solver
        self.s = s
        self.t = t

    def __call__(self, theta):
        from .evolution import evolve_point
        return evolve_point(self.solver, float(theta), self.s, self.t)


def run_scenario(path, out_dir=None, seed=None, rel_tol=None):
    """Execute a scenario file; returns the process exit code (0 / 1 / 2)."""
    try:
        config = load_scenario(path)
        runner = _Runner(config, out_dir, seed, rel_tol)
        return runner.run()
    except ScenarioError as exc:
        print(f"configuration error: {exc}")
        return 2


# ---------------------------------------------------------------------------
# built-in verification suite (also used by `loewner-branch verify`)

def run_verification_suite(quick=False, seed=20240811, announce=None):
    """Cross-module property checks; returns [(name, passed, detail), ...]."""
    from .bernstein import feller_semigroup

    checks = []

    def record(name, passed, detail=""):
        checks.append((name, bool(passed), detail))
        if announce:
            announce(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")

    # Feller closed form
    worst = 0.0
    for a in (0.0, 1.0):
        fld = HerglotzFieldBF(LevyFamily((0.0,), (FieldSegment(0.0, a, 1.0),)))
        solver = EvolutionSolver(fld)
        for (s, t) in ((0.0, 1.0), (0.5, 2.0)):
            for theta in (0.5, 1.0, 5.0):
                ref = feller_semigroup(a, 1.0, t - s)(theta)
                got, _ = evolve_error_estimate(solver, complex(theta), s, t)
                worst = max(worst, abs(got.real - ref))
    record("feller_closed_form", worst <= 1e-8, f"max err {worst:.2e}")

    # composition law on a seeded random step field
    rng = np.random.default_rng(seed)
    segs = []
    for _ in range(3):
        atoms = tuple((rng.uniform(0.1, 5.0), rng.uniform(0.1, 2.0)) for _ in range(2))
        segs.append(FieldSegment(rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                                 DiscretizedMeasure(atoms=atoms)))
    fld = HerglotzFieldBF(LevyFamily((0.0, 0.5, 1.2), tuple(segs)))
    solver = EvolutionSolver(fld)
    residual = max(
        composition_residual(solver, s, t, u, np.array([0.1, 1.0, 10.0], dtype=complex))
        for (s, t, u) in ((0.0, 0.6, 1.5), (0.2, 1.0, 2.0)))
    record("composition_law", residual <= 1e-7, f"max residual {residual:.2e}")

    # Yule round trip + critical binary rejection
    yule = GeneratingFamily((0.0,), (PGFSegment(0.0, {2: 1.0}),))
    rt = pgf.round_trip_check(yule, 0.0, 1.0, (0.5, 1.0, 2.0))
    record("yule_round_trip", rt <= 1e-7, f"residual {rt:.2e}")
    binary = GeneratingFamily((0.0,), (PGFSegment(0.0, {0: 1.0, 2: 1.0}),))
    try:
        from_generating_family(binary)
        record("critical_binary_rejected", False, "lift unexpectedly succeeded")
    except LoewnerBranchError:
        record("critical_binary_rejected", True)

    # PGF class membership
    coeffs = pgf.extract_coefficients(yule, 0.0, 1.0)
    ok = bool(np.all(coeffs.coeffs >= -1e-10) and coeffs.coeffs.sum() <= 1.0 + 1e-10)
    record("pgf_class_membership", ok,
           f"min p {coeffs.coeffs.min():.2e}, sum {coeffs.coeffs.sum():.12f}")

    # Monte Carlo vs closed forms
    n_paths = 2000 if quick else 20000
    plan = RNGSeedPlan(seed)
    sample = montecarlo.simulate_discrete(binary, 1, 0.0, 1.0, plan, n_paths)
    est = montecarlo.estimate_pgf(sample, 0.0)
    record("mc_extinction_3sigma", est.covers(0.5),
           f"{est.value:.4f} +- {est.stderr:.4f} vs 0.5")
    if not quick:
        schedule = FellerSchedule((0.0,), (0.0,), (1.0,))
        fsample = montecarlo.simulate_feller(schedule, 1.0, 0.0, 1.0, plan, n_paths)
        mest = montecarlo.estimate_mean(fsample)
        lest = montecarlo.estimate_laplace(fsample, 1.0)
        record("mc_feller_mean_3sigma", mest.covers(1.0),
               f"{mest.value:.4f} +- {mest.stderr:.4f} vs 1")
        record("mc_feller_laplace_3sigma", lest.covers(math.exp(-0.5)),
               f"{lest.value:.4f} +- {lest.stderr:.4f} vs {math.exp(-0.5):.4f}")
    return checks
