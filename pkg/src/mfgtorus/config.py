"""Run configuration: strict JSON schema, defaults, resolved-config round-trip.

Unknown keys are rejected at every level so a typo cannot silently fall back
to a default.  `RunConfig.resolved()` materializes every default; re-running
with the emitted copy reproduces the run byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .grid import GridSpec
from .problem import DriftSpec, PotentialSpec, ProblemSpec, TrigForm, POTENTIAL_FORMS
from .solver import NewtonOptions, StepOptions


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _number(obj: dict, key: str, where: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
    return val


def _number_list(obj: dict, key: str, where: str, length: int | None = None, default=None):
    if key not in obj:
        return default
    val = obj[key]
    if not isinstance(val, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in val
    ):
        raise ConfigError(f"{where}.{key}: expected a list of numbers")
    if length is not None and len(val) != length:
        raise ConfigError(f"{where}.{key}: expected {length} entries, got {len(val)}")
    return [float(v) for v in val]


def _trig(obj: dict, dim: int, where: str) -> TrigForm:
    _check_keys(obj, {"const", "cos", "sin"}, where)
    return TrigForm(
        const=float(_number(obj, "const", where, default=0.0)),
        cos_amp=tuple(_number_list(obj, "cos", where, dim, [0.0] * dim)),
        sin_amp=tuple(_number_list(obj, "sin", where, dim, [0.0] * dim)),
    )


def parse_problem(obj: dict) -> ProblemSpec:
    where = "problem"
    _check_keys(obj, {"dim", "n", "alpha", "potential", "drift", "epsilon_monotone"}, where)
    dim = _number(obj, "dim", where, required=True)
    n = _number(obj, "n", where, required=True)
    if dim not in (1, 2) or int(dim) != dim:
        raise ConfigError(f"{where}.dim: must be 1 or 2")
    if int(n) != n or n < 8:
        raise ConfigError(f"{where}.n: must be an integer >= 8")
    grid = GridSpec(int(dim), int(n))

    alpha = _number(obj, "alpha", where, required=True)
    if not 0.0 <= alpha < 1.0:
        raise ConfigError(
            f"{where}.alpha: the congestion exponent must satisfy 0 <= alpha < 1, got {alpha}"
        )

    pot_obj = obj.get("potential")
    if pot_obj is None:
        raise ConfigError(f"{where}: missing required key 'potential'")
    pw = f"{where}.potential"
    _check_keys(pot_obj, {"form", "kappa", "a_const", "a_cos", "a_sin"}, pw)
    form = pot_obj.get("form")
    if form not in POTENTIAL_FORMS:
        raise ConfigError(f"{pw}.form: must be one of {POTENTIAL_FORMS}, got {form!r}")
    a = TrigForm(
        const=float(_number(pot_obj, "a_const", pw, default=0.0)),
        cos_amp=tuple(_number_list(pot_obj, "a_cos", pw, grid.dim, [0.0] * grid.dim)),
        sin_amp=tuple(_number_list(pot_obj, "a_sin", pw, grid.dim, [0.0] * grid.dim)),
    )
    kappa = float(_number(pot_obj, "kappa", pw, default=0.0))
    if kappa < 0:
        raise ConfigError(f"{pw}.kappa: must be >= 0")

    drift_obj = obj.get("drift", {"components": None})
    dw = f"{where}.drift"
    _check_keys(drift_obj, {"components"}, dw)
    comp_list = drift_obj.get("components")
    if comp_list is None:
        drift = DriftSpec.zero(grid.dim)
    else:
        if not isinstance(comp_list, list) or len(comp_list) != grid.dim:
            raise ConfigError(f"{dw}.components: expected {grid.dim} component objects")
        drift = DriftSpec(
            tuple(_trig(c, grid.dim, f"{dw}.components[{i}]") for i, c in enumerate(comp_list))
        )

    eps = float(_number(obj, "epsilon_monotone", where, default=0.0))
    if eps < 0:
        raise ConfigError(f"{where}.epsilon_monotone: must be >= 0")

    try:
        return ProblemSpec(grid, float(alpha), PotentialSpec(form, a, kappa), drift, eps)
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from err


def problem_to_dict(spec: ProblemSpec) -> dict:
    return {
        "dim": spec.grid.dim,
        "n": spec.grid.n,
        "alpha": spec.alpha,
        "potential": {
            "form": spec.potential.form,
            "kappa": spec.potential.kappa,
            "a_const": spec.potential.a.const,
            "a_cos": list(spec.potential.a.cos_amp),
            "a_sin": list(spec.potential.a.sin_amp),
        },
        "drift": {
            "components": [
                {"const": c.const, "cos": list(c.cos_amp), "sin": list(c.sin_amp)}
                for c in spec.drift.components
            ]
        },
        "epsilon_monotone": spec.epsilon_monotone,
    }


@dataclass(frozen=True)
class DiagnosticsConfig:
    r_values: tuple[float, ...] = (1.0, 2.0, 4.0)
    checks: tuple[str, ...] = ("mass", "positivity", "sup", "moment", "cancellation", "identity")
    identity_budget_factor: float = 50.0

    KNOWN = ("mass", "positivity", "sup", "moment", "cancellation", "identity")


@dataclass(frozen=True)
class MmsConfig:
    grids: tuple[int, ...]
    u: TrigForm
    m: TrigForm


@dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...]
    kappas: tuple[float, ...]
    drift_scales: tuple[float, ...] = (1.0,)


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    solver: NewtonOptions = field(default_factory=NewtonOptions)
    continuation: StepOptions = field(default_factory=StepOptions)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    dump_matrix: bool = False
    seed: int = 0
    mms: MmsConfig | None = None
    sweep: SweepConfig | None = None

    def resolved(self) -> dict:
        out = {
            "problem": problem_to_dict(self.problem),
            "solver": {
                "tol_residual": self.solver.tol_residual,
                "max_iters": self.solver.max_iters,
                "positivity_fraction": self.solver.positivity_fraction,
                "armijo_c": self.solver.armijo_c,
                "min_damping": self.solver.min_damping,
            },
            "continuation": {
                "initial_step": self.continuation.initial_step,
                "growth": self.continuation.growth,
                "shrink": self.continuation.shrink,
                "max_step": self.continuation.max_step,
                "min_step": self.continuation.min_step,
                "grow_iters": self.continuation.grow_iters,
            },
            "diagnostics": {
                "r_values": list(self.diagnostics.r_values),
                "checks": list(self.diagnostics.checks),
                "identity_budget_factor": self.diagnostics.identity_budget_factor,
            },
            "output": {"dump_matrix": self.dump_matrix},
            "seed": self.seed,
        }
        if self.mms is not None:
            out["mms"] = {
                "grids": list(self.mms.grids),
                "u": {
                    "const": self.mms.u.const,
                    "cos": list(self.mms.u.cos_amp),
                    "sin": list(self.mms.u.sin_amp),
                },
                "m": {
                    "const": self.mms.m.const,
                    "cos": list(self.mms.m.cos_amp),
                    "sin": list(self.mms.m.sin_amp),
                },
            }
        if self.sweep is not None:
            out["sweep"] = {
                "alphas": list(self.sweep.alphas),
                "kappas": list(self.sweep.kappas),
                "drift_scales": list(self.sweep.drift_scales),
            }
        return out


def parse_config(doc: dict) -> RunConfig:
    _check_keys(
        doc,
        {"problem", "solver", "continuation", "diagnostics", "output", "seed", "mms", "sweep"},
        "config",
    )
    if "problem" not in doc:
        raise ConfigError("config: missing required key 'problem'")
    problem = parse_problem(doc["problem"])
    dim = problem.grid.dim

    sv = doc.get("solver", {})
    _check_keys(
        sv,
        {"tol_residual", "max_iters", "positivity_fraction", "armijo_c", "min_damping"},
        "solver",
    )
    try:
        solver = NewtonOptions(
            tol_residual=float(_number(sv, "tol_residual", "solver", 1e-10)),
            max_iters=int(_number(sv, "max_iters", "solver", 50)),
            positivity_fraction=float(_number(sv, "positivity_fraction", "solver", 0.1)),
            armijo_c=float(_number(sv, "armijo_c", "solver", 1e-4)),
            min_damping=float(_number(sv, "min_damping", "solver", 1e-6)),
        )
    except ValueError as err:
        raise ConfigError(f"solver: {err}") from err

    ct = doc.get("continuation", {})
    _check_keys(
        ct, {"initial_step", "growth", "shrink", "max_step", "min_step", "grow_iters"}, "continuation"
    )
    continuation = StepOptions(
        initial_step=float(_number(ct, "initial_step", "continuation", 0.1)),
        growth=float(_number(ct, "growth", "continuation", 1.5)),
        shrink=float(_number(ct, "shrink", "continuation", 0.5)),
        max_step=float(_number(ct, "max_step", "continuation", 0.25)),
        min_step=float(_number(ct, "min_step", "continuation", 1e-6)),
        grow_iters=int(_number(ct, "grow_iters", "continuation", 3)),
    )

    dg = doc.get("diagnostics", {})
    _check_keys(dg, {"r_values", "checks", "identity_budget_factor"}, "diagnostics")
    checks = dg.get("checks", list(DiagnosticsConfig.KNOWN))
    if not isinstance(checks, list) or any(c not in DiagnosticsConfig.KNOWN for c in checks):
        raise ConfigError(f"diagnostics.checks: entries must be among {DiagnosticsConfig.KNOWN}")
    diagnostics = DiagnosticsConfig(
        r_values=tuple(_number_list(dg, "r_values", "diagnostics", None, [1.0, 2.0, 4.0])),
        checks=tuple(checks),
        identity_budget_factor=float(_number(dg, "identity_budget_factor", "diagnostics", 50.0)),
    )
    if any(r <= problem.alpha for r in diagnostics.r_values):
        raise ConfigError("diagnostics.r_values: every r must exceed alpha")

    out_obj = doc.get("output", {})
    _check_keys(out_obj, {"dump_matrix"}, "output")
    dump = out_obj.get("dump_matrix", False)
    if not isinstance(dump, bool):
        raise ConfigError("output.dump_matrix: expected a boolean")

    seed = _number(doc, "seed", "config", 0)
    if int(seed) != seed or seed < 0:
        raise ConfigError("config.seed: expected a nonnegative integer")

    mms = None
    if "mms" in doc:
        mo = doc["mms"]
        _check_keys(mo, {"grids", "u", "m"}, "mms")
        grids = mo.get("grids")
        if (
            not isinstance(grids, list)
            or len(grids) < 3
            or any(int(g) != g or g < 8 for g in grids)
        ):
            raise ConfigError("mms.grids: expected a list of >= 3 integer grid sizes")
        if "u" not in mo or "m" not in mo:
            raise ConfigError("mms: both 'u' and 'm' closed forms are required")
        mms = MmsConfig(
            grids=tuple(int(g) for g in grids),
            u=_trig(mo["u"], dim, "mms.u"),
            m=_trig(mo["m"], dim, "mms.m"),
        )

    sweep = None
    if "sweep" in doc:
        so = doc["sweep"]
        _check_keys(so, {"alphas", "kappas", "drift_scales"}, "sweep")
        alphas = _number_list(so, "alphas", "sweep", None, None)
        kappas = _number_list(so, "kappas", "sweep", None, None)
        if not alphas or not kappas:
            raise ConfigError("sweep: 'alphas' and 'kappas' are required non-empty lists")
        if any(not 0.0 <= a < 1.0 for a in alphas):
            raise ConfigError("sweep.alphas: every alpha must satisfy 0 <= alpha < 1")
        if any(k < 0 for k in kappas):
            raise ConfigError("sweep.kappas: must be >= 0")
        if problem.potential.form == "x_only" and any(k != 0.0 for k in kappas):
            raise ConfigError("sweep.kappas: nonzero kappa needs a potential form with an m-part")
        sweep = SweepConfig(
            alphas=tuple(alphas),
            kappas=tuple(kappas),
            drift_scales=tuple(_number_list(so, "drift_scales", "sweep", None, [1.0])),
        )

    return RunConfig(
        problem=problem,
        solver=solver,
        continuation=continuation,
        diagnostics=diagnostics,
        dump_matrix=dump,
        seed=int(seed),
        mms=mms,
        sweep=sweep,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path} is not valid JSON: {err}") from err
    return parse_config(doc)
