"""Config-driven command line front end.

Commands: ``conditions``, ``distances``, ``study``, ``counterexample``,
``selfcheck``.  Scenario files are JSON; unknown keys are rejected with
the offending location spelled out ("$.array.famly: unknown key"), and
every default is materialized into the effective config echoed back, so
the echo re-parses to the same run.  Output files are written once,
atomically.  Exit codes: 0 ok, 2 config error, 3 numeric failure,
4 finding violated.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import tempfile
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import arrays as _arrays
from . import conditions as _conditions
from . import engine as _engine
from . import metrics as _metrics
from .distributions import Normal, index_from_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FINDING = 4

COMMANDS = ("conditions", "distances", "study", "counterexample", "selfcheck")

DISTANCES_CSV_HEADER = ("label", "n", "metric", "value", "error_bound", "method")
COUNTEREXAMPLE_CSV_HEADER = ("finding", "passed", "value", "threshold", "detail")

_DISTANCE_METRICS = (
    "kolmogorov_row",
    "empirical_delta",
    "delta_mixture",
    "delta_randomsum",
)


class ConfigError(Exception):
    """Rejected configuration; the message names the offending location."""


# ---------------------------------------------------------------------------
# config validation: every check names its location as $.section.key
# ---------------------------------------------------------------------------


def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    return obj


def _expect_list(obj, path: str) -> list:
    if not isinstance(obj, list):
        raise ConfigError(f"{path}: expected an array")
    return obj


def _check_keys(obj: dict, allowed: Sequence[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _positive_number(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number")
    if not math.isfinite(float(value)) or float(value) <= 0.0:
        raise ConfigError(f"{path}: must be a positive finite number")
    return float(value)


def _positive_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer")
    if value < 1:
        raise ConfigError(f"{path}: must be >= 1")
    return int(value)


_DIST_KEYS = {
    "normal": ("family", "mean", "var"),
    "uniform": ("family", "low", "high"),
    "rademacher": ("family",),
    "two-point": ("family", "low", "high", "p_low"),
    "exponential-centered": ("family", "rate"),
    "finite-discrete": ("family", "values", "probs"),
    "scaled": ("family", "base", "factor"),
    "shifted": ("family", "base", "offset"),
}

_INDEX_KEYS = {
    "deterministic": ("family", "k"),
    "poisson": ("family", "mean"),
    "geometric": ("family", "mean", "p"),
    "negative-binomial": ("family", "mean", "r", "p"),
    "finite": ("family", "values", "probs"),
}

_ARRAY_KEYS = {
    "iid": ("array", "base", "rows"),
    "shiryaev": ("array", "rows"),
    "rare-jump": ("array", "rows"),
    "series": ("array", "base_seq", "rows"),
}


def _validate_distribution(cfg, path: str) -> dict:
    cfg = _expect_mapping(cfg, path)
    family = cfg.get("family")
    if family not in _DIST_KEYS:
        raise ConfigError(f"{path}.family: unknown distribution family {family!r}")
    _check_keys(cfg, _DIST_KEYS[family], path)
    if family in ("scaled", "shifted"):
        if "base" not in cfg:
            raise ConfigError(f"{path}.base: required for family {family!r}")
        _validate_distribution(cfg["base"], f"{path}.base")
    return cfg


def _validate_index(cfg, path: str) -> dict:
    cfg = _expect_mapping(cfg, path)
    family = cfg.get("family")
    if family not in _INDEX_KEYS:
        raise ConfigError(f"{path}.family: unknown index family {family!r}")
    _check_keys(cfg, _INDEX_KEYS[family], path)
    return cfg


def _validate_array(cfg, path: str) -> dict:
    cfg = _expect_mapping(cfg, path)
    kind = cfg.get("array")
    if kind not in _ARRAY_KEYS:
        raise ConfigError(f"{path}.array: unknown array kind {kind!r}")
    _check_keys(cfg, _ARRAY_KEYS[kind], path)
    if kind == "iid":
        if "base" not in cfg:
            raise ConfigError(f"{path}.base: required for iid arrays")
        _validate_distribution(cfg["base"], f"{path}.base")
    rows = cfg.get("rows", "n")
    if rows not in ("n", "2n"):
        raise ConfigError(f'{path}.rows: expected "n" or "2n"')
    cfg["rows"] = rows
    return cfg


_GRID_DEFAULTS = {"n": [4, 16, 64], "epsilon": [0.1, 0.5, 1.0], "delta": [1.0]}


def _validate_grids(cfg, path: str, defaults: dict) -> dict:
    cfg = _expect_mapping(cfg, path)
    _check_keys(cfg, ("n", "epsilon", "delta"), path)
    out = {}
    for key in ("n", "epsilon", "delta"):
        raw = cfg.get(key, list(defaults[key]))
        raw = _expect_list(raw, f"{path}.{key}")
        if not raw:
            raise ConfigError(f"{path}.{key}: grid must be nonempty")
        vals = []
        for i, v in enumerate(raw):
            if key == "n":
                vals.append(_positive_int(v, f"{path}.n[{i}]"))
            else:
                vals.append(_positive_number(v, f"{path}.{key}[{i}]"))
                if key == "delta" and vals[-1] > 1.0:
                    raise ConfigError(f"{path}.delta[{i}]: must lie in (0, 1]")
        out[key] = vals
    return out


def _validate_monte_carlo(cfg, path: str, defaults: dict) -> dict:
    cfg = _expect_mapping(cfg, path)
    _check_keys(cfg, ("M", "alpha", "seed"), path)
    m = _positive_int(cfg.get("M", defaults["M"]), f"{path}.M")
    if m < 1_000:
        raise ConfigError(f"{path}.M: must be >= 1000")
    alpha = _positive_number(cfg.get("alpha", defaults["alpha"]), f"{path}.alpha")
    if alpha >= 1.0:
        raise ConfigError(f"{path}.alpha: must lie in (0, 1)")
    seed = cfg.get("seed", defaults["seed"])
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"{path}.seed: expected a nonnegative integer")
    return {"M": m, "alpha": alpha, "seed": seed}


def _validate_outputs(cfg, path: str) -> dict:
    cfg = _expect_mapping(cfg, path)
    _check_keys(cfg, ("format", "path"), path)
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f'{path}.format: expected "csv" or "json"')
    out_path = cfg.get("path")
    if out_path is not None and not isinstance(out_path, str):
        raise ConfigError(f"{path}.path: expected a string")
    return {"format": fmt, "path": out_path}


_STUDY_FIELDS = (
    "plan",
    "label",
    "mode",
    "eta",
    "functionals",
    "distances",
    "checks",
    "normal_twin_feller",
)

_CHECK_KEYS = (
    "kind",
    "metric",
    "epsilon",
    "name",
    "final_max",
    "target",
    "tol",
    "threshold",
    "other",
)

_CHECK_KINDS = (
    "to_zero",
    "noisy_decrease",
    "constant",
    "all_below",
    "final_above",
    "tracks_metric",
)


def _study_section_defaults(plan: Optional[_engine.StudyPlan]) -> dict:
    if plan is None:
        return {
            "plan": None,
            "label": "study",
            "mode": "prefix",
            "eta": 1e-10,
            "functionals": ["lindeberg", "feller", "rand_lindeberg", "rand_feller"],
            "distances": ["empirical_delta"],
            "checks": [],
            "normal_twin_feller": False,
        }
    return {
        "plan": None,  # filled by the caller
        "label": plan.label,
        "mode": plan.mode,
        "eta": plan.eta,
        "functionals": list(plan.functionals),
        "distances": list(plan.distances),
        "checks": [dict(c) for c in plan.checks],
        "normal_twin_feller": plan.normal_twin_feller,
    }


def _validate_study_section(cfg, path: str, defaults: dict) -> dict:
    cfg = _expect_mapping(cfg, path)
    _check_keys(cfg, _STUDY_FIELDS, path)
    out = {key: copy.deepcopy(cfg.get(key, defaults[key])) for key in _STUDY_FIELDS}
    if out["mode"] not in ("prefix", "rows"):
        raise ConfigError(f'{path}.mode: expected "prefix" or "rows"')
    _positive_number(out["eta"], f"{path}.eta")
    for field in ("functionals", "distances"):
        vals = _expect_list(out[field], f"{path}.{field}")
        for i, v in enumerate(vals):
            if not isinstance(v, str):
                raise ConfigError(f"{path}.{field}[{i}]: expected a string")
    checks = _expect_list(out["checks"], f"{path}.checks")
    for i, chk in enumerate(checks):
        chk = _expect_mapping(chk, f"{path}.checks[{i}]")
        _check_keys(chk, _CHECK_KEYS, f"{path}.checks[{i}]")
        if chk.get("kind") not in _CHECK_KINDS:
            raise ConfigError(
                f"{path}.checks[{i}].kind: expected one of {', '.join(_CHECK_KINDS)}"
            )
    return out


def _validate_distances_section(cfg, path: str) -> dict:
    cfg = _expect_mapping(cfg, path)
    _check_keys(cfg, ("metrics", "mode"), path)
    metrics = cfg.get("metrics", ["kolmogorov_row", "empirical_delta", "delta_mixture"])
    metrics = _expect_list(metrics, f"{path}.metrics")
    for i, name in enumerate(metrics):
        if name not in _DISTANCE_METRICS:
            raise ConfigError(
                f"{path}.metrics[{i}]: unknown metric {name!r}; "
                f"available: {', '.join(_DISTANCE_METRICS)}"
            )
    mode = cfg.get("mode", "prefix")
    if mode not in ("prefix", "rows"):
        raise ConfigError(f'{path}.mode: expected "prefix" or "rows"')
    return {"metrics": list(metrics), "mode": mode}


_TOP_KEYS = ("array", "index", "grids", "monte_carlo", "outputs", "tasks",
             "study", "distances")


def effective_config(raw: dict, command: str) -> dict:
    """Validate a scenario document and materialize every default.

    When a study section names a bundled plan, that plan supplies the
    defaults for any section the document leaves out.  The result
    re-validates to itself, so the echoed effective config reproduces
    the run exactly.
    """
    raw = _expect_mapping(raw, "$")
    _check_keys(raw, _TOP_KEYS, "$")

    tasks = raw.get("tasks", [command])
    tasks = _expect_list(tasks, "$.tasks")
    for i, t in enumerate(tasks):
        if t not in COMMANDS:
            raise ConfigError(f"$.tasks[{i}]: unknown task {t!r}")
    if command not in tasks:
        raise ConfigError(f"$.tasks: config does not enable task {command!r}")

    plan: Optional[_engine.StudyPlan] = None
    plan_name = None
    if "study" in raw:
        study_raw = _expect_mapping(raw["study"], "$.study")
        plan_name = study_raw.get("plan")
        if plan_name is not None:
            if plan_name not in _engine.BUILTIN_PLAN_NAMES:
                raise ConfigError(
                    f"$.study.plan: unknown plan {plan_name!r}; "
                    f"available: {', '.join(_engine.BUILTIN_PLAN_NAMES)}"
                )
            plan = _engine.builtin_plan(plan_name)

    array_default = plan.array if plan else {"array": "shiryaev", "rows": "n"}
    index_default = plan.index if plan else None
    grid_defaults = (
        {"n": list(plan.n_grid), "epsilon": list(plan.epsilon_grid), "delta": [plan.delta]}
        if plan
        else _GRID_DEFAULTS
    )
    mc_defaults = (
        {"M": plan.samples, "alpha": plan.alpha, "seed": plan.seed}
        if plan
        else {"M": 100_000, "alpha": 0.01, "seed": 0}
    )

    cfg: Dict[str, object] = {
        "array": _validate_array(copy.deepcopy(raw.get("array", array_default)), "$.array"),
        "grids": _validate_grids(copy.deepcopy(raw.get("grids", {})), "$.grids", grid_defaults),
        "monte_carlo": _validate_monte_carlo(
            copy.deepcopy(raw.get("monte_carlo", {})), "$.monte_carlo", mc_defaults
        ),
        "outputs": _validate_outputs(copy.deepcopy(raw.get("outputs", {})), "$.outputs"),
        "tasks": list(tasks),
    }
    index_raw = raw.get("index", index_default)
    cfg["index"] = _validate_index(copy.deepcopy(index_raw), "$.index") if index_raw else None

    if command == "distances" and cfg["index"] is None:
        raise ConfigError("$.index: required for the distances task")

    if command == "study" or "study" in raw:
        study = _validate_study_section(
            copy.deepcopy(raw.get("study", {})), "$.study", _study_section_defaults(plan)
        )
        study["plan"] = plan_name
        if command == "study":
            if cfg["index"] is None:
                raise ConfigError("$.index: required for the study task")
            if len(cfg["grids"]["delta"]) != 1:
                raise ConfigError("$.grids.delta: the study task needs exactly one delta")
        cfg["study"] = study

    if command == "distances" or "distances" in raw:
        cfg["distances"] = _validate_distances_section(
            copy.deepcopy(raw.get("distances", {})), "$.distances"
        )
    return cfg


def _plan_from_config(cfg: dict) -> _engine.StudyPlan:
    study = cfg["study"]
    mc = cfg["monte_carlo"]
    return _engine.StudyPlan(
        label=study["label"],
        array=cfg["array"],
        index=cfg["index"],
        n_grid=tuple(cfg["grids"]["n"]),
        epsilon_grid=tuple(cfg["grids"]["epsilon"]),
        delta=float(cfg["grids"]["delta"][0]),
        samples=mc["M"],
        alpha=mc["alpha"],
        seed=mc["seed"],
        eta=float(study["eta"]),
        mode=study["mode"],
        functionals=tuple(study["functionals"]),
        distances=tuple(study["distances"]),
        checks=tuple(dict(c) for c in study["checks"]),
        normal_twin_feller=bool(study["normal_twin_feller"]),
    )


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".randsum-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve_output_path(args, cfg_outputs: dict, default_name: str) -> Optional[str]:
    path = cfg_outputs.get("path")
    if args.out is not None:
        return os.path.join(args.out, path if path else default_name)
    return path


def _emit(args, cfg_outputs: dict, default_name: str, text: str) -> Optional[str]:
    """Write to the resolved file atomically, or to stdout; returns the path."""
    target = _resolve_output_path(args, cfg_outputs, default_name)
    if target is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return None
    _atomic_write(target, text)
    print(f"wrote {target}", file=sys.stderr)
    return target


def _json_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header: Sequence[str], rows: List[dict]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(col)) for col in header))
    return "\n".join(lines) + "\n"


def _load_config(args, command: str) -> dict:
    if args.config is None:
        raw: dict = {}
    else:
        try:
            with open(args.config) as handle:
                raw = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config} is not valid JSON: {exc}")
    cfg = effective_config(raw, command)
    if args.seed is not None:
        cfg["monte_carlo"]["seed"] = args.seed
    if args.format is not None:
        cfg["outputs"]["format"] = args.format
    return cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_conditions(args) -> int:
    cfg = _load_config(args, "conditions")
    if args.dry_run:
        sys.stdout.write(_json_text(cfg))
        return EXIT_OK

    array = _arrays.array_from_config(cfg["array"])
    grids = cfg["grids"]
    rows: List[dict] = []
    errors: List[dict] = []
    for n in grids["n"]:
        index = index_from_config(cfg["index"], n) if cfg["index"] else None
        for eps in grids["epsilon"]:
            for delta in grids["delta"]:
                try:
                    report = _conditions.evaluate_report(
                        array, n, eps, delta, index=index
                    )
                except Exception as exc:
                    errors.append(
                        {"n": n, "epsilon": eps, "delta": delta,
                         "error": f"{type(exc).__name__}: {exc}"}
                    )
                    continue
                for tup in report.csv_rows():
                    rows.append(dict(zip(_conditions.CSV_HEADER, tup)))
    # annotate failed cells in the table itself, stable column set
    for err in errors:
        rows.append(
            {"label": array.label, "n": err["n"], "epsilon": err["epsilon"],
             "delta": err["delta"], "functional": "cell_error",
             "value": None, "error_bound": None}
        )

    if cfg["outputs"]["format"] == "json":
        doc = {"command": "conditions", "config": cfg, "rows": rows, "errors": errors}
        _emit(args, cfg["outputs"], "conditions.json", _json_text(doc))
    else:
        _emit(args, cfg["outputs"], "conditions.csv",
              _csv_text(_conditions.CSV_HEADER, rows))

    any_success = len(rows) > len(errors)
    if errors and (args.strict or not any_success):
        for err in errors:
            print(f"cell failed: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_distances(args) -> int:
    cfg = _load_config(args, "distances")
    if args.dry_run:
        sys.stdout.write(_json_text(cfg))
        return EXIT_OK

    array = _arrays.array_from_config(cfg["array"])
    section = cfg["distances"]
    mc = cfg["monte_carlo"]
    grids = cfg["grids"]
    streams = _engine.spawn_streams(mc["seed"], len(grids["n"]))
    rows: List[dict] = []
    errors: List[dict] = []
    for n, rng in zip(grids["n"], streams):
        index = index_from_config(cfg["index"], n)
        for metric in section["metrics"]:
            try:
                if metric == "kolmogorov_row":
                    law = _metrics.row_sum_law(array, n)
                    est = _metrics.kolmogorov(law, Normal(0.0, 1.0))
                elif metric == "empirical_delta":
                    est = _engine.empirical_delta(
                        array, index, n, rng, mc["M"], mc["alpha"],
                        mode=section["mode"],
                    )
                elif metric == "delta_mixture":
                    est = _metrics.delta_mixture(
                        array, index, n, mode=section["mode"], rng=rng,
                        alpha=mc["alpha"],
                    )
                else:
                    est = _metrics.delta_randomsum(
                        array, index, n, mode=section["mode"], rng=rng,
                        alpha=mc["alpha"],
                    )
            except Exception as exc:
                errors.append({"n": n, "metric": metric,
                               "error": f"{type(exc).__name__}: {exc}"})
                rows.append({"label": array.label, "n": n, "metric": f"{metric}_error",
                             "value": None, "error_bound": None, "method": None})
                continue
            rows.append({"label": array.label, "n": n, "metric": metric,
                         "value": est.value, "error_bound": est.bound,
                         "method": est.method})

    if cfg["outputs"]["format"] == "json":
        doc = {"command": "distances", "config": cfg, "rows": rows, "errors": errors}
        _emit(args, cfg["outputs"], "distances.json", _json_text(doc))
    else:
        _emit(args, cfg["outputs"], "distances.csv",
              _csv_text(DISTANCES_CSV_HEADER, rows))

    any_success = any(r["value"] is not None for r in rows)
    if errors and (args.strict or not any_success):
        for err in errors:
            print(f"cell failed: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_study(args) -> int:
    if args.plan is not None:
        if args.config is not None:
            raise ConfigError("--plan and --config are mutually exclusive")
        cfg = effective_config({"tasks": ["study"], "study": {"plan": args.plan}}, "study")
        if args.seed is not None:
            cfg["monte_carlo"]["seed"] = args.seed
        if args.format is not None:
            cfg["outputs"]["format"] = args.format
    else:
        cfg = _load_config(args, "study")

    try:
        plan = _plan_from_config(cfg).validated()
    except ValueError as exc:
        raise ConfigError(f"$.study: {exc}")

    if args.dry_run:
        sys.stdout.write(_json_text(cfg))
        return EXIT_OK

    result = _engine.run_study(plan)
    if cfg["outputs"]["format"] == "json":
        doc = {"command": "study", "config": cfg,
               **result.to_json_dict(include_runtime=False)}
        doc.pop("plan", None)  # the config echo already carries the plan
        wrote = _emit(args, cfg["outputs"], f"study-{plan.label}.json", _json_text(doc))
    else:
        wrote = _emit(args, cfg["outputs"], f"study-{plan.label}.csv", result.csv_text())

    verdict_stream = sys.stdout if wrote else sys.stderr
    for verdict in result.verdicts:
        mark = "PASS" if verdict["passed"] else "FAIL"
        print(f"{mark} {verdict['check']}: {verdict['detail']}", file=verdict_stream)
    for err in result.errors:
        print(f"cell failed: {err}", file=sys.stderr)

    if result.errors and (args.strict or not result.rows):
        return EXIT_NUMERIC
    if not all(v["passed"] for v in result.verdicts):
        return EXIT_FINDING
    return EXIT_OK


_CE_N_GRID = (4, 8, 16, 32)
_CE_EPSILONS = (0.1, 0.5, 1.0)


def _counterexample_findings(seed: int, quad_tol: float, mc_draws: int) -> List[dict]:
    """The five findings on the all-normal row-mixing array."""
    array = _arrays.make_shiryaev_array()
    findings: List[dict] = []

    worst = 0.0
    for k in _CE_N_GRID:
        law = _metrics.row_sum_law(array, k)
        worst = max(worst, _metrics.kolmogorov(law, Normal(0.0, 1.0)).value)
    findings.append({
        "finding": "exact_clt_distance",
        "passed": worst <= 1e-10,
        "value": worst,
        "threshold": 1e-10,
        "detail": "largest exact row-sum distance to the standard normal",
    })

    worst = 0.0
    for k in _CE_N_GRID:
        worst = max(worst, abs(_conditions.feller(array, k) - 0.5))
    findings.append({
        "finding": "feller_half",
        "passed": worst <= 1e-12,
        "value": worst,
        "threshold": 1e-12,
        "detail": "max |F - 1/2| across the grid",
    })

    # exact L(0.5) values: nonincreasing, never below half the first one,
    # each cross-checked against a Monte Carlo oracle
    streams = _engine.spawn_streams(seed, len(_CE_N_GRID))
    values = []
    mc_ok = True
    mc_detail = ""
    for k, rng in zip(_CE_N_GRID, streams):
        exact = _conditions.lindeberg(array, k, 0.5)
        values.append(exact)
        sigmas = np.sqrt(
            [array.entry(k, j).variance for j in range(1, array.row_length(k) + 1)]
        )
        z = rng.standard_normal((mc_draws, sigmas.size))
        x = z * sigmas
        stat = np.sum(np.square(x) * (np.abs(x) >= 0.5), axis=1)
        mc_mean = float(np.mean(stat))
        mc_se = float(np.std(stat, ddof=1) / math.sqrt(mc_draws))
        if exact < mc_mean - 3.0 * mc_se:
            mc_ok = False
            mc_detail = f"; k={k} exact {exact:.6f} < oracle {mc_mean:.6f} - 3*{mc_se:.2g}"
    floor = 0.5 * values[0]
    nonincreasing = all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    findings.append({
        "finding": "lindeberg_floor",
        "passed": bool(nonincreasing and min(values) >= floor and mc_ok),
        "value": min(values),
        "threshold": floor,
        "detail": "L(0.5) values " + ", ".join(f"{v:.6f}" for v in values) + mc_detail,
    })

    worst = math.inf
    for k in _CE_N_GRID:
        worst = min(worst, _conditions.infinitesimality(array, k, 0.5))
    findings.append({
        "finding": "infinitesimality_floor",
        "passed": worst >= 0.1,
        "value": worst,
        "threshold": 0.1,
        "detail": "smallest I(0.5) across the grid stays bounded away from zero",
    })

    worst = 0.0
    apriori = 0.0
    for k in _CE_N_GRID:
        for eps in _CE_EPSILONS:
            worst = max(worst, _conditions.rotar(array, k, eps, quad_tol=quad_tol))
        apriori = max(apriori, _conditions.rotar_error_bound(array.row_length(k), quad_tol))
    findings.append({
        "finding": "rotar_within_tolerance",
        "passed": worst <= 1e-8 and worst <= max(apriori, 1e-12),
        "value": worst,
        "threshold": 1e-8,
        "detail": f"largest R value {worst:.3e}, a priori quadrature bound {apriori:.3e}",
    })
    return findings


def cmd_counterexample(args) -> int:
    cfg = _load_config(args, "counterexample")
    if args.dry_run:
        sys.stdout.write(_json_text(cfg))
        return EXIT_OK

    mc = cfg["monte_carlo"]
    findings = _counterexample_findings(
        mc["seed"], args.quad_tol, min(mc["M"], 200_000)
    )

    if cfg["outputs"]["format"] == "json":
        doc = {"command": "counterexample", "config": cfg, "findings": findings,
               "passed": all(f["passed"] for f in findings)}
        _emit(args, cfg["outputs"], "counterexample.json", _json_text(doc))
    else:
        _emit(args, cfg["outputs"], "counterexample.csv",
              _csv_text(COUNTEREXAMPLE_CSV_HEADER, findings))

    failed = [f for f in findings if not f["passed"]]
    for f in findings:
        mark = "PASS" if f["passed"] else "FAIL"
        print(f"{mark} {f['finding']}: {f['detail']}", file=sys.stderr)
    if failed:
        print(f"violated: {failed[0]['finding']}", file=sys.stderr)
        return EXIT_FINDING
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    seed = args.seed if args.seed is not None else 42
    if args.dry_run:
        sys.stdout.write(_json_text({"seed": seed, "quad_tol": args.quad_tol}))
        return EXIT_OK
    text = _engine.selfcheck_json(seed, args.quad_tol)
    if args.out is not None:
        target = os.path.join(args.out, "selfcheck.json")
        _atomic_write(target, text)
        print(f"wrote {target}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    report = json.loads(text)
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randsum",
        description="Random-sum CLT conditions, distances, and study runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, config: bool = True) -> None:
        if config:
            p.add_argument("--config", metavar="PATH", help="scenario JSON file")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="override the Monte Carlo seed")
        p.add_argument("--out", metavar="DIR", help="directory for output files")
        p.add_argument("--format", choices=("csv", "json"),
                       help="override the output format")
        p.add_argument("--strict", action="store_true",
                       help="any failed cell is fatal (exit 3)")
        p.add_argument("--dry-run", action="store_true",
                       help="validate, echo the effective config, run nothing")

    p = sub.add_parser("conditions", help="condition functionals over a grid")
    common(p)
    p = sub.add_parser("distances", help="distances to the standard normal over a grid")
    common(p)
    p = sub.add_parser("study", help="run a convergence study plan")
    common(p)
    p.add_argument("--plan", choices=_engine.BUILTIN_PLAN_NAMES,
                   help="bundled study plan (instead of --config)")
    p = sub.add_parser("counterexample", help="the all-normal row-mixing findings")
    common(p)
    p.add_argument("--quad-tol", type=float, default=1e-12,
                   help="quadrature tolerance for the Rotar finding")
    p = sub.add_parser("selfcheck", help="deterministic invariant suite")
    common(p, config=False)
    p.add_argument("--quad-tol", type=float, default=1e-12,
                   help="quadrature tolerance fed to the Rotar check")
    return parser


_DISPATCH = {
    "conditions": cmd_conditions,
    "distances": cmd_distances,
    "study": cmd_study,
    "counterexample": cmd_counterexample,
    "selfcheck": cmd_selfcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "config"):
        args.config = None
    if not hasattr(args, "plan"):
        args.plan = None
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (_arrays.ArrayError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
