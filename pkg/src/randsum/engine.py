"""Seeded Monte Carlo for random sums, convergence studies, and selfcheck.

Sampling contract: every summand is drawn individually (no collapsing a
row into its known sum law), so empirical results stay independent
evidence against the exact computations.  One draw of a random sum
consumes one index variate and then the row's entry variates; batches
consume the same variates in a documented deterministic order (index
batch first, then entries column by column or row-flattened, depending
on the dispatch below).

Streams: substreams are derived from the master seed with
``numpy.random.SeedSequence.spawn``; each concurrent task owns its
substream exclusively and results merge in plan order, so study output
does not depend on thread scheduling.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import arrays as _arrays
from . import conditions as _conditions
from . import metrics as _metrics
from .arrays import TriangularArray, array_from_config, normal_twin
from .distributions import (
    QUAD_ABS_TOL,
    Normal,
    RandomIndex,
    ScalarDistribution,
    index_from_config,
)

__all__ = [
    "CHUNK_DRAWS",
    "spawn_streams",
    "sample_random_sum",
    "sample_random_sums",
    "empirical_delta",
    "StudyPlan",
    "StudyResult",
    "run_study",
    "builtin_plan",
    "BUILTIN_PLAN_NAMES",
    "selfcheck",
]

# cap on scalar draws materialized at once (~128 MB of float64)
CHUNK_DRAWS = 1 << 24
# default worker count before the RANDSUM_THREADS cap is applied
_DEFAULT_WORKERS = 4


def thread_cap() -> int:
    """Worker cap from RANDSUM_THREADS (>= 1); default 4."""
    raw = os.environ.get("RANDSUM_THREADS", "")
    try:
        cap = int(raw) if raw else _DEFAULT_WORKERS
    except ValueError:
        cap = _DEFAULT_WORKERS
    return max(1, cap)


def spawn_streams(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators derived from one master seed."""
    seq = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(count)]


# ---------------------------------------------------------------------------
# random-sum sampling
# ---------------------------------------------------------------------------


def _chunk_boundaries(ks: np.ndarray, cap: int) -> List[Tuple[int, int]]:
    """Split rows into contiguous chunks whose total draws stay under cap.

    A single row longer than the cap still becomes its own chunk.
    """
    spans: List[Tuple[int, int]] = []
    start = 0
    acc = 0
    for i, k in enumerate(ks):
        if acc + int(k) > cap and i > start:
            spans.append((start, i))
            start = i
            acc = 0
        acc += int(k)
    spans.append((start, len(ks)))
    return spans


def _iid_row_sums(dist: ScalarDistribution, ks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(ks.size)
    for a, b in _chunk_boundaries(ks, CHUNK_DRAWS):
        part = ks[a:b]
        total = int(np.sum(part))
        flat = np.asarray(dist.sample(rng, total), dtype=float)
        starts = np.concatenate([[0], np.cumsum(part[:-1])]).astype(np.int64)
        out[a:b] = np.add.reduceat(flat, starts)
    return out


def _normal_sigma_vector(array: TriangularArray, n: int, upto: int) -> Optional[np.ndarray]:
    """Entry standard deviations sigma_{n,1..upto} if the row is all normal."""
    sigmas = np.empty(upto)
    for j in range(1, upto + 1):
        entry = array.entry(n, j)
        if not (isinstance(entry, Normal) and entry.mean == 0.0):
            return None
        sigmas[j - 1] = entry.std
    if not np.all(np.isfinite(sigmas)):
        raise ArithmeticError(
            f"entry scales of row {n} overflow beyond position {upto}; "
            "shrink the index range or eta"
        )
    return sigmas


def _normal_row_sums(sigmas: np.ndarray, ks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(ks.size)
    for a, b in _chunk_boundaries(ks, CHUNK_DRAWS):
        part = ks[a:b]
        total = int(np.sum(part))
        starts = np.concatenate([[0], np.cumsum(part[:-1])]).astype(np.int64)
        # per-position column index j-1 = global position - own row start
        pos = np.arange(total, dtype=np.int64) - np.repeat(starts, part)
        flat = rng.standard_normal(total) * sigmas[pos]
        out[a:b] = np.add.reduceat(flat, starts)
    return out


def _columnwise_row_sums(
    array: TriangularArray, n: int, ks: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """General fallback: draw column j for every sum still needing it."""
    out = np.zeros(ks.size)
    kmax = int(np.max(ks))
    order = np.argsort(ks, kind="stable")
    sorted_ks = ks[order]
    for j in range(1, kmax + 1):
        first = int(np.searchsorted(sorted_ks, j, side="left"))
        active = order[first:]
        if active.size == 0:
            break
        draws = np.asarray(array.entry(n, j).sample(rng, active.size), dtype=float)
        out[active] += draws
    return out


def _prefix_sums(
    array: TriangularArray, n: int, ks: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Sums of entries (n, 1..k) for each k in ks, summand by summand."""
    iid = array.iid_entry(n)
    if iid is not None:
        return _iid_row_sums(iid, ks, rng)
    kmax = int(np.max(ks))
    sigmas = _normal_sigma_vector(array, n, kmax)
    if sigmas is not None:
        return _normal_row_sums(sigmas, ks, rng)
    return _columnwise_row_sums(array, n, ks, rng)


def sample_random_sums(
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    rng: np.random.Generator,
    size: int,
    *,
    mode: str = "prefix",
) -> np.ndarray:
    """Draw ``size`` realizations of the random-length sum.

    ``mode="prefix"``: S = X_{n,1} + ... + X_{n,nu} within row ``n``.
    ``mode="rows"``: for each drawn nu = k the complete row-k sum is
    taken instead (each row carrying its own normalizer, the
    normalized-sequence reading).
    """
    if size < 1:
        raise ValueError("size must be positive")
    if mode not in ("prefix", "rows"):
        raise ValueError("mode must be 'prefix' or 'rows'")
    ks = np.asarray(index.sample(rng, size), dtype=np.int64)
    if mode == "prefix":
        return _prefix_sums(array, n, ks, rng)

    out = np.empty(size)
    for k in np.unique(ks):
        where = np.nonzero(ks == k)[0]
        row = int(k)
        upto = array.row_length(row)
        row_ks = np.full(where.size, upto, dtype=np.int64)
        out[where] = _prefix_sums(array, row, row_ks, rng)
    return out


def sample_random_sum(
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    rng: np.random.Generator,
    *,
    mode: str = "prefix",
) -> float:
    """One draw of the random sum: one index variate, then the summands."""
    return float(sample_random_sums(array, index, n, rng, 1, mode=mode)[0])


def empirical_delta(
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    rng: np.random.Generator,
    samples: int = 100_000,
    alpha: float = 0.01,
    *,
    mode: str = "prefix",
    reference: Optional[ScalarDistribution] = None,
) -> _metrics.DistanceEstimate:
    """KS statistic of sampled random sums against the standard normal."""
    if samples < 1_000:
        raise ValueError("need at least 1000 samples")
    draws = sample_random_sums(array, index, n, rng, samples, mode=mode)
    target = reference if reference is not None else Normal(0.0, 1.0)
    return _metrics.empirical_kolmogorov(draws, target, alpha)


# ---------------------------------------------------------------------------
# study plans
# ---------------------------------------------------------------------------


_KNOWN_DISTANCES = ("empirical_delta", "delta_mixture", "delta_randomsum")


@dataclass(frozen=True)
class StudyPlan:
    """Declarative description of one convergence study.

    ``index`` is a config mapping whose numeric fields may hold the
    literal string ``"n"``, resolved per grid point (e.g. geometric with
    ``p = 1/n`` is ``{"family": "geometric", "mean": "n"}``).  ``checks``
    are trend verdicts evaluated on the finished table; see
    ``_evaluate_check`` for the kinds.
    """

    label: str
    array: dict
    index: dict
    n_grid: Tuple[int, ...]
    epsilon_grid: Tuple[float, ...] = (0.1, 0.5)
    delta: float = 1.0
    samples: int = 100_000
    alpha: float = 0.01
    seed: int = 0
    eta: float = 1e-10
    mode: str = "prefix"
    functionals: Tuple[str, ...] = ()
    distances: Tuple[str, ...] = ("empirical_delta",)
    checks: Tuple[dict, ...] = ()
    normal_twin_feller: bool = False

    def validated(self) -> "StudyPlan":
        if self.samples < 1_000:
            raise ValueError("Monte Carlo sample count must be >= 1000")
        if not self.n_grid or not self.epsilon_grid:
            raise ValueError("n and epsilon grids must be nonempty")
        if any(int(n) < 1 for n in self.n_grid):
            raise ValueError("n grid entries must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.mode not in ("prefix", "rows"):
            raise ValueError("mode must be 'prefix' or 'rows'")
        unknown = set(self.distances) - set(_KNOWN_DISTANCES)
        if unknown:
            raise ValueError(f"unknown distances: {sorted(unknown)}")
        return self

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "array": self.array,
            "index": self.index,
            "n_grid": list(self.n_grid),
            "epsilon_grid": list(self.epsilon_grid),
            "delta": self.delta,
            "samples": self.samples,
            "alpha": self.alpha,
            "seed": self.seed,
            "eta": self.eta,
            "mode": self.mode,
            "functionals": list(self.functionals),
            "distances": list(self.distances),
            "checks": [dict(c) for c in self.checks],
            "normal_twin_feller": self.normal_twin_feller,
        }


STUDY_CSV_HEADER = ("label", "n", "epsilon", "delta", "metric", "value", "error_bound")


@dataclass
class StudyResult:
    """Result table plus verdicts for one study run.

    ``rows`` hold one mapping per (n, metric) cell.  The CSV rendering is
    bit-deterministic for a fixed plan; the JSON document additionally
    carries the wall-clock runtime and so is not byte-stable.
    """

    plan: StudyPlan
    rows: List[dict]
    verdicts: List[dict]
    errors: List[dict]
    runtime_seconds: float

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts) and not self.errors

    def csv_text(self) -> str:
        lines = [",".join(STUDY_CSV_HEADER)]
        for row in self.rows:
            lines.append(
                "{label},{n},{epsilon},{delta},{metric},{value!r},{error_bound!r}".format(
                    **{
                        **row,
                        "epsilon": "" if row["epsilon"] is None else repr(row["epsilon"]),
                        "delta": "" if row["delta"] is None else repr(row["delta"]),
                    }
                )
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self, *, include_runtime: bool = True) -> dict:
        doc = {
            "plan": self.plan.to_json_dict(),
            "rows": self.rows,
            "verdicts": self.verdicts,
            "errors": self.errors,
            "passed": self.passed,
        }
        if include_runtime:
            doc["runtime_seconds"] = self.runtime_seconds
        return doc


def _resolve_index(cfg: dict, n: int) -> RandomIndex:
    return index_from_config(cfg, n)


def _study_cell(
    plan: StudyPlan,
    array: TriangularArray,
    twin: Optional[TriangularArray],
    n: int,
    rng: np.random.Generator,
) -> Tuple[List[dict], List[dict]]:
    """All rows for one grid point n.  Pure given its own rng."""
    rows: List[dict] = []
    errors: List[dict] = []
    index = _resolve_index(plan.index, n)
    # randomized functionals are the expensive part of a report; skip
    # them when the plan only reads classical columns
    wants_randomized = not plan.functionals or any(
        f.startswith("rand_") for f in plan.functionals
    )

    def emit(metric: str, value: float, bound: float, epsilon=None, delta=None):
        rows.append(
            {
                "label": plan.label,
                "n": int(n),
                "epsilon": epsilon,
                "delta": delta,
                "metric": metric,
                "value": float(value),
                "error_bound": float(bound),
            }
        )

    want = set(plan.functionals)
    for eps in plan.epsilon_grid:
        try:
            report = _conditions.evaluate_report(
                array,
                n,
                eps,
                plan.delta,
                index=index if wants_randomized else None,
                eta=plan.eta,
            )
        except Exception as exc:  # record and continue per spec
            errors.append({"n": int(n), "epsilon": eps, "stage": "conditions",
                           "error": f"{type(exc).__name__}: {exc}"})
            continue
        for name in sorted(report.values):
            if want and name.split("@")[0] not in want:
                continue
            emit(
                name,
                report.values[name],
                report.error_bounds.get(name, 0.0),
                epsilon=eps,
                delta=plan.delta,
            )
    if twin is not None:
        try:
            tw = _conditions.randomized_detailed("RF", twin, index, n, eta=plan.eta)
            emit("rand_feller_normal_twin", tw.value, tw.remainder_bound)
        except Exception as exc:
            errors.append({"n": int(n), "stage": "normal-twin",
                           "error": f"{type(exc).__name__}: {exc}"})

    for dist_name in plan.distances:
        try:
            if dist_name == "empirical_delta":
                est = empirical_delta(
                    array, index, n, rng, plan.samples, plan.alpha, mode=plan.mode
                )
            elif dist_name == "delta_mixture":
                est = _metrics.delta_mixture(
                    array, index, n, plan.eta, mode=plan.mode, rng=rng
                )
            else:
                est = _metrics.delta_randomsum(
                    array, index, n, plan.eta, mode=plan.mode, rng=rng
                )
            emit(dist_name, est.value, est.bound)
        except Exception as exc:
            errors.append({"n": int(n), "stage": dist_name,
                           "error": f"{type(exc).__name__}: {exc}"})
    return rows, errors


def _metric_series(rows: List[dict], metric: str, epsilon: Optional[float]) -> List[dict]:
    picked = [
        r
        for r in rows
        if r["metric"] == metric and (epsilon is None or r["epsilon"] == epsilon)
    ]
    return sorted(picked, key=lambda r: r["n"])


def _evaluate_check(check: dict, rows: List[dict]) -> dict:
    """One trend verdict.

    kinds:
      to_zero        strictly decreasing while above final_max,
                     nonincreasing afterwards, final <= final_max
      noisy_decrease each step down within the summed error bounds,
                     final <= final_max (Monte Carlo trend)
      constant       every value = target +- tol
      all_below      every value <= threshold
      final_above    last value >= threshold
      tracks_metric  |metric - other| <= combined bounds per n
    """
    kind = check["kind"]
    metric = check.get("metric", "")
    eps = check.get("epsilon")
    series = _metric_series(rows, metric, eps)
    name = check.get("name") or f"{kind}:{metric}" + (f"@eps={eps:g}" if eps is not None else "")
    if not series:
        return {"check": name, "passed": False, "detail": "no rows for metric"}
    vals = [r["value"] for r in series]
    bounds = [r["error_bound"] for r in series]

    if kind == "to_zero":
        final_max = float(check["final_max"])
        ok = vals[-1] <= final_max
        detail = f"final={vals[-1]:.3e}"
        for a, b in zip(vals[:-1], vals[1:]):
            if a > final_max:
                if not b < a:
                    ok = False
                    detail += f"; not strictly decreasing at {a:.3e}->{b:.3e}"
                    break
            elif b > a + 1e-12:
                ok = False
                detail += f"; increases below threshold {a:.3e}->{b:.3e}"
                break
        return {"check": name, "passed": ok, "detail": detail}

    if kind == "noisy_decrease":
        final_max = float(check["final_max"])
        ok = vals[-1] <= final_max
        detail = f"final={vals[-1]:.4f} (bound {bounds[-1]:.4f})"
        for i in range(len(vals) - 1):
            slack = bounds[i] + bounds[i + 1]
            if vals[i + 1] > vals[i] + slack:
                ok = False
                detail += f"; rise beyond noise at step {i}"
                break
        return {"check": name, "passed": ok, "detail": detail}

    if kind == "constant":
        target = float(check["target"])
        tol = float(check.get("tol", 1e-12))
        worst = max(abs(v - target) for v in vals)
        return {
            "check": name,
            "passed": worst <= tol,
            "detail": f"max deviation {worst:.3e}",
        }

    if kind == "all_below":
        threshold = float(check["threshold"])
        worst = max(vals)
        return {
            "check": name,
            "passed": worst <= threshold,
            "detail": f"max value {worst:.3e}",
        }

    if kind == "final_above":
        threshold = float(check["threshold"])
        return {
            "check": name,
            "passed": vals[-1] >= threshold,
            "detail": f"final={vals[-1]:.4f}",
        }

    if kind == "tracks_metric":
        other = _metric_series(rows, check["other"], None)
        if len(other) != len(series):
            return {"check": name, "passed": False, "detail": "metric grids differ"}
        worst = 0.0
        ok = True
        for a, b in zip(series, other):
            gap = abs(a["value"] - b["value"])
            allow = a["error_bound"] + b["error_bound"]
            worst = max(worst, gap - allow)
            if gap > allow:
                ok = False
        return {"check": name, "passed": ok, "detail": f"worst excess {worst:.3e}"}

    return {"check": name, "passed": False, "detail": f"unknown check kind {kind!r}"}


def run_study(plan: StudyPlan) -> StudyResult:
    """Execute a plan: per-n condition reports, distances, trend verdicts.

    Cells run concurrently up to the RANDSUM_THREADS cap; each cell owns a
    pre-spawned substream and results merge in grid order, so the output
    is identical whatever the worker count.
    """
    plan = plan.validated()
    t0 = time.perf_counter()
    array = array_from_config(plan.array)
    twin = normal_twin(array) if plan.normal_twin_feller else None
    streams = spawn_streams(plan.seed, len(plan.n_grid))

    tasks = list(zip(plan.n_grid, streams))
    workers = min(thread_cap(), len(tasks))
    results: List[Optional[Tuple[List[dict], List[dict]]]] = [None] * len(tasks)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_study_cell, plan, array, twin, n, rng)
                for n, rng in tasks
            ]
            for i, fut in enumerate(futures):
                results[i] = fut.result()
    else:
        for i, (n, rng) in enumerate(tasks):
            results[i] = _study_cell(plan, array, twin, n, rng)

    rows: List[dict] = []
    errors: List[dict] = []
    for cell_rows, cell_errors in results:
        rows.extend(cell_rows)
        errors.extend(cell_errors)
    verdicts = [_evaluate_check(c, rows) for c in plan.checks]
    return StudyResult(
        plan=plan,
        rows=rows,
        verdicts=verdicts,
        errors=errors,
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# bundled study plans
# ---------------------------------------------------------------------------


_DESK_N_GRID = (16, 64, 256, 1024, 4096, 10_000)


def _plan_lindeberg_uniform_poisson(**overrides) -> StudyPlan:
    base = StudyPlan(
        label="lindeberg-uniform-poisson",
        array={"array": "iid", "base": {"family": "uniform", "low": -1.0, "high": 1.0}},
        index={"family": "poisson", "mean": "n"},
        n_grid=_DESK_N_GRID,
        epsilon_grid=(0.1,),
        delta=1.0,
        functionals=("lindeberg", "feller", "rand_lindeberg", "rand_feller"),
        distances=("empirical_delta",),
        normal_twin_feller=True,
        checks=(
            {"kind": "to_zero", "metric": "rand_lindeberg", "epsilon": 0.1,
             "final_max": 1e-3},
            {"kind": "noisy_decrease", "metric": "empirical_delta",
             "final_max": 0.02},
        ),
    )
    return replace(base, **overrides)


def _plan_lyapunov_exponential_poisson(**overrides) -> StudyPlan:
    # the index must concentrate (relative spread -> 0) for the
    # unstandardized random sum to go normal; a geometric index would
    # park the distance at the Laplace-mixture gap forever
    base = StudyPlan(
        label="lyapunov-exponential-poisson",
        array={"array": "iid", "base": {"family": "exponential-centered", "rate": 1.0}},
        index={"family": "poisson", "mean": "n"},
        n_grid=(16, 64, 256, 1024, 4096),
        epsilon_grid=(0.3,),
        delta=1.0,
        functionals=("lyapunov", "rand_lyapunov", "rand_lindeberg"),
        distances=("empirical_delta",),
        checks=(
            {"kind": "to_zero", "metric": "rand_lyapunov", "epsilon": 0.3,
             "final_max": 0.05},
            {"kind": "noisy_decrease", "metric": "empirical_delta",
             "final_max": 0.05},
        ),
    )
    return replace(base, **overrides)


def _plan_feller_necessity_rare_jump(**overrides) -> StudyPlan:
    base = StudyPlan(
        label="feller-necessity-rare-jump",
        array={"array": "rare-jump"},
        index={"family": "geometric", "mean": "n"},
        n_grid=(4, 16, 64, 256),
        epsilon_grid=(0.5,),
        delta=1.0,
        functionals=("rand_lindeberg", "rand_feller", "rand_infinitesimality"),
        distances=("empirical_delta", "delta_mixture"),
        checks=(
            {"kind": "final_above", "metric": "rand_lindeberg", "epsilon": 0.5,
             "threshold": 0.5},
            {"kind": "to_zero", "metric": "rand_feller", "epsilon": 0.5,
             "final_max": 0.02},
            # empirical KS minus its DKW bound lower-bounds the true
            # distance, so this is the rigorous non-vanishing evidence
            {"kind": "final_above", "metric": "empirical_delta",
             "threshold": 0.05},
        ),
    )
    return replace(base, **overrides)


def _plan_rotar_shiryaev_series(**overrides) -> StudyPlan:
    # the concentrated poisson index keeps the sampled rows near n; the
    # grid cap is a cost choice (per-row laws are O(k) at rows-mode scale)
    base = StudyPlan(
        label="rotar-shiryaev-series",
        array={"array": "series", "base_seq": "shiryaev"},
        index={"family": "poisson", "mean": "n"},
        n_grid=(16, 64, 256, 512),
        epsilon_grid=(0.5,),
        delta=1.0,
        mode="rows",
        functionals=("rotar", "feller"),
        distances=("empirical_delta", "delta_mixture"),
        checks=(
            {"kind": "all_below", "metric": "rotar", "epsilon": 0.5,
             "threshold": 1e-8},
            {"kind": "all_below", "metric": "delta_mixture", "threshold": 1e-10},
            {"kind": "all_below", "metric": "empirical_delta", "threshold": 0.02},
        ),
    )
    return replace(base, **overrides)


_BUILTIN_PLANS: Dict[str, Callable[..., StudyPlan]] = {
    "lindeberg_uniform_poisson": _plan_lindeberg_uniform_poisson,
    "lyapunov_exponential_poisson": _plan_lyapunov_exponential_poisson,
    "feller_necessity_rare_jump": _plan_feller_necessity_rare_jump,
    "rotar_shiryaev_series": _plan_rotar_shiryaev_series,
}

BUILTIN_PLAN_NAMES = tuple(sorted(_BUILTIN_PLANS))


def builtin_plan(name: str, **overrides) -> StudyPlan:
    """A bundled study plan by name; overrides replace plan fields."""
    try:
        factory = _BUILTIN_PLANS[name]
    except KeyError:
        raise KeyError(
            f"unknown plan {name!r}; available: {', '.join(BUILTIN_PLAN_NAMES)}"
        ) from None
    return factory(**overrides)


# ---------------------------------------------------------------------------
# selfcheck
# ---------------------------------------------------------------------------


def _check(name: str, passed: bool, slack: float, detail: str = "") -> dict:
    return {
        "name": name,
        "passed": bool(passed),
        "slack": float(slack),
        "detail": detail,
    }


def _selfcheck_distributions() -> List[dict]:
    from .distributions import (
        CenteredExponential,
        Rademacher,
        Uniform,
        scale,
    )

    out: List[dict] = []
    families = [
        ("normal", Normal(0.3, 2.0)),
        ("uniform", Uniform(-1.0, 2.0)),
        ("rademacher", Rademacher()),
        ("exponential-centered", CenteredExponential(1.5)),
    ]

    worst = 0.0
    for _, dist in families:
        lo = dist.mean - 6.0 * dist.std
        hi = dist.mean + 6.0 * dist.std
        xs = np.linspace(lo, hi, 128)
        diffs = np.diff(np.asarray(dist.cdf(xs), dtype=float))
        worst = min(worst, float(np.min(diffs)))
    out.append(_check("cdf_monotone", worst >= -1e-12, worst, "min cdf increment"))

    # tsm grows as the threshold shrinks and tops out at the second moment
    worst = math.inf
    for _, dist in families:
        second = dist.variance + dist.mean * dist.mean
        prev = -math.inf
        for eps in (1.0, 0.5, 0.1, 1e-3, 1e-9):
            v = dist.truncated_second_moment(eps)
            if v < prev - 1e-12:
                worst = -1.0
            prev = max(prev, v)
        worst = min(worst, second - prev + 1e-9)
    out.append(_check("tsm_monotone_to_second_moment", worst >= 0.0, worst))

    worst = 0.0
    for _, dist in families:
        scaled = scale(dist, 1.7)
        for t in (0.3, 1.1):
            gap = abs(complex(scaled.char_fn(t)) - complex(dist.char_fn(1.7 * t)))
            worst = max(worst, gap)
    out.append(_check("char_fn_scaling", worst <= 1e-12, worst))

    worst = 0.0
    for _, dist in families:
        norms = [dist.abs_moment(p) ** (1.0 / p) for p in (2.0, 2.5, 3.0)]
        worst = min(worst, norms[1] - norms[0], norms[2] - norms[1])
    out.append(_check("moment_norm_monotone", worst >= -1e-9, worst))
    return out


def _selfcheck_arrays() -> List[dict]:
    out: List[dict] = []
    built = [
        _arrays.make_iid_array(_selfcheck_base()),
        _arrays.make_shiryaev_array(),
        _arrays.make_rare_jump_array(),
        _arrays.from_series(_arrays.shiryaev_series()),
    ]
    worst = 0.0
    for arr in built:
        for n in (2, 4, 8):
            rep = arr.validate(n)
            worst = max(worst, rep.var_residual, rep.max_abs_mean)
            if not rep.passed:
                worst = max(worst, 1.0)
    out.append(_check("array_conditions", worst <= 1e-10, worst))

    direct = _arrays.make_shiryaev_array()
    viaseries = _arrays.from_series(_arrays.shiryaev_series(), rows="n")
    worst = 0.0
    for n in (2, 5):
        for j in range(1, 7):
            a = direct.entry(n, j)
            b = viaseries.entry(n, j)
            same_family = type(a) is type(b)
            rel = abs(a.variance - b.variance) / a.variance
            worst = max(worst, rel if same_family else 1.0)
    out.append(_check("series_matches_direct", worst <= 1e-12, worst))

    worst = 0.0
    for arr in built:
        n = 4
        k = arr.row_length(n)
        variances = [arr.entry(n, j).variance for j in range(1, k + 1)]
        lhs = sum(v * v for v in variances)
        rhs = max(variances)
        worst = max(worst, lhs - rhs)
    out.append(_check("sigma4_sum_bound", worst <= 1e-12, worst))
    return out


def _selfcheck_base():
    from .distributions import Uniform

    return Uniform(-1.0, 1.0)


def _selfcheck_conditions(quad_tol: float) -> List[dict]:
    from .distributions import Deterministic, Geometric, Rademacher

    out: List[dict] = []
    arr = _arrays.make_iid_array(Rademacher())
    det = Deterministic(4)
    worst = 0.0
    pairs = [
        ("RL", _conditions.lindeberg(arr, 4, 0.3), {"epsilon": 0.3}),
        ("RLambda", _conditions.lyapunov(arr, 4, 1.0), {"delta": 1.0}),
        ("RF", _conditions.feller(arr, 4), {}),
        ("RI", _conditions.infinitesimality(arr, 4, 0.3), {"epsilon": 0.3}),
        ("RR", _conditions.rotar(arr, 4, 0.3), {"epsilon": 0.3}),
    ]
    for tag, classical, kwargs in pairs:
        rand = _conditions.randomized(tag, arr, det, 4, **kwargs)
        worst = max(worst, abs(rand - classical))
    out.append(_check("deterministic_index_reduction", worst <= 1e-10, worst))

    checks = _conditions.implication_suite(
        arr, Geometric(0.5), (2, 6), (0.25, 1.0), (0.5, 1.0)
    )
    slack = min(c.slack for c in checks)
    out.append(
        _check(
            "implication_chain",
            all(c.ok for c in checks),
            slack,
            f"{len(checks)} inequalities",
        )
    )

    sh = _arrays.make_shiryaev_array()
    rotar_val = _conditions.rotar(sh, 4, 0.5, quad_tol=quad_tol)
    apriori = _conditions.rotar_error_bound(sh.row_length(4), quad_tol)
    passed = rotar_val <= 1e-8 and apriori <= 1e-8
    out.append(
        _check(
            "rotar_zero_on_normal",
            passed,
            1e-8 - max(rotar_val, apriori),
            f"value {rotar_val:.2e}, a priori bound {apriori:.2e}",
        )
    )
    return out


def _selfcheck_metrics() -> List[dict]:
    from .distributions import FiniteIndex, Rademacher

    out: List[dict] = []
    est = _metrics.kolmogorov(Normal(0.0, 1.0), Normal(0.0, 1.0))
    out.append(_check("kolmogorov_identity", est.value == 0.0, -est.value))

    arr = _arrays.make_iid_array(Rademacher())
    law = _metrics.row_sum_law(arr, 8)
    import itertools

    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=8)))
    sums = signs.sum(axis=1) / math.sqrt(8.0)
    uniq, counts = np.unique(sums, return_counts=True)
    probs = counts / signs.shape[0]
    cum = np.concatenate([[0.0], np.cumsum(probs)])
    from scipy.special import ndtr

    exact = 0.0
    for i, v in enumerate(uniq):
        exact = max(exact, abs(cum[i] - float(ndtr(v))), abs(cum[i + 1] - float(ndtr(v))))
    est = _metrics.kolmogorov(law, Normal(0.0, 1.0))
    gap = abs(est.value - exact)
    out.append(_check("kolmogorov_binomial_oracle", gap <= 1e-12, gap))

    z_base = _metrics.zeta(Rademacher(), Normal(0.0, 1.0), 2)
    from .distributions import scale

    z_scaled = _metrics.zeta(scale(Rademacher(), 2.0), Normal(0.0, 4.0), 2)
    rel = abs(z_scaled.value - 4.0 * z_base.value) / (4.0 * z_base.value)
    out.append(_check("zeta_homogeneity", rel <= 1e-8, rel))

    lower = _metrics.zeta_lower_bound(Rademacher(), Normal(0.0, 1.0), 2)
    slack = z_base.value + z_base.bound + 1e-9 - lower.value
    out.append(_check("zeta_sandwich", slack >= 0.0, slack))

    idx = FiniteIndex([1, 2, 4], [0.25, 0.5, 0.25])
    dm = _metrics.delta_mixture(arr, idx, 4, 1e-12)
    dr = _metrics.delta_randomsum(arr, idx, 4, 1e-12)
    slack = dm.value + dm.bound + dr.bound - dr.value
    out.append(_check("randomsum_below_mixture", slack >= 0.0, slack))
    return out


def _selfcheck_engine(seed: int) -> List[dict]:
    from .distributions import Geometric

    out: List[dict] = []
    a_draws = sample_random_sums(
        _arrays.make_iid_array(_selfcheck_base()),
        Geometric(0.25),
        8,
        np.random.default_rng(np.random.SeedSequence(seed)),
        4096,
    )
    b_draws = sample_random_sums(
        _arrays.make_iid_array(_selfcheck_base()),
        Geometric(0.25),
        8,
        np.random.default_rng(np.random.SeedSequence(seed)),
        4096,
    )
    same = bool(np.array_equal(a_draws, b_draws))
    out.append(_check("stream_determinism", same, 0.0 if same else -1.0))

    series = _arrays.from_series(_arrays.shiryaev_series())
    rng = np.random.default_rng(np.random.SeedSequence(seed + 1))
    est = empirical_delta(series, Geometric(0.2), 8, rng, 20_000, 0.001, mode="rows")
    slack = est.bound - est.value
    out.append(
        _check(
            "exact_normal_series_ks",
            est.value <= est.bound,
            slack,
            f"KS {est.value:.4f} vs DKW {est.bound:.4f}",
        )
    )

    dm = _metrics.delta_mixture(series, Geometric(0.2), 8, 1e-12, mode="rows")
    out.append(_check("exact_normal_series_mixture", dm.value <= 1e-10, 1e-10 - dm.value))
    return out


def selfcheck(seed: int = 42, quad_tol: float = QUAD_ABS_TOL) -> dict:
    """Small-scale invariant suite across all modules.

    The report is a plain dict; serialized with sorted keys it is
    byte-identical across runs for a fixed seed (no timestamps, no
    runtimes).  ``quad_tol`` feeds the Rotar evaluation so its a priori
    guarantee is part of the check (a loose tolerance must fail).
    """
    checks: List[dict] = []
    checks.extend(_selfcheck_distributions())
    checks.extend(_selfcheck_arrays())
    checks.extend(_selfcheck_conditions(quad_tol))
    checks.extend(_selfcheck_metrics())
    checks.extend(_selfcheck_engine(seed))
    return {
        "seed": int(seed),
        "quad_tol": float(quad_tol),
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }


def selfcheck_json(seed: int = 42, quad_tol: float = QUAD_ABS_TOL) -> str:
    """Canonical JSON rendering of ``selfcheck`` (byte-stable per seed)."""
    return json.dumps(selfcheck(seed, quad_tol), sort_keys=True, indent=2) + "\n"
