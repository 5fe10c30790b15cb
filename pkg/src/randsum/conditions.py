"""Classical and randomized CLT condition functionals on triangular arrays.

Classical functionals act on row ``n`` over positions ``j = 1..k_n``:

* ``lindeberg(eps)``      sum_j E[X_{nj}^2 1{|X_{nj}| >= eps}]
* ``lyapunov(delta)``     sum_j E|X_{nj}|^{2+delta},  delta in (0, 1]
* ``feller()``            max_j Var X_{nj}
* ``infinitesimality``    max_j P(|X_{nj}| >= eps)
* ratio form              max_j E[X^2 / (1 + X^2)]
* ``cf_deviation(t)``     max_j |phi_{nj}(t) - 1|
* ``rotar(eps)``          sum_j int_{|x|>eps} |x| |F_{nj}(x) - Phi_{0,s_j}(x)| dx

Randomized counterparts replace the fixed row length with a random index
``nu`` independent of the summands: the functional becomes the mixture
``sum_k P(nu = k) * prefix_functional(k)`` where the prefix runs over
``j = 1..k`` on the (row-infinite) array.  Mixtures are truncated at the
smallest ``K`` with ``P(nu > K) <= eta`` and the neglected tail is
reported as a remainder bound where a finite majorant exists.

Thresholds use the non-strict convention ``|X| >= eps`` so that
Chebyshev-type comparisons stay exact on atomic laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .arrays import TriangularArray
from .distributions import (
    QUAD_ABS_TOL,
    Normal,
    RandomIndex,
    ScalarDistribution,
    _quad,
)

__all__ = [
    "InvalidRowError",
    "lindeberg",
    "lyapunov",
    "feller",
    "infinitesimality",
    "infinitesimality_ratio",
    "cf_deviation",
    "rotar",
    "sigma_star",
    "randomized",
    "RandomizedValue",
    "randomized_detailed",
    "RANDOMIZED_TAGS",
    "InequalityCheck",
    "implication_suite",
    "series_implication_suite",
    "cf_domination",
    "rl_normal_bound",
    "ConditionReport",
    "evaluate_report",
]

# Default truncation tail for randomized mixtures.
DEFAULT_ETA = 1e-10
# Largest admissible truncation tail accepted by the randomized evaluator.
MAX_ETA = 1e-3
# Slack tolerance when checking implication inequalities numerically.
IMPLICATION_SLACK = 1e-9
# Tail target when choosing the finite window of the Rotar integral.
_ROTAR_TAIL_TARGET = 1e-12

SUM_TAGS = ("RL", "RLambda", "RR")
MAX_TAGS = ("RF", "RI", "R-sigma-star")
RANDOMIZED_TAGS = SUM_TAGS + MAX_TAGS
_TAG_ALIASES = {"RΛ": "RLambda"}  # Greek capital lambda


class InvalidRowError(ValueError):
    """Row fails the zero-mean or unit-variance-sum precondition."""


def _guard_row(array: TriangularArray, n: int) -> int:
    check = array.validate(n)
    if not check.passed:
        raise InvalidRowError(
            f"row n={n} of {array.label!r} violates array conditions: "
            f"max |mean| = {check.max_abs_mean:.3e}, variance sum = {check.var_sum!r}"
        )
    return check.row_length


def _delta_ok(delta: float) -> float:
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    return float(delta)


def _eps_ok(epsilon: float) -> float:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    return float(epsilon)


# ---------------------------------------------------------------------------
# per-entry evaluations
# ---------------------------------------------------------------------------


def _tail_probability(dist: ScalarDistribution, eps: float) -> float:
    """P(|X| >= eps) with exact jump handling at the threshold."""
    high = 1.0 - float(dist.cdf(eps))
    low = float(dist.prob_le(-eps))
    return high + low


def _second_moment_ratio(dist: ScalarDistribution) -> float:
    """E[X^2 / (1 + X^2)], a bounded infinitesimality gauge."""
    return dist.expectation(lambda x: np.square(x) / (1.0 + np.square(x)))


def _rotar_entry(
    dist: ScalarDistribution, eps: float, *, quad_tol: float = QUAD_ABS_TOL
) -> float:
    """int_{|x| >= eps} |x| |F(x) - Phi_{0, sigma}(x)| dx for one entry.

    The comparison normal shares the entry's variance.  For a centered
    normal entry the integrand is identically zero.  The infinite tails
    are cut at T where the truncated second moments of both laws certify
    a remainder below _ROTAR_TAIL_TARGET.
    """
    if isinstance(dist, Normal) and dist.mean == 0.0:
        return 0.0
    sigma = dist.std
    if sigma == 0.0:
        at = dist.atoms()
        if at is not None and np.allclose(at[0], 0.0):
            return 0.0
        raise InvalidRowError("Rotar functional needs entries with positive variance")
    comparison = Normal(0.0, dist.variance)

    lo_sup, hi_sup = dist.support()
    t_cut = max(abs(lo_sup) if math.isfinite(lo_sup) else 0.0,
                abs(hi_sup) if math.isfinite(hi_sup) else 0.0,
                9.0 * sigma, 2.0 * eps)
    while (
        dist.truncated_second_moment(t_cut) + comparison.truncated_second_moment(t_cut)
        > _ROTAR_TAIL_TARGET
        and t_cut < 1e9
    ):
        t_cut *= 2.0

    def diff(x: float) -> float:
        return float(dist.cdf(x)) - float(comparison.cdf(x))

    def integrand(x: float) -> float:
        return abs(x) * abs(diff(x))

    at = dist.atoms()
    atom_vals = at[0] if at is not None else np.empty(0)

    total = 0.0
    for a, b in ((eps, t_cut), (-t_cut, -eps)):
        if b <= a:
            continue
        # split at atoms, then at sign changes of F - Phi inside each piece
        cuts = [a, b]
        cuts.extend(float(v) for v in atom_vals if a < v < b)
        cuts = sorted(set(cuts))
        refined = [cuts[0]]
        for lo_piece, hi_piece in zip(cuts[:-1], cuts[1:]):
            grid = np.linspace(lo_piece, hi_piece, 65)[1:-1]
            # left-continuous F is constant past an atom, so probe interior
            signs = np.array([diff(float(x)) for x in grid])
            prev = lo_piece
            for g, s_prev, s_next in zip(grid[1:], signs[:-1], signs[1:]):
                if s_prev == 0.0 or s_prev * s_next < 0.0:
                    lo_b = prev if prev > lo_piece else float(grid[0])
                    try:
                        root = brentq(diff, lo_b, float(g))
                        if refined[-1] < root < hi_piece:
                            refined.append(float(root))
                            prev = root
                    except ValueError:
                        pass
            refined.append(hi_piece)
        piece_val, _ = _quad(integrand, a, b, epsabs=quad_tol, points=refined)
        total += piece_val
    return total


def rotar_error_bound(row_length: int, quad_tol: float = QUAD_ABS_TOL) -> float:
    """A priori error guarantee for a Rotar sum over ``row_length`` entries.

    Each entry contributes its requested quadrature tolerance plus the
    certified tail remainder; the guarantee cannot be tighter than what
    the integrator was asked to deliver.
    """
    return row_length * (quad_tol + _ROTAR_TAIL_TARGET)


# ---------------------------------------------------------------------------
# classical functionals
# ---------------------------------------------------------------------------


def lindeberg(array: TriangularArray, n: int, epsilon: float) -> float:
    """Lindeberg sum over row n at threshold ``epsilon``."""
    eps = _eps_ok(epsilon)
    k = _guard_row(array, n)
    return float(
        sum(array.entry(n, j).truncated_second_moment(eps) for j in range(1, k + 1))
    )


def lyapunov(array: TriangularArray, n: int, delta: float) -> float:
    """Lyapunov sum of absolute moments of order 2 + delta over row n."""
    d = _delta_ok(delta)
    k = _guard_row(array, n)
    return float(sum(array.entry(n, j).abs_moment(2.0 + d) for j in range(1, k + 1)))


def feller(array: TriangularArray, n: int) -> float:
    """Largest entry variance in row n."""
    k = _guard_row(array, n)
    return float(max(array.entry(n, j).variance for j in range(1, k + 1)))


def infinitesimality(array: TriangularArray, n: int, epsilon: float) -> float:
    """max_j P(|X_{nj}| >= epsilon) over row n."""
    eps = _eps_ok(epsilon)
    k = _guard_row(array, n)
    return float(max(_tail_probability(array.entry(n, j), eps) for j in range(1, k + 1)))


def infinitesimality_ratio(array: TriangularArray, n: int) -> float:
    """max_j E[X^2 / (1 + X^2)] over row n."""
    k = _guard_row(array, n)
    return float(max(_second_moment_ratio(array.entry(n, j)) for j in range(1, k + 1)))


def cf_deviation(array: TriangularArray, n: int, t: float) -> float:
    """max_j |phi_{nj}(t) - 1| over row n."""
    k = _guard_row(array, n)
    return float(max(abs(array.entry(n, j).char_fn(t) - 1.0) for j in range(1, k + 1)))


def rotar(
    array: TriangularArray, n: int, epsilon: float, *, quad_tol: float = QUAD_ABS_TOL
) -> float:
    """Rotar sum over row n: normal-deviation weighted tail integrals."""
    eps = _eps_ok(epsilon)
    k = _guard_row(array, n)
    return float(
        sum(_rotar_entry(array.entry(n, j), eps, quad_tol=quad_tol) for j in range(1, k + 1))
    )


def sigma_star(array: TriangularArray, n: int) -> float:
    """Largest entry standard deviation in row n."""
    k = _guard_row(array, n)
    return float(max(array.entry(n, j).std for j in range(1, k + 1)))


# ---------------------------------------------------------------------------
# randomized functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomizedValue:
    """Truncated mixture value of a randomized functional.

    ``remainder_bound`` majorizes the neglected tail
    ``sum_{k > truncation_k} P(nu = k) inner(k)`` where one exists;
    it is ``inf`` when the prefix values grow too fast for the index tail.
    """

    tag: str
    value: float
    remainder_bound: float
    truncation_k: int
    eta: float


def _entry_value_fn(
    tag: str, epsilon: Optional[float], delta: Optional[float], quad_tol: float
) -> Callable[[ScalarDistribution], float]:
    if tag == "RL":
        eps = _eps_ok(epsilon)
        return lambda d: d.truncated_second_moment(eps)
    if tag == "RLambda":
        dd = _delta_ok(delta)
        return lambda d: d.abs_moment(2.0 + dd)
    if tag == "RR":
        eps = _eps_ok(epsilon)
        return lambda d: _rotar_entry(d, eps, quad_tol=quad_tol)
    if tag == "RF":
        return lambda d: d.variance
    if tag == "RI":
        eps = _eps_ok(epsilon)
        return lambda d: _tail_probability(d, eps)
    if tag == "R-sigma-star":
        return lambda d: d.std
    raise ValueError(f"unknown randomized tag {tag!r}; expected one of {RANDOMIZED_TAGS}")


def _prefix_values(
    array: TriangularArray,
    n: int,
    upto: int,
    fn: Callable[[ScalarDistribution], float],
) -> np.ndarray:
    """fn(entry) for j = 1..upto, memoized per distinct entry object."""
    memo: Dict[int, float] = {}
    out = np.empty(upto)
    for j in range(1, upto + 1):
        dist = array.entry(n, j)
        key = id(dist)
        if key not in memo:
            memo[key] = float(fn(dist))
        out[j - 1] = memo[key]
    return out


def _tail_extension(
    array: TriangularArray,
    n: int,
    start: int,
    fn: Callable[[ScalarDistribution], float],
    index: RandomIndex,
    inner_last: float,
    is_max: bool,
) -> float:
    """Bound the neglected mixture tail past the truncation point.

    Writing the inner functional at k > start as inner(start) plus
    increments, the tail is at most
    ``P(nu > start) * inner(start) + sum_{j > start} incr_j P(nu >= j)``
    where incr_j is the j-th entry value for sum-type functionals and the
    increase of the running maximum for max-type ones (zero whenever no
    new maximum appears, so bounded arrays get remainder ~ eta * bound).
    This function returns the increment series; it walks until terms are
    provably negligible and returns inf when they keep growing (no finite
    majorant available, e.g. entry variances growing faster than the
    index tail decays).
    """
    memo: Dict[int, float] = {}
    bound = 0.0
    prev_raw = math.inf
    running_max = inner_last
    tiny = max(inner_last, 1e-30) * 1e-16
    growing_streak = 0
    j = start + 1
    limit = start + max(4 * start, 512)
    while j <= limit:
        dist = array.entry(n, j)
        key = id(dist)
        if key not in memo:
            memo[key] = float(fn(dist))
        val = memo[key]
        if is_max:
            incr = max(0.0, val - running_max)
            running_max = max(running_max, val)
        else:
            incr = val
        tail = index.tail_mass(j - 1)  # P(nu >= j)
        bound += incr * tail
        if tail == 0.0:
            return bound
        raw = val * tail
        # stop only once even a fresh maximum at j would be negligible,
        # which covers max-type increments that sit at zero for a while
        if raw <= tiny:
            return bound
        growing_streak = growing_streak + 1 if raw > prev_raw else 0
        if growing_streak >= 64:
            return math.inf
        prev_raw = raw
        j += 1
    return math.inf


def randomized_detailed(
    tag: str,
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    *,
    epsilon: Optional[float] = None,
    delta: Optional[float] = None,
    eta: float = DEFAULT_ETA,
    quad_tol: float = QUAD_ABS_TOL,
) -> RandomizedValue:
    """Truncated-mixture evaluation of a randomized condition functional.

    ``tag`` is one of ``RL``, ``RLambda``, ``RF``, ``RI``, ``RR``,
    ``R-sigma-star``.  The mixture runs over ``k = 1..K`` with ``K`` the
    smallest index satisfying ``P(nu > K) <= eta``.
    """
    tag = _TAG_ALIASES.get(tag, tag)
    if not 0.0 < eta <= MAX_ETA:
        raise ValueError(f"eta must lie in (0, {MAX_ETA}]")
    _guard_row(array, n)
    fn = _entry_value_fn(tag, epsilon, delta, quad_tol)
    trunc_k = index.truncation(eta)
    entry_vals = _prefix_values(array, n, trunc_k, fn)
    # divergent mixtures saturate to inf, which is the honest limit here
    with np.errstate(over="ignore"):
        if tag in SUM_TAGS:
            inner = np.cumsum(entry_vals)
        else:
            inner = np.maximum.accumulate(entry_vals)
    ks = np.arange(1, trunc_k + 1)
    pmf = np.asarray(index.pmf(ks), dtype=float)
    value = float(np.dot(pmf, inner))

    inner_last = float(inner[-1])
    eta_actual = index.tail_mass(trunc_k)
    if tag == "RI":
        remainder = eta_actual  # inner values are probabilities, at most 1
    elif eta_actual == 0.0:
        remainder = 0.0
    else:
        extension = _tail_extension(
            array, n, trunc_k, fn, index, inner_last, tag in MAX_TAGS
        )
        remainder = eta_actual * inner_last + extension
    return RandomizedValue(
        tag=tag,
        value=value,
        remainder_bound=float(remainder),
        truncation_k=trunc_k,
        eta=eta,
    )


def randomized(
    tag: str,
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    *,
    epsilon: Optional[float] = None,
    delta: Optional[float] = None,
    eta: float = DEFAULT_ETA,
    quad_tol: float = QUAD_ABS_TOL,
) -> float:
    """Value of a randomized functional; see ``randomized_detailed``."""
    return randomized_detailed(
        tag, array, index, n, epsilon=epsilon, delta=delta, eta=eta, quad_tol=quad_tol
    ).value


# ---------------------------------------------------------------------------
# implication inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    """One numeric inequality with its measured slack (rhs - lhs)."""

    name: str
    array_label: str
    index_descriptor: Optional[tuple]
    n: int
    epsilon: Optional[float]
    delta: Optional[float]
    lhs: float
    rhs: float
    tolerance: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        # direct comparison so divergent mixtures (inf <= inf) still pass;
        # slack would be nan there
        return self.lhs <= self.rhs + self.tolerance


def _chain_checks(
    values: Dict[str, float],
    label: str,
    idx_desc: Optional[tuple],
    n: int,
    epsilon: float,
    delta: float,
    prefix: str,
    tol: float,
) -> List[InequalityCheck]:
    lind = values["lindeberg"]
    lyap = values["lyapunov"]
    fel = values["feller"]
    infi = values["infinitesimality"]
    mk = lambda name, lhs, rhs, eps=epsilon, dlt=delta: InequalityCheck(
        name, label, idx_desc, n, eps, dlt, lhs, rhs, tol
    )
    return [
        mk(f"{prefix}lindeberg<=eps^-delta*lyapunov", lind, epsilon ** (-delta) * lyap),
        mk(f"{prefix}feller<=eps^2+lindeberg", fel, epsilon * epsilon + lind, dlt=None),
        mk(f"{prefix}infinitesimality<=feller/eps^2", infi, fel / (epsilon * epsilon), dlt=None),
    ]


def implication_suite(
    array: TriangularArray,
    index_factory: Optional[Union[RandomIndex, Callable[[int], RandomIndex]]],
    n_grid: Sequence[int],
    epsilon_grid: Sequence[float],
    delta_grid: Sequence[float],
    *,
    eta: float = DEFAULT_ETA,
    tolerance: float = IMPLICATION_SLACK,
) -> List[InequalityCheck]:
    """Numerically verify the implication chain on classical and randomized
    functionals over the requested grids.

    Checked per (n, epsilon, delta): the Lyapunov domination of Lindeberg,
    the Feller bound by the Lindeberg sum, and the Chebyshev bound of
    infinitesimality; the same three with the random index when one is
    supplied.  Returns one record per inequality instance.
    """
    checks: List[InequalityCheck] = []
    for n in n_grid:
        idx = None
        if index_factory is not None:
            idx = index_factory(n) if callable(index_factory) else index_factory
        fel = feller(array, n)
        for epsilon in epsilon_grid:
            lind = lindeberg(array, n, epsilon)
            infi = infinitesimality(array, n, epsilon)
            if idx is not None:
                r_lind = randomized("RL", array, idx, n, epsilon=epsilon, eta=eta)
                r_fel = randomized("RF", array, idx, n, eta=eta)
                r_inf = randomized("RI", array, idx, n, epsilon=epsilon, eta=eta)
            for delta in delta_grid:
                lyap = lyapunov(array, n, delta)
                checks.extend(
                    _chain_checks(
                        {
                            "lindeberg": lind,
                            "lyapunov": lyap,
                            "feller": fel,
                            "infinitesimality": infi,
                        },
                        array.label,
                        None,
                        n,
                        epsilon,
                        delta,
                        "",
                        tolerance,
                    )
                )
                if idx is not None:
                    r_lyap = randomized("RLambda", array, idx, n, delta=delta, eta=eta)
                    checks.extend(
                        _chain_checks(
                            {
                                "lindeberg": r_lind,
                                "lyapunov": r_lyap,
                                "feller": r_fel,
                                "infinitesimality": r_inf,
                            },
                            array.label,
                            idx.descriptor(),
                            n,
                            epsilon,
                            delta,
                            "rand_",
                            tolerance,
                        )
                    )
    return checks


def _normal_series_row_values(
    series, upto: int, epsilon_grid: Sequence[float], delta_grid: Sequence[float]
) -> Dict[object, np.ndarray]:
    """Classical functionals of rows 1..upto for an all-normal series.

    Entry (k, j) is N(0, r_jk) with log r_jk = logvar_j - log B_k^2;
    everything reduces to closed forms on those log ratios, vectorized so
    heavy-tailed index truncations (thousands of rows) stay cheap.
    """
    from scipy.special import gammaln, ndtr

    lv = series.log_variance_profile(upto)
    lb = series.log_b_squared_profile(upto)
    run_max = np.maximum.accumulate(lv)
    out: Dict[object, np.ndarray] = {}
    out["feller"] = np.exp(run_max - lb)
    sigma_max = np.exp(0.5 * (run_max - lb))
    pdf = lambda z: np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)
    for delta in delta_grid:
        p = 2.0 + delta
        # E|Z|^p = sigma^p 2^(p/2) Gamma((p+1)/2) / sqrt(pi), summed in log space
        log_m = 0.5 * p * math.log(2.0) + gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)
        log_sum = np.logaddexp.accumulate(0.5 * p * lv)
        out[("lyapunov", delta)] = np.exp(log_m + log_sum - 0.5 * p * lb)
    for epsilon in epsilon_grid:
        out[("infinitesimality", epsilon)] = 2.0 * ndtr(-epsilon / sigma_max)
        lind = np.empty(upto)
        for k in range(1, upto + 1):
            r = np.exp(lv[:k] - lb[k - 1])
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                c = epsilon / np.sqrt(r)
                vals = r * (2.0 * c * pdf(c) + 2.0 * ndtr(-c))
            # variance ratios below float range contribute nothing
            lind[k - 1] = float(np.sum(np.where(r > 0.0, vals, 0.0)))
        out[("lindeberg", epsilon)] = lind
    return out


def series_implication_suite(
    array: TriangularArray,
    index: RandomIndex,
    epsilon_grid: Sequence[float],
    delta_grid: Sequence[float],
    *,
    eta: float = DEFAULT_ETA,
    tolerance: float = IMPLICATION_SLACK,
) -> List[InequalityCheck]:
    """Implication chain for index-adapted (row-mixing) functionals.

    For series-built arrays the natural randomized functional mixes whole
    rows: ``sum_k P(nu = k) * classical_functional(row k)``.  Since each
    classical inequality holds row by row, the mixtures inherit it; this
    suite verifies that numerically.
    """
    trunc_k = index.truncation(eta)
    ks = np.arange(1, trunc_k + 1)
    pmf = np.asarray(index.pmf(ks), dtype=float)

    series = getattr(array, "series", None)
    if series is not None and series.all_normal:
        rows = _normal_series_row_values(series, trunc_k, epsilon_grid, delta_grid)
        value = lambda key: float(np.dot(pmf, rows[key]))
    else:
        memo: Dict[object, float] = {}

        def value(key) -> float:
            if key not in memo:
                if key == "feller":
                    per_k = [feller(array, int(k)) for k in ks]
                elif key[0] == "lindeberg":
                    per_k = [lindeberg(array, int(k), key[1]) for k in ks]
                elif key[0] == "infinitesimality":
                    per_k = [infinitesimality(array, int(k), key[1]) for k in ks]
                else:
                    per_k = [lyapunov(array, int(k), key[1]) for k in ks]
                memo[key] = float(np.dot(pmf, per_k))
            return memo[key]

    checks: List[InequalityCheck] = []
    fel = value("feller")
    for epsilon in epsilon_grid:
        lind = value(("lindeberg", epsilon))
        infi = value(("infinitesimality", epsilon))
        for delta in delta_grid:
            lyap = value(("lyapunov", delta))
            checks.extend(
                _chain_checks(
                    {
                        "lindeberg": lind,
                        "lyapunov": lyap,
                        "feller": fel,
                        "infinitesimality": infi,
                    },
                    array.label,
                    index.descriptor(),
                    trunc_k,
                    epsilon,
                    delta,
                    "series_",
                    tolerance,
                )
            )
    return checks


# ---------------------------------------------------------------------------
# characteristic-function domination and the normal-array bound
# ---------------------------------------------------------------------------


def cf_domination(
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    epsilon: float,
    t_grid: Sequence[float],
    *,
    eta: float = DEFAULT_ETA,
    quad_tol: float = QUAD_ABS_TOL,
) -> List[InequalityCheck]:
    """Check |E exp(it S_{n,nu}) - exp(-t^2/2)| <= eps |t|^3 + 2 t^2 RR(eps).

    Advisory only: conclusions from this bound depend on prefix variances
    staying near one, which a random index does not guarantee.  Failures
    are reported as records with negative slack, never raised.
    """
    eps = _eps_ok(epsilon)
    _guard_row(array, n)
    trunc_k = index.truncation(eta)
    ks = np.arange(1, trunc_k + 1)
    pmf = np.asarray(index.pmf(ks), dtype=float)
    rr = randomized("RR", array, index, n, epsilon=eps, eta=eta, quad_tol=quad_tol)

    checks = []
    for t in t_grid:
        t = float(t)
        per_entry = np.array(
            [complex(array.entry(n, j).char_fn(t)) for j in range(1, trunc_k + 1)]
        )
        prefix_products = np.cumprod(per_entry)
        mix_cf = complex(np.dot(pmf, prefix_products))
        lhs = abs(mix_cf - math.exp(-0.5 * t * t))
        rhs = eps * abs(t) ** 3 + 2.0 * t * t * rr
        checks.append(
            InequalityCheck(
                "cf_deviation<=eps|t|^3+2t^2*RR",
                array.label,
                index.descriptor(),
                n,
                eps,
                None,
                lhs,
                rhs,
                # mixture truncation leaks at most eta into the lhs
                IMPLICATION_SLACK + eta,
            )
        )
    return checks


def rl_normal_bound(
    array: TriangularArray,
    index: RandomIndex,
    n: int,
    epsilon: float,
    *,
    eta: float = DEFAULT_ETA,
) -> InequalityCheck:
    """For all-normal arrays: RL(eps) <= E[Z^2 1{|Z| >= eps / sigma_star}].

    ``sigma_star`` is the largest entry standard deviation over the
    truncated index range.  The bound is exact when the index support
    stays within the row (prefix variances at most one); with heavier
    indices the recorded slack may go negative, which is reported, not
    raised.
    """
    eps = _eps_ok(epsilon)
    _guard_row(array, n)
    trunc_k = index.truncation(eta)
    stds = []
    for j in range(1, trunc_k + 1):
        entry = array.entry(n, j)
        if not (isinstance(entry, Normal) and entry.mean == 0.0):
            raise InvalidRowError("rl_normal_bound requires centered normal entries")
        stds.append(entry.std)
    s_star = max(stds)
    lhs = randomized("RL", array, index, n, epsilon=eps, eta=eta)
    rhs = Normal(0.0, 1.0).truncated_second_moment(eps / s_star)
    return InequalityCheck(
        "rand_lindeberg<=normal_tail_bound",
        array.label,
        index.descriptor(),
        n,
        eps,
        None,
        lhs,
        rhs,
        IMPLICATION_SLACK,
    )


# ---------------------------------------------------------------------------
# condition reports
# ---------------------------------------------------------------------------


CSV_HEADER = ("label", "n", "epsilon", "delta", "functional", "value", "error_bound")


@dataclass
class ConditionReport:
    """All condition functionals of one row, with evaluation error bounds."""

    array_label: str
    n: int
    row_length: int
    epsilon: float
    delta: float
    t_grid: Tuple[float, ...]
    eta: float
    quad_tol: float
    index_descriptor: Optional[tuple]
    values: Dict[str, float] = field(default_factory=dict)
    error_bounds: Dict[str, float] = field(default_factory=dict)

    def csv_rows(self) -> List[tuple]:
        rows = []
        for name in sorted(self.values):
            rows.append(
                (
                    self.array_label,
                    self.n,
                    self.epsilon,
                    self.delta,
                    name,
                    self.values[name],
                    self.error_bounds.get(name, 0.0),
                )
            )
        return rows

    def to_json_dict(self) -> dict:
        return {
            "label": self.array_label,
            "n": self.n,
            "row_length": self.row_length,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "t_grid": list(self.t_grid),
            "eta": self.eta,
            "quad_tol": self.quad_tol,
            "index": list(self.index_descriptor) if self.index_descriptor else None,
            "values": dict(sorted(self.values.items())),
            "error_bounds": dict(sorted(self.error_bounds.items())),
        }


def evaluate_report(
    array: TriangularArray,
    n: int,
    epsilon: float,
    delta: float,
    *,
    index: Optional[RandomIndex] = None,
    t_grid: Sequence[float] = (0.5, 1.0, 2.0),
    eta: float = DEFAULT_ETA,
    quad_tol: float = QUAD_ABS_TOL,
) -> ConditionReport:
    """Evaluate every condition functional on row n of the array.

    With an ``index`` the randomized counterparts are included.  Error
    bounds cover quadrature tolerances (a priori, per entry) and mixture
    truncation remainders.
    """
    eps = _eps_ok(epsilon)
    dlt = _delta_ok(delta)
    k = _guard_row(array, n)
    report = ConditionReport(
        array_label=array.label,
        n=n,
        row_length=k,
        epsilon=eps,
        delta=dlt,
        t_grid=tuple(float(t) for t in t_grid),
        eta=eta,
        quad_tol=quad_tol,
        index_descriptor=index.descriptor() if index is not None else None,
    )
    vals = report.values
    errs = report.error_bounds
    # moment evaluations fall back to quadrature at the library tolerance
    # when no closed form applies; the a priori bound covers that case
    vals["lindeberg"] = lindeberg(array, n, eps)
    errs["lindeberg"] = k * QUAD_ABS_TOL
    vals["lyapunov"] = lyapunov(array, n, dlt)
    errs["lyapunov"] = k * QUAD_ABS_TOL
    vals["feller"] = feller(array, n)
    vals["infinitesimality"] = infinitesimality(array, n, eps)
    vals["infinitesimality_ratio"] = infinitesimality_ratio(array, n)
    errs["infinitesimality_ratio"] = k * QUAD_ABS_TOL
    for t in report.t_grid:
        vals[f"cf_deviation@t={t:g}"] = cf_deviation(array, n, t)
    vals["rotar"] = rotar(array, n, eps, quad_tol=quad_tol)
    errs["rotar"] = rotar_error_bound(k, quad_tol)
    vals["sigma_star"] = sigma_star(array, n)

    if index is not None:
        spec = [
            ("rand_lindeberg", "RL", {"epsilon": eps}),
            ("rand_lyapunov", "RLambda", {"delta": dlt}),
            ("rand_feller", "RF", {}),
            ("rand_infinitesimality", "RI", {"epsilon": eps}),
            ("rand_rotar", "RR", {"epsilon": eps}),
            ("rand_sigma_star", "R-sigma-star", {}),
        ]
        for name, tag, kwargs in spec:
            detail = randomized_detailed(
                tag, array, index, n, eta=eta, quad_tol=quad_tol, **kwargs
            )
            vals[name] = detail.value
            err = detail.remainder_bound
            if tag == "RR":
                err += rotar_error_bound(detail.truncation_k, quad_tol)
            errs[name] = err
    return report
