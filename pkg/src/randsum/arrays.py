"""Triangular arrays of row-independent, zero-mean summands.

An array assigns a law to every entry ``(n, j)`` with ``j >= 1``; rows are
conceptually infinite so that a random index may exceed the row length.
The row length ``k_n`` (nondecreasing, unbounded) marks where the row
variance constraint applies: ``sum_{j<=k_n} var(n, j) = 1``.

Entries within a row are independent by construction; no joint sampling
state lives on the array, so instances are safe to share across threads.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .distributions import (
    DistributionError,
    Normal,
    ScalarDistribution,
    TwoPoint,
    Uniform,
    scale,
    shift,
)

__all__ = [
    "ArrayError",
    "RowLengths",
    "TriangularArray",
    "SeriesForm",
    "RowValidation",
    "make_iid_array",
    "make_shiryaev_array",
    "make_rare_jump_array",
    "from_series",
    "shiryaev_series",
    "validate",
    "array_from_config",
]

RowRule = Union[str, int, Callable[[int], int]]

# Default tolerances for row validation.
MEAN_TOL = 1e-12
VAR_SUM_TOL = 1e-10


class ArrayError(ValueError):
    """Invalid array construction or a row violating its preconditions."""


class RowLengths:
    """Row-length rule n -> k_n; must be nondecreasing and unbounded.

    Accepts the string ``"n"`` (identity, the default), ``"2n"``, a plain
    callable, or an integer offset rule is not supported deliberately:
    constant rules would violate unboundedness.
    """

    def __init__(self, rule: RowRule = "n", minimum: int = 1):
        self._minimum = int(minimum)
        if isinstance(rule, str):
            if rule == "n":
                self._fn = lambda n: n
            elif rule == "2n":
                self._fn = lambda n: 2 * n
            else:
                raise ArrayError(f"unknown row-length rule {rule!r}")
            self._tag = rule
        elif callable(rule):
            self._fn = rule
            self._tag = "custom"
        else:
            raise ArrayError("row-length rule must be a string or callable")

    @property
    def tag(self) -> str:
        return self._tag

    def __call__(self, n: int) -> int:
        if n < 1 or int(n) != n:
            raise ArrayError("row parameter n must be a positive integer")
        k = int(self._fn(int(n)))
        if k < 1:
            raise ArrayError(f"row length k_n must be >= 1, got {k} at n={n}")
        return max(k, self._minimum)


@dataclass
class RowValidation:
    """Outcome of checking one row against the array conditions."""

    n: int
    row_length: int
    max_abs_mean: float
    var_sum: float
    mean_ok: bool
    var_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.var_ok

    @property
    def var_residual(self) -> float:
        return abs(self.var_sum - 1.0)


class TriangularArray:
    """Base class: rows of independent zero-mean entries.

    Subclasses implement ``entry(n, j)`` for every ``j >= 1`` and expose a
    row-length rule.  ``entry`` results are cached per array so repeated
    functional evaluations reuse the same distribution objects.
    """

    label: str = "array"

    def __init__(self, rows: RowRule = "n", *, min_row: int = 1):
        self.row_lengths = RowLengths(rows, minimum=min_row)
        self._entry_cached = lru_cache(maxsize=None)(self._entry)

    def row_length(self, n: int) -> int:
        return self.row_lengths(n)

    def entry(self, n: int, j: int) -> ScalarDistribution:
        """Law of the entry at row n, position j (1-based, any j >= 1)."""
        if j < 1 or int(j) != j:
            raise ArrayError("entry position j must be a positive integer")
        return self._entry_cached(int(n), int(j))

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        raise NotImplementedError

    def row_entries(self, n: int, upto: Optional[int] = None) -> List[ScalarDistribution]:
        k = self.row_length(n) if upto is None else int(upto)
        return [self.entry(n, j) for j in range(1, k + 1)]

    def prefix_variance(self, n: int, k: Optional[int] = None) -> float:
        """sum_{j<=k} var(n, j); defaults to the full row k = k_n."""
        if k is None:
            k = self.row_length(n)
        return float(sum(self.entry(n, j).variance for j in range(1, k + 1)))

    def iid_entry(self, n: int) -> Optional[ScalarDistribution]:
        """The common per-entry law when row n is i.i.d., else None."""
        return None

    def validate(
        self, n: int, *, mean_tol: float = MEAN_TOL, var_tol: float = VAR_SUM_TOL
    ) -> RowValidation:
        k = self.row_length(n)
        means = [abs(self.entry(n, j).mean) for j in range(1, k + 1)]
        var_sum = self.prefix_variance(n, k)
        max_mean = max(means) if means else 0.0
        return RowValidation(
            n=n,
            row_length=k,
            max_abs_mean=max_mean,
            var_sum=var_sum,
            mean_ok=max_mean <= mean_tol,
            var_ok=abs(var_sum - 1.0) <= var_tol,
        )


class _IidArray(TriangularArray):
    """Row n holds k_n (and beyond) copies of a centered, rescaled base law."""

    def __init__(self, base: ScalarDistribution, rows: RowRule = "n", label: Optional[str] = None):
        if base.variance <= 0:
            raise ArrayError("i.i.d. array requires a base law with positive variance")
        super().__init__(rows)
        self._base = shift(base, -base.mean) if base.mean != 0.0 else base
        self._row_dist = lru_cache(maxsize=None)(self._make_row_dist)
        self.label = label or f"iid-{base.family}"

    def _make_row_dist(self, k: int) -> ScalarDistribution:
        factor = 1.0 / math.sqrt(k * self._base.variance)
        return scale(self._base, factor)

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        # one shared object per row so identity-keyed caches collapse the row
        return self._row_dist(self.row_length(n))

    def iid_entry(self, n: int) -> ScalarDistribution:
        return self.entry(n, 1)


class _ShiryaevArray(TriangularArray):
    """All-normal array with geometrically growing base variances.

    Base sequence: D X_1 = 1 and D X_j = 2^(j-2) for j >= 2, normalized by
    B_n^2 = sum_{j<=k_n} D X_j = 2^(k_n - 1).  Every entry is normal, the
    row variances sum to one exactly, and the largest normalized entry
    variance equals 1/2 for every row, so the Feller condition fails while
    each row sum is exactly standard normal.
    """

    def __init__(self, rows: RowRule = "n"):
        super().__init__(rows, min_row=2)
        self.label = "shiryaev"

    @staticmethod
    def base_variance(j: int) -> float:
        expo = 0 if j == 1 else j - 2
        return 2.0 ** expo if expo <= 1023 else math.inf

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        k = self.row_length(n)
        # variance ratio 2^(j-1-k) formed without the overflowing raw terms;
        # positions far past the row saturate at inf (the honest divergence)
        expo = (1 - k) if j == 1 else (j - 1 - k)
        return Normal(0.0, 2.0 ** expo if expo <= 1023 else math.inf)


class _RareJumpArray(TriangularArray):
    """Two-point entries with a rare O(1) jump: P(X = 1) = 1/(k_n + 1).

    Each entry takes the value 1 with probability 1/(k_n+1) and -1/k_n
    otherwise.  Rows satisfy the zero-mean and unit-variance-sum
    conditions exactly, the Feller functional vanishes like 1/k_n, yet the
    Lindeberg functional stays near one for thresholds below 1: the row
    sums converge to a centered Poisson law, not to a normal one.
    """

    def __init__(self, rows: RowRule = "n"):
        super().__init__(rows)
        self._row_dist = lru_cache(maxsize=None)(self._make_row_dist)
        self.label = "rare-jump"

    def _make_row_dist(self, k: int) -> ScalarDistribution:
        p_jump = 1.0 / (k + 1.0)
        return TwoPoint(-1.0 / k, 1.0, 1.0 - p_jump)

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        return self._row_dist(self.row_length(n))

    def iid_entry(self, n: int) -> ScalarDistribution:
        return self.entry(n, 1)


_LOG_MAX = math.log(sys.float_info.max)


class SeriesForm:
    """A fixed sequence X_1, X_2, ... viewed as normalization input.

    ``base(j)`` returns the law of X_j; ``center(j)`` and ``variance(j)``
    report its mean a_j and variance.  The partial variance sums
    B_n^2 = sum_{j<=n} var(j) are tracked exactly in linear space while
    they fit in a float and continue in log space afterwards, so rows far
    past the overflow point of the raw sums stay usable.

    When the raw member laws themselves outgrow float64, supply explicit
    ``log_variance`` and ``standardized`` callables (the law of
    (X_j - a_j)/sd_j); by default both derive from ``base``.
    ``all_normal=True`` declares every standardized member standard
    normal, which unlocks closed-form vectorized row functionals.
    """

    def __init__(
        self,
        base: Callable[[int], ScalarDistribution],
        label: str = "series",
        *,
        log_variance: Optional[Callable[[int], float]] = None,
        standardized: Optional[Callable[[int], ScalarDistribution]] = None,
        all_normal: bool = False,
    ):
        self._base = lru_cache(maxsize=None)(base)
        self.label = label
        self._log_variance_fn = log_variance
        self._standardized_fn = standardized
        self.all_normal = bool(all_normal)
        self._logvar: List[float] = []
        self._logbsq: List[float] = []
        self._bsq_linear: List[float] = [0.0]
        self._linear_alive = True

    def base(self, j: int) -> ScalarDistribution:
        if j < 1:
            raise ArrayError("series position must be >= 1")
        return self._base(int(j))

    def center(self, j: int) -> float:
        return self.base(j).mean

    def variance(self, j: int) -> float:
        lv = self.log_variance(j)
        return math.exp(lv) if lv <= _LOG_MAX else math.inf

    def log_variance(self, j: int) -> float:
        if j < 1:
            raise ArrayError("series position must be >= 1")
        if self._log_variance_fn is not None:
            return float(self._log_variance_fn(int(j)))
        var_j = self.base(j).variance
        if var_j <= 0:
            raise ArrayError(f"series member {j} has nonpositive variance")
        if math.isinf(var_j):
            raise ArrayError(
                f"series member {j} has a variance past float range; "
                "supply an explicit log_variance"
            )
        return math.log(var_j)

    def standardized(self, j: int) -> ScalarDistribution:
        """Law of (X_j - a_j) / sd_j."""
        if self._standardized_fn is not None:
            return self._standardized_fn(int(j))
        sd = math.exp(0.5 * self.log_variance(j))
        return scale(shift(self.base(j), -self.center(j)), 1.0 / sd)

    def _extend(self, n: int) -> None:
        while len(self._logvar) < n:
            j = len(self._logvar) + 1
            lv = float(self.log_variance(j))
            if math.isnan(lv) or lv == -math.inf:
                raise ArrayError(f"series member {j} has nonpositive variance")
            if lv == math.inf:
                raise ArrayError(f"series member {j} has an infinite log variance")
            self._logvar.append(lv)
            if self._linear_alive:
                var_j = math.exp(lv) if lv <= _LOG_MAX else math.inf
                nxt = self._bsq_linear[-1] + var_j
                if math.isfinite(nxt):
                    self._bsq_linear.append(nxt)
                    self._logbsq.append(math.log(nxt))
                    continue
                self._linear_alive = False
            self._logbsq.append(float(np.logaddexp(self._logbsq[-1], lv)))

    def log_b_squared(self, n: int) -> float:
        if n < 1 or int(n) != n:
            raise ArrayError("series prefix length must be a positive integer")
        self._extend(int(n))
        return self._logbsq[int(n) - 1]

    def b_squared(self, n: int) -> float:
        """B_n^2; inf once the raw sum leaves float range."""
        lb = self.log_b_squared(n)
        n = int(n)
        if n < len(self._bsq_linear):
            return self._bsq_linear[n]
        return math.exp(lb) if lb <= _LOG_MAX else math.inf

    def normalizer(self, n: int) -> float:
        half = 0.5 * self.log_b_squared(n)
        return math.exp(half) if half <= _LOG_MAX else math.inf

    def log_variance_profile(self, n: int) -> np.ndarray:
        """Member log variances for j = 1..n."""
        self._extend(int(n))
        return np.asarray(self._logvar[: int(n)], dtype=float)

    def log_b_squared_profile(self, n: int) -> np.ndarray:
        """log B_k^2 for k = 1..n."""
        self._extend(int(n))
        return np.asarray(self._logbsq[: int(n)], dtype=float)


class _SeriesArray(TriangularArray):
    """Array built from a series: entry(n, j) = (X_j - a_j) / B_{k_n}."""

    def __init__(self, series: SeriesForm, rows: RowRule = "n"):
        super().__init__(rows)
        self.series = series
        self.label = f"series-{series.label}"

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        k = self.row_length(n)
        half_log = 0.5 * (self.series.log_variance(j) - self.series.log_b_squared(k))
        # positions far past the row: the ratio leaves float range, and the
        # saturated law keeps the divergence honest instead of crashing
        factor = math.exp(half_log) if half_log <= _LOG_MAX else math.inf
        if factor == 0.0:
            raise ArrayError(
                f"series entry ({n}, {j}) underflows to zero scale; "
                "rows this deep are outside the numeric envelope"
            )
        return scale(self.series.standardized(j), factor)


class _NormalTwinArray(TriangularArray):
    """Centered normal entries matching another array's variances."""

    def __init__(self, source: TriangularArray):
        super().__init__(source.row_lengths, min_row=source.row_lengths._minimum)
        self.source = source
        self.label = f"normal-twin-{source.label}"

    @lru_cache(maxsize=None)
    def _row_twin(self, n: int) -> Optional[ScalarDistribution]:
        base = self.source.iid_entry(n)
        if base is None:
            return None
        return Normal(0.0, base.variance)

    def _entry(self, n: int, j: int) -> ScalarDistribution:
        twin = self._row_twin(n)
        if twin is not None:
            return twin
        return Normal(0.0, self.source.entry(n, j).variance)

    def iid_entry(self, n: int) -> Optional[ScalarDistribution]:
        return self._row_twin(n)


def make_iid_array(
    base: ScalarDistribution, rows: RowRule = "n", label: Optional[str] = None
) -> TriangularArray:
    """I.i.d. array: every entry of row n is the centered base scaled to
    variance 1/k_n."""
    return _IidArray(base, rows, label)


def normal_twin(array: TriangularArray) -> TriangularArray:
    """Array of centered normals with the same entry variances.

    Randomized-condition hypotheses pair a general array with its
    variance-matched normal counterpart; studies report both.
    """
    return _NormalTwinArray(array)


def make_shiryaev_array(rows: RowRule = "n") -> TriangularArray:
    """The all-normal Feller-violating array (row length floor of 2)."""
    return _ShiryaevArray(rows)


def make_rare_jump_array(rows: RowRule = "n") -> TriangularArray:
    """Two-point array whose row sums approach a centered Poisson law."""
    return _RareJumpArray(rows)


_STD_NORMAL = Normal(0.0, 1.0)
_LN2 = math.log(2.0)


def shiryaev_series() -> SeriesForm:
    """Series X_j ~ N(0, 2^(j-2)) (X_1 ~ N(0,1)) matching the all-normal array.

    Raw variances leave float range past j ~ 1076, so the series carries
    explicit log variances and standardized members.
    """
    return SeriesForm(
        lambda j: Normal(0.0, _ShiryaevArray.base_variance(j)),
        label="shiryaev",
        log_variance=lambda j: 0.0 if j == 1 else (j - 2) * _LN2,
        standardized=lambda j: _STD_NORMAL,
        all_normal=True,
    )


def from_series(series: SeriesForm, rows: RowRule = "n") -> TriangularArray:
    """Triangular array induced by a series: entries (X_j - a_j)/B_{k_n}."""
    return _SeriesArray(series, rows)


def validate(
    array: TriangularArray,
    n: int,
    *,
    mean_tol: float = MEAN_TOL,
    var_tol: float = VAR_SUM_TOL,
) -> RowValidation:
    """Check row n for zero entry means and unit variance sum."""
    return array.validate(n, mean_tol=mean_tol, var_tol=var_tol)


def array_from_config(cfg: dict) -> TriangularArray:
    """Build an array from a config mapping.

    Recognized forms:
      {"array": "iid", "base": {distribution...}, "rows": "n"}
      {"array": "shiryaev", "rows": "n"}
      {"array": "rare-jump", "rows": "n"}
      {"array": "series", "base_seq": "shiryaev", "rows": "n"}
    """
    from .distributions import distribution_from_config

    kind = cfg.get("array")
    rows = cfg.get("rows", "n")
    if kind == "iid":
        if "base" not in cfg:
            raise ArrayError("iid array config requires a base distribution")
        return make_iid_array(distribution_from_config(cfg["base"]), rows)
    if kind == "shiryaev":
        return make_shiryaev_array(rows)
    if kind == "rare-jump":
        return make_rare_jump_array(rows)
    if kind == "series":
        seq = cfg.get("base_seq", "shiryaev")
        if seq == "shiryaev":
            return from_series(shiryaev_series(), rows)
        raise ArrayError(f"unknown series base sequence {seq!r}")
    raise ArrayError(f"unknown array kind {kind!r}")
