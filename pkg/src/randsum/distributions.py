"""Scalar distributions and positive integer-valued random indices.

Conventions used throughout the package:

* ``cdf(x)`` is the left-continuous distribution function ``P(X < x)``;
  ``prob_le(x)`` is the right-continuous variant ``P(X <= x)``.  The two
  coincide for atomless laws and differ exactly at atoms.
* Truncation events use the non-strict threshold ``|X| >= t``.  For
  atomless laws this is immaterial; for atomic laws the convention is
  applied consistently so that Chebyshev-style inequalities remain exact.
* Characteristic functions return ``complex`` values (``complex128``
  arrays for vector input).
* Random indices live on ``{1, 2, ...}``.

All classes are immutable after construction and safe to share across
threads; sampling takes an explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.special import gammaln, ndtr

__all__ = [
    "DistributionError",
    "QuadratureError",
    "ScalarDistribution",
    "Normal",
    "Uniform",
    "Rademacher",
    "TwoPoint",
    "CenteredExponential",
    "FiniteDiscrete",
    "Scaled",
    "Shifted",
    "scale",
    "shift",
    "distribution_from_config",
    "RandomIndex",
    "Deterministic",
    "ShiftedPoisson",
    "Geometric",
    "ShiftedNegativeBinomial",
    "FiniteIndex",
    "index_from_config",
]

ArrayLike = Union[float, np.ndarray]

# Absolute tolerance for adaptive quadrature on moment integrals.
QUAD_ABS_TOL = 1e-10

_LOG_MAX = math.log(1.7976931348623157e308)
# Quadrature error estimates above tolerance times this factor raise.
_QUAD_SLACK = 50.0
# Target for negligible integration tails when choosing finite cutoffs.
_TAIL_NEGLIGIBLE = 1e-14

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DistributionError(ValueError):
    """Invalid distribution parameters or unsupported operation."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to meet its requested tolerance."""


def _norm_pdf(z: ArrayLike) -> ArrayLike:
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _quad(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    epsabs: float = QUAD_ABS_TOL,
    points: Optional[Sequence[float]] = None,
) -> Tuple[float, float]:
    """Integrate ``fn`` on ``[lo, hi]``, raising if the tolerance is missed.

    Returns ``(value, error_estimate)``.  ``points`` marks known kinks or
    atoms; the interval is split there so the adaptive rule never
    straddles a discontinuity.
    """
    if hi <= lo:
        return 0.0, 0.0
    cuts = [lo, hi]
    if points is not None:
        cuts.extend(p for p in points if lo < p < hi)
    cuts = sorted(set(cuts))
    total = 0.0
    err = 0.0
    per_piece = epsabs / max(len(cuts) - 1, 1)
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, est = integrate.quad(fn, a, b, epsabs=per_piece, epsrel=1e-12, limit=200)
        total += val
        err += est
    if err > epsabs * _QUAD_SLACK:
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} exceeds tolerance {epsabs:.3e}"
        )
    return total, err


class ScalarDistribution:
    """Base class for real-valued laws with finite variance.

    Subclasses set ``mean`` and ``variance`` in ``__init__`` and implement
    the abstract accessors.  Generic moment routines fall back to atom
    sums for discrete laws and adaptive quadrature for continuous ones.
    """

    family: str = "abstract"

    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    # -- abstract accessors -------------------------------------------------

    def cdf(self, x: ArrayLike) -> ArrayLike:
        """P(X < x), left-continuous."""
        raise NotImplementedError

    def prob_le(self, x: ArrayLike) -> ArrayLike:
        """P(X <= x), right-continuous.  Equals ``cdf`` for atomless laws."""
        return self.cdf(x)

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        """E exp(itX)."""
        raise NotImplementedError

    def pdf(self, x: ArrayLike) -> ArrayLike:
        raise DistributionError(f"{self.family} has no density")

    def atoms(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(values, probabilities) for purely atomic laws, else None."""
        return None

    def support(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        raise NotImplementedError

    # -- derived quantities -------------------------------------------------

    def descriptor(self) -> tuple:
        """Structural identity: family tag plus defining parameters."""
        raise NotImplementedError

    def _quad_cut(self) -> Tuple[float, float]:
        """Finite integration window outside which moment tails are negligible."""
        lo, hi = self.support()
        spread = 12.0 * max(self.std, 1e-300)
        if not math.isfinite(lo):
            lo = self.mean - spread
        if not math.isfinite(hi):
            hi = self.mean + spread
        return lo, hi

    def truncated_second_moment(self, threshold: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        """E[X^2 1{|X| >= threshold}]."""
        if threshold < 0:
            raise DistributionError("threshold must be nonnegative")
        if threshold == 0.0:
            return self.variance + self.mean * self.mean
        at = self.atoms()
        if at is not None:
            vals, probs = at
            keep = np.abs(vals) >= threshold
            return float(np.sum(np.square(vals[keep]) * probs[keep]))
        lo, hi = self._quad_cut()
        total = 0.0
        if hi > threshold:
            v, _ = _quad(lambda x: x * x * self.pdf(x), max(threshold, lo), hi, epsabs=epsabs / 2)
            total += v
        if lo < -threshold:
            v, _ = _quad(lambda x: x * x * self.pdf(x), lo, min(-threshold, hi), epsabs=epsabs / 2)
            total += v
        return total

    def abs_moment(self, order: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        """E|X|^order for order >= 1."""
        if order < 1:
            raise DistributionError("moment order must be >= 1")
        at = self.atoms()
        if at is not None:
            vals, probs = at
            return float(np.sum(np.power(np.abs(vals), order) * probs))
        lo, hi = self._quad_cut()
        v, _ = _quad(
            lambda x: abs(x) ** order * self.pdf(x), lo, hi, epsabs=epsabs, points=[0.0]
        )
        return v

    def expectation(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        breakpoints: Sequence[float] = (),
        *,
        epsabs: float = 1e-12,
    ) -> float:
        """E fn(X) for bounded piecewise-smooth ``fn``.

        ``breakpoints`` lists the kinks of ``fn`` so quadrature pieces stay
        smooth.  Atomic laws reduce to a finite sum.
        """
        at = self.atoms()
        if at is not None:
            vals, probs = at
            return float(np.sum(np.asarray(fn(vals), dtype=float) * probs))
        lo, hi = self._quad_cut()
        v, _ = _quad(lambda x: float(fn(x)) * self.pdf(x), lo, hi, epsabs=epsabs, points=list(breakpoints))
        return v


class Normal(ScalarDistribution):
    """Gaussian law N(mean, var)."""

    family = "normal"

    def __init__(self, mean: float = 0.0, var: float = 1.0):
        if var <= 0:
            raise DistributionError("normal variance must be positive")
        self.mean = float(mean)
        self.variance = float(var)
        self._sigma = math.sqrt(self.variance)

    def descriptor(self) -> tuple:
        return ("normal", self.mean, self.variance)

    def __repr__(self) -> str:
        return f"Normal(mean={self.mean!r}, var={self.variance!r})"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self._sigma)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        z = (np.asarray(x, dtype=float) - self.mean) / self._sigma
        return _norm_pdf(z) / self._sigma

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        t = np.asarray(t, dtype=float)
        out = np.exp(1j * self.mean * t - 0.5 * self.variance * np.square(t))
        return complex(out) if out.ndim == 0 else out

    def support(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    def truncated_second_moment(self, threshold: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if threshold < 0:
            raise DistributionError("threshold must be nonnegative")
        if threshold == 0.0:
            return self.variance + self.mean * self.mean
        if self.mean == 0.0:
            # sigma^2 (2 c phi(c) + 2 (1 - Phi(c))) with c = threshold / sigma
            c = threshold / self._sigma
            return self.variance * (2.0 * c * float(_norm_pdf(c)) + 2.0 * float(ndtr(-c)))
        return super().truncated_second_moment(threshold, epsabs=epsabs)

    def abs_moment(self, order: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if order < 1:
            raise DistributionError("moment order must be >= 1")
        if math.isinf(self._sigma):
            return math.inf
        if self.mean == 0.0:
            # E|X|^p = sigma^p 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
            log_val = (
                order * math.log(self._sigma)
                + 0.5 * order * math.log(2.0)
                + gammaln((order + 1.0) / 2.0)
                - 0.5 * math.log(math.pi)
            )
            return math.exp(log_val) if log_val <= _LOG_MAX else math.inf
        return super().abs_moment(order, epsabs=epsabs)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.normal(self.mean, self._sigma, size=size)


class Uniform(ScalarDistribution):
    """Uniform law on [low, high]."""

    family = "uniform"

    def __init__(self, low: float, high: float):
        if not high > low:
            raise DistributionError("uniform requires high > low")
        self.low = float(low)
        self.high = float(high)
        self.mean = 0.5 * (self.low + self.high)
        width = self.high - self.low
        self.variance = width * width / 12.0

    def descriptor(self) -> tuple:
        return ("uniform", self.low, self.high)

    def __repr__(self) -> str:
        return f"Uniform({self.low!r}, {self.high!r})"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.low) / (self.high - self.low), 0.0, 1.0)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        inside = (x >= self.low) & (x <= self.high)
        return np.where(inside, 1.0 / (self.high - self.low), 0.0)

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        t = np.asarray(t, dtype=float)
        half_width = 0.5 * (self.high - self.low)
        # sin(w)/w via np.sinc, exact at t = 0
        out = np.exp(1j * self.mean * t) * np.sinc(t * half_width / math.pi)
        return complex(out) if out.ndim == 0 else out

    def support(self) -> Tuple[float, float]:
        return (self.low, self.high)

    def truncated_second_moment(self, threshold: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if threshold < 0:
            raise DistributionError("threshold must be nonnegative")
        if threshold == 0.0:
            return self.variance + self.mean * self.mean

        def cubic(a: float, b: float) -> float:
            # integral of x^2 on [a, b] (degenerate intervals allowed)
            if b <= a:
                return 0.0
            return (b ** 3 - a ** 3) / 3.0

        width = self.high - self.low
        left = cubic(self.low, min(self.high, -threshold))
        right = cubic(max(self.low, threshold), self.high)
        return (left + right) / width

    def abs_moment(self, order: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if order < 1:
            raise DistributionError("moment order must be >= 1")

        def ramp(a: float, b: float) -> float:
            # integral of |x|^order on [a, b] with 0 <= a <= b
            return (b ** (order + 1.0) - a ** (order + 1.0)) / (order + 1.0)

        width = self.high - self.low
        if self.low >= 0:
            val = ramp(self.low, self.high)
        elif self.high <= 0:
            val = ramp(-self.high, -self.low)
        else:
            val = ramp(0.0, -self.low) + ramp(0.0, self.high)
        return val / width

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.uniform(self.low, self.high, size=size)


class _AtomicMixin:
    """Shared machinery for purely atomic laws with sorted atom arrays."""

    _values: np.ndarray
    _probs: np.ndarray
    _cum: np.ndarray

    def _init_atoms(self, values: Sequence[float], probs: Sequence[float]) -> None:
        vals = np.asarray(values, dtype=float)
        prb = np.asarray(probs, dtype=float)
        if vals.ndim != 1 or vals.shape != prb.shape or vals.size == 0:
            raise DistributionError("atoms need matching one-dimensional arrays")
        if np.any(prb < 0):
            raise DistributionError("atom probabilities must be nonnegative")
        total = float(prb.sum())
        if abs(total - 1.0) > 1e-9:
            raise DistributionError(f"atom probabilities sum to {total}, expected 1")
        order = np.argsort(vals, kind="stable")
        vals = vals[order]
        prb = prb[order]
        # merge duplicate atom values
        keep_vals = [vals[0]]
        keep_probs = [prb[0]]
        for v, p in zip(vals[1:], prb[1:]):
            if v == keep_vals[-1]:
                keep_probs[-1] += p
            else:
                keep_vals.append(v)
                keep_probs.append(p)
        self._values = np.asarray(keep_vals)
        self._probs = np.asarray(keep_probs)
        self._probs = self._probs / self._probs.sum()
        self._cum = np.cumsum(self._probs)
        self.mean = float(np.dot(self._values, self._probs))
        centered = self._values - self.mean
        self.variance = float(np.dot(centered * centered, self._probs))

    def cdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._values, x, side="left")
        cum = np.concatenate(([0.0], self._cum))
        out = cum[idx]
        return float(out) if out.ndim == 0 else out

    def prob_le(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._values, x, side="right")
        cum = np.concatenate(([0.0], self._cum))
        out = cum[idx]
        return float(out) if out.ndim == 0 else out

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        t = np.asarray(t, dtype=float)
        out = np.sum(
            self._probs * np.exp(1j * np.multiply.outer(t, self._values)), axis=-1
        )
        return complex(out) if np.ndim(out) == 0 else out

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._values.copy(), self._probs.copy()

    def support(self) -> Tuple[float, float]:
        return (float(self._values[0]), float(self._values[-1]))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.choice(self._values, size=size, p=self._probs)


class Rademacher(_AtomicMixin, ScalarDistribution):
    """Symmetric +-1 law."""

    family = "rademacher"

    def __init__(self):
        self._init_atoms([-1.0, 1.0], [0.5, 0.5])

    def descriptor(self) -> tuple:
        return ("rademacher",)

    def __repr__(self) -> str:
        return "Rademacher()"

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        draws = rng.integers(0, 2, size=size)
        return 2.0 * draws - 1.0


class TwoPoint(_AtomicMixin, ScalarDistribution):
    """Two-atom law: P(X = low) = p_low, P(X = high) = 1 - p_low."""

    family = "two-point"

    def __init__(self, low: float, high: float, p_low: float):
        if not low < high:
            raise DistributionError("two-point requires low < high")
        if not 0.0 < p_low < 1.0:
            raise DistributionError("p_low must lie in (0, 1)")
        self.p_low = float(p_low)
        self._init_atoms([low, high], [p_low, 1.0 - p_low])

    def descriptor(self) -> tuple:
        return ("two-point", float(self._values[0]), float(self._values[1]), self.p_low)

    def __repr__(self) -> str:
        return (
            f"TwoPoint({self._values[0]!r}, {self._values[1]!r}, p_low={self.p_low!r})"
        )


class FiniteDiscrete(_AtomicMixin, ScalarDistribution):
    """Finite atomic law given by atom values and probabilities."""

    family = "finite-discrete"

    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        self._init_atoms(values, probs)

    def descriptor(self) -> tuple:
        return ("finite-discrete", tuple(self._values.tolist()), tuple(self._probs.tolist()))

    def __repr__(self) -> str:
        return f"FiniteDiscrete({self._values.tolist()!r}, {self._probs.tolist()!r})"


class CenteredExponential(ScalarDistribution):
    """Exponential(rate) shifted to zero mean: X = E - 1/rate.

    Support is (-1/rate, inf); variance is 1/rate^2.
    """

    family = "exponential-centered"

    def __init__(self, rate: float = 1.0):
        if rate <= 0:
            raise DistributionError("rate must be positive")
        self.rate = float(rate)
        self.mean = 0.0
        self.variance = 1.0 / (self.rate * self.rate)
        self._shift = 1.0 / self.rate

    def descriptor(self) -> tuple:
        return ("exponential-centered", self.rate)

    def __repr__(self) -> str:
        return f"CenteredExponential(rate={self.rate!r})"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        y = self.rate * (x + self._shift)
        out = np.where(y > 0, -np.expm1(-np.maximum(y, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        y = self.rate * (x + self._shift)
        out = np.where(y >= 0, self.rate * np.exp(-np.maximum(y, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        t = np.asarray(t, dtype=float)
        out = np.exp(-1j * t * self._shift) / (1.0 - 1j * t / self.rate)
        return complex(out) if out.ndim == 0 else out

    def support(self) -> Tuple[float, float]:
        return (-self._shift, math.inf)

    def _quad_cut(self) -> Tuple[float, float]:
        # exp tail: e^{-60} ~ 9e-27 keeps moment tails far below tolerance
        return (-self._shift, -self._shift + 60.0 / self.rate)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.exponential(self._shift, size=size) - self._shift


class Scaled(ScalarDistribution):
    """Law of factor * X for a base law X.  ``factor`` must be nonzero."""

    family = "scaled"

    def __init__(self, base: ScalarDistribution, factor: float):
        if factor == 0:
            raise DistributionError("scale factor must be nonzero")
        self.base = base
        self.factor = float(factor)
        self.mean = self.factor * base.mean
        self.variance = self.factor * self.factor * base.variance

    def descriptor(self) -> tuple:
        return ("scaled", self.base.descriptor(), self.factor)

    def __repr__(self) -> str:
        return f"Scaled({self.base!r}, {self.factor!r})"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        if self.factor > 0:
            return self.base.cdf(x / self.factor)
        # P(cX < x) = P(X > x/c) = 1 - P(X <= x/c) for c < 0
        return 1.0 - self.base.prob_le(x / self.factor)

    def prob_le(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        if self.factor > 0:
            return self.base.prob_le(x / self.factor)
        return 1.0 - self.base.cdf(x / self.factor)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        x = np.asarray(x, dtype=float)
        return self.base.pdf(x / self.factor) / abs(self.factor)

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        return self.base.char_fn(np.asarray(t, dtype=float) * self.factor)

    def atoms(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        at = self.base.atoms()
        if at is None:
            return None
        vals, probs = at
        vals = vals * self.factor
        order = np.argsort(vals)
        return vals[order], probs[order]

    def support(self) -> Tuple[float, float]:
        lo, hi = self.base.support()
        a, b = lo * self.factor, hi * self.factor
        return (min(a, b), max(a, b))

    def truncated_second_moment(self, threshold: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if threshold < 0:
            raise DistributionError("threshold must be nonnegative")
        c2 = self.factor * self.factor
        return c2 * self.base.truncated_second_moment(
            threshold / abs(self.factor), epsabs=epsabs / c2 if c2 > 1 else epsabs
        )

    def abs_moment(self, order: float, *, epsabs: float = QUAD_ABS_TOL) -> float:
        if order < 1:
            raise DistributionError("moment order must be >= 1")
        return abs(self.factor) ** order * self.base.abs_moment(order, epsabs=epsabs)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return self.factor * self.base.sample(rng, size=size)


class Shifted(ScalarDistribution):
    """Law of X + offset for a base law X."""

    family = "shifted"

    def __init__(self, base: ScalarDistribution, offset: float):
        self.base = base
        self.offset = float(offset)
        self.mean = base.mean + self.offset
        self.variance = base.variance

    def descriptor(self) -> tuple:
        return ("shifted", self.base.descriptor(), self.offset)

    def __repr__(self) -> str:
        return f"Shifted({self.base!r}, {self.offset!r})"

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return self.base.cdf(np.asarray(x, dtype=float) - self.offset)

    def prob_le(self, x: ArrayLike) -> ArrayLike:
        return self.base.prob_le(np.asarray(x, dtype=float) - self.offset)

    def pdf(self, x: ArrayLike) -> ArrayLike:
        return self.base.pdf(np.asarray(x, dtype=float) - self.offset)

    def char_fn(self, t: ArrayLike) -> Union[complex, np.ndarray]:
        t = np.asarray(t, dtype=float)
        out = np.exp(1j * t * self.offset) * self.base.char_fn(t)
        return complex(out) if np.ndim(out) == 0 else out

    def atoms(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        at = self.base.atoms()
        if at is None:
            return None
        vals, probs = at
        return vals + self.offset, probs

    def support(self) -> Tuple[float, float]:
        lo, hi = self.base.support()
        return (lo + self.offset, hi + self.offset)

    def _quad_cut(self) -> Tuple[float, float]:
        lo, hi = self.base._quad_cut()
        return (lo + self.offset, hi + self.offset)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return self.base.sample(rng, size=size) + self.offset


def scale(dist: ScalarDistribution, factor: float) -> ScalarDistribution:
    """factor * X with closed-form reductions where the family permits."""
    if factor == 0:
        raise DistributionError("scale factor must be nonzero")
    if factor == 1.0:
        return dist
    if isinstance(dist, Normal):
        # keep an exact zero mean: inf * 0.0 would poison it with nan
        new_mean = factor * dist.mean if dist.mean != 0.0 else 0.0
        return Normal(new_mean, factor * factor * dist.variance)
    if isinstance(dist, Uniform):
        a, b = factor * dist.low, factor * dist.high
        return Uniform(min(a, b), max(a, b))
    if isinstance(dist, Rademacher):
        return TwoPoint(-abs(factor), abs(factor), 0.5)
    if isinstance(dist, (TwoPoint, FiniteDiscrete)):
        vals, probs = dist.atoms()
        return FiniteDiscrete(vals * factor, probs)
    if isinstance(dist, CenteredExponential) and factor > 0:
        return CenteredExponential(dist.rate / factor)
    if isinstance(dist, Scaled):
        return scale(dist.base, dist.factor * factor)
    return Scaled(dist, factor)


def shift(dist: ScalarDistribution, offset: float) -> ScalarDistribution:
    """X + offset with closed-form reductions where the family permits."""
    if offset == 0.0:
        return dist
    if isinstance(dist, Normal):
        return Normal(dist.mean + offset, dist.variance)
    if isinstance(dist, Uniform):
        return Uniform(dist.low + offset, dist.high + offset)
    if isinstance(dist, (Rademacher, TwoPoint, FiniteDiscrete)):
        vals, probs = dist.atoms()
        return FiniteDiscrete(vals + offset, probs)
    if isinstance(dist, Shifted):
        return shift(dist.base, dist.offset + offset)
    return Shifted(dist, offset)


def distribution_from_config(cfg: dict) -> ScalarDistribution:
    """Build a ScalarDistribution from a config mapping.

    Recognized forms (keys beyond the listed ones are rejected upstream):
      {"family": "normal", "mean": 0, "var": 1}
      {"family": "uniform", "low": -1, "high": 1}
      {"family": "rademacher"}
      {"family": "two-point", "low": -1, "high": 1, "p_low": 0.5}
      {"family": "exponential-centered", "rate": 1}
      {"family": "finite-discrete", "values": [...], "probs": [...]}
      {"family": "scaled", "base": {...}, "factor": c}
      {"family": "shifted", "base": {...}, "offset": h}
    """
    family = cfg.get("family")
    if family == "normal":
        return Normal(cfg.get("mean", 0.0), cfg.get("var", 1.0))
    if family == "uniform":
        return Uniform(cfg["low"], cfg["high"])
    if family == "rademacher":
        return Rademacher()
    if family == "two-point":
        return TwoPoint(cfg["low"], cfg["high"], cfg.get("p_low", 0.5))
    if family == "exponential-centered":
        return CenteredExponential(cfg.get("rate", 1.0))
    if family == "finite-discrete":
        return FiniteDiscrete(cfg["values"], cfg["probs"])
    if family == "scaled":
        return Scaled(distribution_from_config(cfg["base"]), cfg["factor"])
    if family == "shifted":
        return Shifted(distribution_from_config(cfg["base"]), cfg["offset"])
    raise DistributionError(f"unknown distribution family {family!r}")


# ---------------------------------------------------------------------------
# Random indices on {1, 2, ...}
# ---------------------------------------------------------------------------


class RandomIndex:
    """Positive integer-valued random variable, independent of summands."""

    family: str = "abstract"

    mean: float

    def pmf(self, k: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def support_max(self) -> float:
        """Largest support point (may be inf)."""
        return math.inf

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        raise NotImplementedError

    def tail_mass(self, k: int) -> float:
        """P(index > k)."""
        raise NotImplementedError

    def truncation(self, eta: float) -> int:
        """Smallest K >= 1 with P(index > K) <= eta."""
        if not 0.0 < eta < 1.0:
            raise DistributionError("eta must lie in (0, 1)")
        k = self._truncation_guess(eta)
        k = max(k, 1)
        while self.tail_mass(k) > eta:
            k += 1
        while k > 1 and self.tail_mass(k - 1) <= eta:
            k -= 1
        return k

    def _truncation_guess(self, eta: float) -> int:
        return 1

    def descriptor(self) -> tuple:
        raise NotImplementedError


class Deterministic(RandomIndex):
    """Index equal to a fixed k with probability one."""

    family = "deterministic"

    def __init__(self, k: int):
        if k < 1 or int(k) != k:
            raise DistributionError("deterministic index requires integer k >= 1")
        self.k = int(k)
        self.mean = float(k)

    def descriptor(self) -> tuple:
        return ("deterministic", self.k)

    def __repr__(self) -> str:
        return f"Deterministic({self.k})"

    def pmf(self, k: ArrayLike) -> ArrayLike:
        k = np.asarray(k)
        out = np.where(k == self.k, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def support_max(self) -> float:
        return float(self.k)

    def tail_mass(self, k: int) -> float:
        return 0.0 if k >= self.k else 1.0

    def _truncation_guess(self, eta: float) -> int:
        return self.k

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        if size is None:
            return self.k
        return np.full(size, self.k, dtype=np.int64)


class ShiftedPoisson(RandomIndex):
    """1 + Poisson(mean - 1): Poisson law pushed onto {1, 2, ...}."""

    family = "poisson"

    def __init__(self, mean: float):
        if mean <= 1.0:
            raise DistributionError("shifted Poisson requires mean > 1")
        self.mean = float(mean)
        self.lam = self.mean - 1.0

    def descriptor(self) -> tuple:
        return ("poisson", self.mean)

    def __repr__(self) -> str:
        return f"ShiftedPoisson(mean={self.mean!r})"

    def pmf(self, k: ArrayLike) -> ArrayLike:
        k = np.asarray(k)
        m = k - 1
        valid = m >= 0
        mm = np.where(valid, m, 0)
        log_p = -self.lam + mm * math.log(self.lam) - gammaln(mm + 1.0)
        out = np.where(valid, np.exp(log_p), 0.0)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, k: int) -> float:
        from scipy.stats import poisson

        if k < 1:
            return 1.0
        return float(poisson.sf(k - 1, self.lam))

    def _truncation_guess(self, eta: float) -> int:
        from scipy.stats import poisson

        return int(poisson.ppf(1.0 - eta, self.lam)) + 1

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.poisson(self.lam, size=size) + 1


class Geometric(RandomIndex):
    """Geometric law on {1, 2, ...}: pmf(k) = p (1-p)^(k-1), mean 1/p."""

    family = "geometric"

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise DistributionError("geometric parameter p must lie in (0, 1)")
        self.p = float(p)
        self.mean = 1.0 / self.p

    @classmethod
    def from_mean(cls, mean: float) -> "Geometric":
        if mean <= 1.0:
            raise DistributionError("geometric mean must exceed 1")
        return cls(1.0 / mean)

    def descriptor(self) -> tuple:
        return ("geometric", self.p)

    def __repr__(self) -> str:
        return f"Geometric(p={self.p!r})"

    def pmf(self, k: ArrayLike) -> ArrayLike:
        k = np.asarray(k)
        valid = k >= 1
        kk = np.where(valid, k, 1)
        out = np.where(valid, self.p * np.power(1.0 - self.p, kk - 1), 0.0)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, k: int) -> float:
        if k < 1:
            return 1.0
        # P(index > k) = (1-p)^k
        return (1.0 - self.p) ** k

    def _truncation_guess(self, eta: float) -> int:
        return max(1, math.ceil(math.log(eta) / math.log1p(-self.p)))

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.geometric(self.p, size=size)


class ShiftedNegativeBinomial(RandomIndex):
    """1 + NB(r, p) where NB counts failures before the r-th success."""

    family = "negative-binomial"

    def __init__(self, r: float, p: float):
        if r <= 0:
            raise DistributionError("negative binomial requires r > 0")
        if not 0.0 < p < 1.0:
            raise DistributionError("negative binomial requires p in (0, 1)")
        self.r = float(r)
        self.p = float(p)
        self.mean = 1.0 + self.r * (1.0 - self.p) / self.p

    @classmethod
    def from_mean(cls, mean: float, r: float = 2.0) -> "ShiftedNegativeBinomial":
        if mean <= 1.0:
            raise DistributionError("negative binomial mean must exceed 1")
        p = r / (r + mean - 1.0)
        return cls(r, p)

    def descriptor(self) -> tuple:
        return ("negative-binomial", self.r, self.p)

    def __repr__(self) -> str:
        return f"ShiftedNegativeBinomial(r={self.r!r}, p={self.p!r})"

    def pmf(self, k: ArrayLike) -> ArrayLike:
        from scipy.stats import nbinom

        k = np.asarray(k)
        out = np.where(k >= 1, nbinom.pmf(np.maximum(k - 1, 0), self.r, self.p), 0.0)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, k: int) -> float:
        from scipy.stats import nbinom

        if k < 1:
            return 1.0
        return float(nbinom.sf(k - 1, self.r, self.p))

    def _truncation_guess(self, eta: float) -> int:
        from scipy.stats import nbinom

        return int(nbinom.ppf(1.0 - eta, self.r, self.p)) + 1

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.negative_binomial(self.r, self.p, size=size) + 1


class FiniteIndex(RandomIndex):
    """Index with finite support {k_i} and explicit probabilities."""

    family = "finite"

    def __init__(self, values: Sequence[int], probs: Sequence[float]):
        vals = np.asarray(values, dtype=np.int64)
        prb = np.asarray(probs, dtype=float)
        if vals.ndim != 1 or vals.shape != prb.shape or vals.size == 0:
            raise DistributionError("finite index needs matching value/prob arrays")
        if np.any(vals < 1):
            raise DistributionError("index values must be >= 1")
        if np.any(prb < 0) or abs(prb.sum() - 1.0) > 1e-9:
            raise DistributionError("probabilities must be nonnegative and sum to 1")
        order = np.argsort(vals)
        self._values = vals[order]
        self._probs = prb[order] / prb.sum()
        if np.any(np.diff(self._values) == 0):
            raise DistributionError("index values must be distinct")
        self._cum = np.cumsum(self._probs)
        self.mean = float(np.dot(self._values, self._probs))

    def descriptor(self) -> tuple:
        return ("finite", tuple(self._values.tolist()), tuple(self._probs.tolist()))

    def __repr__(self) -> str:
        return f"FiniteIndex({self._values.tolist()!r}, {self._probs.tolist()!r})"

    def pmf(self, k: ArrayLike) -> ArrayLike:
        k = np.asarray(k)
        idx = np.searchsorted(self._values, k)
        idx = np.clip(idx, 0, len(self._values) - 1)
        out = np.where(self._values[idx] == k, self._probs[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def support_max(self) -> float:
        return float(self._values[-1])

    def tail_mass(self, k: int) -> float:
        idx = np.searchsorted(self._values, k, side="right")
        return float(1.0 - (self._cum[idx - 1] if idx > 0 else 0.0))

    def _truncation_guess(self, eta: float) -> int:
        return int(self._values[0])

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        return rng.choice(self._values, size=size, p=self._probs)


def index_from_config(cfg: dict, n: Optional[int] = None) -> RandomIndex:
    """Build a RandomIndex from a config mapping.

    Integer-valued fields accept the literal string "n", resolved against
    the row parameter at evaluation time.
    """

    def resolve(value):
        if isinstance(value, str):
            if value == "n":
                if n is None:
                    raise DistributionError('index parameter "n" needs a row context')
                return n
            raise DistributionError(f"cannot resolve index parameter {value!r}")
        return value

    family = cfg.get("family")
    if family == "deterministic":
        return Deterministic(int(resolve(cfg.get("k", "n"))))
    if family == "poisson":
        return ShiftedPoisson(float(resolve(cfg.get("mean", "n"))))
    if family == "geometric":
        if "p" in cfg:
            return Geometric(float(cfg["p"]))
        return Geometric.from_mean(float(resolve(cfg.get("mean", "n"))))
    if family == "negative-binomial":
        r = float(cfg.get("r", 2.0))
        if "p" in cfg:
            return ShiftedNegativeBinomial(r, float(cfg["p"]))
        return ShiftedNegativeBinomial.from_mean(float(resolve(cfg.get("mean", "n"))), r=r)
    if family == "finite":
        values = [int(resolve(v)) for v in cfg["values"]]
        return FiniteIndex(values, cfg["probs"])
    raise DistributionError(f"unknown index family {family!r}")
