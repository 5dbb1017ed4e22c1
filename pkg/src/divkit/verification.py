"""Numeric evidence for the scalar claims behind the chains.

Auxiliary functions (m1..m3, k1..k7 and the bracketed scalar inequalities)
are scanned for non-negativity; g-ratios of difference generators are
scanned for the increasing-then-decreasing pattern about x = 1 and their
limits at 1 are extrapolated. Grid scans replace plots: every scan returns a
ScanReport and can export its (x, value) samples.
"""

from __future__ import annotations

from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from pydantic import BaseModel

from . import DomainError, ExtrapolationError, UnknownIdentifier
from .config import (
    DEFAULT_DIMS,
    DEFAULT_GRID_MAX,
    DEFAULT_GRID_MIN,
    DEFAULT_GRID_POINTS,
    DEFAULT_SCAN_TOLERANCE,
    LIMIT_TOLERANCE,
    MONOTONE_GRID_MAX,
    MONOTONE_GRID_MIN,
    MONOTONE_SLACK,
    ONE_EXCLUSION,
    RICHARDSON_OFFSETS,
    ROUNDING_FACTOR,
)
from .core import logger, ordered_map
from .differences import (
    ChainTerm,
    Combination,
    DifferenceId,
    InequalityChain,
    CLOSED_FORM_SECONDS,
    difference_generator_second,
    generator_second_parts,
)
from .distributions import DistributionPair, PairBatch, sample_pair_batch
from .generators import Generator, GridSpec, RatioBounds, csiszar_divergence, ratio_extrema
from .measures import MeasureId, NormalizedMeasure, profile

EPS = float(np.finfo(float).eps)

DEFAULT_GRID = GridSpec(x_min=DEFAULT_GRID_MIN, x_max=DEFAULT_GRID_MAX, points=DEFAULT_GRID_POINTS)
MONOTONE_GRID = GridSpec(x_min=MONOTONE_GRID_MIN, x_max=MONOTONE_GRID_MAX, points=DEFAULT_GRID_POINTS)
CONSISTENCY_GRID = GridSpec(x_min=1e-3, x_max=1e3, points=61)


class AuxFunctionId(str, Enum):
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    K1 = "k1"
    K2 = "k2"
    K2_PLUS3 = "k2_plus3"
    K2_DERIVED = "k2_derived"
    K3 = "k3"
    K4 = "k4"
    K5 = "k5"
    K6 = "k6"
    K7 = "k7"
    INEQ15 = "ineq15"
    INEQ16 = "ineq16"
    INEQ17 = "ineq17"
    INEQ18 = "ineq18"
    # no ineq19: that combined bound is certified jointly by ineq20 to ineq22
    INEQ20 = "ineq20"
    INEQ21 = "ineq21"
    INEQ22 = "ineq22"


K2_CANDIDATES = (AuxFunctionId.K2, AuxFunctionId.K2_PLUS3, AuxFunctionId.K2_DERIVED)


# Each auxiliary function is a difference of two nonnegative parts; the
# larger part sets the scale of the rounding error.


def _k1(x):
    r = x**0.5
    pos = x**3 + 1 + 4 * (2 * x * (x + 1)) ** 0.5 * (r + 1) * (x + 1)
    neg = 8 * x**2.5 + 5 * x**2 + 8 * x**1.5 + 5 * x + 8 * r
    return pos, neg


def _k2_family(x2_coefficient, constant):
    def parts(x):
        r = x**0.5
        pos = x2_coefficient * x**2 + 6 * x + constant
        neg = x**1.5 + r + (x + 1) * (r + 1) * (2 * x + 2) ** 0.5
        return pos, neg

    return parts


def _k3(x):
    r = x**0.5
    pos = 2 * (x**2 + 1) * (x**2 + x + 1) + 2 * r * (x + 1) * (x**2 + 7 * x + 1)
    neg = (x + 1) * (x**2 + 4 * x + 1) * (r + 1) * (2 * x + 2) ** 0.5
    return pos, neg


def _k4(x):
    r = x**0.5
    lead = 12 * r * (r + 1) * (x + 1) ** 2
    pos = (2 * x + 2) ** 2.5 * (
        1 + 4 * x + 10 * x**2 + 52 * x**3 + 58 * x**4 + 52 * x**5 + 10 * x**6 + 4 * x**7 + x**8
    ) + lead * r * (x**2 + 1) * (x**4 + 3 * x**3 + 3 * x + 1)
    neg = lead * (x + 1) * (x**6 + 4 * x**5 + 6 * x**4 + 18 * x**3 + 6 * x**2 + 4 * x + 1)
    return pos, neg


def _k5(x):
    pos = 8 * (x**4 + 3 * x**2.5 + 3 * x**1.5 + 1)
    neg = (x**1.5 + 1) * (2 * x + 2) ** 2.5
    return pos, neg


def _k6(x):
    r = x**0.5
    pos = (2 * x + 2) ** 2.5 * (x**4 + 4 * x**2 + 1)
    neg = 4 * x**2 * (3 * x**4 + 4 * x**3 + 4 * x**2 + 7 * x + 6) + 4 * r * (
        3 + 4 * x + 4 * x**2 + 7 * x**3 + 6 * x**4
    )
    return pos, neg


def _k7(x):
    pos = 2 * (x**3.5 + 3 * x**2.5 + 4 * x**2 + 4 * x**1.5 + 3 * x + 1)
    neg = x**0.5 * (2 * x + 2) ** 2.5
    return pos, neg


def _m1(x):
    return ((x**3 + 1) / 2) * ((x + 1) / 2) ** 1.5, x**1.5 * (x**1.5 + 1) / 2


def _m2(x):
    return ((x**2 + 1) / 2) * ((x + 1) / 2) ** 0.5, x**0.5 * (x**1.5 + 1) / 2


def _m3(x):
    return ((x + 1) / 2) ** 2.5, x**0.5 * (x**1.5 + 1) / 2


def _ineq15(x):
    return (x**1.5 + 1) / 2, ((x + 1) / 2) ** 1.5


def _ineq16(x):
    return (x**1.5 + 1) / 2, x**0.5 * ((x + 1) / 2) ** 0.5


def _ineq18(x):
    return (x**1.5 + 1) / 2, ((x + 1) / 2) * ((x**0.5 + 1) / 2)


def _ineq20(x):
    return (x**1.5 + 1) / 2, ((x**0.5 + 1) / 2) ** 3


def _ineq21(x):
    return ((x**0.5 + 1) / 2) ** 3 * ((x + 1) / 2) ** 1.5, x**1.5


_PARTS: Dict[AuxFunctionId, Callable[[Any], Tuple[Any, Any]]] = {
    AuxFunctionId.M1: _m1,
    AuxFunctionId.M2: _m2,
    AuxFunctionId.M3: _m3,
    AuxFunctionId.K1: _k1,
    AuxFunctionId.K2: _k2_family(1, 2),
    AuxFunctionId.K2_PLUS3: _k2_family(1, 3),
    AuxFunctionId.K2_DERIVED: _k2_family(2, 2),
    AuxFunctionId.K3: _k3,
    AuxFunctionId.K4: _k4,
    AuxFunctionId.K5: _k5,
    AuxFunctionId.K6: _k6,
    AuxFunctionId.K7: _k7,
    AuxFunctionId.INEQ15: _ineq15,
    AuxFunctionId.INEQ16: _ineq16,
    AuxFunctionId.INEQ18: _ineq18,
    AuxFunctionId.INEQ20: _ineq20,
    AuxFunctionId.INEQ21: _ineq21,
}


def _min_of_gaps(*gaps: Tuple[Any, Any]) -> Tuple[np.ndarray, np.ndarray]:
    values = np.min([np.asarray(pos - neg, dtype=float) for pos, neg in gaps], axis=0)
    scale = np.max(
        [np.maximum(np.abs(np.asarray(pos, dtype=float)), np.abs(np.asarray(neg, dtype=float))) for pos, neg in gaps],
        axis=0,
    )
    return values, scale


def _ineq17(x):
    # sqrt(x) sqrt(m) <= a^2 sqrt(m) <= m a, with a = (sqrt x + 1)/2, m = (x+1)/2
    a = (x**0.5 + 1) / 2
    m = (x + 1) / 2
    middle = a**2 * m**0.5
    return _min_of_gaps((middle, x**0.5 * m**0.5), (m * a, middle))


def _ineq22(x):
    a3 = ((x**0.5 + 1) / 2) ** 3
    m32 = ((x + 1) / 2) ** 1.5
    return _min_of_gaps(_ineq21(x), (((x**1.5 + 1) / 2) * m32, a3 * m32))


def _check_positive(x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("auxiliary functions are defined for x > 0 only")
    return arr


def aux_parts(fid: AuxFunctionId, x: Any) -> Tuple[np.ndarray, np.ndarray]:
    """(value, magnitude) of an auxiliary function; value >= 0 is the claim."""
    arr = _check_positive(x)
    fid = AuxFunctionId(fid)
    if fid is AuxFunctionId.INEQ17:
        return _ineq17(arr)
    if fid is AuxFunctionId.INEQ22:
        return _ineq22(arr)
    pos, neg = _PARTS[fid](arr)
    return pos - neg, np.maximum(np.abs(pos), np.abs(neg))


def aux_function(fid: AuxFunctionId, x: Any) -> Any:
    value, _ = aux_parts(fid, x)
    return float(value) if np.ndim(x) == 0 else value


class GRatioId(str, Enum):
    """Second-derivative ratio f''_num / f''_den with its limit at x = 1."""

    HDELTA_DDELTA = "hDelta_dDelta"
    DDELTA_DH = "dDelta_dh"
    DH_DI = "dh_dI"
    DI_HI = "dI_hI"
    TH_TD = "Th_Td"
    TD_PSIDELTA = "Td_PsiDelta"
    PSIH_PSID = "Psih_Psid"
    PSID_PSIT = "Psid_PsiT"
    TD_JD = "Td_Jd"

    @property
    def numerator(self) -> DifferenceId:
        return DifferenceId.parse(self.value.split("_")[0])

    @property
    def denominator(self) -> DifferenceId:
        return DifferenceId.parse(self.value.split("_")[1])

    @property
    def limit(self) -> Fraction:
        return _LIMITS[self]


_LIMITS = {
    GRatioId.HDELTA_DDELTA: Fraction(4, 5),
    GRatioId.DDELTA_DH: Fraction(5),
    GRatioId.DH_DI: Fraction(3, 7),
    GRatioId.DI_HI: Fraction(7, 4),
    GRatioId.TH_TD: Fraction(4, 3),
    GRatioId.TD_PSIDELTA: Fraction(3, 16),
    GRatioId.PSIH_PSID: Fraction(12, 11),
    GRatioId.PSID_PSIT: Fraction(11, 8),
    GRatioId.TD_JD: Fraction(9),
}


def parse_function(text: str) -> Union[AuxFunctionId, GRatioId]:
    """'m1', 'k2_derived', 'ineq17' or 'g:Td_Jd'."""
    key = text.strip()
    try:
        if key.startswith("g:"):
            return GRatioId(key[2:])
        return AuxFunctionId(key)
    except ValueError:
        raise UnknownIdentifier(f"unknown scan function {text!r}") from None


def function_label(fid: Union[AuxFunctionId, GRatioId]) -> str:
    return f"g:{fid.value}" if isinstance(fid, GRatioId) else fid.value


def _rounding_bound(diff: DifferenceId, x: np.ndarray, value: np.ndarray) -> np.ndarray:
    """Relative rounding error of a difference generator near cancellation."""
    high, low = generator_second_parts(diff, x)
    with np.errstate(divide="ignore"):
        return ROUNDING_FACTOR * EPS * (np.abs(high) + np.abs(low)) / np.abs(value)


def g_ratio(gid: GRatioId, x: Any) -> Any:
    """difference_generator_second(num, x) / difference_generator_second(den, x)."""
    gid = GRatioId(gid)
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("g-ratios are defined for x > 0 only")
    if np.any(np.abs(arr - 1.0) <= 1e-12):
        raise DomainError("g-ratio is 0/0 at x = 1; use g_limit_at_one")
    value = difference_generator_second(gid.numerator, arr) / difference_generator_second(
        gid.denominator, arr
    )
    return float(value) if np.ndim(x) == 0 else value


def _g_with_error(gid: GRatioId, xs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    num = difference_generator_second(gid.numerator, xs)
    den = difference_generator_second(gid.denominator, xs)
    g = num / den
    rel = _rounding_bound(gid.numerator, xs, num) + _rounding_bound(gid.denominator, xs, den)
    return g, np.abs(g) * rel


def richardson_limit(
    estimate: Callable[[float], float],
    offsets: Sequence[float] = RICHARDSON_OFFSETS,
    p: int = 2,
) -> float:
    """Extrapolate estimate(h) to h -> 0 for offsets shrinking by a constant ratio.

    Each tableau column removes the next even power of h. Raises
    ExtrapolationError when the last correction does not shrink.
    """
    if len(offsets) < 2:
        raise ExtrapolationError("need at least two offsets")
    r = offsets[0] / offsets[1]
    vals = [float(estimate(h)) for h in offsets]
    if not all(np.isfinite(vals)):
        raise ExtrapolationError("non-finite estimate")
    corrections: List[float] = []
    for j in range(1, len(vals)):
        factor = r ** (p * j)
        for k in range(len(vals) - 1, j - 1, -1):
            updated = (factor * vals[k] - vals[k - 1]) / (factor - 1.0)
            if k == len(vals) - 1:
                corrections.append(abs(updated - vals[k]))
            vals[k] = updated
    best = vals[-1]
    scale = max(1.0, abs(best))
    if len(corrections) >= 2 and corrections[-1] > corrections[-2] and corrections[-1] > LIMIT_TOLERANCE * scale:
        raise ExtrapolationError(
            f"successive corrections grow ({corrections[-2]:.3e} -> {corrections[-1]:.3e})"
        )
    return best


def g_limit_at_one(gid: GRatioId, offsets: Sequence[float] = RICHARDSON_OFFSETS) -> float:
    """Limit of g at x = 1 from symmetric averages (g(1+h) + g(1-h))/2."""
    gid = GRatioId(gid)

    def symmetric(h: float) -> float:
        return 0.5 * (g_ratio(gid, 1.0 + h) + g_ratio(gid, 1.0 - h))

    return richardson_limit(symmetric, offsets)


class ScanReport(BaseModel):
    """Outcome of one grid scan.

    Every scan reduces to a margin that must stay >= 0 (the function value,
    a monotone increment, or tolerance minus error); ``min_value`` is the
    smallest margin seen and ``negative_count`` the number of violations.
    """

    function: str
    kind: str
    grid: GridSpec
    min_value: float
    argmin: float
    negative_count: int
    passed: bool
    max_value: Optional[float] = None
    arg_max: Optional[float] = None
    limit: Optional[float] = None
    measured_limit: Optional[float] = None
    notes: str = ""


def _chunked(func: Callable[[np.ndarray], Any], xs: np.ndarray, workers: Optional[int]) -> List[Any]:
    chunks = [c for c in np.array_split(xs, max(1, min(8, xs.size // 4096 or 1))) if c.size]
    return ordered_map(func, chunks, workers)


def nonnegativity_scan(
    fid: AuxFunctionId,
    grid: GridSpec = DEFAULT_GRID,
    tol: float = DEFAULT_SCAN_TOLERANCE,
    *,
    workers: Optional[int] = None,
) -> ScanReport:
    """Pass iff value >= -tol * max(1, local magnitude) at every grid point."""
    fid = AuxFunctionId(fid)
    xs = grid.values()
    parts = _chunked(lambda chunk: aux_parts(fid, chunk), xs, workers)
    values = np.concatenate([v for v, _ in parts])
    scale = np.concatenate([m for _, m in parts])
    negatives = values < -tol * np.maximum(1.0, scale)
    i_min = int(np.argmin(values))
    report = ScanReport(
        function=fid.value,
        kind="nonnegativity",
        grid=grid,
        min_value=float(values[i_min]),
        argmin=float(xs[i_min]),
        negative_count=int(np.count_nonzero(negatives)),
        passed=not bool(np.any(negatives)),
    )
    logger.info("scan finished", function=report.function, min=report.min_value, passed=report.passed)
    return report


def g_monotonicity_scan(
    gid: GRatioId,
    grid: GridSpec = MONOTONE_GRID,
    *,
    with_limit: bool = False,
    slack: float = MONOTONE_SLACK,
) -> ScanReport:
    """g nondecreasing on (0, 1), nonincreasing on (1, inf), and sup g <= g(1).

    Increments are allowed to dip by ``slack`` plus the propagated rounding
    error, which dominates within about 1e-3 of x = 1.
    """
    gid = GRatioId(gid)
    xs = grid.values_excluding(1.0, ONE_EXCLUSION)
    g, err = _g_with_error(gid, xs)
    left = xs < 1.0
    margins = []
    where = []
    for mask, sign in ((left, 1.0), (~left, -1.0)):
        gs, es, xm = g[mask], err[mask], xs[mask]
        if gs.size < 2:
            continue
        step = sign * np.diff(gs) + es[1:] + es[:-1]
        margins.append(step)
        where.append(xm[1:])
    margin = np.concatenate(margins) if margins else np.zeros(1)
    at = np.concatenate(where) if where else np.ones(1)
    violations = int(np.count_nonzero(margin < -slack))
    i_min = int(np.argmin(margin))
    i_max = int(np.argmax(g))
    limit = float(gid.limit)
    sup_ok = g[i_max] <= limit * (1.0 + LIMIT_TOLERANCE) + err[i_max]
    report = ScanReport(
        function=function_label(gid),
        kind="monotonicity",
        grid=grid,
        min_value=float(margin[i_min]),
        argmin=float(at[i_min]),
        negative_count=violations,
        passed=violations == 0 and bool(sup_ok),
        max_value=float(g[i_max]),
        arg_max=float(xs[i_max]),
        limit=limit,
        notes="" if sup_ok else "sampled sup exceeds the limit at x = 1",
    )
    if with_limit:
        measured = g_limit_at_one(gid)
        report.measured_limit = measured
        if abs(measured - limit) > LIMIT_TOLERANCE * abs(limit):
            report.passed = False
            report.notes = f"limit {measured!r} differs from {gid.limit}"
    logger.info("scan finished", function=report.function, min=report.min_value, passed=report.passed)
    return report


def scan_function(
    fid: Union[AuxFunctionId, GRatioId],
    grid: Optional[GridSpec] = None,
    tol: float = DEFAULT_SCAN_TOLERANCE,
    *,
    with_limit: bool = False,
) -> ScanReport:
    if isinstance(fid, GRatioId):
        return g_monotonicity_scan(fid, grid or MONOTONE_GRID, with_limit=with_limit)
    return nonnegativity_scan(fid, grid or DEFAULT_GRID, tol)


def plot_data(fid: Union[AuxFunctionId, GRatioId], grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """(x, value) samples of a scan function; g-ratios skip the 0/0 point."""
    if isinstance(fid, GRatioId):
        xs = grid.values_excluding(1.0, ONE_EXCLUSION)
        return xs, g_ratio(fid, xs)
    xs = grid.values()
    return xs, aux_function(fid, xs)


def proposition_chain(gid: GRatioId) -> InequalityChain:
    """D_num <= g(1) * D_den, the bound a g-ratio certifies."""
    gid = GRatioId(gid)
    return InequalityChain(
        f"prop_{gid.value}",
        (
            ChainTerm.of_difference(1, gid.numerator),
            ChainTerm.of_difference(gid.limit, gid.denominator),
        ),
    )


def proposition_chains() -> List[InequalityChain]:
    return [proposition_chain(gid) for gid in GRatioId]


def generator_consistency(
    family: str,
    s: float,
    grid: GridSpec = CONSISTENCY_GRID,
    tol: float = 1e-6,
) -> ScanReport:
    """Closed-form second derivative vs an mpmath central difference of the value."""
    gen = Generator(family=family, s=s)
    xs = grid.values()
    closed = np.asarray(gen.second(xs), dtype=float)
    numeric = np.array([gen.numeric_second(float(x)) for x in xs])
    err = np.abs(closed - numeric) / np.abs(numeric)
    margin = tol - err
    i_min = int(np.argmin(margin))
    return ScanReport(
        function=gen.label,
        kind="consistency",
        grid=grid,
        min_value=float(margin[i_min]),
        argmin=float(xs[i_min]),
        negative_count=int(np.count_nonzero(margin < 0)),
        passed=bool(np.all(margin >= 0)),
        max_value=float(err.max()),
        arg_max=float(xs[int(np.argmax(err))]),
    )


def power_mean_scan(
    grid: GridSpec = DEFAULT_GRID,
    orders: Sequence[float] = (0.5, 1.0, 1.5, 2.0),
    tol: float = DEFAULT_SCAN_TOLERANCE,
) -> ScanReport:
    """((x^s + 1)/2)^(1/s) nondecreasing in s at every grid point."""
    xs = grid.values()
    means = [((xs**s + 1) / 2) ** (1 / s) for s in sorted(orders)]
    steps = np.stack([b - a for a, b in zip(means, means[1:])])
    scale = np.maximum(1.0, np.stack(means[1:]))
    bad = steps < -tol * scale
    k, i = np.unravel_index(int(np.argmin(steps)), steps.shape)
    return ScanReport(
        function="power_mean",
        kind="monotonicity",
        grid=grid,
        min_value=float(steps[k, i]),
        argmin=float(xs[i]),
        negative_count=int(np.count_nonzero(bad)),
        passed=not bool(np.any(bad)),
    )


def _g_dh_di_mp(x):
    return CLOSED_FORM_SECONDS["dh"](x) / CLOSED_FORM_SECONDS["dI"](x)


def k2_prefactor(x: Any) -> Any:
    """g'_{dh,dI}(x) = k2_prefactor(x) * k2(x) for the correct k2."""
    r = x**0.5
    bracket = (x**1.5 + 1) - (2 * x * (x + 1)) ** 0.5
    return -(r - 1) * (2 * x + 2) ** 0.5 / (4 * r * (x + 1) * bracket**2)


def k2_factorization_residual(candidate: AuxFunctionId, x: float, dps: int = 40) -> float:
    """Relative gap between d/dx g_{dh,dI} and k2_prefactor * candidate, in mpmath."""
    candidate = AuxFunctionId(candidate)
    if candidate not in K2_CANDIDATES:
        raise UnknownIdentifier(f"{candidate.value} is not a k2 candidate")
    if x <= 0 or abs(x - 1.0) <= 1e-12:
        raise DomainError("the factorization is checked for x > 0, x != 1")
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        derivative = mpmath.diff(_g_dh_di_mp, xm)
        pos, neg = _PARTS[candidate](xm)
        predicted = k2_prefactor(xm) * (pos - neg)
        return float(abs(derivative - predicted) / abs(derivative))


def mixture_convexity(
    fn: Callable[[PairBatch], np.ndarray],
    first: PairBatch,
    second: PairBatch,
    lambdas: Iterable[float] = (0.25, 0.5, 0.75),
) -> float:
    """min over lambda and rows of lam f(1) + (1-lam) f(2) - f(mixture); >= 0 if convex."""
    f1 = np.asarray(fn(first), dtype=float)
    f2 = np.asarray(fn(second), dtype=float)
    worst = np.inf
    for lam in lambdas:
        mixed = np.asarray(fn(first.mix(second, lam)), dtype=float)
        worst = min(worst, float(np.min(lam * f1 + (1 - lam) * f2 - mixed)))
    return worst


class LemmaCertificate(BaseModel):
    bounds: RatioBounds
    pairs: int
    worst_violation: float


def lemma_certificate(f1: Generator, f2: Generator, grid: GridSpec, batch: PairBatch) -> LemmaCertificate:
    """m C_f2 <= C_f1 <= M C_f2 on the pairs whose ratios stay inside the grid.

    worst_violation is the largest amount by which either side is broken
    (<= 0 when the certificate holds).
    """
    bounds = ratio_extrema(f1.second, f2.second, grid)
    ratios = batch.p / batch.q
    inside = np.all((ratios >= grid.x_min) & (ratios <= grid.x_max), axis=1)
    if not np.any(inside):
        return LemmaCertificate(bounds=bounds, pairs=0, worst_violation=-np.inf)
    kept = PairBatch(batch.p[inside], batch.q[inside])
    c1 = csiszar_divergence(f1, kept)
    c2 = csiszar_divergence(f2, kept)
    violation = np.maximum(bounds.m * c2 - c1, c1 - bounds.M * c2)
    return LemmaCertificate(bounds=bounds, pairs=int(inside.sum()), worst_violation=float(violation.max()))


class Witness(BaseModel):
    p: List[float]
    q: List[float]
    lhs: float
    rhs: float


class SearchResult(BaseModel):
    lhs: str
    rhs: str
    samples: int
    less: Optional[Witness] = None
    greater: Optional[Witness] = None

    @property
    def exhausted(self) -> bool:
        return self.less is None or self.greater is None


SearchSide = Union[ChainTerm, Tuple[Union[int, Fraction], Union[DifferenceId, Combination]]]


def _as_term(side: SearchSide) -> ChainTerm:
    if isinstance(side, ChainTerm):
        return side
    coefficient, term = side
    if isinstance(term, DifferenceId):
        return ChainTerm.of_difference(coefficient, term)
    return ChainTerm(Fraction(coefficient), term, f"{coefficient}*({term.label})")


def counterexample_search(
    lhs: SearchSide,
    rhs: SearchSide,
    budget: int,
    seed: int,
    *,
    dims: Tuple[int, int] = DEFAULT_DIMS,
    chunk: int = 1000,
) -> SearchResult:
    """Look for pairs with lhs < rhs and with lhs > rhs.

    Differences within the rounding bound of the two sides never count as a
    witness. Stops as soon as both orderings are seen.
    """
    if budget < 1:
        raise DomainError("search budget must be >= 1")
    left, right = _as_term(lhs), _as_term(rhs)
    result = SearchResult(lhs=left.label, rhs=right.label, samples=0)
    span = dims[1] - dims[0] + 1
    start = 0
    block = 0
    while start < budget and (result.less is None or result.greater is None):
        count = min(chunk, budget - start)
        n = dims[0] + block % span
        batch = sample_pair_batch(count, n, seed, start=start)
        values = profile(batch)
        a = np.asarray(left.evaluate(values), dtype=float)
        b = np.asarray(right.evaluate(values), dtype=float)
        margin = np.maximum(1e-13, ROUNDING_FACTOR * EPS * (np.abs(a) + np.abs(b)))
        for attr, mask in (("less", a < b - margin), ("greater", a > b + margin)):
            if getattr(result, attr) is None and np.any(mask):
                i = int(np.argmax(mask))
                setattr(
                    result,
                    attr,
                    Witness(p=batch.p[i].tolist(), q=batch.q[i].tolist(), lhs=float(a[i]), rhs=float(b[i])),
                )
        result.samples += count
        start += count
        block += 1
    logger.info(
        "search finished",
        lhs=result.lhs,
        rhs=result.rhs,
        samples=result.samples,
        less=result.less is not None,
        greater=result.greater is not None,
    )
    return result


class RatioSup(BaseModel):
    """Largest sampled D_num / D_den for one g-ratio."""

    function: str
    ratio: str
    pairs: int
    used: int
    limit: float
    sup: Optional[float] = None
    witness: Optional[Witness] = None
    violations: int = 0
    within_limit: bool = True


def _difference_parts(values: Dict[MeasureId, Any], diff: DifferenceId) -> Tuple[np.ndarray, np.ndarray]:
    """D and an absolute bound on its rounding error, both shaped (m,).

    The closed forms cancel term by term, so the error scales with the
    probabilities (order 1) and not with D itself.
    """
    high, low = (
        np.atleast_1d(float(m.coefficient) * np.asarray(values[m.base], dtype=float))
        for m in (diff.high, diff.low)
    )
    return high - low, ROUNDING_FACTOR * EPS * (1.0 + np.abs(high) + np.abs(low))


def ratio_sup(gid: GRatioId, pairs: Sequence[Union[PairBatch, DistributionPair]]) -> RatioSup:
    """max D_num / D_den over the pairs, set against the g-ratio's limit at 1.

    Only pairs whose ratio is known to within LIMIT_TOLERANCE enter ``used``
    and ``sup``; near P == Q both differences sink into rounding noise. A
    ratio counts as a violation when it exceeds the limit by more than its
    propagated rounding error.
    """
    gid = GRatioId(gid)
    num_id, den_id = gid.numerator, gid.denominator
    limit = float(gid.limit)
    report = RatioSup(
        function=function_label(gid),
        ratio=f"{num_id} / {den_id}",
        pairs=0,
        used=0,
        limit=limit,
    )
    for item in pairs:
        batch = PairBatch.of(item) if isinstance(item, DistributionPair) else item
        values = profile(batch)
        num, num_err = _difference_parts(values, num_id)
        den, den_err = _difference_parts(values, den_id)
        positive = den > 0.0
        safe_den = np.where(positive, den, 1.0)
        raw = num / safe_den
        err = (num_err + np.abs(raw) * den_err) / safe_den
        reliable = positive & (err <= LIMIT_TOLERANCE * np.abs(raw))
        over = positive & (raw > limit * (1.0 + LIMIT_TOLERANCE) + err)
        report.pairs += len(batch)
        report.used += int(np.count_nonzero(reliable))
        report.violations += int(np.count_nonzero(over))
        if not np.any(reliable):
            continue
        ratios = np.where(reliable, raw, -np.inf)
        i = int(np.argmax(ratios))
        if report.sup is None or ratios[i] > report.sup:
            report.sup = float(ratios[i])
            report.witness = Witness(
                p=batch.p[i].tolist(), q=batch.q[i].tolist(), lhs=float(num[i]), rhs=float(den[i])
            )
    report.within_limit = report.violations == 0
    logger.info(
        "ratio sup measured",
        function=report.function,
        sup=report.sup,
        used=report.used,
        within_limit=report.within_limit,
    )
    return report
