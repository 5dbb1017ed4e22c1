"""Differences of normalized divergences and the registry of inequality chains.

A chain term is a rational multiple of a ``Combination``: a linear form in the
raw measures with Fraction weights. Differences D_XY = X_norm - Y_norm are
combinations, and so are the composite bounds such as (16d + 3I)/7, so every
displayed sequence lives in one registry and is checked by one evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from pydantic import BaseModel, Field

from . import DomainError, UnknownIdentifier
from .config import DEFAULT_CHAIN_TOLERANCE, MAX_RECORDED_FAILURES
from .core import logger, ordered_map
from .distributions import DistributionPair, PairBatch
from .generators import phi_second_expr, psi_second_expr
from .measures import (
    NORMALIZED,
    MeasureId,
    NormalizedMeasure,
    PairLike,
    Value,
    member_by_symbol,
    profile,
)

Provenance = Literal["paper_verbatim", "derived_corrected"]


@dataclass(frozen=True)
class DifferenceId:
    """D_XY = X - Y for normalized members with rank(X) > rank(Y)."""

    high: NormalizedMeasure
    low: NormalizedMeasure

    def __post_init__(self):
        if self.high.rank <= self.low.rank:
            raise UnknownIdentifier(
                f"D_{self.high.symbol}{self.low.symbol} is not a nonnegative difference"
            )

    @property
    def name(self) -> str:
        return f"{self.high.symbol}{self.low.symbol}"

    @classmethod
    def of(cls, high: str, low: str) -> "DifferenceId":
        return cls(member_by_symbol(high), member_by_symbol(low))

    @classmethod
    def parse(cls, name: str) -> "DifferenceId":
        try:
            return _BY_NAME[name.strip()]
        except KeyError:
            raise UnknownIdentifier(f"unknown difference {name!r}") from None

    def __str__(self) -> str:
        return f"D_{self.name}"


ALL_DIFFERENCES: Tuple[DifferenceId, ...] = tuple(
    DifferenceId(high, low) for high in NORMALIZED for low in NORMALIZED if high.rank > low.rank
)
_BY_NAME: Dict[str, DifferenceId] = {d.name: d for d in ALL_DIFFERENCES}

_SYMBOL_TO_MEASURE = {m.symbol: m.base for m in NORMALIZED}


@dataclass(frozen=True)
class Combination:
    """sum_k w_k * M_k over raw measures, with exact rational weights."""

    weights: Tuple[Tuple[MeasureId, Fraction], ...]

    @classmethod
    def of(cls, **by_symbol: Union[int, Fraction]) -> "Combination":
        """Combination.of(d=Fraction(16, 7), I=Fraction(3, 7))."""
        try:
            items = {_SYMBOL_TO_MEASURE[k]: Fraction(v) for k, v in by_symbol.items()}
        except KeyError as exc:
            raise UnknownIdentifier(f"unknown measure symbol {exc.args[0]!r}") from None
        return cls._normalize(items)

    @classmethod
    def _normalize(cls, items: Dict[MeasureId, Fraction]) -> "Combination":
        order = {m.base: m.rank for m in NORMALIZED}
        kept = sorted(
            ((mid, w) for mid, w in items.items() if w != 0),
            key=lambda item: order.get(item[0], 99),
        )
        return cls(tuple(kept))

    @classmethod
    def member(cls, member: NormalizedMeasure) -> "Combination":
        return cls(((member.base, member.coefficient),))

    @classmethod
    def difference(cls, diff: DifferenceId) -> "Combination":
        return cls.member(diff.high) - cls.member(diff.low)

    def as_dict(self) -> Dict[MeasureId, Fraction]:
        return dict(self.weights)

    def __add__(self, other: "Combination") -> "Combination":
        merged = self.as_dict()
        for mid, w in other.weights:
            merged[mid] = merged.get(mid, Fraction(0)) + w
        return Combination._normalize(merged)

    def __neg__(self) -> "Combination":
        return Combination(tuple((mid, -w) for mid, w in self.weights))

    def __sub__(self, other: "Combination") -> "Combination":
        return self + (-other)

    def __mul__(self, factor: Union[int, Fraction]) -> "Combination":
        factor = Fraction(factor)
        return Combination._normalize({mid: w * factor for mid, w in self.weights})

    __rmul__ = __mul__

    def evaluate(self, values: Dict[MeasureId, Value]) -> Value:
        """Apply to a profile (see measures.profile)."""
        total: Value = 0.0
        for mid, w in self.weights:
            total = total + float(w) * values[mid]
        return total

    @property
    def label(self) -> str:
        parts = []
        for mid, w in self.weights:
            sign = "-" if w < 0 else "+"
            mag = abs(w)
            coef = "" if mag == 1 else f"{mag}*"
            parts.append(f"{sign} {coef}{mid.symbol}")
        text = " ".join(parts)
        return text[2:] if text.startswith("+ ") else text


def difference(diff: DifferenceId, pair: PairLike) -> Value:
    """normalized_value(high) - normalized_value(low)."""
    return diff.high.value(pair) - diff.low.value(pair)


# Closed forms of the d-involving generator second derivatives. Written with
# ``**`` only so they evaluate on numpy arrays and on mpmath numbers alike.


def m1_expr(x: Any) -> Any:
    return ((x**3 + 1) / 2) * ((x + 1) / 2) ** 1.5 - x**1.5 * (x**1.5 + 1) / 2


def m2_expr(x: Any) -> Any:
    return ((x**2 + 1) / 2) * ((x + 1) / 2) ** 0.5 - x**0.5 * (x**1.5 + 1) / 2


def m3_expr(x: Any) -> Any:
    return ((x + 1) / 2) ** 2.5 - x**0.5 * (x**1.5 + 1) / 2


def _psi_d(x):
    return m1_expr(x) / (x**3 * (x + 1) * (2 * x + 2) ** 0.5)


def _t_d(x):
    return m2_expr(x) / (x**2 * (x + 1) * (2 * x + 2) ** 0.5)


def _j_d(x):
    return m3_expr(x) / (x**2 * (x + 1) * (2 * x + 2) ** 0.5)


def _d_h(x):
    gap = (x**1.5 + 1) / 2 - ((x + 1) / 2) ** 1.5
    return gap / (x**1.5 * (x + 1) * (2 * x + 2) ** 0.5)


def _d_i(x):
    gap = (x**1.5 + 1) / 2 - x**0.5 * ((x + 1) / 2) ** 0.5
    return gap / (x**1.5 * (x + 1) * (2 * x + 2) ** 0.5)


def _d_delta(x):
    gap = ((x**1.5 + 1) / 2) * ((x + 1) / 2) ** 1.5 - x**1.5
    return 2 * gap / (x**1.5 * (x + 1) ** 3)


CLOSED_FORM_SECONDS: Dict[str, Callable[[Any], Any]] = {
    "Psid": _psi_d,
    "Td": _t_d,
    "Jd": _j_d,
    "dh": _d_h,
    "dI": _d_i,
    "dDelta": _d_delta,
}


def _positive(x: Any) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("difference generators are defined for x > 0 only")
    return arr


def composed_generator_second(diff: DifferenceId, x: Any) -> Any:
    """f''_high(x) - f''_low(x) from the generator families."""
    arr = _positive(x)
    value = diff.high.generator.second(arr) - diff.low.generator.second(arr)
    return float(value) if np.ndim(x) == 0 else value


def generator_second_parts(diff: DifferenceId, x: Any) -> Tuple[np.ndarray, np.ndarray]:
    arr = _positive(x)
    return diff.high.generator.second(arr), diff.low.generator.second(arr)


def difference_generator_second(diff: DifferenceId, x: Any) -> Any:
    """Second derivative of the generator of D: closed form where one exists."""
    arr = _positive(x)
    closed = CLOSED_FORM_SECONDS.get(diff.name)
    if closed is None:
        value = diff.high.generator.second(arr) - diff.low.generator.second(arr)
    else:
        value = closed(arr)
    return float(value) if np.ndim(x) == 0 else value


def difference_generator_second_mp(diff: DifferenceId, x: Any) -> Any:
    """Same as difference_generator_second, in mpmath arithmetic."""
    x = mpmath.mpf(x)
    closed = CLOSED_FORM_SECONDS.get(diff.name)
    if closed is not None:
        return closed(x)
    exprs = {"phi": phi_second_expr, "psi": psi_second_expr}

    def member(gen):
        return mpmath.mpf(gen.scale) * exprs[gen.family](gen.s, x)

    return member(diff.high.generator) - member(diff.low.generator)


@dataclass(frozen=True)
class ChainTerm:
    coefficient: Fraction
    combination: Combination
    label: str

    @classmethod
    def of_difference(cls, coefficient: Union[int, Fraction], diff: DifferenceId) -> "ChainTerm":
        coefficient = Fraction(coefficient)
        prefix = "" if coefficient == 1 else f"{coefficient}*"
        return cls(coefficient, Combination.difference(diff), f"{prefix}{diff}")

    @classmethod
    def of_member(cls, symbol: str) -> "ChainTerm":
        member = member_by_symbol(symbol)
        return cls(Fraction(1), Combination.member(member), member.label)

    @classmethod
    def of_expression(cls, label: str, combination: Combination) -> "ChainTerm":
        return cls(Fraction(1), combination, label)

    def evaluate(self, values: Dict[MeasureId, Value]) -> Value:
        return float(self.coefficient) * self.combination.evaluate(values)


@dataclass(frozen=True)
class InequalityChain:
    """terms[0] <= terms[1] <= ... for every pair of distributions."""

    name: str
    terms: Tuple[ChainTerm, ...]
    provenance: Provenance = "paper_verbatim"
    note: str = ""

    @property
    def links(self) -> int:
        return len(self.terms) - 1

    @property
    def statement(self) -> str:
        return " <= ".join(term.label for term in self.terms)


class ChainFailure(BaseModel):
    pair_index: int
    link: int
    lhs: float
    rhs: float
    p: List[float]
    q: List[float]


class ChainReport(BaseModel):
    name: str
    provenance: Provenance
    gates: bool = True
    statement: str = ""
    links: int
    pairs: int = 0
    worst_link: Optional[int] = None
    worst_slack: Optional[float] = None
    failure_count: int = 0
    failures: List[ChainFailure] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failure_count == 0


@dataclass(frozen=True)
class ChainCheck:
    """Per-link evidence for one pair."""

    lhs: Tuple[float, ...]
    rhs: Tuple[float, ...]
    slacks: Tuple[float, ...]
    passed: Tuple[bool, ...]

    @property
    def ok(self) -> bool:
        return all(self.passed)


def _d(coefficient, name: str) -> ChainTerm:
    return ChainTerm.of_difference(Fraction(coefficient), DifferenceId.parse(name))


def _m(symbol: str) -> ChainTerm:
    return ChainTerm.of_member(symbol)


def _e(label: str, **weights) -> ChainTerm:
    return ChainTerm.of_expression(label, Combination.of(**weights))


F = Fraction


def _remark4_chain1(second: ChainTerm, denominator: int) -> Tuple[ChainTerm, ...]:
    return (
        _m("Delta"),
        _m("I"),
        second,
        _m("h"),
        _e("(J+8I)/16", J=F(1, 16), I=F(1, 2)),
        _e("(T+2h)/3", T=F(1, 3), h=F(2, 3)),
        _m("J"),
        _e("(8T+Delta)/12", T=F(2, 3), Delta=F(1, 12)),
        _m("T"),
        _e(f"(Psi+6J)/{denominator}", Psi=F(1, denominator), J=F(6, denominator)),
        _m("Psi"),
    )


def _build_registry() -> Tuple[InequalityChain, ...]:
    first_seven = (
        _d(1, "hDelta"),
        _d(F(4, 5), "dDelta"),
        _d(4, "dh"),
        _d(F(12, 7), "dI"),
        _d(3, "hI"),
        _d(1, "Th"),
        _d(F(4, 3), "Td"),
    )
    lower_16d_3i = _e("(16d+3I)/7", d=F(16, 7), I=F(3, 7))
    upper_64d = _e("(64d+Delta)/20", d=F(16, 5), Delta=F(1, 20))
    upper_64d_3 = _e("(64d+3Delta)/20", d=F(16, 5), Delta=F(3, 20))
    t_3h = _e("(T+3h)/4", T=F(1, 4), h=F(3, 4))
    psi_12 = _e("(Psi+12Delta)/64", Psi=F(1, 64), Delta=F(3, 16))
    psi_176 = _e("(Psi+176h)/192", Psi=F(1, 192), h=F(11, 12))
    j_8h = _e("(3J+8h)/8", J=F(3, 8), h=F(1))
    psi_512 = _e("(3Psi+512d)/176", Psi=F(3, 176), d=F(32, 11))
    d_32 = _e("(32d+T)/9", d=F(32, 9), T=F(1, 9))
    # 4d + (3/16)(Psi/16 - Delta/4)
    t_upper = _e("4d+(3/16)(Psi/16-Delta/4)", d=F(4), Psi=F(3, 256), Delta=F(-3, 64))

    chains = [
        InequalityChain(
            "eq1", tuple(_m(s) for s in ("Delta", "I", "h", "J", "T", "Psi"))
        ),
        InequalityChain(
            "eq2",
            (
                _d(1, "IDelta"),
                _d(F(2, 3), "hDelta"),
                _d(F(1, 2), "JDelta"),
                _d(F(1, 3), "TDelta"),
                _d(1, "TJ"),
                _d(F(2, 3), "Th"),
                _d(2, "Jh"),
                _d(F(1, 6), "PsiDelta"),
                _d(F(1, 5), "PsiI"),
                _d(F(2, 9), "Psih"),
                _d(F(1, 4), "PsiJ"),
                _d(F(1, 3), "PsiT"),
            ),
        ),
        InequalityChain("eq3", (_d(F(2, 3), "hDelta"), _d(2, "hI"), _d(1, "TJ"))),
        InequalityChain("eq9", tuple(_m(m.symbol) for m in NORMALIZED)),
        InequalityChain(
            "eq23",
            first_seven
            + (
                _d(F(1, 4), "PsiDelta"),
                _d(F(1, 3), "Psih"),
                _d(F(4, 11), "Psid"),
                _d(F(1, 2), "PsiT"),
            ),
        ),
        InequalityChain("eq50", (_d(1, "PsiDelta"), _d(F(4, 3), "Psih"))),
        InequalityChain("eq54", first_seven + (_d(12, "Jd"),)),
        InequalityChain("eq55", (_d(F(1, 4), "Jh"), _d(1, "Jd"))),
        InequalityChain(
            "remark3_i",
            (lower_16d_3i, _m("h"), upper_64d_3),
            note="upper member as printed; implied by the corrected (64d+Delta)/20",
        ),
        InequalityChain("remark3_i", (lower_16d_3i, _m("h"), upper_64d), "derived_corrected"),
        InequalityChain("remark3_ii", (_m("h"), _e("(T+3I)/4", T=F(1, 4), I=F(3, 4)))),
        InequalityChain("remark3_iii", (_m("h"), psi_12)),
        InequalityChain("remark3_iv", (_m("d"), t_3h)),
        InequalityChain("remark3_v", (_m("d"), psi_176)),
        InequalityChain("remark3_vi", (_m("d"), j_8h)),
        InequalityChain("remark3_vii", (_m("T"), psi_512)),
        InequalityChain("remark3_viii", (d_32, _m("J"))),
        InequalityChain(
            "remark3_ix",
            (
                _e("4T+3Delta/16", T=F(4), Delta=F(3, 16)),
                _e("3Psi/64+16d", Psi=F(3, 64), d=F(16)),
            ),
        ),
        InequalityChain(
            "remark3_chain1",
            (_m("I"), lower_16d_3i, _m("h"), upper_64d, _m("d"), d_32, _m("J")),
        ),
        InequalityChain(
            "remark3_chain2",
            (_m("h"), psi_12, _m("d"), t_3h, _m("T"), t_upper, j_8h),
            note="(Psi+12Delta)/64 <= 4d and the final link fail for extreme ratios",
        ),
        InequalityChain(
            "remark3_chain2",
            (_m("h"), _m("d"), t_3h, _m("T"), t_upper),
            "derived_corrected",
        ),
        InequalityChain("remark3_chain3", (_m("d"), psi_176, _m("Psi"))),
        InequalityChain("remark3_chain4", (_m("T"), psi_512, _m("Psi"))),
        InequalityChain(
            "remark4_chain1",
            _remark4_chain1(_e("(9h+Delta)/12", h=F(3, 4), Delta=F(1, 12)), 642),
            note="printed (9h+Delta)/12 and denominator 642",
        ),
        InequalityChain(
            "remark4_chain1",
            _remark4_chain1(_e("(8h+Delta)/12", h=F(2, 3), Delta=F(1, 12)), 64),
            "derived_corrected",
        ),
        InequalityChain(
            "remark4_chain2",
            (
                _m("J"),
                _e("(Psi+192h-4Delta)/192", Psi=F(1, 192), h=F(1), Delta=F(-1, 48)),
                _e("(Psi+128h)/144", Psi=F(1, 144), h=F(8, 9)),
                _m("Psi"),
            ),
        ),
    ]
    return tuple(chains)


@lru_cache()
def chain_registry() -> Tuple[InequalityChain, ...]:
    return _build_registry()


def chain_names() -> List[str]:
    seen: List[str] = []
    for chain in chain_registry():
        if chain.name not in seen:
            seen.append(chain.name)
    return seen


def select_chains(names: Optional[Iterable[str]] = None) -> List[InequalityChain]:
    """Chains with the given names in the order asked for.

    Each name brings every provenance registered under it, in registry order.
    """
    registry = chain_registry()
    if names is None:
        return list(registry)
    wanted = [name.strip() for name in names if name.strip()]
    known = set(chain_names())
    unknown = [name for name in wanted if name not in known]
    if unknown:
        raise UnknownIdentifier(f"unknown chain(s): {', '.join(unknown)}")
    selected: List[InequalityChain] = []
    for name in dict.fromkeys(wanted):
        selected.extend(chain for chain in registry if chain.name == name)
    return selected


def gates(chain: InequalityChain, chains: Sequence[InequalityChain]) -> bool:
    """Whether a failure of this chain should fail a verification run.

    Corrected variants always gate; a verbatim variant gates only when no
    corrected sibling of the same name is present.
    """
    if chain.provenance == "derived_corrected":
        return True
    return not any(
        other.name == chain.name and other.provenance == "derived_corrected" for other in chains
    )


def chain_sides(
    chain: InequalityChain, values: Dict[MeasureId, Value]
) -> Tuple[np.ndarray, np.ndarray]:
    """lhs and rhs of every link, each shaped (m, links)."""
    evaluated = [np.atleast_1d(np.asarray(term.evaluate(values), dtype=float)) for term in chain.terms]
    stacked = np.stack(evaluated, axis=-1)
    return stacked[:, :-1], stacked[:, 1:]


def check_chain(
    chain: InequalityChain, pair: DistributionPair, tol: float = DEFAULT_CHAIN_TOLERANCE
) -> ChainCheck:
    """Slack c_{i+1} D_{i+1} - c_i D_i of each link; a link passes iff slack >= -tol."""
    if tol < 0:
        raise DomainError("tolerance must be nonnegative")
    lhs, rhs = chain_sides(chain, profile(pair))
    slacks = rhs[0] - lhs[0]
    return ChainCheck(
        lhs=tuple(float(v) for v in lhs[0]),
        rhs=tuple(float(v) for v in rhs[0]),
        slacks=tuple(float(v) for v in slacks),
        passed=tuple(bool(v >= -tol) for v in slacks),
    )


def _as_batches(
    pairs: Union[PairBatch, Sequence[PairBatch], Sequence[DistributionPair]]
) -> List[PairBatch]:
    if isinstance(pairs, PairBatch):
        return [pairs]
    items = list(pairs)
    if not items or isinstance(items[0], PairBatch):
        return items
    # group consecutive pairs of one dimension so file order is kept
    batches: List[PairBatch] = []
    run: List[DistributionPair] = []
    for pair in items:
        if run and pair.dimension != run[-1].dimension:
            batches.append(PairBatch.from_pairs(run))
            run = []
        run.append(pair)
    if run:
        batches.append(PairBatch.from_pairs(run))
    return batches


def run_chains(
    chains: Sequence[InequalityChain],
    pairs: Union[PairBatch, Sequence[PairBatch], Sequence[DistributionPair]],
    tol: float = DEFAULT_CHAIN_TOLERANCE,
    *,
    workers: Optional[int] = None,
) -> List[ChainReport]:
    """Check every chain on every pair; reports follow the order of ``chains``.

    Pair indices count across batches in the order given, so the output is
    deterministic for a fixed pair order.
    """
    if tol < 0:
        raise DomainError("tolerance must be nonnegative")
    log = logger.bind(component="ChainRunner")
    batches = _as_batches(pairs)
    profiles = ordered_map(profile, batches, workers)
    offsets = np.cumsum([0] + [len(b) for b in batches])[:-1]

    def run_one(chain: InequalityChain) -> ChainReport:
        report = ChainReport(
            name=chain.name,
            provenance=chain.provenance,
            gates=gates(chain, chains),
            statement=chain.statement,
            links=chain.links,
        )
        worst: Optional[Tuple[float, int]] = None
        for batch, values, offset in zip(batches, profiles, offsets):
            lhs, rhs = chain_sides(chain, values)
            slack = rhs - lhs
            report.pairs += len(batch)
            flat = int(np.argmin(slack))
            row, link = divmod(flat, chain.links)
            if worst is None or slack[row, link] < worst[0]:
                worst = (float(slack[row, link]), link)
            bad_rows, bad_links = np.nonzero(slack < -tol)
            report.failure_count += int(bad_rows.size)
            for r, k in zip(bad_rows, bad_links):
                if len(report.failures) >= MAX_RECORDED_FAILURES:
                    break
                report.failures.append(
                    ChainFailure(
                        pair_index=int(offset + r),
                        link=int(k),
                        lhs=float(lhs[r, k]),
                        rhs=float(rhs[r, k]),
                        p=[float(v) for v in batch.p[r]],
                        q=[float(v) for v in batch.q[r]],
                    )
                )
        if worst is not None:
            report.worst_slack, report.worst_link = worst
        event = log.info if report.passed else log.warning
        event(
            "chain evaluated",
            chain=chain.name,
            provenance=chain.provenance,
            pairs=report.pairs,
            worst_slack=report.worst_slack,
            failures=report.failure_count,
        )
        return report

    return ordered_map(run_one, chains, workers)
