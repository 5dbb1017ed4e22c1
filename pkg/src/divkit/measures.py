"""Closed-form symmetric divergence measures, the zeta/xi families and the normalized chain.

Every closed form works on arrays of shape (..., n) and reduces over the last
axis, so one call evaluates a single pair or a whole PairBatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, Tuple, Union

import numpy as np

from . import DomainError, UnknownIdentifier
from .distributions import DistributionPair, PairBatch
from .generators import Generator, branch_point

PairLike = Union[DistributionPair, PairBatch]
Value = Union[float, np.ndarray]


class MeasureId(str, Enum):
    HELLINGER = "hellinger"
    TRIANGULAR = "triangular"
    SYM_CHI_SQUARE = "sym_chi_square"
    CHI_SQUARE = "chi_square"
    J_DIV = "j_div"
    JENSEN_SHANNON = "jensen_shannon"
    AG_MEAN = "ag_mean"
    D_DIV = "d_div"
    BHATTACHARYYA = "bhattacharyya"
    HARMONIC_MEAN = "harmonic_mean"

    @classmethod
    def parse(cls, text: str) -> "MeasureId":
        key = text.strip().lower()
        for member in cls:
            if key in (member.value, member.symbol.lower()):
                return member
        raise UnknownIdentifier(f"unknown measure {text!r}")

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    MeasureId.HELLINGER: "h",
    MeasureId.TRIANGULAR: "Delta",
    MeasureId.SYM_CHI_SQUARE: "Psi",
    MeasureId.CHI_SQUARE: "chi2",
    MeasureId.J_DIV: "J",
    MeasureId.JENSEN_SHANNON: "I",
    MeasureId.AG_MEAN: "T",
    MeasureId.D_DIV: "d",
    MeasureId.BHATTACHARYYA: "B",
    MeasureId.HARMONIC_MEAN: "W",
}


def _hellinger(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2, axis=-1)


def _triangular(p, q):
    return np.sum((p - q) ** 2 / (p + q), axis=-1)


def _sym_chi_square(p, q):
    return np.sum((p - q) ** 2 * (p + q) / (p * q), axis=-1)


def _chi_square(p, q):
    return np.sum((p - q) ** 2 / q, axis=-1)


def _j_div(p, q):
    return np.sum((p - q) * (np.log(p) - np.log(q)), axis=-1)


def _jensen_shannon(p, q):
    log_mid = np.log((p + q) / 2)
    return 0.5 * np.sum(p * (np.log(p) - log_mid) + q * (np.log(q) - log_mid), axis=-1)


def _ag_mean(p, q):
    mid = (p + q) / 2
    return np.sum(mid * (np.log(mid) - 0.5 * (np.log(p) + np.log(q))), axis=-1)


def _d_div(p, q):
    # 1 - sum((sqrt p + sqrt q)/2 * sqrt((p+q)/2)), written against sum(mid) = 1
    root_mid = np.sqrt((p + q) / 2)
    return np.sum(root_mid * (root_mid - (np.sqrt(p) + np.sqrt(q)) / 2), axis=-1)


def _bhattacharyya(p, q):
    return np.sum(np.sqrt(p * q), axis=-1)


def _harmonic_mean(p, q):
    return np.sum(2 * p * q / (p + q), axis=-1)


_CLOSED_FORMS: Dict[MeasureId, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    MeasureId.HELLINGER: _hellinger,
    MeasureId.TRIANGULAR: _triangular,
    MeasureId.SYM_CHI_SQUARE: _sym_chi_square,
    MeasureId.CHI_SQUARE: _chi_square,
    MeasureId.J_DIV: _j_div,
    MeasureId.JENSEN_SHANNON: _jensen_shannon,
    MeasureId.AG_MEAN: _ag_mean,
    MeasureId.D_DIV: _d_div,
    MeasureId.BHATTACHARYYA: _bhattacharyya,
    MeasureId.HARMONIC_MEAN: _harmonic_mean,
}

# Generators of the seven chain measures, at the measure's own scale.
_GENERATORS: Dict[MeasureId, Generator] = {
    MeasureId.TRIANGULAR: Generator(family="psi", s=-1.0, scale=4.0),
    MeasureId.JENSEN_SHANNON: Generator(family="psi", s=0.0),
    MeasureId.HELLINGER: Generator(family="phi", s=0.5, scale=0.125),
    MeasureId.D_DIV: Generator(family="psi", s=0.5, scale=0.25),
    MeasureId.J_DIV: Generator(family="phi", s=0.0),
    MeasureId.AG_MEAN: Generator(family="psi", s=1.0),
    MeasureId.SYM_CHI_SQUARE: Generator(family="psi", s=2.0, scale=16.0),
}


def generator_of(measure: MeasureId) -> Generator:
    try:
        return _GENERATORS[measure]
    except KeyError:
        raise UnknownIdentifier(f"{measure.value} has no generator in the chain families") from None


def _arrays(pair: PairLike) -> Tuple[np.ndarray, np.ndarray, bool]:
    if isinstance(pair, PairBatch):
        return pair.p, pair.q, False
    p, q = pair.arrays()
    if not (np.all(p > 0.0) and np.all(q > 0.0)):
        raise DomainError("measures need strictly positive probabilities")
    return p, q, True


def _finish(value: np.ndarray, single: bool) -> Value:
    return float(value) if single else value


def evaluate(measure: MeasureId, pair: PairLike) -> Value:
    """Closed-form value of one measure on a pair (float) or a batch (array)."""
    p, q, single = _arrays(pair)
    return _finish(_CLOSED_FORMS[MeasureId(measure)](p, q), single)


def profile(pair: PairLike) -> Dict[MeasureId, Value]:
    """Every MeasureId evaluated on the same pair or batch."""
    p, q, single = _arrays(pair)
    return {mid: _finish(form(p, q), single) for mid, form in _CLOSED_FORMS.items()}


def zeta(s: float, pair: PairLike) -> Value:
    """J_s family: [sum(p^s q^(1-s) + p^(1-s) q^s) - 2] / (s(s-1)); J at s in {0, 1}."""
    p, q, single = _arrays(pair)
    if branch_point(s) is not None:
        return _finish(_j_div(p, q), single)
    total = np.sum(p**s * q ** (1 - s) + p ** (1 - s) * q**s - p - q, axis=-1)
    return _finish(total / (s * (s - 1)), single)


def xi(s: float, pair: PairLike) -> Value:
    """Generalized AG mean family: sum q psi_s(p/q). I at s = 0, T at s = 1."""
    p, q, single = _arrays(pair)
    branch = branch_point(s)
    if branch == 0:
        return _finish(_jensen_shannon(p, q), single)
    if branch == 1:
        return _finish(_ag_mean(p, q), single)
    mid = (p + q) / 2
    total = np.sum(((p ** (1 - s) + q ** (1 - s)) / 2) * mid**s - mid, axis=-1)
    return _finish(total / (s * (s - 1)), single)


@dataclass(frozen=True)
class NormalizedMeasure:
    """A chain member: coefficient * base, whose generator has f''(1) = 1/4."""

    rank: int
    base: MeasureId
    coefficient: Fraction

    @property
    def symbol(self) -> str:
        return self.base.symbol

    @property
    def label(self) -> str:
        if self.coefficient == 1:
            return self.symbol
        return f"{self.coefficient}*{self.symbol}"

    @property
    def generator(self) -> Generator:
        raw = generator_of(self.base)
        return raw.model_copy(update={"scale": raw.scale * float(self.coefficient)})

    def value(self, pair: PairLike) -> Value:
        return float(self.coefficient) * evaluate(self.base, pair)


NORMALIZED: Tuple[NormalizedMeasure, ...] = (
    NormalizedMeasure(1, MeasureId.TRIANGULAR, Fraction(1, 4)),
    NormalizedMeasure(2, MeasureId.JENSEN_SHANNON, Fraction(1)),
    NormalizedMeasure(3, MeasureId.HELLINGER, Fraction(1)),
    NormalizedMeasure(4, MeasureId.D_DIV, Fraction(4)),
    NormalizedMeasure(5, MeasureId.J_DIV, Fraction(1, 8)),
    NormalizedMeasure(6, MeasureId.AG_MEAN, Fraction(1)),
    NormalizedMeasure(7, MeasureId.SYM_CHI_SQUARE, Fraction(1, 16)),
)


def normalized_member(rank: int) -> NormalizedMeasure:
    if not 1 <= rank <= len(NORMALIZED):
        raise UnknownIdentifier(f"normalized rank must be 1..7, got {rank}")
    return NORMALIZED[rank - 1]


def member_by_symbol(symbol: str) -> NormalizedMeasure:
    for member in NORMALIZED:
        if member.symbol == symbol:
            return member
    raise UnknownIdentifier(f"no chain member with symbol {symbol!r}")


def normalized_value(rank: int, pair: PairLike) -> Value:
    return normalized_member(rank).value(pair)


def normalized_sequence(pair: PairLike) -> Tuple[Value, ...]:
    """Ranks 1..7 in order; nondecreasing for every pair."""
    return tuple(member.value(pair) for member in NORMALIZED)
