"""Probability distributions on the open simplex: validation, sampling, loading."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import ParseError, RejectedInput
from .config import INPUT_SUM_TOLERANCE, OUTPUT_SUM_TOLERANCE
from .core import logger

__all__ = [
    "ValidationPolicy",
    "ProbabilityDistribution",
    "DistributionPair",
    "PairBatch",
    "validate",
    "sample_uniform_simplex",
    "sample_pair_batch",
    "parse_values",
    "load_pairs",
]


class ValidationPolicy(BaseModel):
    """How raw values are turned into a distribution."""

    model_config = ConfigDict(frozen=True)

    mode: Literal["reject", "renormalize"] = Field(default="reject")
    zero_floor: float = Field(default=0.0, ge=0.0)


class ProbabilityDistribution(BaseModel):
    """A point of the open simplex: strictly positive entries summing to one."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...]

    @field_validator("values")
    def check_simplex(cls, v):
        if len(v) < 2:
            raise ValueError("a distribution needs at least two entries")
        if not all(math.isfinite(x) and x > 0.0 for x in v):
            raise ValueError("entries must be finite and strictly positive")
        if abs(math.fsum(v) - 1.0) > OUTPUT_SUM_TOLERANCE:
            raise ValueError("entries must sum to 1")
        return v

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class DistributionPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: ProbabilityDistribution
    q: ProbabilityDistribution

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.p) != len(self.q):
            raise ValueError(
                f"P and Q differ in length ({len(self.p)} vs {len(self.q)})"
            )
        return self

    @classmethod
    def of(cls, p: Sequence[float], q: Sequence[float]) -> "DistributionPair":
        """Validate both sides with the default (reject) policy."""
        return cls(p=validate(p), q=validate(q))

    @property
    def dimension(self) -> int:
        return len(self.p)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.p.as_array(), self.q.as_array()

    def swapped(self) -> "DistributionPair":
        return DistributionPair(p=self.q, q=self.p)


@dataclass(frozen=True)
class PairBatch:
    """m pairs of equal dimension held as two (m, n) arrays.

    Rows satisfy the same invariants as ProbabilityDistribution; measures and
    chains are evaluated on whole batches at once.
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if p.shape != q.shape:
            raise RejectedInput(f"batch shapes differ: {p.shape} vs {q.shape}")
        if p.ndim != 2 or p.shape[1] < 2:
            raise RejectedInput("batch rows need at least two entries")
        if not (np.all(p > 0.0) and np.all(q > 0.0)):
            raise RejectedInput("batch entries must be strictly positive")
        if p.shape[0] and (
            np.max(np.abs(p.sum(axis=1) - 1.0)) > OUTPUT_SUM_TOLERANCE
            or np.max(np.abs(q.sum(axis=1) - 1.0)) > OUTPUT_SUM_TOLERANCE
        ):
            raise RejectedInput("batch rows must sum to 1")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.p.shape[0]

    @property
    def dimension(self) -> int:
        return self.p.shape[1]

    def pair(self, index: int) -> DistributionPair:
        return DistributionPair(
            p=ProbabilityDistribution(values=tuple(float(v) for v in self.p[index])),
            q=ProbabilityDistribution(values=tuple(float(v) for v in self.q[index])),
        )

    def pairs(self) -> Iterator[DistributionPair]:
        for i in range(len(self)):
            yield self.pair(i)

    def swapped(self) -> "PairBatch":
        return PairBatch(self.q, self.p)

    def mix(self, other: "PairBatch", lam: float) -> "PairBatch":
        """Row-wise mixture lam*(P1, Q1) + (1-lam)*(P2, Q2)."""
        if not 0.0 <= lam <= 1.0:
            raise RejectedInput(f"mixture weight must lie in [0, 1], got {lam}")
        p = lam * self.p + (1.0 - lam) * other.p
        q = lam * self.q + (1.0 - lam) * other.q
        return PairBatch(p / p.sum(axis=1, keepdims=True), q / q.sum(axis=1, keepdims=True))

    @classmethod
    def from_pairs(cls, pairs: Sequence[DistributionPair]) -> "PairBatch":
        if not pairs:
            raise RejectedInput("cannot build a batch from zero pairs")
        dims = {pair.dimension for pair in pairs}
        if len(dims) != 1:
            raise RejectedInput(f"batch pairs must share one dimension, got {sorted(dims)}")
        p = np.array([pair.p.values for pair in pairs], dtype=float)
        q = np.array([pair.q.values for pair in pairs], dtype=float)
        return cls(p, q)

    @classmethod
    def of(cls, pair: DistributionPair) -> "PairBatch":
        p, q = pair.arrays()
        return cls(p[None, :], q[None, :])


def _rescale(values: np.ndarray) -> np.ndarray:
    total = math.fsum(values.tolist())
    if abs(total - 1.0) <= OUTPUT_SUM_TOLERANCE:
        return values
    return values / total


def _apply_floor(values: np.ndarray, floor: float) -> np.ndarray:
    """Raise entries at or below floor to floor and rescale the rest to unit sum.

    Repeats until no rescaled entry drops to the floor, so floored entries
    stay exactly at the floor and a second pass is a no-op.
    """
    out = values.copy()
    pinned = np.zeros(out.shape, dtype=bool)
    for _ in range(out.size):
        newly = (~pinned) & (out <= floor)
        pinned |= newly
        out[pinned] = floor
        free = ~pinned
        free_total = math.fsum(out[free].tolist())
        target = 1.0 - floor * int(pinned.sum())
        if abs(free_total - target) > OUTPUT_SUM_TOLERANCE:
            out[free] = out[free] * (target / free_total)
        if not np.any(newly) and not np.any(free & (out <= floor)):
            break
    return out


def validate(
    raw: Sequence[float], policy: Optional[ValidationPolicy] = None
) -> ProbabilityDistribution:
    """Turn raw values into a ProbabilityDistribution.

    In reject mode the input must already be strictly positive and sum to 1
    within 1e-9; it is then divided by its sum. In renormalize mode entries at
    or below ``zero_floor`` are raised to it and the vector is rescaled.
    """
    policy = policy or ValidationPolicy()
    try:
        values = np.asarray([float(v) for v in raw], dtype=float)
    except (TypeError, ValueError) as exc:
        raise RejectedInput(f"non-numeric entry: {exc}") from exc
    n = values.size
    if n == 0:
        raise RejectedInput("empty value list")
    if n < 2:
        raise RejectedInput("a distribution needs at least two entries")
    if not np.all(np.isfinite(values)):
        raise RejectedInput("entries must be finite")

    if policy.mode == "reject":
        if np.any(values <= 0.0):
            raise RejectedInput("entries must be strictly positive")
        total = math.fsum(values.tolist())
        if abs(total - 1.0) > INPUT_SUM_TOLERANCE:
            raise RejectedInput(f"entries sum to {total!r}, expected 1")
        values = _rescale(values)
    else:
        floor = policy.zero_floor
        if floor > 0.0 and floor >= 1.0 / n:
            raise RejectedInput(f"zero_floor {floor} must be below 1/n = {1.0 / n}")
        if floor == 0.0:
            if np.any(values <= 0.0):
                raise RejectedInput("nonpositive entries need a positive zero_floor")
            values = _rescale(values)
        else:
            positive = np.where(values > 0.0, values, 0.0)
            if math.fsum(positive.tolist()) <= 0.0:
                raise RejectedInput("no positive mass to renormalize")
            values = _apply_floor(_rescale(positive), floor)

    try:
        return ProbabilityDistribution(values=tuple(float(v) for v in values))
    except ValidationError as exc:
        raise RejectedInput(str(exc.errors()[0]["msg"])) from exc


def sample_uniform_simplex(n: int, seed: int) -> ProbabilityDistribution:
    """Uniform draw from the open simplex via normalized exponential spacings."""
    if n < 2:
        raise RejectedInput(f"dimension must be >= 2, got {n}")
    _check_seed(seed)
    rng = np.random.default_rng(seed)
    return ProbabilityDistribution(values=tuple(float(v) for v in _spacings(rng, n)))


def _check_seed(seed: int) -> None:
    if seed < 0:
        raise RejectedInput(f"seed must be >= 0, got {seed}")


def _spacings(rng: np.random.Generator, *shape: int) -> np.ndarray:
    draws = np.maximum(rng.standard_exponential(shape), np.finfo(float).tiny)
    return draws / draws.sum(axis=-1, keepdims=True)


def sample_pair_batch(count: int, n: int, seed: int, *, start: int = 0) -> PairBatch:
    """Uniform pairs of dimension n with indices start..start+count-1.

    Pair k depends only on (seed, n, k), so a run can be split into blocks
    without changing any pair.
    """
    if n < 2:
        raise RejectedInput(f"dimension must be >= 2, got {n}")
    if count < 1:
        raise RejectedInput(f"pair count must be >= 1, got {count}")
    _check_seed(seed)
    p = np.empty((count, n))
    q = np.empty((count, n))
    for k in range(count):
        rng = np.random.default_rng([seed, n, start + k])
        both = _spacings(rng, 2, n)
        p[k], q[k] = both[0], both[1]
    return PairBatch(p, q)


def parse_values(text: str, *, locus: str | None = None) -> List[float]:
    """Parse a comma-separated list of decimal literals."""
    items = [item.strip() for item in text.split(",")]
    if not items or any(item == "" for item in items):
        raise ParseError("empty entry in value list", locus=locus)
    try:
        return [float(item) for item in items]
    except ValueError as exc:
        raise ParseError(f"not a number: {exc}", locus=locus) from exc


def _pair_from(
    p_raw: Sequence[float], q_raw: Sequence[float], policy: ValidationPolicy, index: int
) -> DistributionPair:
    try:
        return DistributionPair(p=validate(p_raw, policy), q=validate(q_raw, policy))
    except RejectedInput as exc:
        raise RejectedInput(str(exc), record=index) from exc


def _load_csv(path: Path, policy: ValidationPolicy) -> List[DistributionPair]:
    rows: List[Tuple[int, List[float]]] = []
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            for line_no, row in enumerate(csv.reader(handle), start=1):
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    rows.append((line_no, [float(cell) for cell in row]))
                except ValueError as exc:
                    raise ParseError(f"not a number: {exc}", locus=f"line {line_no}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc.reason}", locus=str(path)) from exc
    if len(rows) % 2:
        raise ParseError("odd number of rows; rows pair up as (P, Q)", locus=f"line {rows[-1][0]}")
    pairs = []
    for index in range(len(rows) // 2):
        (line_p, p_raw), (line_q, q_raw) = rows[2 * index], rows[2 * index + 1]
        if len(p_raw) != len(q_raw):
            raise ParseError(
                f"rows of unequal length ({len(p_raw)} vs {len(q_raw)})",
                locus=f"line {line_q}",
            )
        pairs.append(_pair_from(p_raw, q_raw, policy, index))
    return pairs


def _numbers(value: Any, locus: str) -> List[float]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ParseError("expected an array of numbers", locus=locus)
    return [float(v) for v in value]


def _load_json(path: Path, policy: Optional[ValidationPolicy]) -> List[DistributionPair]:
    try:
        with path.open("r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, locus=f"line {exc.lineno}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc.reason}", locus=str(path)) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("pairs"), list):
        raise ParseError('expected an object with a "pairs" array', locus="document")
    if policy is None:
        try:
            policy = ValidationPolicy(**(doc.get("policy") or {}))
        except (TypeError, ValidationError) as exc:
            raise ParseError(f"invalid policy: {exc}", locus="policy") from exc
    pairs = []
    for index, record in enumerate(doc["pairs"]):
        locus = f"record {index}"
        if not isinstance(record, dict) or "p" not in record or "q" not in record:
            raise ParseError('expected an object with keys "p" and "q"', locus=locus)
        p_raw = _numbers(record["p"], locus)
        q_raw = _numbers(record["q"], locus)
        if len(p_raw) != len(q_raw):
            raise ParseError(f"p and q differ in length ({len(p_raw)} vs {len(q_raw)})", locus=locus)
        pairs.append(_pair_from(p_raw, q_raw, policy, index))
    return pairs


def load_pairs(
    path: str | Path,
    format: Literal["csv", "json"],
    policy: Optional[ValidationPolicy] = None,
) -> List[DistributionPair]:
    """Load distribution pairs in file order.

    CSV rows pair up consecutively; JSON documents may carry their own
    ``policy`` object, which an explicit ``policy`` argument overrides.
    """
    path_obj = Path(path)
    if not path_obj.is_file():
        raise ParseError("file not found", locus=str(path_obj))
    if format == "csv":
        pairs = _load_csv(path_obj, policy or ValidationPolicy())
    elif format == "json":
        pairs = _load_json(path_obj, policy)
    else:
        raise ParseError(f"unknown format {format!r}", locus=str(path_obj))
    logger.debug("Loaded pairs", path=str(path_obj), count=len(pairs))
    return pairs
