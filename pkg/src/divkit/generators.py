"""Convex generator families and Csiszar f-divergences.

Two one-parameter families are provided, both normalized so that f(1) = 0:

    phi_s(x) = [x^s + x^(1-s) - (1 + x)] / (s(s-1)),     (x-1) ln x at s in {0, 1}
    psi_s(x) = [((x^(1-s) + 1)/2) ((x+1)/2)^s - (x+1)/2] / (s(s-1))

with psi_0 generating the Jensen-Shannon divergence and psi_1 the
arithmetic-geometric mean divergence. Value expressions are written once
against a ``log`` callable so the same code runs on numpy arrays and on
mpmath numbers.
"""

from __future__ import annotations

from typing import Any, Callable, Literal, Union

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import DomainError
from .config import BRANCH_THRESHOLD

ArrayLike = Union[float, np.ndarray]
Family = Literal["phi", "psi"]


def _check_positive(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("generators are defined for x > 0 only")
    return arr


def _unwrap(x: ArrayLike, value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(x) == 0 else value


def branch_point(s: float) -> int | None:
    """0 or 1 when s sits on a removable singularity, else None."""
    if abs(s) <= BRANCH_THRESHOLD:
        return 0
    if abs(s - 1.0) <= BRANCH_THRESHOLD:
        return 1
    return None


def phi_expr(s: float, x: Any, log: Callable[[Any], Any]) -> Any:
    if branch_point(s) is not None:
        return (x - 1) * log(x)
    return (x**s + x ** (1 - s) - (1 + x)) / (s * (s - 1))


def psi_expr(s: float, x: Any, log: Callable[[Any], Any]) -> Any:
    mid = (x + 1) / 2
    branch = branch_point(s)
    if branch == 0:
        return (x / 2) * log(x) - mid * log(mid)
    if branch == 1:
        return mid * (log(mid) - log(x) / 2)
    return (((x ** (1 - s) + 1) / 2) * mid**s - mid) / (s * (s - 1))


def phi_second_expr(s: float, x: Any) -> Any:
    return x ** (s - 2) + x ** (-s - 1)


def psi_second_expr(s: float, x: Any) -> Any:
    return ((x ** (-s - 1) + 1) / 8) * ((x + 1) / 2) ** (s - 2)


def phi_value(s: float, x: ArrayLike) -> ArrayLike:
    arr = _check_positive(x)
    return _unwrap(x, phi_expr(s, arr, np.log))


def phi_second(s: float, x: ArrayLike) -> ArrayLike:
    arr = _check_positive(x)
    return _unwrap(x, phi_second_expr(s, arr))


def psi_value(s: float, x: ArrayLike) -> ArrayLike:
    arr = _check_positive(x)
    return _unwrap(x, psi_expr(s, arr, np.log))


def psi_second(s: float, x: ArrayLike) -> ArrayLike:
    arr = _check_positive(x)
    return _unwrap(x, psi_second_expr(s, arr))


_VALUE_EXPR = {"phi": phi_expr, "psi": psi_expr}
_SECOND_EXPR = {"phi": phi_second_expr, "psi": psi_second_expr}


class Generator(BaseModel):
    """scale * phi_s or scale * psi_s."""

    model_config = ConfigDict(frozen=True)

    family: Family
    s: float
    scale: float = Field(default=1.0, gt=0.0)

    @property
    def label(self) -> str:
        name = f"{self.family}_{self.s:g}"
        return name if self.scale == 1.0 else f"{self.scale:g}*{name}"

    def value(self, x: ArrayLike) -> ArrayLike:
        arr = _check_positive(x)
        return _unwrap(x, self.scale * _VALUE_EXPR[self.family](self.s, arr, np.log))

    def second(self, x: ArrayLike) -> ArrayLike:
        arr = _check_positive(x)
        return _unwrap(x, self.scale * _SECOND_EXPR[self.family](self.s, arr))

    def value_mp(self, x: Any) -> mpmath.mpf:
        """Value in mpmath arithmetic at the current working precision."""
        x = mpmath.mpf(x)
        if x <= 0:
            raise DomainError("generators are defined for x > 0 only")
        return mpmath.mpf(self.scale) * _VALUE_EXPR[self.family](self.s, x, mpmath.log)

    def numeric_second(self, x: float, dps: int = 30) -> float:
        """Central second difference of the value, taken in mpmath."""
        with mpmath.workdps(dps):
            return float(mpmath.diff(self.value_mp, mpmath.mpf(x), 2))

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.value(x)


class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    x_min: float = Field(gt=0.0)
    x_max: float = Field(gt=0.0)
    points: int = Field(ge=2)
    spacing: Literal["log", "linear"] = "log"

    @model_validator(mode="after")
    def check_interval(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        return self

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.x_min, self.x_max, self.points)
        return np.linspace(self.x_min, self.x_max, self.points)

    def values_excluding(self, center: float, width: float) -> np.ndarray:
        xs = self.values()
        return xs[np.abs(xs - center) > width]

    @property
    def label(self) -> str:
        return f"{self.x_min:g}..{self.x_max:g}:{self.points}"


class RatioBounds(BaseModel):
    """Grid estimate of inf and sup of f1''/f2''. Not a proof."""

    model_config = ConfigDict(frozen=True)

    m: float
    M: float
    arg_m: float
    arg_M: float
    grid: GridSpec

    @model_validator(mode="after")
    def check_order(self):
        if self.m > self.M:
            raise ValueError("m must not exceed M")
        return self


def _pair_arrays(pair: Any) -> tuple[np.ndarray, np.ndarray, bool]:
    if hasattr(pair, "arrays"):
        p, q = pair.arrays()
        return p, q, True
    return pair.p, pair.q, False


def csiszar_divergence(f: Callable[[np.ndarray], Any], pair: Any) -> ArrayLike:
    """sum_i q_i f(p_i / q_i) for a DistributionPair, or row-wise for a PairBatch."""
    p, q, single = _pair_arrays(pair)
    ratios = p / q
    try:
        values = np.asarray(f(ratios), dtype=float)
    except DomainError:
        raise
    except (ArithmeticError, ValueError, TypeError) as exc:
        raise DomainError(f"generator evaluation failed: {exc}") from exc
    if values.shape != ratios.shape or not np.all(np.isfinite(values)):
        raise DomainError("generator returned non-finite values on the pair ratios")
    total = np.sum(q * values, axis=-1)
    return float(total) if single else total


def ratio_extrema(
    f1_second: Callable[[np.ndarray], Any],
    f2_second: Callable[[np.ndarray], Any],
    grid: GridSpec,
) -> RatioBounds:
    """Min and max of f1''/f2'' over the grid points, with their arguments."""
    xs = grid.values()
    below = np.asarray(f2_second(xs), dtype=float)
    if np.any(~(below > 0.0)):
        bad = float(xs[np.argmax(~(below > 0.0))])
        raise DomainError(f"f2'' must be positive on the grid; fails at x={bad!r}")
    ratio = np.asarray(f1_second(xs), dtype=float) / below
    i_min = int(np.argmin(ratio))
    i_max = int(np.argmax(ratio))
    return RatioBounds(
        m=float(ratio[i_min]),
        M=float(ratio[i_max]),
        arg_m=float(xs[i_min]),
        arg_M=float(xs[i_max]),
        grid=grid,
    )
