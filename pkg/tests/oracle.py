"""Direct-summation reference values in 50-digit mpmath arithmetic.

Each measure is written from its textbook definition, not from the
rearranged closed forms in divkit.measures, so the two can be compared.
"""

from __future__ import annotations

from typing import Dict, Sequence

import mpmath

DPS = 50


def _mp(values: Sequence[float]):
    return [mpmath.mpf(v) for v in values]


def measures(p: Sequence[float], q: Sequence[float]) -> Dict[str, float]:
    with mpmath.workdps(DPS):
        P, Q = _mp(p), _mp(q)
        pairs = list(zip(P, Q))
        out = {
            "hellinger": mpmath.fsum((mpmath.sqrt(a) - mpmath.sqrt(b)) ** 2 for a, b in pairs) / 2,
            "triangular": mpmath.fsum((a - b) ** 2 / (a + b) for a, b in pairs),
            "sym_chi_square": mpmath.fsum((a - b) ** 2 * (a + b) / (a * b) for a, b in pairs),
            "chi_square": mpmath.fsum((a - b) ** 2 / b for a, b in pairs),
            "j_div": mpmath.fsum((a - b) * mpmath.log(a / b) for a, b in pairs),
            "jensen_shannon": (
                mpmath.fsum(a * mpmath.log(2 * a / (a + b)) for a, b in pairs)
                + mpmath.fsum(b * mpmath.log(2 * b / (a + b)) for a, b in pairs)
            )
            / 2,
            "ag_mean": mpmath.fsum(
                (a + b) / 2 * mpmath.log((a + b) / (2 * mpmath.sqrt(a * b))) for a, b in pairs
            ),
            "d_div": 1
            - mpmath.fsum(
                (mpmath.sqrt(a) + mpmath.sqrt(b)) / 2 * mpmath.sqrt((a + b) / 2) for a, b in pairs
            ),
            "bhattacharyya": mpmath.fsum(mpmath.sqrt(a * b) for a, b in pairs),
            "harmonic_mean": mpmath.fsum(2 * a * b / (a + b) for a, b in pairs),
        }
        return {k: float(v) for k, v in out.items()}


def normalized(p: Sequence[float], q: Sequence[float]) -> list:
    m = measures(p, q)
    return [
        m["triangular"] / 4,
        m["jensen_shannon"],
        m["hellinger"],
        4 * m["d_div"],
        m["j_div"] / 8,
        m["ag_mean"],
        m["sym_chi_square"] / 16,
    ]


def zeta(s: float, p: Sequence[float], q: Sequence[float]) -> float:
    with mpmath.workdps(DPS):
        s = mpmath.mpf(s)
        total = mpmath.fsum(
            a**s * b ** (1 - s) + a ** (1 - s) * b**s for a, b in zip(_mp(p), _mp(q))
        )
        return float((total - 2) / (s * (s - 1)))


def xi(s: float, p: Sequence[float], q: Sequence[float]) -> float:
    with mpmath.workdps(DPS):
        s = mpmath.mpf(s)
        total = mpmath.fsum(
            (a ** (1 - s) + b ** (1 - s)) / 2 * ((a + b) / 2) ** s for a, b in zip(_mp(p), _mp(q))
        )
        return float((total - 1) / (s * (s - 1)))
