"""Nonparametric comparison statistics and coding-reliability measures.

Mann-Whitney U p-values are exact (full enumeration over group assignments,
computed by a tie-aware rank-sum counting recursion) for small samples and
tie-corrected normal approximations with continuity correction otherwise.
Fisher's exact test sums the hypergeometric distribution conditioned on the
table margins in exact rational arithmetic.  Odds-ratio confidence intervals
use the log-scale (Woolf) standard error.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Sequence

_NORMAL = NormalDist()
ALTERNATIVES = ("two-sided", "less", "greater")


@dataclass(frozen=True)
class MwuReport:
    """Mann-Whitney U result; U counts wins of the first sample over the second."""

    U: float
    p_value: float
    alternative: str
    rank_biserial: float
    common_language: float
    n1: int
    n2: int
    method: str


@dataclass(frozen=True)
class FisherReport:
    table: tuple[tuple[int, int], tuple[int, int]]
    p_one_tailed: float
    p_two_tailed: float
    odds_ratio: float
    ci_low: float
    ci_high: float
    ci_level: float = 0.95
    continuity_corrected: bool = False
    alternative: str = "greater"


@dataclass(frozen=True)
class KappaReport:
    confusion: tuple[tuple[int, ...], ...]
    observed_agreement: float
    expected_agreement: float
    kappa: float


def _midranks(pooled: Sequence[float]) -> list[float]:
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for idx in order[i : j + 1]:
            ranks[idx] = mid
        i = j + 1
    return ranks


def _u_statistic(x: Sequence[float], y: Sequence[float]) -> float:
    n1 = len(x)
    pooled = list(x) + list(y)
    ranks = _midranks(pooled)
    r_x = sum(ranks[:n1])
    return r_x - n1 * (n1 + 1) / 2


def _exact_counts(pooled: Sequence[float], n1: int) -> dict[int, int]:
    """Distribution of 2*R_x over all C(n, n1) group assignments.

    Midranks depend only on the pooled multiset, so doubling them gives integer
    item scores and the distribution follows from subset-sum counting.
    """
    doubled = [round(2 * r) for r in _midranks(pooled)]
    # ways[j][s]: subsets of size j with doubled-rank sum s
    ways: list[dict[int, int]] = [{0: 1}] + [{} for _ in range(n1)]
    for d in doubled:
        for j in range(min(n1, len(doubled)), 0, -1):
            prev = ways[j - 1]
            cur = ways[j]
            for s, c in prev.items():
                cur[s + d] = cur.get(s + d, 0) + c
    return ways[n1]


def _exact_p(x: Sequence[float], y: Sequence[float], u_obs: float, alternative: str) -> float:
    n1, n2 = len(x), len(y)
    counts = _exact_counts(list(x) + list(y), n1)
    offset = n1 * (n1 + 1)  # 2U = 2R_x - n1(n1+1)
    u2_obs = round(2 * u_obs)
    mean2 = n1 * n2  # 2 * n1 n2 / 2
    total = math.comb(n1 + n2, n1)
    if alternative == "greater":
        hits = sum(c for s, c in counts.items() if s - offset >= u2_obs)
    elif alternative == "less":
        hits = sum(c for s, c in counts.items() if s - offset <= u2_obs)
    else:
        dev = abs(u2_obs - mean2)
        hits = sum(c for s, c in counts.items() if abs(s - offset - mean2) >= dev)
    return hits / total


def _normal_p(
    x: Sequence[float], y: Sequence[float], u_obs: float, alternative: str
) -> float:
    n1, n2 = len(x), len(y)
    n = n1 + n2
    pooled = list(x) + list(y)
    tie_counts: dict[float, int] = {}
    for v in pooled:
        tie_counts[v] = tie_counts.get(v, 0) + 1
    tie_term = sum(t**3 - t for t in tie_counts.values())
    var = n1 * n2 / 12 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    mu = n1 * n2 / 2
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (u_obs - mu - 0.5) / sd
        return 1.0 - _NORMAL.cdf(z)
    if alternative == "less":
        z = (u_obs - mu + 0.5) / sd
        return _NORMAL.cdf(z)
    z = (abs(u_obs - mu) - 0.5) / sd
    return min(1.0, 2.0 * (1.0 - _NORMAL.cdf(max(z, 0.0))))


def mann_whitney_u(
    x: Sequence[float],
    y: Sequence[float],
    alternative: str = "two-sided",
    method: str = "auto",
) -> MwuReport:
    """Mann-Whitney U test of two independent samples.

    ``method="auto"`` uses the exact enumeration p-value whenever both samples
    have at most 8 observations and the tie-corrected, continuity-corrected
    normal approximation otherwise; ``"exact"`` and ``"normal"`` force a route.
    Both effect sizes are reported: common-language U/(n1*n2) and rank-biserial
    1 - 2U/(n1*n2), whose sign is positive when the second sample tends larger.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"method must be auto/exact/normal, got {method!r}")
    if not len(x) or not len(y):
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(x), len(y)
    u = _u_statistic(x, y)
    exact = method == "exact" or (method == "auto" and n1 <= 8 and n2 <= 8)
    if exact:
        p = _exact_p(x, y, u, alternative)
        used = "exact"
    else:
        p = _normal_p(x, y, u, alternative)
        used = "normal-approx with tie correction"
    return MwuReport(
        U=u,
        p_value=p,
        alternative=alternative,
        rank_biserial=1.0 - 2.0 * u / (n1 * n2),
        common_language=u / (n1 * n2),
        n1=n1,
        n2=n2,
        method=used,
    )


def _check_table(table) -> tuple[int, int, int, int]:
    rows = tuple(tuple(row) for row in table)
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError("table must be 2x2")
    if any(v != int(v) for r in rows for v in r):
        raise ValueError(f"table cells must be integers, got {rows}")
    (a, b), (c, d) = [[int(v) for v in r] for r in rows]
    if min(a, b, c, d) < 0:
        raise ValueError("table cells must be non-negative")
    if a + b + c + d == 0:
        raise ValueError("table must have a positive total")
    return a, b, c, d


def _hypergeom_pmf(a: int, r1: int, c1: int, n: int) -> Fraction:
    return Fraction(math.comb(c1, a) * math.comb(n - c1, r1 - a), math.comb(n, r1))


def _fisher_ps(a: int, b: int, c: int, d: int) -> tuple[Fraction, Fraction, Fraction]:
    """(p_greater, p_less, p_two_sided), exact rationals."""
    r1, c1, n = a + b, a + c, a + b + c + d
    lo, hi = max(0, r1 + c1 - n), min(r1, c1)
    pmf = {k: _hypergeom_pmf(k, r1, c1, n) for k in range(lo, hi + 1)}
    p_greater = sum(pmf[k] for k in range(a, hi + 1))
    p_less = sum(pmf[k] for k in range(lo, a + 1))
    cutoff = pmf[a] * Fraction(1.0 + 1e-7)
    p_two = sum(q for q in pmf.values() if q <= cutoff)
    return p_greater, p_less, min(p_two, Fraction(1))


def _woolf(a: int, b: int, c: int, d: int, level: float) -> tuple[float, float, float, bool]:
    corrected = 0 in (a, b, c, d)
    if corrected:
        fa, fb, fc, fd = (v + 0.5 for v in (a, b, c, d))
    else:
        fa, fb, fc, fd = float(a), float(b), float(c), float(d)
    odds_ratio = (fa * fd) / (fb * fc)
    z = _NORMAL.inv_cdf(0.5 + level / 2)
    se = math.sqrt(1 / fa + 1 / fb + 1 / fc + 1 / fd)
    log_or = math.log(odds_ratio)
    return odds_ratio, math.exp(log_or - z * se), math.exp(log_or + z * se), corrected


def fisher_exact(table, alternative: str = "greater", ci_level: float = 0.95) -> FisherReport:
    """Fisher's exact test on a 2x2 table.

    ``alternative`` picks the direction of the one-tailed p-value; "greater"
    means the (1,1) cell is larger than expected under fixed margins (and
    "two-sided" falls back to "greater" for the one-tailed field).  The
    two-sided p sums all tables at most as probable as the observed one, with
    1 + 1e-7 relative slack.  The report also carries the Woolf odds ratio and
    confidence interval.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    a, b, c, d = _check_table(table)
    p_greater, p_less, p_two = _fisher_ps(a, b, c, d)
    p_one = p_less if alternative == "less" else p_greater
    odds_ratio, ci_low, ci_high, corrected = _woolf(a, b, c, d, ci_level)
    return FisherReport(
        table=((a, b), (c, d)),
        p_one_tailed=float(p_one),
        p_two_tailed=float(p_two),
        odds_ratio=odds_ratio,
        ci_low=ci_low,
        ci_high=ci_high,
        ci_level=ci_level,
        continuity_corrected=corrected,
        alternative=alternative,
    )


def odds_ratio_woolf_ci(table, level: float = 0.95) -> FisherReport:
    """Odds ratio with a log-scale (Woolf) confidence interval.

    Any zero cell triggers the +0.5 continuity correction on all four cells,
    for both the point estimate and the interval, and the correction is flagged
    in the report.  The exact-test p-values are included for completeness.
    """
    a, b, c, d = _check_table(table)
    return fisher_exact(((a, b), (c, d)), alternative="greater", ci_level=level)


def cohens_kappa(confusion) -> KappaReport:
    """Chance-corrected inter-rater agreement over a square confusion matrix."""
    rows = tuple(tuple(int(v) for v in row) for row in confusion)
    k = len(rows)
    if k == 0 or any(len(r) != k for r in rows):
        raise ValueError("confusion matrix must be square and non-empty")
    if any(v < 0 for r in rows for v in r):
        raise ValueError("confusion matrix cells must be non-negative")
    total = sum(v for r in rows for v in r)
    if total == 0:
        raise ValueError("confusion matrix must have a positive total")
    p_o = sum(rows[i][i] for i in range(k)) / total
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(rows[i][j] for i in range(k)) for j in range(k)]
    p_e = sum(row_sums[i] * col_sums[i] for i in range(k)) / total**2
    if p_e == 1.0:
        raise ValueError("degenerate single-category data: expected agreement is 1")
    return KappaReport(
        confusion=rows,
        observed_agreement=p_o,
        expected_agreement=p_e,
        kappa=(p_o - p_e) / (1 - p_e),
    )


def digest(payload) -> str:
    """Stable sha256 digest of a JSON-serializable input, for report provenance."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def report_dict(
    mwu: MwuReport | None = None,
    fisher: FisherReport | None = None,
    kappa: KappaReport | None = None,
    inputs: dict | None = None,
) -> dict:
    """Combine reports into one JSON-serializable dict.

    ``inputs`` maps a name to the raw data behind each test; only sha256
    digests of those inputs are embedded, as provenance.
    """
    payload: dict = {}
    if mwu is not None:
        payload["mann_whitney"] = dataclasses.asdict(mwu)
    if fisher is not None:
        payload["fisher"] = dataclasses.asdict(fisher)
    if kappa is not None:
        payload["kappa"] = dataclasses.asdict(kappa)
    if inputs:
        payload["inputs_sha256"] = {name: digest(value) for name, value in inputs.items()}
    return payload
