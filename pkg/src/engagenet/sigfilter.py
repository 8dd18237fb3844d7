"""Degree-preserving binomial null model and edge-significance filtering.

For a locations x codes graph, the null model redistributes each location's
weighted degree k_l uniformly at random over the code vocabulary while keeping
k_l fixed.  The weight of any single (location, code) cell is then Binomial
with k_l trials and success probability 1/|codes|, so an edge is significant
at level alpha when its weight reaches the smallest integer t with
P(X >= t) <= alpha (the inverse survival function).  Tail probabilities are
exact sums of the binomial mass function, accumulated in log space; no normal
or Poisson approximation is used.  No multiple-comparison correction is
applied by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from sklearn.base import BaseEstimator, TransformerMixin

from .network import BipartiteGraph, Node


@dataclass(frozen=True)
class FilterConfig:
    """Significance level and per-trial success probability of the null model.

    ``success_prob=None`` means "derive 1/|codes| from the graph's code side at
    filter time", which keeps reduced vocabularies correct.
    """

    alpha: float = 0.05
    success_prob: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.success_prob is not None and not 0.0 < self.success_prob < 1.0:
            raise ValueError(f"success_prob must be in (0, 1), got {self.success_prob}")


class RetainedEdge(NamedTuple):
    location: Node
    code: Node
    weight: int
    threshold: int
    survival_probability: float


@dataclass(frozen=True)
class SignificanceResult:
    """Edges that survived the null-model filter, plus every location's threshold."""

    cluster_id: int | str | None
    retained: tuple[RetainedEdge, ...]
    thresholds: dict[Node, int]
    degrees: dict[Node, int]


def _log_pmf(k: int, log_p: float, log_q: float, j: int) -> float:
    return (
        math.lgamma(k + 1) - math.lgamma(j + 1) - math.lgamma(k - j + 1)
        + j * log_p + (k - j) * log_q
    )


def binomial_sf(k: int, p: float, w: int) -> float:
    """Exact upper tail P(X >= w) for X ~ Binomial(k, p).

    Negative ``w`` returns 1 by convention.  Terms are accumulated with
    compensated summation, largest last, so boundary thresholds stay exact.
    """
    if k < 0:
        raise ValueError(f"trial count must be non-negative, got {k}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"success probability must be in (0, 1), got {p}")
    if w <= 0:
        return 1.0
    if w > k:
        return 0.0
    log_p, log_q = math.log(p), math.log1p(-p)
    total = math.fsum(math.exp(_log_pmf(k, log_p, log_q, j)) for j in range(k, w - 1, -1))
    return min(1.0, total)


def significance_threshold(k: int, p: float, alpha: float) -> int:
    """Smallest integer t with P(X >= t) <= alpha, X ~ Binomial(k, p).

    ``alpha=1.0`` gives t=0 (every realizable weight passes); when even the
    full mass at k exceeds alpha the result is k + 1, i.e. nothing passes.
    """
    if k < 0:
        raise ValueError(f"trial count must be non-negative, got {k}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"success probability must be in (0, 1), got {p}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        return 0
    log_p, log_q = math.log(p), math.log1p(-p)
    # Accumulate the survival function downward from j = k with Neumaier
    # compensation; the first j whose tail exceeds alpha puts the threshold at
    # j + 1.
    total = 0.0
    comp = 0.0
    for j in range(k, -1, -1):
        term = math.exp(_log_pmf(k, log_p, log_q, j))
        partial = total + term
        if abs(total) >= term:
            comp += (total - partial) + term
        else:
            comp += (term - partial) + total
        total = partial
        if total + comp > alpha:
            return j + 1
    return 0


def filter_significant(
    g: BipartiteGraph,
    cfg: FilterConfig = FilterConfig(),
    cluster_id: int | str | None = None,
) -> SignificanceResult:
    """Keep the edges of a locations x codes graph whose weights are significant.

    For each location l the threshold t_l is computed from its weighted degree
    k_l; exactly the edges with weight >= t_l are retained.  Locations are
    independent, so filtering one cluster's graph never depends on another's.
    """
    if cfg.success_prob is None and not g.right:
        raise ValueError("cannot derive success_prob from a graph with no code nodes")
    p = cfg.success_prob if cfg.success_prob is not None else 1.0 / len(g.right)
    degrees = {loc: g.degree(loc) for loc in g.left}
    thresholds = {loc: significance_threshold(degrees[loc], p, cfg.alpha) for loc in g.left}
    retained = []
    for loc in g.left:
        t = thresholds[loc]
        k = degrees[loc]
        for code in g.right:
            w = g.weights.get((loc, code), 0)
            if w >= t and w > 0:
                retained.append(RetainedEdge(loc, code, w, t, binomial_sf(k, p, w)))
    return SignificanceResult(
        cluster_id=cluster_id, retained=tuple(retained), thresholds=thresholds, degrees=degrees
    )


class SignificantEdgeFilter(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit learns per-location thresholds, transform prunes edges."""

    def __init__(self, alpha: float = 0.05, success_prob: float | None = None):
        self.alpha = alpha
        self.success_prob = success_prob

    def fit(self, X: BipartiteGraph, y=None):
        cfg = FilterConfig(alpha=self.alpha, success_prob=self.success_prob)
        self.result_ = filter_significant(X, cfg)
        self.thresholds_ = self.result_.thresholds
        return self

    def transform(self, X: BipartiteGraph) -> BipartiteGraph:
        if not hasattr(self, "thresholds_"):
            raise RuntimeError("SignificantEdgeFilter must be fitted before transform")
        kept = {
            (u, v): w
            for (u, v), w in X.weights.items()
            if w >= self.thresholds_.get(u, w + 1)
        }
        return BipartiteGraph(X.left, X.right, kept, X.left_kind, X.right_kind)
