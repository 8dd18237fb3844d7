"""Tripartite engagement network and its bipartite projections.

The single source of truth is the triad tensor ``w[(student, location, code)]``:
every edge set of the tripartite network, and every projection analyzed
downstream, is a marginal sum over that tensor, so the derived views can never
drift out of sync.  All weights are integer co-occurrence counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

from .events import Triad
from .vocab import CodingScheme, LocationTaxonomy, VocabularyError

Node = Hashable
PairNode = tuple[str, str]  # (location, code)


@dataclass(frozen=True)
class TriadTensor:
    """Sparse positive-integer counts of (student, location, code) triads."""

    counts: Mapping[Triad, int]

    def __post_init__(self):
        for key, value in self.counts.items():
            if not (isinstance(value, int) and value >= 1):
                raise ValueError(f"triad count for {key} must be a positive integer, got {value!r}")

    @classmethod
    def from_triads(cls, triads: Iterable[Triad]) -> "TriadTensor":
        return cls(dict(Counter(triads)))

    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class BipartiteGraph:
    """A weighted two-sided graph; edges only run between the two sides.

    ``left_kind`` / ``right_kind`` tag what the sides represent (``student``,
    ``pair``, ``location``, ``code``, ...) for typed serialization.
    """

    left: tuple[Node, ...]
    right: tuple[Node, ...]
    weights: Mapping[tuple[Node, Node], int]
    left_kind: str = "left"
    right_kind: str = "right"

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        left_set, right_set = set(self.left), set(self.right)
        if len(left_set) != len(self.left) or len(right_set) != len(self.right):
            raise ValueError("duplicate node labels within a side")
        if left_set & right_set:
            raise ValueError(f"node labels shared across sides: {left_set & right_set}")
        degree: Counter = Counter()
        for (u, v), w in self.weights.items():
            if u not in left_set or v not in right_set:
                raise ValueError(f"edge ({u!r}, {v!r}) does not run left-to-right")
            if not (isinstance(w, int) and w >= 1):
                raise ValueError(f"edge ({u!r}, {v!r}) weight must be a positive integer, got {w!r}")
            degree[u] += w
            degree[v] += w
        object.__setattr__(self, "_degree", dict(degree))
        object.__setattr__(self, "_nodes", left_set | right_set)

    def degree(self, node: Node) -> int:
        if node not in self._nodes:
            raise KeyError(f"unknown node {node!r}")
        return self._degree.get(node, 0)

    def total_weight(self) -> int:
        return sum(self.weights.values())

    def adjacency(self) -> dict[Node, list[tuple[Node, int]]]:
        """Neighbor lists (both directions), in edge insertion order."""
        adj: dict[Node, list[tuple[Node, int]]] = {n: [] for n in self.left + self.right}
        for (u, v), w in self.weights.items():
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj


@dataclass(frozen=True)
class TripartiteNetwork:
    """Three node sets (students, codes, areas) with pairwise weighted edge sets.

    Edge sets are the three marginals of the triad tensor:
    ``sc[s, c] = sum_l w[s, l, c]``, ``sl[s, l] = sum_c w[s, l, c]``,
    ``cl[c, l] = sum_s w[s, l, c]``.
    """

    students: tuple[str, ...]
    codes: tuple[str, ...]
    areas: tuple[str, ...]
    sc: Mapping[tuple[str, str], int]
    sl: Mapping[tuple[str, str], int]
    cl: Mapping[tuple[str, str], int]
    triads: TriadTensor = field(default_factory=lambda: TriadTensor({}))

    def total_weight(self) -> int:
        return self.triads.total()


def build_tripartite(
    triads: Iterable[Triad],
    scheme: CodingScheme | None = None,
    taxonomy: LocationTaxonomy | None = None,
) -> TripartiteNetwork:
    """Aggregate a triad multiset into a tripartite network.

    When a scheme/taxonomy is given it defines the code/area node sets (and
    out-of-vocabulary triads are an error); otherwise node sets are the
    observed labels in first-appearance order.  Students are always the
    observed labels in first-appearance order.
    """
    tensor = TriadTensor.from_triads(triads)
    students: dict[str, None] = {}
    seen_codes: dict[str, None] = {}
    seen_areas: dict[str, None] = {}
    sc: Counter = Counter()
    sl: Counter = Counter()
    cl: Counter = Counter()
    for (s, l, c), w in tensor.counts.items():
        if scheme is not None and c not in scheme:
            raise VocabularyError(c, kind="code")
        if taxonomy is not None and l not in taxonomy:
            raise VocabularyError(l, kind="location")
        students.setdefault(s, None)
        seen_codes.setdefault(c, None)
        seen_areas.setdefault(l, None)
        sc[s, c] += w
        sl[s, l] += w
        cl[c, l] += w
    codes = scheme.behaviors if scheme is not None else tuple(seen_codes)
    areas = taxonomy.areas if taxonomy is not None else tuple(seen_areas)
    return TripartiteNetwork(
        students=tuple(students),
        codes=codes,
        areas=areas,
        sc=dict(sc),
        sl=dict(sl),
        cl=dict(cl),
        triads=tensor,
    )


def project_student_pair(net: TripartiteNetwork) -> BipartiteGraph:
    """Project onto students x (location, code) pairs.

    The weight of (s, (l, c)) is the triad count w[s, l, c]; only pairs with at
    least one nonzero triad appear on the right side.
    """
    pairs: dict[PairNode, None] = {}
    weights: dict[tuple[Node, Node], int] = {}
    for (s, l, c), w in net.triads.counts.items():
        pair = (l, c)
        pairs.setdefault(pair, None)
        weights[s, pair] = weights.get((s, pair), 0) + w
    return BipartiteGraph(
        left=net.students,
        right=tuple(pairs),
        weights=weights,
        left_kind="student",
        right_kind="pair",
    )


def _cluster_members(net: TripartiteNetwork, partition, cluster_id) -> list[str]:
    assignment = getattr(partition, "assignment", partition)
    members = [s for s in net.students if assignment.get(s) == cluster_id]
    if not members:
        raise ValueError(f"cluster {cluster_id!r} is unknown or contains no student node")
    return members


def project_cluster_lc(net: TripartiteNetwork, partition, cluster_id) -> BipartiteGraph:
    """Project one student cluster onto its locations x codes co-occurrence graph.

    The weight of (l, c) is the triad count w[s, l, c] summed over the cluster's
    students.  Node sets are the full area and code vocabularies of the network;
    zero-weight pairs are omitted from the edge map.  ``partition`` may be a
    PartitionResult or any student -> cluster mapping.
    """
    members = set(_cluster_members(net, partition, cluster_id))
    weights: dict[tuple[Node, Node], int] = {}
    for (s, l, c), w in net.triads.counts.items():
        if s in members:
            weights[l, c] = weights.get((l, c), 0) + w
    return BipartiteGraph(
        left=net.areas,
        right=net.codes,
        weights=weights,
        left_kind="location",
        right_kind="code",
    )


def weighted_degree(g: BipartiteGraph, node: Node) -> int:
    """Sum of edge weights incident to ``node`` (0 for isolated nodes)."""
    return g.degree(node)
