"""Nonparametric degree-corrected bipartite blockmodel via description length.

The objective is the description length (in nats) of a degree-corrected
microcanonical blockmodel for an undirected integer-weighted multigraph with
no self-loops, where blocks never mix the two sides of the bipartite graph.
With N nodes, total edge multiplicity E, B non-empty blocks of sizes n_r,
inter-block multiplicities e_rs (e_r = sum_s e_rs), node strengths k_i, and
edge multiplicities A_ij:

    DL = S_adj + L_partition + L_degrees + L_edges

    S_adj       = sum_r ln e_r! - sum_{r<s} ln e_rs!
                  - sum_i ln k_i! + sum_{i<j} ln A_ij!
    L_partition = ln C(N-1, B-1) + ln N! - sum_r ln n_r! + ln N
    L_degrees   = sum_r ln mset(n_r, e_r)
    L_edges     = ln mset(B(B+1)/2, E)

where mset(n, m) = C(n+m-1, m) counts multisets of size m over n cells.
S_adj is the information needed to pin down the multigraph given block-level
edge counts and node strengths; the remaining terms price the partition, the
strength sequence (uniform prior per block), and the block-level edge-count
matrix, which is what lets the optimizer choose the number of blocks instead
of taking it as a parameter.  The minimum over single-node partitions per
side (the trivial partition) is always evaluated, so "no cluster structure"
is a reachable outcome.

The optimizer is an agglomerative heuristic: start with every node in its
own block, greedily apply strictly-improving merges guided by exact DL
deltas, interleave single-node Metropolis sweeps, then force the merge
trajectory all the way down to the trivial partition while recording every
level, and return the best state seen.  Multiple restarts draw independent
RNG streams derived from (seed, restart), so results are reproducible and
independent of execution order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .network import BipartiteGraph, Node
from .validation import as_bipartite_graph

_EPS = 1e-12
_BETA = 3.0  # inverse temperature of the Metropolis sweeps
_MERGE_PROPOSALS = 10  # sampled merge partners per block and round
_EXHAUSTIVE_BLOCKS = 14  # below this many same-side blocks, evaluate all pairs


@dataclass(frozen=True)
class SbmConfig:
    restarts: int = 10
    sweeps_per_level: int = 5
    seed: int = 0
    allow_trivial: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.sweeps_per_level < 1:
            raise ValueError(f"sweeps_per_level must be >= 1, got {self.sweeps_per_level}")


@dataclass(frozen=True)
class PartitionResult:
    """A block assignment over both sides of a bipartite graph."""

    assignment: Mapping[Node, int]
    num_blocks: int
    description_length: float
    seed: int
    restarts_run: int
    per_restart_dl: tuple[float, ...]
    left_nodes: tuple[Node, ...]

    def left_block_ids(self) -> tuple[int, ...]:
        """Distinct block ids on the left side, in first-appearance order."""
        seen: dict[int, None] = {}
        for node in self.left_nodes:
            seen.setdefault(self.assignment[node], None)
        return tuple(seen)

    def members(self, block_id: int) -> tuple[Node, ...]:
        return tuple(node for node, b in self.assignment.items() if b == block_id)


def _lfact(x: int) -> float:
    return math.lgamma(x + 1)


def _lbinom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return float("-inf")
    return _lfact(n) - _lfact(k) - _lfact(n - k)


def _lmset(n: int, m: int) -> float:
    """ln of the number of size-m multisets over n cells."""
    if m == 0:
        return 0.0
    return _lbinom(n + m - 1, m)


def description_length(g: BipartiteGraph, assignment: Mapping[Node, int]) -> float:
    """Description length (nats) of ``g`` under a block assignment.

    Pure function of its inputs; raises if the assignment misses a graph node
    or puts left and right nodes in the same block.
    """
    nodes = g.left + g.right
    missing = [v for v in nodes if v not in assignment]
    if missing:
        raise ValueError(f"assignment misses nodes: {missing[:5]}")
    left_blocks = {assignment[v] for v in g.left}
    right_blocks = {assignment[v] for v in g.right}
    if left_blocks & right_blocks:
        raise ValueError(f"blocks mix the two sides: {left_blocks & right_blocks}")

    n_r = Counter(assignment[v] for v in nodes)
    e_r: Counter = Counter()
    e_rs: Counter = Counter()
    adj_term = 0.0
    for (u, v), w in g.weights.items():
        r, s = assignment[u], assignment[v]
        e_r[r] += w
        e_r[s] += w
        e_rs[(r, s) if repr(r) <= repr(s) else (s, r)] += w
        adj_term += _lfact(w)
    deg_term = math.fsum(_lfact(g.degree(v)) for v in nodes)

    num_nodes = len(nodes)
    num_blocks = len(n_r)
    total_weight = g.total_weight()

    s_adj = (
        math.fsum(_lfact(e_r[r]) for r in n_r)
        - math.fsum(_lfact(w) for w in e_rs.values())
        - deg_term
        + adj_term
    )
    l_partition = (
        _lbinom(num_nodes - 1, num_blocks - 1)
        + _lfact(num_nodes)
        - math.fsum(_lfact(c) for c in n_r.values())
        + math.log(num_nodes)
    )
    l_degrees = math.fsum(_lmset(n_r[r], e_r[r]) for r in n_r)
    l_edges = _lmset(num_blocks * (num_blocks + 1) // 2, total_weight)
    return s_adj + l_partition + l_degrees + l_edges


class _State:
    """Mutable partition state with exact incremental DL deltas.

    Block ids live in the initial node-index space (0..N-1) and are never
    recreated once emptied by a merge; single-node moves are restricted to
    blocks with at least two members, so blocks vanish only through merges.
    """

    def __init__(self, g: BipartiteGraph):
        self.nodes: list[Node] = list(g.left) + list(g.right)
        self.N = len(self.nodes)
        self.E = g.total_weight()
        n_left = len(g.left)
        self.side = [0] * n_left + [1] * (self.N - n_left)
        index = {v: i for i, v in enumerate(self.nodes)}
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.N)]
        for (u, v), w in g.weights.items():
            iu, iv = index[u], index[v]
            self.adj[iu].append((iv, w))
            self.adj[iv].append((iu, w))
        self.k = [sum(w for _, w in nbrs) for nbrs in self.adj]
        # ln x! lookup; the largest argument is the edge-matrix multiset bound
        limit = self.N * (self.N + 1) // 2 + self.E + 2
        self.lf = [math.lgamma(i + 1) for i in range(limit)]
        self.reset()

    def _lmset_fast(self, n: int, m: int) -> float:
        if m == 0:
            return 0.0
        lf = self.lf
        return lf[n + m - 1] - lf[m] - lf[n - 1]

    def reset(self):
        self.b = list(range(self.N))
        self.n = [1] * self.N
        self.e = list(self.k)
        self.members: list[set[int]] = [{i} for i in range(self.N)]
        self.M: list[dict[int, int]] = [dict() for _ in range(self.N)]
        for i in range(self.N):
            for j, w in self.adj[i]:
                self.M[i][j] = self.M[i].get(j, 0) + w
        self.alive_by_side: tuple[list[int], ...] = (
            [i for i in range(self.N) if self.side[i] == 0],
            [i for i in range(self.N) if self.side[i] == 1],
        )
        self.num_blocks = self.N

    # -- description length -------------------------------------------------

    def exact_dl(self) -> float:
        alive = self.alive_by_side[0] + self.alive_by_side[1]
        s_adj = math.fsum(_lfact(self.e[r]) for r in alive)
        for r in self.alive_by_side[0]:
            s_adj -= math.fsum(_lfact(w) for w in self.M[r].values())
        s_adj -= math.fsum(_lfact(ki) for ki in self.k)
        s_adj += math.fsum(
            _lfact(w) for i in range(self.N) for j, w in self.adj[i] if i < j
        )
        B = self.num_blocks
        l_partition = (
            _lbinom(self.N - 1, B - 1)
            + _lfact(self.N)
            - math.fsum(_lfact(self.n[r]) for r in alive)
            + math.log(self.N)
        )
        l_degrees = math.fsum(_lmset(self.n[r], self.e[r]) for r in alive)
        l_edges = _lmset(B * (B + 1) // 2, self.E)
        return s_adj + l_partition + l_degrees + l_edges

    # -- merges ---------------------------------------------------------------

    def merge_delta(self, u: int, v: int) -> float:
        n, e, M, B, lf = self.n, self.e, self.M, self.num_blocks, self.lf
        d = lf[e[u] + e[v]] - lf[e[u]] - lf[e[v]]
        Mu, Mv = M[u], M[v]
        small, big = (Mu, Mv) if len(Mu) <= len(Mv) else (Mv, Mu)
        for t, ws in small.items():
            wb = big.get(t, 0)
            if wb:
                d -= lf[ws + wb] - lf[ws] - lf[wb]
        # ln C(N-1, B-2) - ln C(N-1, B-1)
        d += lf[B - 1] - lf[B - 2] + lf[self.N - B] - lf[self.N - B + 1]
        d -= lf[n[u] + n[v]] - lf[n[u]] - lf[n[v]]
        d += (
            self._lmset_fast(n[u] + n[v], e[u] + e[v])
            - self._lmset_fast(n[u], e[u])
            - self._lmset_fast(n[v], e[v])
        )
        d += self._lmset_fast((B - 1) * B // 2, self.E) - self._lmset_fast(
            B * (B + 1) // 2, self.E
        )
        return d

    def apply_merge(self, u: int, v: int) -> None:
        """Fold block u into block v (same side, both alive)."""
        if len(self.members[u]) > len(self.members[v]):
            u, v = v, u
        for i in self.members[u]:
            self.b[i] = v
        self.members[v] |= self.members[u]
        self.members[u] = set()
        self.n[v] += self.n[u]
        self.e[v] += self.e[u]
        self.n[u] = 0
        self.e[u] = 0
        Mv = self.M[v]
        for t, w in self.M[u].items():
            Mv[t] = Mv.get(t, 0) + w
            Mt = self.M[t]
            Mt[v] = Mt.get(v, 0) + w
            del Mt[u]
        self.M[u] = {}
        side_list = self.alive_by_side[self.side[u]]
        side_list.remove(u)
        self.num_blocks -= 1

    # -- single-node moves ----------------------------------------------------

    def move_delta(self, i: int, s: int) -> float:
        r = self.b[i]
        ki = self.k[i]
        n, e, M, lf = self.n, self.e, self.M, self.lf
        wt: dict[int, int] = {}
        for j, w in self.adj[i]:
            t = self.b[j]
            wt[t] = wt.get(t, 0) + w
        d = lf[e[r] - ki] - lf[e[r]] + lf[e[s] + ki] - lf[e[s]]
        Mr, Ms = M[r], M[s]
        for t, w in wt.items():
            mrt = Mr[t]
            mst = Ms.get(t, 0)
            d -= lf[mrt - w] - lf[mrt]
            d -= lf[mst + w] - lf[mst]
        d += math.log(n[r]) - math.log(n[s] + 1)
        d += self._lmset_fast(n[r] - 1, e[r] - ki) - self._lmset_fast(n[r], e[r])
        d += self._lmset_fast(n[s] + 1, e[s] + ki) - self._lmset_fast(n[s], e[s])
        return d

    def apply_move(self, i: int, s: int) -> None:
        r = self.b[i]
        ki = self.k[i]
        self.b[i] = s
        self.members[r].remove(i)
        self.members[s].add(i)
        self.n[r] -= 1
        self.n[s] += 1
        self.e[r] -= ki
        self.e[s] += ki
        Mr, Ms = self.M[r], self.M[s]
        for j, w in self.adj[i]:
            t = self.b[j]
            Mt = self.M[t]
            left = Mr[t] - w
            if left:
                Mr[t] = left
                Mt[r] = left
            else:
                del Mr[t]
                del Mt[r]
            Ms[t] = Ms.get(t, 0) + w
            Mt[s] = Ms[t]

    # -- proposal sampling ------------------------------------------------------

    def _weighted_block(self, row: dict[int, int], total: int, rng) -> int:
        x = rng.random() * total
        acc = 0.0
        last = -1
        for t, w in row.items():
            acc += w
            last = t
            if x < acc:
                return t
        return last

    def sample_merge_partner(self, r: int, rng) -> int | None:
        side_list = self.alive_by_side[self.side[r]]
        if len(side_list) < 2:
            return None
        if self.e[r] > 0 and rng.random() >= 0.1:
            u = self._weighted_block(self.M[r], self.e[r], rng)
            t = self._weighted_block(self.M[u], self.e[u], rng)
            if t != r:
                return t
        t = side_list[int(rng.integers(len(side_list)))]
        return t if t != r else None

    def sample_move_target(self, i: int, rng) -> int | None:
        side_list = self.alive_by_side[self.side[i]]
        if len(side_list) < 2:
            return None
        if self.adj[i] and rng.random() >= 0.1:
            x = rng.random() * self.k[i]
            acc = 0.0
            j = self.adj[i][-1][0]
            for jj, w in self.adj[i]:
                acc += w
                if x < acc:
                    j = jj
                    break
            u = self.b[j]
            t = self._weighted_block(self.M[u], self.e[u], rng)
            if t != self.b[i]:
                return t
        t = side_list[int(rng.integers(len(side_list)))]
        return t if t != self.b[i] else None


def _run_sweeps(state: _State, rng, max_sweeps: int) -> None:
    for _ in range(max_sweeps):
        accepted = 0
        for i in rng.permutation(state.N):
            i = int(i)
            if state.n[state.b[i]] == 1:
                continue
            s = state.sample_move_target(i, rng)
            if s is None:
                continue
            d = state.move_delta(i, s)
            if d < -_EPS or rng.random() < math.exp(-_BETA * max(d, 0.0)):
                state.apply_move(i, s)
                accepted += 1
        if accepted == 0:
            break


def _merge_round(state: _State, rng) -> int:
    """One round of strictly-improving merges; returns how many were applied."""
    candidates: list[tuple[float, int, int]] = []
    for r in state.alive_by_side[0] + state.alive_by_side[1]:
        best: tuple[float, int] | None = None
        side_count = len(state.alive_by_side[state.side[r]])
        if side_count <= _EXHAUSTIVE_BLOCKS:
            for t in state.alive_by_side[state.side[r]]:
                if t == r:
                    continue
                d = state.merge_delta(r, t)
                if best is None or d < best[0]:
                    best = (d, t)
        else:
            for _ in range(_MERGE_PROPOSALS):
                t = state.sample_merge_partner(r, rng)
                if t is None:
                    continue
                d = state.merge_delta(r, t)
                if best is None or d < best[0]:
                    best = (d, t)
        if best is not None:
            candidates.append((best[0], r, best[1]))
    candidates.sort()
    cap = max(1, state.num_blocks // 4)
    applied = 0
    consumed: set[int] = set()
    for _, r, t in candidates:
        if applied >= cap:
            break
        if r in consumed or t in consumed or state.n[r] == 0 or state.n[t] == 0:
            continue
        d = state.merge_delta(r, t)
        if d < -_EPS:
            state.apply_merge(r, t)
            consumed.add(r)
            consumed.add(t)
            applied += 1
    return applied


def _best_merge(state: _State, rng) -> tuple[float, int, int] | None:
    """Best available same-side merge, sampled when the state is still large."""
    best: tuple[float, int, int] | None = None
    for side_list in state.alive_by_side:
        if len(side_list) < 2:
            continue
        if len(side_list) <= _EXHAUSTIVE_BLOCKS:
            for a in range(len(side_list)):
                for b in range(a + 1, len(side_list)):
                    r, t = side_list[a], side_list[b]
                    d = state.merge_delta(r, t)
                    if best is None or d < best[0]:
                        best = (d, r, t)
        else:
            for r in side_list:
                for _ in range(_MERGE_PROPOSALS):
                    t = state.sample_merge_partner(r, rng)
                    if t is None:
                        continue
                    d = state.merge_delta(r, t)
                    if best is None or d < best[0]:
                        best = (d, r, t)
    return best


def _sides_present(state: _State) -> int:
    return sum(1 for side_list in state.alive_by_side if side_list)


def _is_trivial(state: _State) -> bool:
    return all(len(side_list) <= 1 for side_list in state.alive_by_side)


def _run_restart(state: _State, cfg: SbmConfig, rng) -> list[tuple[float, bool, list[int]]]:
    """One restart; returns recorded (dl, is_trivial, assignment) snapshots."""
    state.reset()
    snapshots = [(state.exact_dl(), _is_trivial(state), list(state.b))]

    def record():
        snapshots.append((state.exact_dl(), _is_trivial(state), list(state.b)))

    # Greedy phase: strictly-improving merge rounds with interleaved sweeps.
    while state.num_blocks > _sides_present(state):
        if _merge_round(state, rng) == 0:
            break
        _run_sweeps(state, rng, cfg.sweeps_per_level)
        record()
    # Forced descent: walk the merge trajectory down to the trivial partition,
    # recording every level, so the whole DL-versus-B curve is scanned and the
    # trivial partition is always among the candidates.
    while state.num_blocks > _sides_present(state):
        best = _best_merge(state, rng)
        if best is None:
            break
        _, r, t = best
        state.apply_merge(r, t)
        _run_sweeps(state, rng, cfg.sweeps_per_level)
        record()
    return snapshots


def infer_partition(g: BipartiteGraph, cfg: SbmConfig = SbmConfig()) -> PartitionResult:
    """Infer the partition minimizing description length; the number of blocks
    is chosen by the optimizer, not supplied.

    Deterministic for a fixed (graph, cfg): restart r draws its RNG stream
    from (seed, r) and ties across restarts resolve to the lowest restart
    index.  With ``allow_trivial`` the trivial partition is always evaluated
    as a candidate, so the result is never worse than it.
    """
    if not g.left and not g.right:
        raise ValueError("cannot infer a partition of an empty graph")
    state = _State(g)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    per_restart: list[float] = []
    best: tuple[float, int, list[int]] | None = None
    for ridx in range(cfg.restarts):
        rng = np.random.default_rng(seeds[ridx])
        snapshots = _run_restart(state, cfg, rng)
        eligible = [s for s in snapshots if cfg.allow_trivial or not s[1]]
        if not eligible:  # single-node sides make everything trivial
            eligible = snapshots
        dl, _, assignment = min(eligible, key=lambda s: s[0])
        per_restart.append(dl)
        if best is None or dl < best[0]:
            best = (dl, ridx, assignment)
    _, _, raw = best
    relabel: dict[int, int] = {}
    assignment: dict[Node, int] = {}
    for node, raw_block in zip(state.nodes, raw):
        assignment[node] = relabel.setdefault(raw_block, len(relabel))
    return PartitionResult(
        assignment=assignment,
        num_blocks=len(relabel),
        description_length=description_length(g, assignment),
        seed=cfg.seed,
        restarts_run=cfg.restarts,
        per_restart_dl=tuple(per_restart),
        left_nodes=g.left,
    )


def canonicalize(p: PartitionResult) -> PartitionResult:
    """Renumber blocks 0..B-1 by descending left-side size, ties by smallest
    member label; idempotent."""
    left_size = Counter(p.assignment[v] for v in p.left_nodes)
    members: dict[int, list[Node]] = {}
    for node, block in p.assignment.items():
        members.setdefault(block, []).append(node)
    ordered = sorted(
        members,
        key=lambda blk: (-left_size.get(blk, 0), min(repr(v) for v in members[blk])),
    )
    relabel = {old: new for new, old in enumerate(ordered)}
    return PartitionResult(
        assignment={node: relabel[block] for node, block in p.assignment.items()},
        num_blocks=p.num_blocks,
        description_length=p.description_length,
        seed=p.seed,
        restarts_run=p.restarts_run,
        per_restart_dl=p.per_restart_dl,
        left_nodes=p.left_nodes,
    )


class BipartiteBlockmodel(BaseEstimator, ClusterMixin):
    """Cluster the left side of a bipartite graph with the nonparametric
    degree-corrected blockmodel.

    Accepts a :class:`BipartiteGraph` or a non-negative integer matrix whose
    rows are left nodes and columns right nodes.  After ``fit``, ``labels_``
    holds canonical block ids for the left nodes (0 is the largest block).
    """

    def __init__(
        self,
        restarts: int = 10,
        sweeps_per_level: int = 5,
        seed: int = 0,
        allow_trivial: bool = True,
    ):
        self.restarts = restarts
        self.sweeps_per_level = sweeps_per_level
        self.seed = seed
        self.allow_trivial = allow_trivial

    def fit(self, X, y=None):
        g = as_bipartite_graph(X)
        cfg = SbmConfig(
            restarts=self.restarts,
            sweeps_per_level=self.sweeps_per_level,
            seed=self.seed,
            allow_trivial=self.allow_trivial,
        )
        partition = canonicalize(infer_partition(g, cfg))
        self.graph_ = g
        self.partition_ = partition
        self.labels_ = np.array([partition.assignment[v] for v in g.left])
        self.n_blocks_ = partition.num_blocks
        self.description_length_ = partition.description_length
        return self
