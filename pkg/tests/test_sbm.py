import math
from math import comb, factorial, log

import numpy as np
import pytest
from sklearn.base import clone

from engagenet.network import BipartiteGraph, build_tripartite, project_student_pair
from engagenet.sbm import (
    BipartiteBlockmodel,
    PartitionResult,
    SbmConfig,
    canonicalize,
    description_length,
    infer_partition,
)
from engagenet.synth import SynthConfig, adjusted_rand_index, generate_dataset
from engagenet.events import extract_triads


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1 :]
        yield smaller + [[first]]


def side_respecting_assignments(g):
    for lp in set_partitions(list(g.left)):
        for rp in set_partitions(list(g.right)):
            assignment = {}
            bid = 0
            for blk in lp + rp:
                for v in blk:
                    assignment[v] = bid
                bid += 1
            yield assignment, len(lp), len(rp)


def dl_reference(g, assignment):
    """Independent evaluation of the documented closed form via integer factorials."""
    nodes = list(g.left) + list(g.right)
    blocks = sorted({assignment[v] for v in nodes})
    N, E, B = len(nodes), sum(g.weights.values()), len(blocks)
    n = {r: sum(1 for v in nodes if assignment[v] == r) for r in blocks}
    e = {r: 0 for r in blocks}
    ers = {}
    for (u, v), w in g.weights.items():
        r, s = assignment[u], assignment[v]
        e[r] += w
        e[s] += w
        key = (min(r, s), max(r, s))
        ers[key] = ers.get(key, 0) + w
    strength = {v: 0 for v in nodes}
    for (u, v), w in g.weights.items():
        strength[u] += w
        strength[v] += w
    lf = lambda m: log(factorial(m))
    s_adj = (
        sum(lf(e[r]) for r in blocks)
        - sum(lf(w) for w in ers.values())
        - sum(lf(strength[v]) for v in nodes)
        + sum(lf(w) for w in g.weights.values())
    )
    l_partition = log(comb(N - 1, B - 1)) + lf(N) - sum(lf(c) for c in n.values()) + log(N)
    l_degrees = sum(log(comb(n[r] + e[r] - 1, e[r])) for r in blocks)
    l_edges = log(comb(B * (B + 1) // 2 + E - 1, E))
    return s_adj + l_partition + l_degrees + l_edges


def trivial_assignment(g):
    return {v: 0 for v in g.left} | {v: 1 for v in g.right}


class TestDescriptionLength:
    def test_matches_hand_computation_on_tiny_graph(self):
        g = BipartiteGraph(("a", "b", "c"), ("x", "y"), {("a", "x"): 2, ("b", "x"): 1, ("c", "y"): 3})
        for assignment, _, _ in side_respecting_assignments(g):
            assert description_length(g, assignment) == pytest.approx(
                dl_reference(g, assignment), rel=1e-9
            )

    def test_invariant_under_block_relabeling(self, make_bipartite):
        rng = np.random.default_rng(20)
        g = make_bipartite(rng, n_left=6, n_right=4)
        assignment = {v: i % 2 for i, v in enumerate(g.left)} | {v: 2 + i % 2 for i, v in enumerate(g.right)}
        relabeled = {v: {0: 7, 1: 3, 2: 11, 3: 5}[b] for v, b in assignment.items()}
        assert description_length(g, assignment) == pytest.approx(
            description_length(g, relabeled), abs=1e-9
        )

    def test_planted_split_beats_single_block(self):
        # disjoint right-neighborhoods, 18 edge multiplicity per group
        left = tuple(f"u{i}" for i in range(6))
        right = ("v0", "v1", "v2", "v3")
        weights = {}
        for u in left[:3]:
            weights[(u, "v0")] = 3
            weights[(u, "v1")] = 3
        for u in left[3:]:
            weights[(u, "v2")] = 3
            weights[(u, "v3")] = 3
        g = BipartiteGraph(left, right, weights)
        split = (
            {u: 0 for u in left[:3]}
            | {u: 1 for u in left[3:]}
            | {"v0": 2, "v1": 2, "v2": 3, "v3": 3}
        )
        assert description_length(g, split) < description_length(g, trivial_assignment(g))

    def test_missing_node_rejected(self):
        g = BipartiteGraph(("a",), ("x",), {("a", "x"): 1})
        with pytest.raises(ValueError, match="misses"):
            description_length(g, {"a": 0})

    def test_mixed_sides_rejected(self):
        g = BipartiteGraph(("a",), ("x",), {("a", "x"): 1})
        with pytest.raises(ValueError, match="mix"):
            description_length(g, {"a": 0, "x": 0})

    def test_finite_and_non_negative(self, make_bipartite):
        rng = np.random.default_rng(25)
        for _ in range(10):
            g = make_bipartite(rng, n_left=5, n_right=3, density=rng.uniform(0.1, 0.9))
            assignment = {v: int(rng.integers(3)) for v in g.left}
            assignment |= {v: 3 + int(rng.integers(2)) for v in g.right}
            dl = description_length(g, assignment)
            assert math.isfinite(dl) and dl >= 0.0


def planted_projection(seed, overlap=0.0, students=24, events=25):
    cfg = SynthConfig(
        num_teams=students // 4,
        team_size=4,
        num_profiles=2,
        events_per_student=events,
        overlap=overlap,
        seed=seed,
    )
    dataset = generate_dataset(cfg)
    triads = [t for ev in dataset.events for t in extract_triads(ev)]
    net = build_tripartite(triads, cfg.scheme, cfg.taxonomy)
    return project_student_pair(net), dataset.labels.profile_of


class TestInferPartition:
    def test_recovers_planted_profiles(self):
        g, truth = planted_projection(seed=31)
        result = infer_partition(g, SbmConfig(seed=5))
        predicted = {s: result.assignment[s] for s in g.left}
        assert adjusted_rand_index(predicted, truth) == 1.0

    def test_identical_neighborhoods_collapse_to_one_block(self):
        left = tuple(f"u{i}" for i in range(6))
        weights = {(u, "p1"): 2 for u in left} | {(u, "p2"): 1 for u in left}
        g = BipartiteGraph(left, ("p1", "p2"), weights)
        # exhaustive evaluation: the single-left-block configurations minimize DL
        best = min(
            (description_length(g, a), nl) for a, nl, _ in side_respecting_assignments(g)
        )
        assert best[1] == 1
        result = infer_partition(g, SbmConfig(seed=0))
        assert len({result.assignment[u] for u in left}) == 1
        assert result.description_length == pytest.approx(best[0], rel=1e-9)

    def test_bit_identical_reruns(self):
        g, _ = planted_projection(seed=32)
        cfg = SbmConfig(restarts=4, seed=9)
        first = infer_partition(g, cfg)
        second = infer_partition(g, cfg)
        assert first == second

    def test_reported_dl_is_recomputable(self, make_bipartite):
        rng = np.random.default_rng(21)
        for _ in range(5):
            g = make_bipartite(rng, n_left=8, n_right=5, density=0.6)
            result = infer_partition(g, SbmConfig(restarts=3, seed=int(rng.integers(100))))
            recomputed = description_length(g, result.assignment)
            assert abs(result.description_length - recomputed) <= 1e-9 * abs(recomputed)

    def test_never_worse_than_trivial(self, make_bipartite):
        rng = np.random.default_rng(22)
        for _ in range(8):
            g = make_bipartite(rng, n_left=7, n_right=4, density=0.5)
            result = infer_partition(g, SbmConfig(restarts=3, seed=int(rng.integers(100))))
            assert result.description_length <= description_length(g, trivial_assignment(g)) + 1e-9

    def test_blocks_never_mix_sides(self, make_bipartite):
        rng = np.random.default_rng(23)
        g = make_bipartite(rng, n_left=9, n_right=6, density=0.4)
        result = infer_partition(g, SbmConfig(restarts=3, seed=1))
        left_blocks = {result.assignment[v] for v in g.left}
        right_blocks = {result.assignment[v] for v in g.right}
        assert not left_blocks & right_blocks
        assert result.num_blocks == len(left_blocks | right_blocks)

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError):
            infer_partition(BipartiteGraph((), (), {}), SbmConfig())

    def test_allow_trivial_false_avoids_trivial_partition(self):
        # structureless data: with the flag off, the fully trivial partition
        # (one block per side) is excluded from the candidates
        left = tuple(f"u{i}" for i in range(6))
        weights = {(u, "p1"): 2 for u in left} | {(u, "p2"): 1 for u in left}
        g = BipartiteGraph(left, ("p1", "p2"), weights)
        allowed = infer_partition(g, SbmConfig(seed=0, allow_trivial=True))
        denied = infer_partition(g, SbmConfig(seed=0, allow_trivial=False))
        n_left = len({allowed.assignment[u] for u in left})
        n_right = len({allowed.assignment[v] for v in ("p1", "p2")})
        assert (n_left, n_right) == (1, 1)
        n_left_d = len({denied.assignment[u] for u in left})
        n_right_d = len({denied.assignment[v] for v in ("p1", "p2")})
        assert (n_left_d, n_right_d) != (1, 1)
        assert denied.description_length >= allowed.description_length

    def test_per_restart_trace_shape(self, make_bipartite):
        rng = np.random.default_rng(24)
        g = make_bipartite(rng)
        result = infer_partition(g, SbmConfig(restarts=6, seed=2))
        assert result.restarts_run == 6 and len(result.per_restart_dl) == 6
        assert result.description_length == pytest.approx(min(result.per_restart_dl), abs=1e-9)

    def test_degenerate_tiny_graphs(self):
        lonely = BipartiteGraph(("a",), (), {})
        result = infer_partition(lonely, SbmConfig(restarts=2, seed=0))
        assert result.assignment == {"a": 0} and result.num_blocks == 1
        duo = BipartiteGraph(("a",), ("x",), {("a", "x"): 4})
        result = infer_partition(duo, SbmConfig(restarts=2, seed=0))
        assert result.num_blocks == 2


class TestIncrementalDeltas:
    def test_deltas_track_full_recomputation(self, make_bipartite):
        # white box: random merge/move sequences keep the incremental DL exact
        from engagenet.sbm import _State

        rng = np.random.default_rng(55)
        for _ in range(5):
            g = make_bipartite(rng, n_left=8, n_right=6, density=0.5)
            state = _State(g)
            dl = state.exact_dl()
            for _ in range(40):
                if rng.random() < 0.5 and state.num_blocks > 2:
                    side = state.alive_by_side[int(rng.integers(2))]
                    if len(side) < 2:
                        continue
                    u, v = (side[i] for i in rng.choice(len(side), size=2, replace=False))
                    dl += state.merge_delta(u, v)
                    state.apply_merge(u, v)
                else:
                    i = int(rng.integers(state.N))
                    if state.n[state.b[i]] == 1:
                        continue
                    s = state.sample_move_target(i, rng)
                    if s is None:
                        continue
                    dl += state.move_delta(i, s)
                    state.apply_move(i, s)
                assert dl == pytest.approx(state.exact_dl(), abs=1e-8)
                # block aggregates stay consistent with the assignment
                for side_list in state.alive_by_side:
                    for r in side_list:
                        assert state.n[r] == len(state.members[r])
                        assert state.e[r] == sum(state.k[i] for i in state.members[r])


class TestCanonicalize:
    def _partition(self, assignment, left):
        return PartitionResult(
            assignment=assignment,
            num_blocks=len(set(assignment.values())),
            description_length=0.0,
            seed=0,
            restarts_run=1,
            per_restart_dl=(0.0,),
            left_nodes=tuple(left),
        )

    def test_orders_by_descending_left_size(self):
        left = [f"s{i}" for i in range(12)]
        assignment = {s: (7 if i < 5 else 4) for i, s in enumerate(left)}
        assignment["pair"] = 9
        result = canonicalize(self._partition(assignment, left))
        # block 4 has 7 students -> id 0; block 7 has 5 -> id 1; right-side block last
        assert result.assignment[left[0]] == 1
        assert result.assignment[left[6]] == 0
        assert result.assignment["pair"] == 2

    def test_idempotent(self):
        left = [f"s{i}" for i in range(6)]
        assignment = {s: i % 3 for i, s in enumerate(left)} | {"p": 3}
        once = canonicalize(self._partition(assignment, left))
        twice = canonicalize(once)
        assert once == twice

    def test_equal_sizes_tie_break_by_member_label(self):
        assignment = {"b": 0, "d": 0, "a": 1, "c": 1, "p": 2}
        result = canonicalize(self._partition(assignment, ["a", "b", "c", "d"]))
        # both left blocks have 2 members; the one containing "a" wins id 0
        assert result.assignment["a"] == 0 and result.assignment["b"] == 1


class TestEstimatorApi:
    def test_fit_predict_on_graph(self):
        g, truth = planted_projection(seed=33)
        model = BipartiteBlockmodel(restarts=5, seed=4)
        labels = model.fit_predict(g)
        assert len(labels) == len(g.left)
        assert model.n_blocks_ == len(set(model.partition_.assignment.values()))
        predicted = dict(zip(g.left, labels))
        assert adjusted_rand_index(predicted, truth) == 1.0
        # canonical ids: block 0 is the largest student block
        sizes = [int(np.sum(labels == b)) for b in sorted(set(labels))]
        assert sizes == sorted(sizes, reverse=True)

    def test_fit_on_weight_matrix(self):
        X = np.zeros((6, 4), dtype=int)
        X[:3, :2] = 3
        X[3:, 2:] = 3
        model = BipartiteBlockmodel(restarts=4, seed=0).fit(X)
        assert list(model.labels_[:3]) == [model.labels_[0]] * 3
        assert list(model.labels_[3:]) == [model.labels_[3]] * 3
        assert model.labels_[0] != model.labels_[3]

    def test_get_params_and_clone(self):
        model = BipartiteBlockmodel(restarts=3, sweeps_per_level=2, seed=7, allow_trivial=False)
        params = model.get_params()
        assert params == {
            "restarts": 3,
            "sweeps_per_level": 2,
            "seed": 7,
            "allow_trivial": False,
        }
        cloned = clone(model)
        assert cloned.get_params() == params

    def test_rejects_bad_matrix(self):
        with pytest.raises(ValueError):
            BipartiteBlockmodel().fit(np.array([[0.5, 1.0], [1.0, 2.0]]))


def test_config_validation():
    with pytest.raises(ValueError):
        SbmConfig(restarts=0)
    with pytest.raises(ValueError):
        SbmConfig(sweeps_per_level=0)
