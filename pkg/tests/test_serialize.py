import io

import numpy as np
import pytest

from engagenet.events import parse_event_log
from engagenet.network import BipartiteGraph, build_tripartite, project_student_pair
from engagenet.sbm import PartitionResult
from engagenet.serialize import (
    SchemaError,
    export_graph,
    export_partition,
    import_graph,
    import_partition,
    write_events_csv,
)
from engagenet.sigfilter import FilterConfig, filter_significant
from engagenet.serialize import write_significant_edges_csv
from engagenet.synth import SynthConfig, generate_dataset


def random_network(rng, make_triads):
    return build_tripartite(make_triads(rng, n_students=int(rng.integers(3, 10)),
                                        n_triads=int(rng.integers(20, 120))))


class TestGraphRoundTrips:
    @pytest.mark.parametrize("fmt", ["json", "graphml"])
    def test_tripartite_exact(self, tmp_path, make_triads, fmt):
        rng = np.random.default_rng(40)
        for i in range(5):
            net = random_network(rng, make_triads)
            path = export_graph(net, fmt, tmp_path / f"net{i}.{fmt}")
            assert import_graph(path) == net

    @pytest.mark.parametrize("fmt", ["json", "graphml"])
    def test_bipartite_exact_including_pair_nodes(self, tmp_path, make_triads, fmt):
        rng = np.random.default_rng(41)
        for i in range(5):
            g = project_student_pair(random_network(rng, make_triads))
            path = export_graph(g, fmt, tmp_path / f"g{i}.{fmt}")
            back = import_graph(path)
            assert back == g
            assert back.left_kind == "student" and back.right_kind == "pair"
            assert all(isinstance(v, tuple) for v in back.right)

    def test_nodetype_tags_present(self, tmp_path, make_triads):
        rng = np.random.default_rng(42)
        net = random_network(rng, make_triads)
        text = export_graph(net, "graphml", tmp_path / "net.graphml").read_text()
        for tag in ("student", "code", "location"):
            assert f">{tag}<" in text

    def test_unknown_format_names_token(self, tmp_path, make_triads):
        rng = np.random.default_rng(43)
        net = random_network(rng, make_triads)
        with pytest.raises(ValueError, match="dot"):
            export_graph(net, "dot", tmp_path / "net.dot")

    def test_truncated_file_is_schema_error(self, tmp_path, make_triads):
        rng = np.random.default_rng(44)
        net = random_network(rng, make_triads)
        path = export_graph(net, "json", tmp_path / "net.json")
        path.write_text(path.read_text()[: 40])
        with pytest.raises(SchemaError, match=str(path)):
            import_graph(path)

    def test_inconsistent_triads_rejected(self, tmp_path):
        net = build_tripartite([("s1", "l1", "c1")])
        path = export_graph(net, "json", tmp_path / "net.json")
        corrupted = path.read_text().replace('"count": 1', '"count": 2')
        path.write_text(corrupted)
        with pytest.raises(SchemaError, match="disagree"):
            import_graph(path)


class TestPartitionRoundTrip:
    def test_exact_with_pair_nodes(self, tmp_path):
        partition = PartitionResult(
            assignment={"s1": 0, "s2": 0, "s3": 1, ("bed 4", "agreement"): 2},
            num_blocks=3,
            description_length=12.5,
            seed=3,
            restarts_run=2,
            per_restart_dl=(12.5, 13.0),
            left_nodes=("s1", "s2", "s3"),
        )
        path = export_partition(partition, tmp_path / "p.json")
        assert import_partition(path) == partition

    def test_malformed_partition_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"assignment": {}}')
        with pytest.raises(SchemaError, match=str(path)):
            import_partition(path)


class TestCsv:
    def test_events_csv_round_trip(self, scheme, taxonomy):
        dataset = generate_dataset(
            SynthConfig(num_teams=3, team_size=4, events_per_student=10, multi_code_prob=0.3, seed=7)
        )
        buf = io.StringIO()
        write_events_csv(dataset.events, buf)
        buf.seek(0)
        assert parse_event_log(buf, scheme, taxonomy) == dataset.events

    def test_significant_edges_header_and_rows(self):
        codes = tuple(f"c{i}" for i in range(11))
        g = BipartiteGraph(("bed 4",), codes, {("bed 4", "c0"): 30})
        res = filter_significant(g, FilterConfig(), cluster_id=1)
        buf = io.StringIO()
        write_significant_edges_csv([res], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "cluster,location,code,weight,degree_k,threshold,survival_prob"
        cluster, loc, code, w, k, t, sp = lines[1].split(",")
        assert (cluster, loc, code) == ("1", "bed 4", "c0")
        assert int(w) == 30 and int(k) == 30
        assert int(t) == res.thresholds["bed 4"]
        assert 0.0 <= float(sp) <= 0.05
