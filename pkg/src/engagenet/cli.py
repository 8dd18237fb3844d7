"""Command-line interface for the engagement-network pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .events import (
    extract_triads,
    load_students,
    load_team_scores,
    median_split,
    parse_event_log,
    validate_dataset,
)
from .network import TripartiteNetwork, build_tripartite, project_cluster_lc, project_student_pair
from .pipeline import EXPORT_FORMATS, PipelineConfig, StageError, run_pipeline
from .sbm import SbmConfig, canonicalize, infer_partition
from .serialize import (
    export_graph,
    export_partition,
    import_graph,
    import_partition,
    write_events_csv,
    write_planted_labels_csv,
    write_scores_csv,
    write_significant_edges_csv,
    write_students_csv,
)
from .sigfilter import FilterConfig, filter_significant
from .stats import fisher_exact, mann_whitney_u, report_dict
from .synth import SynthConfig, generate_dataset
from .vocab import (
    default_coding_scheme,
    default_location_taxonomy,
    load_coding_scheme,
    load_location_taxonomy,
)


def _parse_phases(text: str | None) -> tuple[int, ...] | None:
    if not text:
        return None
    try:
        return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
    except ValueError:
        raise click.BadParameter(f"phases must be comma-separated integers, got {text!r}")


def _load_vocab(behaviors: str | None, areas: str | None):
    scheme = load_coding_scheme(behaviors) if behaviors else default_coding_scheme()
    taxonomy = load_location_taxonomy(areas) if areas else default_location_taxonomy()
    return scheme, taxonomy


def _network_from_events(events_path, behaviors, areas, phases) -> TripartiteNetwork:
    scheme, taxonomy = _load_vocab(behaviors, areas)
    with open(events_path, encoding="utf-8", newline="") as fh:
        events = parse_event_log(fh, scheme, taxonomy, phase_filter=_parse_phases(phases))
    triads = [t for ev in events for t in extract_triads(ev)]
    return build_tripartite(triads, scheme, taxonomy)


@click.group()
@click.version_option(__version__)
def main():
    """Engagement-network analytics: build, cluster, filter, and compare."""


@main.command()
@click.option("--teams", default=15, show_default=True, help="Number of teams.")
@click.option("--team-size", default=4, show_default=True)
@click.option("--profiles", default=2, show_default=True, help="Number of planted profiles.")
@click.option("--events-per-student", default=40, show_default=True)
@click.option("--multi-code-prob", default=0.0, show_default=True)
@click.option("--overlap", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def simulate(teams, team_size, profiles, events_per_student, multi_code_prob, overlap, seed, out):
    """Generate a synthetic coded-event dataset with planted profiles."""
    cfg = SynthConfig(
        num_teams=teams,
        team_size=team_size,
        num_profiles=profiles,
        events_per_student=events_per_student,
        multi_code_prob=multi_code_prob,
        overlap=overlap,
        seed=seed,
    )
    dataset = generate_dataset(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, writer, rows in (
        ("events.csv", write_events_csv, dataset.events),
        ("students.csv", write_students_csv, dataset.students),
        ("team_scores.csv", write_scores_csv, dataset.scores),
        ("planted_labels.csv", write_planted_labels_csv, dataset.labels),
    ):
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            writer(rows, fh)
    click.echo(f"wrote {len(dataset.events)} events for {len(dataset.students)} students to {out}")


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--students", "students_path", type=click.Path(exists=True))
@click.option("--scores", "scores_path", type=click.Path(exists=True))
@click.option("--behaviors", type=click.Path(exists=True), help="Behavior vocabulary file.")
@click.option("--areas", type=click.Path(exists=True), help="Area vocabulary file.")
@click.option("--phases", help="Comma-separated phases to keep, e.g. 3,4.")
def ingest(events_path, students_path, scores_path, behaviors, areas, phases):
    """Parse and cross-validate a dataset, reporting referential problems."""
    scheme, taxonomy = _load_vocab(behaviors, areas)
    with open(events_path, encoding="utf-8", newline="") as fh:
        events = parse_event_log(fh, scheme, taxonomy, phase_filter=_parse_phases(phases))
    students = []
    scores = []
    if students_path:
        with open(students_path, encoding="utf-8", newline="") as fh:
            students = load_students(fh)
    if scores_path:
        with open(scores_path, encoding="utf-8", newline="") as fh:
            scores = load_team_scores(fh)
    click.echo(f"{len(events)} events, {len(students)} students, {len(scores)} team scores")
    report = validate_dataset(events, students, scores)
    for problem in report.problems:
        click.echo(f"problem: {problem}", err=True)
    if not report.ok:
        raise SystemExit(1)
    click.echo("dataset consistent")


@main.command()
@click.option("--events", "events_path", required=True, type=click.Path(exists=True))
@click.option("--behaviors", type=click.Path(exists=True))
@click.option("--areas", type=click.Path(exists=True))
@click.option("--phases")
@click.option("--format", "formats", multiple=True, default=("json",), show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def build(events_path, behaviors, areas, phases, formats, out):
    """Build the tripartite network from an event log and export it."""
    net = _network_from_events(events_path, behaviors, areas, phases)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        path = export_graph(net, fmt, out / f"network.{fmt}")
        click.echo(f"wrote {path}")


@main.command()
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--restarts", default=10, show_default=True)
@click.option("--sweeps", default=5, show_default=True, help="Refinement sweeps per level.")
@click.option("--allow-trivial/--no-trivial", default=True, show_default=True)
@click.option("--out", default="partition.json", show_default=True, type=click.Path(path_type=Path))
def cluster(network_path, seed, restarts, sweeps, allow_trivial, out):
    """Infer student clusters on the student x (location, code) projection."""
    graph = import_graph(network_path)
    if isinstance(graph, TripartiteNetwork):
        graph = project_student_pair(graph)
    cfg = SbmConfig(restarts=restarts, sweeps_per_level=sweeps, seed=seed, allow_trivial=allow_trivial)
    partition = canonicalize(infer_partition(graph, cfg))
    export_partition(partition, out)
    sizes = {bid: len([s for s in partition.left_nodes if partition.assignment[s] == bid])
             for bid in partition.left_block_ids()}
    click.echo(f"found {len(sizes)} student clusters (sizes {sizes}), DL {partition.description_length:.3f}")
    click.echo(f"wrote {out}")


@main.command("filter")
@click.option("--network", "network_path", required=True, type=click.Path(exists=True))
@click.option("--partition", "partition_path", required=True, type=click.Path(exists=True))
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--success-prob", type=float, help="Null per-code probability (default 1/|codes|).")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def filter_cmd(network_path, partition_path, alpha, success_prob, out):
    """Extract statistically significant (location, code) edges per cluster."""
    net = import_graph(network_path)
    if not isinstance(net, TripartiteNetwork):
        raise click.ClickException("--network must point to a tripartite network export")
    partition = import_partition(partition_path)
    cfg = FilterConfig(alpha=alpha, success_prob=success_prob)
    out.mkdir(parents=True, exist_ok=True)
    for block_id in partition.left_block_ids():
        res = filter_significant(project_cluster_lc(net, partition, block_id), cfg, cluster_id=block_id)
        path = out / f"cluster_{block_id}_significant_edges.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_significant_edges_csv([res], fh)
        click.echo(f"cluster {block_id}: {len(res.retained)} significant edges -> {path}")


@main.command()
@click.option("--partition", "partition_path", required=True, type=click.Path(exists=True))
@click.option("--students", "students_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", type=click.Path(exists=True))
@click.option("--out", default="stats.json", show_default=True, type=click.Path(path_type=Path))
def stats(partition_path, students_path, scores_path, out):
    """Compare the two student clusters on satisfaction and team performance."""
    partition = import_partition(partition_path)
    ids = partition.left_block_ids()
    if len(ids) != 2:
        raise click.ClickException(f"need exactly 2 student clusters, found {len(ids)}")
    first, second = ids
    with open(students_path, encoding="utf-8", newline="") as fh:
        students = load_students(fh)
    by_id = {s.student_id: s for s in students}
    mwu = fisher = None
    inputs = {}
    x = [by_id[s].satisfaction for s in partition.left_nodes
         if partition.assignment[s] == first and by_id.get(s) and by_id[s].satisfaction is not None]
    y = [by_id[s].satisfaction for s in partition.left_nodes
         if partition.assignment[s] == second and by_id.get(s) and by_id[s].satisfaction is not None]
    if x and y:
        mwu = mann_whitney_u(x, y)
        inputs["satisfaction_by_cluster"] = [sorted(x), sorted(y)]
    if scores_path:
        with open(scores_path, encoding="utf-8", newline="") as fh:
            labels = {t.team_id: t.performance_label for t in median_split(load_team_scores(fh))}
        table = [[0, 0], [0, 0]]
        for s in partition.left_nodes:
            rec = by_id.get(s)
            label = labels.get(rec.team_id) if rec else None
            if label is None:
                continue
            table[0 if partition.assignment[s] == first else 1][0 if label == "high" else 1] += 1
        if min(sum(r) for r in table) > 0:
            fisher = fisher_exact(table, alternative="greater")
            inputs["performance_table"] = table
    payload = report_dict(mwu=mwu, fisher=fisher, inputs=inputs)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"wrote {out}")


@main.command()
@click.option("--events", "events_path", type=click.Path(exists=True))
@click.option("--students", "students_path", type=click.Path(exists=True))
@click.option("--scores", "scores_path", type=click.Path(exists=True))
@click.option("--simulate", "do_simulate", is_flag=True, help="Run on a synthetic dataset instead of files.")
@click.option("--teams", default=15, show_default=True)
@click.option("--team-size", default=4, show_default=True)
@click.option("--profiles", default=2, show_default=True)
@click.option("--events-per-student", default=40, show_default=True)
@click.option("--overlap", default=0.0, show_default=True)
@click.option("--behaviors", type=click.Path(exists=True))
@click.option("--areas", type=click.Path(exists=True))
@click.option("--phases")
@click.option("--alpha", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--restarts", default=10, show_default=True)
@click.option("--format", "formats", multiple=True, default=EXPORT_FORMATS, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def run(
    events_path, students_path, scores_path, do_simulate, teams, team_size, profiles,
    events_per_student, overlap, behaviors, areas, phases, alpha, seed, restarts, formats, out,
):
    """Run the full pipeline and write a reproducible bundle."""
    if do_simulate == (events_path is not None):
        raise click.ClickException("give either --events or --simulate")
    synth = None
    if do_simulate:
        synth = SynthConfig(
            num_teams=teams,
            team_size=team_size,
            num_profiles=profiles,
            events_per_student=events_per_student,
            overlap=overlap,
            seed=seed,
        )
    try:
        cfg = PipelineConfig(
            out_dir=out,
            events_path=Path(events_path) if events_path else None,
            students_path=Path(students_path) if students_path else None,
            scores_path=Path(scores_path) if scores_path else None,
            synth=synth,
            behaviors_path=Path(behaviors) if behaviors else None,
            areas_path=Path(areas) if areas else None,
            phases=_parse_phases(phases),
            sbm=SbmConfig(restarts=restarts, seed=seed),
            sig=FilterConfig(alpha=alpha),
            formats=tuple(formats),
        )
        bundle = run_pipeline(cfg)
    except (StageError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"bundle written to {bundle.out_dir} ({len(bundle.files)} files)")
    for note in bundle.manifest["warnings"]:
        click.echo(f"note: {note}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", required=True, help="Target format: json or graphml.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
def export(input_path, fmt, out):
    """Convert a graph file between the JSON and GraphML formats."""
    graph = import_graph(input_path)
    try:
        export_graph(graph, fmt, out)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    sys.exit(main())
