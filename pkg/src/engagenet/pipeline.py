"""End-to-end orchestration: ingest -> build -> cluster -> filter -> stats.

Every run writes a self-describing bundle into the output directory: the
tripartite network in the requested formats, the partition, one significant-
edge table per student cluster, a stats report, and a manifest embedding the
resolved configuration so the run can be reproduced bit-for-bit (timings are
the only non-deterministic content, and they live under the manifest's
``timings`` key only).
"""

from __future__ import annotations

import dataclasses
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .events import (
    StudentRecord,
    TeamScore,
    extract_triads,
    load_students,
    load_team_scores,
    median_split,
    parse_event_log,
    validate_dataset,
)
from .network import TripartiteNetwork, build_tripartite, project_cluster_lc, project_student_pair
from .sbm import PartitionResult, SbmConfig, canonicalize, infer_partition
from .serialize import (
    export_graph,
    export_partition,
    write_events_csv,
    write_planted_labels_csv,
    write_scores_csv,
    write_significant_edges_csv,
    write_students_csv,
)
from .sigfilter import FilterConfig, SignificanceResult, filter_significant
from .stats import digest, fisher_exact, mann_whitney_u, report_dict
from .synth import SynthConfig, generate_dataset
from .vocab import (
    default_coding_scheme,
    default_location_taxonomy,
    load_coding_scheme,
    load_location_taxonomy,
)

EXPORT_FORMATS = ("json", "graphml", "csv")


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: Path
    events_path: Path | None = None
    students_path: Path | None = None
    scores_path: Path | None = None
    synth: SynthConfig | None = None
    behaviors_path: Path | None = None
    areas_path: Path | None = None
    phases: tuple[int, ...] | None = None
    sbm: SbmConfig = field(default_factory=SbmConfig)
    sig: FilterConfig = field(default_factory=FilterConfig)
    formats: tuple[str, ...] = EXPORT_FORMATS

    def __post_init__(self):
        if (self.events_path is None) == (self.synth is None):
            raise ValueError("exactly one of events_path or synth must be given")
        bad = [f for f in self.formats if f not in EXPORT_FORMATS]
        if bad:
            raise ValueError(f"unknown export formats {bad}; expected subset of {EXPORT_FORMATS}")


@dataclass
class RunBundle:
    out_dir: Path
    network: TripartiteNetwork
    partition: PartitionResult
    significance: list[SignificanceResult]
    stats: dict
    manifest: dict
    files: dict[str, Path]


def _config_dict(cfg: PipelineConfig) -> dict:
    def clean(value):
        if isinstance(value, Path):
            return str(value)
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {k: clean(v) for k, v in dataclasses.asdict(value).items()}
        if isinstance(value, dict):
            return {str(k): clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        return value

    return clean(cfg)


def run_pipeline(cfg: PipelineConfig) -> RunBundle:
    """Execute the full analysis and write all artifacts; deterministic per config."""
    timings: dict[str, float] = {}
    notes: list[str] = []
    files: dict[str, Path] = {}
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run_stage(name, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        timings[name] = time.perf_counter() - start
        return result

    # -- ingest --------------------------------------------------------------
    def ingest():
        if cfg.synth is not None:
            scheme, taxonomy = cfg.synth.scheme, cfg.synth.taxonomy
            dataset = generate_dataset(cfg.synth)
            events, students, scores = dataset.events, dataset.students, dataset.scores
            if cfg.phases is not None:
                events = [ev for ev in events if ev.phase in cfg.phases]
            for name, writer, rows in (
                ("events.csv", write_events_csv, events),
                ("students.csv", write_students_csv, students),
                ("team_scores.csv", write_scores_csv, scores),
                ("planted_labels.csv", write_planted_labels_csv, dataset.labels),
            ):
                with open(out / name, "w", newline="", encoding="utf-8") as fh:
                    writer(rows, fh)
                files[name] = out / name
            return events, students, scores, scheme, taxonomy
        scheme = (
            load_coding_scheme(cfg.behaviors_path) if cfg.behaviors_path else default_coding_scheme()
        )
        taxonomy = (
            load_location_taxonomy(cfg.areas_path) if cfg.areas_path else default_location_taxonomy()
        )
        with open(cfg.events_path, encoding="utf-8", newline="") as fh:
            events = parse_event_log(fh, scheme, taxonomy, phase_filter=cfg.phases)
        students: list[StudentRecord] = []
        scores: list[TeamScore] = []
        if cfg.students_path is not None:
            with open(cfg.students_path, encoding="utf-8", newline="") as fh:
                students = load_students(fh)
        if cfg.scores_path is not None:
            with open(cfg.scores_path, encoding="utf-8", newline="") as fh:
                scores = load_team_scores(fh)
        return events, students, scores, scheme, taxonomy

    events, students, scores, scheme, taxonomy = run_stage("ingest", ingest)
    if students or scores:
        report = validate_dataset(events, students, scores)
        notes.extend(f"validation: {p}" for p in report.problems)

    # -- build ---------------------------------------------------------------
    def build() -> TripartiteNetwork:
        if not events:
            raise ValueError("no events to analyze (check the phase filter)")
        triads = [t for ev in events for t in extract_triads(ev)]
        net = build_tripartite(triads, scheme, taxonomy)
        for fmt in cfg.formats:
            if fmt in ("json", "graphml"):
                files[f"network.{fmt}"] = export_graph(net, fmt, out / f"network.{fmt}")
        return net

    net = run_stage("build", build)

    # -- cluster -------------------------------------------------------------
    def cluster() -> PartitionResult:
        projection = project_student_pair(net)
        partition = canonicalize(infer_partition(projection, cfg.sbm))
        files["partition.json"] = export_partition(partition, out / "partition.json")
        return partition

    partition = run_stage("cluster", cluster)

    # -- filter ----------------------------------------------------------------
    def filter_clusters() -> list[SignificanceResult]:
        results = []
        for block_id in partition.left_block_ids():
            cluster_graph = project_cluster_lc(net, partition, block_id)
            results.append(filter_significant(cluster_graph, cfg.sig, cluster_id=block_id))
        if "csv" in cfg.formats:
            for res in results:
                name = f"cluster_{res.cluster_id}_significant_edges.csv"
                with open(out / name, "w", newline="", encoding="utf-8") as fh:
                    write_significant_edges_csv([res], fh)
                files[name] = out / name
        return results

    significance = run_stage("filter", filter_clusters)

    # -- stats -----------------------------------------------------------------
    def compute_stats() -> dict:
        cluster_ids = partition.left_block_ids()
        cluster_of = {s: partition.assignment[s] for s in partition.left_nodes}
        sizes = {
            str(cid): sum(1 for s in partition.left_nodes if cluster_of[s] == cid)
            for cid in cluster_ids
        }
        if len(cluster_ids) != 2:
            notes.append(
                f"stats: skipped cluster comparisons ({len(cluster_ids)} student clusters, need 2)"
            )
            return {"clusters": {"sizes": sizes}}
        first, second = cluster_ids

        mwu = fisher = None
        inputs: dict = {}
        satisfaction = {
            s.student_id: s.satisfaction
            for s in students
            if s.satisfaction is not None and s.student_id in cluster_of
        }
        x = [satisfaction[s] for s in partition.left_nodes
             if cluster_of[s] == first and s in satisfaction]
        y = [satisfaction[s] for s in partition.left_nodes
             if cluster_of[s] == second and s in satisfaction]
        if x and y:
            mwu = mann_whitney_u(x, y, alternative="two-sided")
            inputs["satisfaction_by_cluster"] = [sorted(x), sorted(y)]
        else:
            notes.append("stats: skipped satisfaction comparison (no satisfaction data)")

        team_of = {s.student_id: s.team_id for s in students}
        if scores:
            label_of_team = {t.team_id: t.performance_label for t in median_split(scores)}
            table = [[0, 0], [0, 0]]
            missing = 0
            for s in partition.left_nodes:
                label = label_of_team.get(team_of.get(s))
                if label is None:
                    missing += 1
                    continue
                row = 0 if cluster_of[s] == first else 1
                table[row][0 if label == "high" else 1] += 1
            if missing:
                notes.append(f"stats: {missing} students lack a team performance label")
            if min(sum(row) for row in table) > 0:
                fisher = fisher_exact(table, alternative="greater")
                inputs["performance_table"] = table
            else:
                notes.append("stats: skipped performance association (a cluster has no labeled students)")
        else:
            notes.append("stats: skipped performance association (no team scores)")
        payload = report_dict(mwu=mwu, fisher=fisher, inputs=inputs)
        payload["clusters"] = {"sizes": sizes}
        return payload

    stats_payload = run_stage("stats", compute_stats)
    files["stats.json"] = out / "stats.json"
    files["stats.json"].write_text(
        json.dumps(stats_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    config_dict = _config_dict(cfg)
    manifest = {
        "tool": {"name": "engagenet", "version": __version__},
        "versions": {"python": platform.python_version(), "numpy": np.__version__},
        "config": config_dict,
        "config_sha256": digest(config_dict),
        "seed": cfg.sbm.seed,
        "warnings": notes,
        "outputs": sorted(files),
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    files["manifest.json"] = out / "manifest.json"
    files["manifest.json"].write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return RunBundle(
        out_dir=out,
        network=net,
        partition=partition,
        significance=significance,
        stats=stats_payload,
        manifest=manifest,
        files=files,
    )
