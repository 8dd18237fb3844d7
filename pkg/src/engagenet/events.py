"""Coded interaction events: data model, CSV ingestion, and study-level labeling.

The atomic record is an utterance: one turn of talk by one student at one
spatial area, carrying one or more communication-behavior codes.  Every
utterance expands into one (student, location, code) triad per code, which is
the unit all network construction downstream counts.

CSV schemas (UTF-8, header row required):

* events:      ``team_id,student_id,location,codes,t_start,t_end,phase``
  (``codes`` is a semicolon-separated list inside one field; timestamps and
  phase may be empty)
* students:    ``student_id,team_id,satisfaction`` (satisfaction may be empty)
* team scores: ``team_id,score``
"""

from __future__ import annotations

import csv
import statistics
import warnings
from dataclasses import dataclass, replace
from typing import IO, Iterable, Mapping, Sequence

from .vocab import CodingScheme, LocationTaxonomy, VocabularyError

EVENT_HEADER = ("team_id", "student_id", "location", "codes", "t_start", "t_end", "phase")
STUDENT_HEADER = ("student_id", "team_id", "satisfaction")
SCORE_HEADER = ("team_id", "score")

Triad = tuple[str, str, str]  # (student, location, code)


class EventParseError(ValueError):
    """A CSV row that does not conform to the documented schema."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


@dataclass(frozen=True)
class UtteranceEvent:
    """One coded turn of talk."""

    team_id: str
    student_id: str
    location: str
    codes: frozenset[str]
    t_start: float | None = None
    t_end: float | None = None
    phase: int | None = None

    def __post_init__(self):
        if not self.codes:
            raise ValueError("an utterance must carry at least one code")
        object.__setattr__(self, "codes", frozenset(self.codes))
        if self.t_start is not None and self.t_end is not None and self.t_end < self.t_start:
            raise ValueError(f"t_end {self.t_end} precedes t_start {self.t_start}")
        if self.phase is not None and not 1 <= self.phase <= 4:
            raise ValueError(f"phase must be in 1..4, got {self.phase}")


@dataclass(frozen=True)
class StudentRecord:
    student_id: str
    team_id: str
    satisfaction: int | None = None

    def __post_init__(self):
        if self.satisfaction is not None and not 1 <= self.satisfaction <= 7:
            raise ValueError(f"satisfaction must be in 1..7, got {self.satisfaction}")


@dataclass(frozen=True)
class TeamScore:
    """A team's ordinal performance score; the high/low label is derived by median_split."""

    team_id: str
    score: float
    performance_label: str | None = None

    def __post_init__(self):
        if self.performance_label not in (None, "high", "low"):
            raise ValueError(f"performance_label must be 'high' or 'low', got {self.performance_label!r}")


def _check_header(row: Sequence[str] | None, expected: tuple[str, ...], what: str):
    if row is None:
        raise EventParseError(1, f"empty {what} file: header row required")
    got = tuple(cell.strip() for cell in row)
    if got != expected:
        raise EventParseError(1, f"{what} header must be {','.join(expected)}, got {','.join(got)}")


def parse_event_log(
    raw: IO[str] | Iterable[str],
    scheme: CodingScheme,
    taxonomy: LocationTaxonomy,
    phase_filter: Iterable[int] | None = None,
) -> list[UtteranceEvent]:
    """Parse an event CSV stream into validated events, in file order.

    Events whose phase is not in ``phase_filter`` (when given) are dropped;
    events with no phase recorded count as outside any filter.  Unknown codes
    or locations raise :class:`VocabularyError` naming the offending label;
    any other malformed row raises :class:`EventParseError` with its row
    number.
    """
    phases = frozenset(phase_filter) if phase_filter is not None else None
    reader = csv.reader(raw)
    _check_header(next(reader, None), EVENT_HEADER, "event")
    events: list[UtteranceEvent] = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(EVENT_HEADER):
            raise EventParseError(rownum, f"expected {len(EVENT_HEADER)} fields, got {len(row)}")
        team_id, student_id, location, codes_field, t_start_s, t_end_s, phase_s = (
            cell.strip() for cell in row
        )
        if not team_id or not student_id:
            raise EventParseError(rownum, "team_id and student_id must be non-empty")
        codes = [c.strip() for c in codes_field.split(";")]
        if not codes_field or any(not c for c in codes):
            raise EventParseError(rownum, f"malformed codes field {codes_field!r}")
        for code in codes:
            if code not in scheme:
                raise VocabularyError(code, kind="code", row=rownum)
        if location not in taxonomy:
            raise VocabularyError(location, kind="location", row=rownum)
        try:
            t_start = float(t_start_s) if t_start_s else None
            t_end = float(t_end_s) if t_end_s else None
            phase = int(phase_s) if phase_s else None
        except ValueError as exc:
            raise EventParseError(rownum, str(exc)) from None
        try:
            event = UtteranceEvent(team_id, student_id, location, frozenset(codes),
                                   t_start, t_end, phase)
        except ValueError as exc:
            raise EventParseError(rownum, str(exc)) from None
        if phases is not None and event.phase not in phases:
            continue
        events.append(event)
    return events


def load_students(raw: IO[str] | Iterable[str]) -> list[StudentRecord]:
    reader = csv.reader(raw)
    _check_header(next(reader, None), STUDENT_HEADER, "student")
    out: list[StudentRecord] = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(STUDENT_HEADER):
            raise EventParseError(rownum, f"expected {len(STUDENT_HEADER)} fields, got {len(row)}")
        student_id, team_id, sat_s = (cell.strip() for cell in row)
        try:
            sat = int(sat_s) if sat_s else None
            out.append(StudentRecord(student_id, team_id, sat))
        except ValueError as exc:
            raise EventParseError(rownum, str(exc)) from None
    return out


def load_team_scores(raw: IO[str] | Iterable[str]) -> list[TeamScore]:
    reader = csv.reader(raw)
    _check_header(next(reader, None), SCORE_HEADER, "team score")
    out: list[TeamScore] = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(SCORE_HEADER):
            raise EventParseError(rownum, f"expected {len(SCORE_HEADER)} fields, got {len(row)}")
        team_id, score_s = (cell.strip() for cell in row)
        try:
            out.append(TeamScore(team_id, float(score_s)))
        except ValueError as exc:
            raise EventParseError(rownum, str(exc)) from None
    return out


def extract_triads(event: UtteranceEvent) -> list[Triad]:
    """Expand an event into one (student, location, code) triad per carried code.

    Codes are emitted in sorted order so expansion is deterministic.
    """
    return [(event.student_id, event.location, code) for code in sorted(event.codes)]


def median_split(scores: Sequence[TeamScore]) -> list[TeamScore]:
    """Label each team high/low by comparing its score with the cohort median.

    The median uses the midpoint convention for even counts, and a team scoring
    exactly the median lands in "high".  When every score is equal the split is
    degenerate: all teams are labeled high and a warning is emitted.
    """
    if not scores:
        raise ValueError("median_split requires at least one team score")
    med = statistics.median(s.score for s in scores)
    labeled = [replace(s, performance_label="high" if s.score >= med else "low") for s in scores]
    if all(s.performance_label == "high" for s in labeled) and len(scores) > 1:
        warnings.warn("degenerate median split: all team scores on one side of the median")
    return labeled


@dataclass(frozen=True)
class ValidationReport:
    """Referential problems found in a dataset; empty iff the dataset is consistent."""

    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return not self.problems

    @property
    def ok(self) -> bool:
        return not self.problems


def validate_dataset(
    events: Iterable[UtteranceEvent],
    students: Iterable[StudentRecord],
    scores: Iterable[TeamScore] | Mapping[str, TeamScore],
) -> ValidationReport:
    """Cross-check events, student records, and team scores for referential consistency."""
    by_student = {s.student_id: s for s in students}
    team_ids = {t.team_id for t in (scores.values() if isinstance(scores, Mapping) else scores)}
    problems: list[str] = []
    for i, event in enumerate(events):
        record = by_student.get(event.student_id)
        if record is None:
            problems.append(f"event {i}: unknown student {event.student_id!r}")
        elif record.team_id != event.team_id:
            problems.append(
                f"event {i}: student {event.student_id!r} recorded on team "
                f"{record.team_id!r} but event cites {event.team_id!r}"
            )
    for record in by_student.values():
        if record.team_id not in team_ids:
            problems.append(f"student {record.student_id!r}: unknown team {record.team_id!r}")
    return ValidationReport(tuple(problems))
