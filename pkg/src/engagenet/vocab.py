"""Vocabularies for coded communication behaviors and spatial areas.

Both vocabularies are configurable so the toolkit is not tied to one study
setting; the bundled defaults describe a simulation-based healthcare teamwork
scenario with 11 communication behaviors (grouped into 4 teamwork constructs)
and 9 spatial areas (tiered into primary / secondary / other working areas).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

AREA_TIERS = ("primary", "secondary", "other")

#: Reference occurrence counts for the default behavior vocabulary, used by the
#: synthetic generator to reproduce realistic code marginals (total 2641).
DEFAULT_BEHAVIOR_FREQUENCIES: Mapping[str, int] = {
    "task allocation": 336,
    "planning": 65,
    "provision of handover information": 80,
    "escalation": 60,
    "situation assessment": 40,
    "information sharing": 488,
    "information requesting": 556,
    "responding to request": 312,
    "agreement": 636,
    "disagreement": 29,
    "checking-back": 39,
}


class VocabularyError(ValueError):
    """An event references a code or area outside the configured vocabulary."""

    def __init__(self, label: str, kind: str = "label", row: int | None = None):
        self.label = label
        self.kind = kind
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"unknown {kind} {label!r}{where}")


def _check_unique(labels: Iterable[str], what: str) -> tuple[str, ...]:
    out = tuple(labels)
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate {what} labels: {out}")
    if any(not lbl or lbl != lbl.strip() for lbl in out):
        raise ValueError(f"{what} labels must be non-empty and stripped")
    return out


@dataclass(frozen=True)
class CodingScheme:
    """An ordered communication-behavior vocabulary with one construct per code."""

    behaviors: tuple[str, ...]
    construct_of: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        behaviors = _check_unique(self.behaviors, "behavior")
        object.__setattr__(self, "behaviors", behaviors)
        missing = [c for c in behaviors if c not in self.construct_of]
        if missing:
            raise ValueError(f"behaviors without a construct: {missing}")
        extra = [c for c in self.construct_of if c not in behaviors]
        if extra:
            raise ValueError(f"construct_of has unknown behaviors: {extra}")

    @property
    def constructs(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for code in self.behaviors:
            seen.setdefault(self.construct_of[code], None)
        return tuple(seen)

    def __contains__(self, code: str) -> bool:
        return code in self.construct_of


@dataclass(frozen=True)
class LocationTaxonomy:
    """An ordered spatial-area vocabulary with a working-area tier per area."""

    areas: tuple[str, ...]
    tier_of: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        areas = _check_unique(self.areas, "area")
        object.__setattr__(self, "areas", areas)
        missing = [a for a in areas if a not in self.tier_of]
        if missing:
            raise ValueError(f"areas without a tier: {missing}")
        bad = {a: t for a, t in self.tier_of.items() if t not in AREA_TIERS}
        if bad:
            raise ValueError(f"tiers must be one of {AREA_TIERS}, got {bad}")
        extra = [a for a in self.tier_of if a not in areas]
        if extra:
            raise ValueError(f"tier_of has unknown areas: {extra}")

    def __contains__(self, area: str) -> bool:
        return area in self.tier_of


def _parse_pairs(lines: Iterable[str], what: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 2 or not all(parts):
            raise ValueError(
                f"{what} vocabulary line {lineno} must be 'label<TAB>{what}': {raw!r}"
            )
        pairs.append((parts[0], parts[1]))
    return pairs


def parse_coding_scheme(lines: Iterable[str]) -> CodingScheme:
    pairs = _parse_pairs(lines, "construct")
    return CodingScheme(
        behaviors=tuple(code for code, _ in pairs),
        construct_of={code: construct for code, construct in pairs},
    )


def parse_location_taxonomy(lines: Iterable[str]) -> LocationTaxonomy:
    pairs = _parse_pairs(lines, "tier")
    return LocationTaxonomy(
        areas=tuple(area for area, _ in pairs),
        tier_of={area: tier for area, tier in pairs},
    )


def load_coding_scheme(path: str | Path) -> CodingScheme:
    with open(path, encoding="utf-8") as fh:
        return parse_coding_scheme(fh)


def load_location_taxonomy(path: str | Path) -> LocationTaxonomy:
    with open(path, encoding="utf-8") as fh:
        return parse_location_taxonomy(fh)


def default_coding_scheme() -> CodingScheme:
    text = resources.files("engagenet").joinpath("data/behaviors.txt").read_text("utf-8")
    return parse_coding_scheme(text.splitlines())


def default_location_taxonomy() -> LocationTaxonomy:
    text = resources.files("engagenet").joinpath("data/areas.txt").read_text("utf-8")
    return parse_location_taxonomy(text.splitlines())
