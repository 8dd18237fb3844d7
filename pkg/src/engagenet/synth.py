"""Planted-profile generator of coded event streams, plus clustering metrics.

Each synthetic student is assigned a latent profile, which is a probability
distribution over (location, code) pairs; profiles are distributions over the
pair product space rather than independent location and code margins so that
location-code coupling can be planted and then recovered.  A single ``overlap``
knob interpolates every profile toward the population mixture, giving a scalar
detectability dial: 0 leaves profiles untouched (disjoint supports stay
disjoint), 1 makes all students exchangeable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .events import StudentRecord, TeamScore, UtteranceEvent
from .vocab import (
    DEFAULT_BEHAVIOR_FREQUENCIES,
    CodingScheme,
    LocationTaxonomy,
    default_coding_scheme,
    default_location_taxonomy,
)

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class PlantedLabels:
    """Ground-truth profile index per generated student."""

    profile_of: Mapping[str, int]


class SynthDataset(NamedTuple):
    events: list[UtteranceEvent]
    students: list[StudentRecord]
    scores: list[TeamScore]
    labels: PlantedLabels


def default_code_marginal(scheme: CodingScheme) -> np.ndarray:
    """Reference code proportions for the scheme (uniform if unknown codes)."""
    if all(code in DEFAULT_BEHAVIOR_FREQUENCIES for code in scheme.behaviors):
        freqs = np.array([DEFAULT_BEHAVIOR_FREQUENCIES[c] for c in scheme.behaviors], float)
    else:
        freqs = np.ones(len(scheme.behaviors))
    return freqs / freqs.sum()


def default_profile_dists(
    scheme: CodingScheme, taxonomy: LocationTaxonomy, num_profiles: int
) -> tuple[tuple[float, ...], ...]:
    """Profiles sharing the reference code marginal but occupying disjoint areas.

    With two profiles the split follows the area tiers (primary versus the
    rest); otherwise areas are dealt round-robin.  Because every profile is an
    outer product with the same code marginal, any mixture of them reproduces
    the reference code proportions exactly.
    """
    areas = taxonomy.areas
    code_marginal = default_code_marginal(scheme)
    primary = [a for a in areas if taxonomy.tier_of[a] == "primary"]
    rest = [a for a in areas if taxonomy.tier_of[a] != "primary"]
    if num_profiles == 2 and primary and rest:
        groups = [primary, rest]
    else:
        groups = [list(areas[k::num_profiles]) for k in range(num_profiles)]
        if any(not grp for grp in groups):
            raise ValueError(f"cannot split {len(areas)} areas into {num_profiles} non-empty groups")
    dists = []
    for group in groups:
        loc = np.array([1.0 if a in group else 0.0 for a in areas])
        loc /= loc.sum()
        dists.append(tuple(np.outer(loc, code_marginal).ravel()))
    return tuple(dists)


@dataclass(frozen=True)
class SynthConfig:
    num_teams: int = 15
    team_size: int = 4
    team_sizes: tuple[int, ...] | None = None  # overrides num_teams x team_size
    num_profiles: int = 2
    profile_dists: tuple[tuple[float, ...], ...] | None = None  # row-major areas x codes
    profile_mix: tuple[float, ...] | None = None  # default uniform
    events_per_student: int = 40
    multi_code_prob: float = 0.0
    overlap: float = 0.0
    seed: int = 0
    score_profile_logodds: float = 2.5
    satisfaction_means: tuple[float, ...] | None = None
    scheme: CodingScheme = field(default_factory=default_coding_scheme)
    taxonomy: LocationTaxonomy = field(default_factory=default_location_taxonomy)

    def __post_init__(self):
        if self.num_profiles < 1:
            raise ValueError("num_profiles must be >= 1")
        if self.events_per_student < 1:
            raise ValueError("events_per_student must be >= 1")
        if not 0.0 <= self.multi_code_prob < 1.0:
            raise ValueError("multi_code_prob must be in [0, 1)")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must be in [0, 1]")
        sizes = self.team_sizes if self.team_sizes is not None else (self.team_size,) * self.num_teams
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("team sizes must all be >= 1")
        n_pairs = len(self.taxonomy.areas) * len(self.scheme.behaviors)
        for vec in self.resolved_profile_dists():
            if len(vec) != n_pairs:
                raise ValueError(f"profile distributions must have {n_pairs} entries, got {len(vec)}")
            if any(x < 0 for x in vec) or abs(sum(vec) - 1.0) > _PROB_TOL:
                raise ValueError("profile distributions must be probability vectors summing to 1")
        mix = self.resolved_profile_mix()
        if len(mix) != self.num_profiles:
            raise ValueError(f"profile_mix must have {self.num_profiles} entries")
        if any(x < 0 for x in mix) or abs(sum(mix) - 1.0) > _PROB_TOL:
            raise ValueError("profile_mix must be a probability vector summing to 1")
        if self.satisfaction_means is not None and len(self.satisfaction_means) != self.num_profiles:
            raise ValueError(f"satisfaction_means must have {self.num_profiles} entries")

    def resolved_team_sizes(self) -> tuple[int, ...]:
        return self.team_sizes if self.team_sizes is not None else (self.team_size,) * self.num_teams

    def resolved_profile_dists(self) -> tuple[tuple[float, ...], ...]:
        if self.profile_dists is not None:
            return self.profile_dists
        return default_profile_dists(self.scheme, self.taxonomy, self.num_profiles)

    def resolved_profile_mix(self) -> tuple[float, ...]:
        if self.profile_mix is not None:
            return self.profile_mix
        return (1.0 / self.num_profiles,) * self.num_profiles


def cohort_preset(seed: int = 0, **overrides) -> SynthConfig:
    """A realistic cohort preset: 15 teams (two short one member), 58 students,
    about 2641 code occurrences matching the bundled reference frequencies."""
    params = dict(
        team_sizes=(4,) * 13 + (3,) * 2,
        num_profiles=2,
        events_per_student=45,
        multi_code_prob=2641 / (58 * 45) - 1.0,
        overlap=0.0,
        seed=seed,
    )
    params.update(overrides)
    return SynthConfig(**params)


def generate_dataset(cfg: SynthConfig) -> SynthDataset:
    """Generate (events, students, team scores, planted labels); deterministic per seed.

    Every student emits exactly ``events_per_student`` events from their
    overlap-interpolated profile; with probability ``multi_code_prob`` an event
    carries one extra code drawn from the profile conditioned on the event's
    location.  Team scores correlate with the members' profiles through the
    ``score_profile_logodds`` knob, and satisfaction means decrease with the
    profile index unless ``satisfaction_means`` overrides them.
    """
    rng = np.random.default_rng(cfg.seed)
    areas = cfg.taxonomy.areas
    codes = cfg.scheme.behaviors
    n_codes = len(codes)
    base = np.array(cfg.resolved_profile_dists(), float)
    mix = np.array(cfg.resolved_profile_mix(), float)
    population = mix @ base
    effective = (1.0 - cfg.overlap) * base + cfg.overlap * population
    effective /= effective.sum(axis=1, keepdims=True)
    sat_means = cfg.satisfaction_means or tuple(
        max(1.0, 6.0 - k) for k in range(cfg.num_profiles)
    )

    team_sizes = cfg.resolved_team_sizes()
    n_students = sum(team_sizes)
    team_width = len(str(len(team_sizes)))
    student_width = len(str(n_students))

    events: list[UtteranceEvent] = []
    students: list[StudentRecord] = []
    profile_of: dict[str, int] = {}
    team_of: dict[str, str] = {}

    counter = 0
    for t, size in enumerate(team_sizes):
        team_id = f"T{t + 1:0{team_width}d}"
        for _ in range(size):
            counter += 1
            student_id = f"S{counter:0{student_width}d}"
            profile = int(rng.choice(cfg.num_profiles, p=mix))
            profile_of[student_id] = profile
            team_of[student_id] = team_id
            dist = effective[profile]
            pair_idx = rng.choice(len(dist), size=cfg.events_per_student, p=dist)
            for idx in pair_idx:
                area_i, code_i = divmod(int(idx), n_codes)
                event_codes = {codes[code_i]}
                if cfg.multi_code_prob > 0 and rng.random() < cfg.multi_code_prob:
                    cond = dist[area_i * n_codes : (area_i + 1) * n_codes].copy()
                    cond[code_i] = 0.0
                    if cond.sum() > 0:
                        extra = int(rng.choice(n_codes, p=cond / cond.sum()))
                        event_codes.add(codes[extra])
                events.append(
                    UtteranceEvent(
                        team_id=team_id,
                        student_id=student_id,
                        location=areas[area_i],
                        codes=frozenset(event_codes),
                        phase=int(rng.integers(3, 5)),
                    )
                )
            satisfaction = int(np.clip(round(rng.normal(sat_means[profile], 1.0)), 1, 7))
            students.append(StudentRecord(student_id, team_id, satisfaction))

    scores: list[TeamScore] = []
    start = 0
    for t, size in enumerate(team_sizes):
        team_id = f"T{t + 1:0{team_width}d}"
        member_profiles = [students[i].student_id for i in range(start, start + size)]
        mean_idx = float(np.mean([profile_of[s] for s in member_profiles]))
        # signal in [-1, 1]: +1 when the whole team is profile 0
        signal = 1.0 - 2.0 * mean_idx / max(1, cfg.num_profiles - 1)
        p_high = 1.0 / (1.0 + math.exp(-cfg.score_profile_logodds * signal))
        high = rng.random() < p_high
        score = float(rng.integers(5, 8)) if high else float(rng.integers(1, 5))
        scores.append(TeamScore(team_id, score))
        start += size

    return SynthDataset(events, students, scores, PlantedLabels(profile_of))


def adjusted_rand_index(a: Mapping, b: Mapping) -> float:
    """Pair-counting agreement between two labelings of the same keys, corrected
    for chance; 1 means identical up to label permutation."""
    if set(a) != set(b):
        raise ValueError("labelings must cover the same key set")
    contingency = Counter((a[key], b[key]) for key in a)
    row = Counter()
    col = Counter()
    for (la, lb), c in contingency.items():
        row[la] += c
        col[lb] += c
    sum_ij = sum(math.comb(c, 2) for c in contingency.values())
    sum_a = sum(math.comb(c, 2) for c in row.values())
    sum_b = sum(math.comb(c, 2) for c in col.values())
    total_pairs = math.comb(len(a), 2)
    if total_pairs == 0:
        return 1.0
    expected = sum_a * sum_b / total_pairs
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)
