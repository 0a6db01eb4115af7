"""AXIL letters from substitution ease, exposition and quality of experience."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional


class Substitution(enum.IntEnum):
    EASY = 0
    MEDIUM = 1
    DIFFICULT = 2


class Exposition(enum.IntEnum):
    RARE = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3


class Experience(enum.IntEnum):
    MINIMAL = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3


class AxilLevel(enum.IntEnum):
    NONE = 0
    A = 1
    B = 2
    C = 3
    D = 4

    @property
    def symbol(self) -> str:
        return "-" if self is AxilLevel.NONE else self.name

    @classmethod
    def parse(cls, s: str) -> "AxilLevel":
        return cls.NONE if s.strip() in ("-", "", "None", "NONE") else cls[s.strip().upper()]


class AxilFactors(NamedTuple):
    e1: Substitution
    e2: Exposition
    e3: Experience


# Rows: (substitution, exposition); columns: experience Minimal, Low, Medium, High.
_TABLE = {
    Substitution.EASY: {
        Exposition.RARE:   "- - - -",
        Exposition.LOW:    "- - - -",
        Exposition.MEDIUM: "- - - A",
        Exposition.HIGH:   "- - A B",
    },
    Substitution.MEDIUM: {
        Exposition.RARE:   "- - - -",
        Exposition.LOW:    "- - - A",
        Exposition.MEDIUM: "- - A B",
        Exposition.HIGH:   "- A B C",
    },
    Substitution.DIFFICULT: {
        Exposition.RARE:   "- - - A",
        Exposition.LOW:    "- - A B",
        Exposition.MEDIUM: "- A B C",
        Exposition.HIGH:   "A B C D",
    },
}

AXIL_TABLE: dict[AxilFactors, AxilLevel] = {
    AxilFactors(e1, e2, Experience(k)): AxilLevel.parse(cell)
    for e1, rows in _TABLE.items()
    for e2, row in rows.items()
    for k, cell in enumerate(row.split())
}


def derive_axil(f: AxilFactors) -> AxilLevel:
    return AXIL_TABLE[AxilFactors(Substitution(f[0]), Exposition(f[1]), Experience(f[2]))]


@dataclass(frozen=True)
class ScoreMap:
    """Numeric AXIL score per letter; must be non-negative and strictly increasing."""

    scores: tuple[float, float, float, float, float] = (0.0, 1.0, 2.0, 4.0, 8.0)

    def __post_init__(self):
        if len(self.scores) != len(AxilLevel):
            raise ValueError(f"need {len(AxilLevel)} scores, got {len(self.scores)}")
        if self.scores[0] < 0:
            raise ValueError("scores must be non-negative")
        if any(b <= a for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError(f"scores must increase strictly with the letter: {self.scores}")

    @classmethod
    def from_mapping(cls, m: Mapping) -> "ScoreMap":
        by_level = {AxilLevel.parse(k) if isinstance(k, str) else AxilLevel(k): float(v)
                    for k, v in m.items()}
        return cls(tuple(by_level[l] for l in AxilLevel))


DEFAULT_SCORES = ScoreMap()


def level_to_score(level: AxilLevel, mapping: Optional[ScoreMap] = None) -> float:
    return (mapping or DEFAULT_SCORES).scores[AxilLevel(level)]


def axil_score(f: AxilFactors, mapping: Optional[ScoreMap] = None) -> float:
    return level_to_score(derive_axil(f), mapping)
