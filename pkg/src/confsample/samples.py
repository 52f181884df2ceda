"""Sample sets: the configurations one algorithm selected for one scope."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .formula import TRUE, Configuration, Formula, parse_formula, print_formula

__all__ = ["SampleSet", "GLOBAL", "UNCONSTRAINED", "CONSTRAINED", "dedupe"]

GLOBAL = "global"
UNCONSTRAINED = "unconstrained"
CONSTRAINED = "constrained"


def dedupe(configs: Iterable[Configuration]) -> list[Configuration]:
    return list(dict.fromkeys(configs))


@dataclass(frozen=True)
class SampleSet:
    algorithm: str
    scope: str  # a project-relative path, or GLOBAL
    mode: str
    options: tuple[str, ...]
    configurations: tuple[Configuration, ...]
    skips: tuple[tuple[str, str], ...] = ()
    file_pc: Formula = TRUE
    elapsed: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if len(set(self.configurations)) != len(self.configurations):
            raise ValueError(f"{self.algorithm}: duplicate configurations in sample set")
        if self.mode not in (UNCONSTRAINED, CONSTRAINED):
            raise ValueError(f"unknown mode {self.mode!r}")

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self):
        return iter(self.configurations)

    @property
    def is_global(self) -> bool:
        return self.scope == GLOBAL

    @property
    def columns(self) -> tuple[str, ...]:
        cols = set(self.options)
        for c in self.configurations:
            cols.update(c)
        return tuple(sorted(cols))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns
        w.writerow(cols)
        for c in self.configurations:
            w.writerow([int(c.get(o, False)) for o in cols])
        return buf.getvalue()

    @staticmethod
    def rows_from_csv(text: str) -> list[Configuration]:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            return []
        header = rows[0]
        out = []
        for r in rows[1:]:
            if len(r) != len(header):
                raise ValueError("CSV row width does not match header")
            out.append(Configuration(zip(header, (v.strip() == "1" for v in r))))
        return out

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "scope": self.scope,
            "mode": self.mode,
            "options": list(self.options),
            "file_pc": print_formula(self.file_pc),
            "columns": list(self.columns),
            "configurations": ["".join(str(int(c.get(o, False))) for o in self.columns)
                               for c in self.configurations],
            "skips": [list(s) for s in self.skips],
            "elapsed": round(self.elapsed, 6),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> SampleSet:
        cols = data["columns"]
        configs = tuple(Configuration(zip(cols, (ch == "1" for ch in row)))
                        for row in data["configurations"])
        return cls(data["algorithm"], data["scope"], data["mode"], tuple(data["options"]), configs,
                   tuple(tuple(s) for s in data.get("skips", ())),
                   parse_formula(data.get("file_pc", "1")), data.get("elapsed", 0.0))

    def with_configurations(self, configs: Sequence[Configuration], algorithm: str | None = None) -> SampleSet:
        return SampleSet(algorithm or self.algorithm, self.scope, self.mode, self.options,
                         tuple(dedupe(configs)), self.skips, self.file_pc, self.elapsed)
