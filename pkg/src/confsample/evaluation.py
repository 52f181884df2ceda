"""Fault corpora, detection, efficiency scores, ranking and Pareto fronts."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import PurePosixPath

from .formula import TRUE, Configuration, Formula, conj, evaluate, parse_formula, print_formula, to_cnf, variables
from .samples import GLOBAL, SampleSet
from .sampling import Combination, all_combinations, combine
from .satsolver import solve

__all__ = [
    "FaultRecord", "CorpusError", "UnsatisfiablePC", "ingest_corpus", "corpus_to_text",
    "DetectionResult", "detect", "detect_all", "EfficiencyScore", "score", "rank",
    "ParetoPoint", "pareto_front", "combination_sets", "EvaluationReport", "evaluate_algorithms",
]

log = logging.getLogger(__name__)


def _norm(path: str) -> str:
    p = str(PurePosixPath(path.replace("\\", "/")))
    return p[2:] if p.startswith("./") else p


# ---------------------------------------------------------------------------
# Corpus


class CorpusError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"corpus line {line}: {message}")
        self.line = line


class UnsatisfiablePC(CorpusError):
    pass


@dataclass(frozen=True)
class FaultRecord:
    id: str
    file: str  # project-relative path, or GLOBAL for cross-file faults
    kind: str
    presence_condition: Formula
    origin: str = ""

    @property
    def is_global(self) -> bool:
        return self.file == GLOBAL

    def to_line(self) -> str:
        parts = [self.id, self.file, self.kind, print_formula(self.presence_condition)]
        if self.origin:
            parts.append(self.origin)
        return " :: ".join(parts)


def ingest_corpus(text: str) -> list[FaultRecord]:
    """Parse ``id :: file :: kind :: formula [:: origin]`` lines.

    Blank lines and ``#`` comment lines are ignored.  Every presence condition
    must be satisfiable and ids must be unique.
    """
    records: list[FaultRecord] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("::")]
        if len(fields) not in (4, 5):
            raise CorpusError(lineno, f"expected 4 or 5 '::'-separated fields, got {len(fields)}")
        fid, path, kind, expr = fields[:4]
        if not fid or not path:
            raise CorpusError(lineno, "empty id or file")
        if fid in seen:
            raise CorpusError(lineno, f"duplicate fault id {fid!r} (first on line {seen[fid]})")
        try:
            pc = parse_formula(expr)
        except ValueError as exc:
            raise CorpusError(lineno, str(exc)) from exc
        if not solve(to_cnf(pc)).satisfiable:
            raise UnsatisfiablePC(lineno, f"presence condition of {fid} is unsatisfiable: {expr}")
        seen[fid] = lineno
        file = GLOBAL if path == GLOBAL else _norm(path)
        records.append(FaultRecord(fid, file, kind, pc, fields[4] if len(fields) == 5 else ""))
    return records


def corpus_to_text(records: Iterable[FaultRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


# ---------------------------------------------------------------------------
# Detection


@dataclass(frozen=True)
class DetectionResult:
    fault_id: str
    algorithm: str
    detected: bool
    witness: Configuration | None = None


def detect(fault: FaultRecord, samples: SampleSet) -> DetectionResult:
    """Detected iff some configuration satisfies the fault PC and the set's file PC.

    Options of the PC that a configuration does not assign count as disabled.
    """
    condition = fault.presence_condition
    if samples.file_pc != TRUE:
        condition = conj(condition, samples.file_pc)
    names = variables(condition)
    warned = False
    for c in samples.configurations:
        missing = names.difference(c)
        if missing and not warned:
            log.warning("%s: options %s not in the %s sample space; treated as disabled",
                        fault.id, ", ".join(sorted(missing)), samples.algorithm)
            warned = True
        env = {o: c.get(o, False) for o in names}
        if evaluate(condition, env):
            return DetectionResult(fault.id, samples.algorithm, True, c)
    return DetectionResult(fault.id, samples.algorithm, False)


def _set_for(fault: FaultRecord, by_scope: Mapping[str, SampleSet]) -> SampleSet | None:
    if GLOBAL in by_scope:
        return by_scope[GLOBAL]
    return by_scope.get(fault.file)


def detect_all(corpus: Sequence[FaultRecord], sets: Sequence[SampleSet]) -> list[DetectionResult]:
    """One result per fault.  A global set serves every fault; otherwise the file's set does.

    A fault whose file has no sample set (including ``global`` faults against
    per-file sets) is reported as not detected.
    """
    by_scope = {_norm(s.scope) if s.scope != GLOBAL else GLOBAL: s for s in sets}
    name = sets[0].algorithm if sets else ""
    out = []
    for f in corpus:
        s = _set_for(f, by_scope)
        if s is None:
            log.warning("%s: no sample set covers %s", f.id, f.file)
            out.append(DetectionResult(f.id, name, False))
        else:
            out.append(detect(f, s))
    return out


# ---------------------------------------------------------------------------
# Scores and ranking


@dataclass(frozen=True)
class EfficiencyScore:
    algorithm: str
    sample_size: int
    faults_detected: int
    files: int = 1
    detections: tuple[DetectionResult, ...] = field(default=(), compare=False, repr=False)

    @property
    def E(self) -> float | None:
        """Configurations to check per detected fault; None when nothing was detected."""
        if self.faults_detected == 0:
            return None
        return self.sample_size / self.faults_detected

    @property
    def samples_per_file(self) -> float:
        return self.sample_size / self.files if self.files else 0.0

    @property
    def detected_ids(self) -> frozenset[str]:
        return frozenset(d.fault_id for d in self.detections if d.detected)


def score(algorithm: str, sets: Sequence[SampleSet], corpus: Sequence[FaultRecord]) -> EfficiencyScore:
    detections = tuple(detect_all(corpus, sets))
    size = sum(len(s) for s in sets)
    found = sum(d.detected for d in detections)
    return EfficiencyScore(algorithm, size, found, len(sets), detections)


def rank(scores: Iterable[EfficiencyScore]) -> list[EfficiencyScore]:
    """Ascending E, undefined E last; ties by smaller sample size, then name."""
    def key(s: EfficiencyScore):
        e = s.E
        return (e is None, e if e is not None else math.inf, s.sample_size, s.algorithm)
    return sorted(scores, key=key)


# ---------------------------------------------------------------------------
# Pareto front


@dataclass(frozen=True)
class ParetoPoint:
    name: str
    sample_size: float
    faults_detected: int
    on_front: bool = False


def pareto_front(points: Iterable[ParetoPoint | tuple]) -> list[ParetoPoint]:
    """All points with ``on_front`` set, sorted by size (then more faults, then name).

    A point is on the front when no other point is at most as large and
    detects at least as many faults, with one of the two strict.
    """
    pts = [p if isinstance(p, ParetoPoint) else ParetoPoint(*p) for p in points]
    # sweep in size order: p is dominated iff some strictly smaller point has
    # at least its faults, or an equal-size point has strictly more
    order = sorted(pts, key=lambda p: (p.sample_size, -p.faults_detected, p.name))
    out: list[ParetoPoint] = []
    best_before = -math.inf  # max faults among strictly smaller sizes
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and order[j].sample_size == order[i].sample_size:
            j += 1
        group = order[i:j]
        top = group[0].faults_detected
        for p in group:
            front = p.faults_detected > best_before and p.faults_detected == top
            out.append(ParetoPoint(p.name, p.sample_size, p.faults_detected, front))
        best_before = max(best_before, top)
        i = j
    return out


# ---------------------------------------------------------------------------
# Reports


def combination_sets(combo: Combination, sets_by_alg: Mapping[str, Sequence[SampleSet]]) -> list[SampleSet]:
    """Per-scope union of the members' sample sets."""
    members = [list(sets_by_alg[str(a)]) for a in combo.members]
    by_scope: dict[str, list[SampleSet]] = {}
    for sets in members:
        for s in sets:
            by_scope.setdefault(s.scope, []).append(s)
    return [combine(group, combo.name) for _, group in sorted(by_scope.items())]


@dataclass
class EvaluationReport:
    scores: list[EfficiencyScore]
    combinations: list[EfficiencyScore]
    pareto: list[ParetoPoint]
    total_faults: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        ranked = self.scores
        return {
            **self.meta,
            "total_faults": self.total_faults,
            "algorithms": [_score_dict(s, i) for i, s in enumerate(ranked, 1)],
            "combinations": [_score_dict(s, i) for i, s in enumerate(self.combinations, 1)],
            "pareto": [
                {"name": p.name, "sample_size": p.sample_size, "faults_detected": p.faults_detected,
                 "on_front": p.on_front}
                for p in self.pareto
            ],
        }

    def to_table(self) -> str:
        lines = [f"{'rank':>4}  {'algorithm':<28} {'faults':>6} {'size':>7} {'per file':>8} {'E':>8}"]
        for i, s in enumerate(self.scores, 1):
            e = "-" if s.E is None else f"{s.E:.3f}"
            lines.append(f"{i:>4}  {s.algorithm:<28} {s.faults_detected:>6} {s.sample_size:>7} "
                         f"{s.samples_per_file:>8.2f} {e:>8}")
        front = [p for p in self.pareto if p.on_front]
        if front:
            lines.append("")
            lines.append("Pareto front (size, faults):")
            lines.extend(f"  {p.name:<48} {p.sample_size:>7} {p.faults_detected:>6}" for p in front)
        return "\n".join(lines) + "\n"


def _score_dict(s: EfficiencyScore, position: int) -> dict:
    return {
        "rank": position,
        "algorithm": s.algorithm,
        "faults_detected": s.faults_detected,
        "sample_size": s.sample_size,
        "samples_per_file": round(s.samples_per_file, 6),
        "E": None if s.E is None else round(s.E, 6),
        "detected": sorted(s.detected_ids),
    }


def evaluate_algorithms(corpus: Sequence[FaultRecord], sets_by_alg: Mapping[str, Sequence[SampleSet]],
                        combinations: bool = False) -> EvaluationReport:
    """Score and rank each algorithm; optionally add every 2-/3-way combination.

    Combinations only use algorithms present in ``sets_by_alg``.  The Pareto
    listing covers algorithms and combinations together.
    """
    scores = rank(score(name, sets, corpus) for name, sets in sets_by_alg.items())
    combos: list[EfficiencyScore] = []
    if combinations:
        for combo in all_combinations():
            if all(str(a) in sets_by_alg for a in combo.members):
                combos.append(score(combo.name, combination_sets(combo, sets_by_alg), corpus))
        combos = rank(combos)
    points = [ParetoPoint(s.algorithm, s.sample_size, s.faults_detected) for s in scores + combos]
    return EvaluationReport(scores, combos, pareto_front(points), len(corpus))

