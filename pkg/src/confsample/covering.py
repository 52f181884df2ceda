"""t-wise covering arrays over boolean options, with optional constraints.

Generation follows the in-parameter-order strategy: start from every valid
value combination of the first ``t`` options, then add one option at a time,
first choosing its value in each existing row to cover the most new tuples
(horizontal growth), then adding or filling rows for what is left (vertical
growth).  Under constraints every candidate row is checked for extendability
to a valid configuration, and tuples that no valid configuration contains are
dropped instead of covered.
"""

from __future__ import annotations

import itertools
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass

from .formula import Configuration
from .samples import CONSTRAINED, UNCONSTRAINED, SampleSet, dedupe
from .satsolver import ConstraintModel, Oracle, ResourceLimit, Unsatisfiable, count_or_enumerate, solve

__all__ = [
    "TWiseSpec", "CoverageGap", "generate_covering_array", "verify_coverage", "uncovered",
    "t_wise_name", "DEFAULT_TUPLE_BUDGET", "UNCOVERED", "INVALID",
]

UNCOVERED = "uncovered"
INVALID = "invalid-under-constraints"
DEFAULT_TUPLE_BUDGET = 2_000_000

_NAMES = {2: "pair-wise", 3: "three-wise", 4: "four-wise", 5: "five-wise", 6: "six-wise"}


def t_wise_name(t: int) -> str:
    return _NAMES.get(t, f"{t}-wise")


@dataclass(frozen=True)
class TWiseSpec:
    t: int
    space: tuple[str, ...]
    constraints: ConstraintModel | None = None
    order: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")
        object.__setattr__(self, "space", tuple(sorted(set(self.space))))
        if self.order is not None:
            if sorted(self.order) != list(self.space):
                raise ValueError("order must be a permutation of space")
            object.__setattr__(self, "order", tuple(self.order))
        m = self.constraints
        if m is None:
            m = ConstraintModel.unconstrained(self.space)
        object.__setattr__(self, "constraints", m.extend_space(self.space))

    @property
    def ordered(self) -> tuple[str, ...]:
        return self.order if self.order is not None else self.space

    @property
    def constrained(self) -> bool:
        return not self.constraints.is_trivial


@dataclass(frozen=True)
class CoverageGap:
    options: tuple[str, ...]
    values: tuple[bool, ...]
    reason: str

    def as_assignment(self) -> dict[str, bool]:
        return dict(zip(self.options, self.values))


def uncovered(gaps: Sequence[CoverageGap]) -> list[CoverageGap]:
    return [g for g in gaps if g.reason == UNCOVERED]


def _tuple_count(n: int, t: int) -> int:
    return math.comb(n, t) * 2**t if t <= n else 0


def generate_covering_array(spec: TWiseSpec, budget: int | None = None,
                            tuple_budget: int = DEFAULT_TUPLE_BUDGET,
                            scope: str = "", algorithm: str | None = None) -> SampleSet:
    """Rows covering every valid t-tuple of ``spec.space``; all rows valid.

    Raises :class:`Unsatisfiable` when the constraints admit no configuration
    and :class:`ResourceLimit` when tuple bookkeeping or solving exceeds its
    budget.
    """
    started = time.perf_counter()
    t, order = spec.t, list(spec.ordered)
    k = len(order)
    oracle = Oracle(spec.constraints, budget)
    constrained = spec.constrained
    if not oracle.feasible({}):
        raise Unsatisfiable("constraints admit no configuration")
    if _tuple_count(k, min(t, k)) > tuple_budget:
        raise ResourceLimit(tuple_budget, "t-tuple")
    name = algorithm or t_wise_name(t)
    mode = CONSTRAINED if constrained else UNCONSTRAINED

    def finish(rows: list[Configuration]) -> SampleSet:
        return SampleSet(name, scope, mode, spec.space, tuple(dedupe(rows)),
                         elapsed=time.perf_counter() - started)

    if k == 0:
        return finish([oracle.complete({})])
    if t >= k:
        if not constrained:
            return finish([Configuration(zip(order, bits))
                           for bits in itertools.product((False, True), repeat=k)])
        found = count_or_enumerate(spec.constraints, 2**k, project=order, budget=oracle.budget)
        return finish(list(found.configurations))

    # rows hold None for "don't care" positions
    rows: list[list[bool | None]] = []
    for bits in itertools.product((False, True), repeat=t):
        partial = dict(zip(order[:t], bits))
        if oracle.feasible(partial):
            rows.append(list(bits) + [None] * (k - t))

    def assignment(row: Sequence[bool | None], upto: int) -> dict[str, bool]:
        return {order[j]: row[j] for j in range(upto) if row[j] is not None}

    invalid_tuples = 0
    for i in range(t, k):
        combos = list(itertools.combinations(range(i), t - 1))
        pending: set[tuple[tuple[int, ...], tuple[bool, ...], bool]] = {
            (combo, vals, v)
            for combo in combos
            for vals in itertools.product((False, True), repeat=t - 1)
            for v in (False, True)
        }

        def covered_by(row: Sequence[bool | None], v: bool):
            for combo in combos:
                vals = tuple(row[j] for j in combo)
                if None not in vals:
                    yield (combo, vals, v)

        # horizontal growth
        used = {False: 0, True: 0}
        for row in rows:
            best_v, best_key = None, None
            for v in (False, True):
                if constrained and not oracle.feasible({**assignment(row, i), order[i]: v}):
                    continue
                gain = sum(1 for tup in covered_by(row, v) if tup in pending)
                # ties go to the value used less so far in this column
                key = (gain, -used[v])
                if best_key is None or key > best_key:
                    best_v, best_key = v, key
            if best_v is None:
                raise AssertionError("row lost extendability")
            row[i] = best_v
            used[best_v] += 1
            pending.difference_update(covered_by(row, best_v))

        # vertical growth
        for tup in sorted(pending):
            if tup not in pending:
                continue
            combo, vals, v = tup
            want = dict(zip(combo, vals))
            want[i] = v
            if constrained and not oracle.feasible({order[j]: b for j, b in want.items()}):
                pending.discard(tup)
                invalid_tuples += 1
                continue
            target = None
            for row in rows:
                if row[i] is not None and row[i] != v:
                    continue
                if any(row[j] is not None and row[j] != b for j, b in want.items()):
                    continue
                if constrained:
                    trial = assignment(row, i + 1)
                    trial.update({order[j]: b for j, b in want.items()})
                    if not oracle.feasible(trial):
                        continue
                target = row
                break
            if target is None:
                target = [None] * k
                rows.append(target)
            for j, b in want.items():
                target[j] = b
            pending.difference_update(covered_by(target, v))

    result = []
    for row in rows:
        partial = assignment(row, k)
        if constrained:
            result.append(oracle.complete(partial))
        else:
            result.append(Configuration({o: partial.get(o, False) for o in order}))
    return finish(result)


def verify_coverage(samples: SampleSet | Sequence[Configuration], spec: TWiseSpec,
                    budget: int | None = None,
                    tuple_budget: int = DEFAULT_TUPLE_BUDGET) -> list[CoverageGap]:
    """Every t-tuple not present in ``samples``.

    Each missing tuple is classified with a SAT call on constraints plus the
    tuple: ``invalid-under-constraints`` when no valid configuration contains
    it, ``uncovered`` otherwise.  Coverage is complete iff no gap is
    ``uncovered``.
    """
    configs = list(samples)
    space = list(spec.space)
    n, t = len(space), min(spec.t, len(space))
    if _tuple_count(n, t) > tuple_budget:
        raise ResourceLimit(tuple_budget, "t-tuple")
    for c in configs:
        missing = [o for o in space if o not in c]
        if missing:
            raise ValueError(f"configuration is not total over the space: missing {missing}")
    row_bits = [[c[o] for o in space] for c in configs]
    cnf = spec.constraints.cnf
    trivial = spec.constraints.is_trivial
    gaps: list[CoverageGap] = []
    for combo in itertools.combinations(range(n), t):
        present = {tuple(r[j] for j in combo) for r in row_bits}
        for vals in itertools.product((False, True), repeat=t):
            if vals in present:
                continue
            names = tuple(space[j] for j in combo)
            reason = UNCOVERED
            if not trivial and not solve(cnf, dict(zip(names, vals)), budget).satisfiable:
                reason = INVALID
            gaps.append(CoverageGap(names, vals, reason))
    return gaps
