"""DPLL satisfiability, model enumeration and polarity optimisation.

The engine is a chronological-backtracking DPLL with counter-based unit
propagation and pure-literal elimination.  Branching is deterministic:
ascending variable index (options come first, sorted by name), positive
polarity first.  Variables that occur only in already-satisfied clauses are
left unassigned and read back as *disabled*.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import TextIO

from .formula import (
    TRUE, CnfFormula, Configuration, Formula, conj, evaluate, parse_formula,
    print_formula, to_cnf, variables,
)

log = logging.getLogger(__name__)

__all__ = [
    "ResourceLimit", "Unsatisfiable", "SolveStats", "SolveResult", "ConstraintModel",
    "Enumeration", "Oracle", "solve", "max_polarity_model", "constrained_extreme",
    "count_or_enumerate", "default_budget", "write_dimacs", "read_dimacs",
    "ENABLED", "DISABLED",
]

ENABLED = True
DISABLED = False

_BUDGET_ENV = "CONFSAMPLE_DECISION_BUDGET"


def default_budget() -> int:
    return int(os.environ.get(_BUDGET_ENV, 10**7))


class ResourceLimit(RuntimeError):
    """The instance exceeded its decision (or bookkeeping) budget."""

    def __init__(self, budget: int, what: str = "decisions"):
        self.budget = budget
        self.what = what
        super().__init__(f"{what} budget of {budget} exceeded")


class Unsatisfiable(ValueError):
    pass


@dataclass(frozen=True)
class SolveStats:
    decisions: int = 0
    propagations: int = 0


@dataclass(frozen=True)
class SolveResult:
    satisfiable: bool
    model: Configuration | None
    stats: SolveStats = SolveStats()

    @property
    def status(self) -> str:
        return "sat" if self.satisfiable else "unsat"


class _Prepared:
    """Clause database shared by every engine over the same CNF."""

    __slots__ = ("n", "clauses", "pos_occ", "neg_occ", "units", "dead")

    def __init__(self, num_vars: int, clauses: Iterable[Sequence[int]]):
        self.n = num_vars
        self.clauses: list[tuple[int, ...]] = []
        self.pos_occ: list[list[int]] = [[] for _ in range(num_vars + 1)]
        self.neg_occ: list[list[int]] = [[] for _ in range(num_vars + 1)]
        self.units: list[int] = []
        self.dead = False  # empty clause present
        for c in clauses:
            lits = tuple(dict.fromkeys(c))
            if any(-l in lits for l in lits):
                continue
            if not lits:
                self.dead = True
                continue
            ci = len(self.clauses)
            self.clauses.append(lits)
            for l in lits:
                (self.pos_occ if l > 0 else self.neg_occ)[abs(l)].append(ci)
            if len(lits) == 1:
                self.units.append(ci)


def _prepared(cnf: CnfFormula) -> _Prepared:
    # cached on the (frozen) CNF instance itself
    prep = cnf.__dict__.get("_prepared")
    if prep is None:
        prep = cnf.__dict__["_prepared"] = _Prepared(cnf.num_vars, cnf.clauses)
    return prep


class _Engine:
    """Single-use search state over a prepared clause database."""

    def __init__(self, prep: _Prepared, budget: int):
        self.n = prep.n
        self.budget = budget
        self.decisions = 0
        self.propagations = 0
        self.value = [0] * (prep.n + 1)
        self.clauses = prep.clauses
        self.pos_occ = prep.pos_occ
        self.neg_occ = prep.neg_occ
        self.dead = prep.dead
        self.trail: list[int] = []
        self.queue: list[int] = list(prep.units)
        self.conflict = False
        m = len(self.clauses)
        self.sat = [0] * m
        self.nfalse = [0] * m
        self.unsat_left = m

    # -- assignment ---------------------------------------------------------

    def assign(self, lit: int) -> None:
        v = lit if lit > 0 else -lit
        self.value[v] = 1 if lit > 0 else -1
        self.trail.append(lit)
        sat = self.sat
        if lit > 0:
            true_occ, false_occ = self.pos_occ[v], self.neg_occ[v]
        else:
            true_occ, false_occ = self.neg_occ[v], self.pos_occ[v]
        for ci in true_occ:
            if sat[ci] == 0:
                self.unsat_left -= 1
            sat[ci] += 1
        nfalse, clauses = self.nfalse, self.clauses
        for ci in false_occ:
            nfalse[ci] += 1
            if sat[ci] == 0:
                left = len(clauses[ci]) - nfalse[ci]
                if left == 0:
                    self.conflict = True
                elif left == 1:
                    self.queue.append(ci)

    def _undo(self, lit: int) -> None:
        v = lit if lit > 0 else -lit
        self.value[v] = 0
        sat = self.sat
        if lit > 0:
            true_occ, false_occ = self.pos_occ[v], self.neg_occ[v]
        else:
            true_occ, false_occ = self.neg_occ[v], self.pos_occ[v]
        for ci in true_occ:
            sat[ci] -= 1
            if sat[ci] == 0:
                self.unsat_left += 1
        nfalse = self.nfalse
        for ci in false_occ:
            nfalse[ci] -= 1

    def backtrack(self, trail_len: int) -> None:
        trail = self.trail
        while len(trail) > trail_len:
            self._undo(trail.pop())
        self.conflict = False
        self.queue.clear()

    def propagate(self) -> bool:
        if self.dead:
            return False
        value, sat, clauses, queue = self.value, self.sat, self.clauses, self.queue
        while queue and not self.conflict:
            ci = queue.pop()
            if sat[ci]:
                continue
            unit = 0
            for l in clauses[ci]:
                if value[abs(l)] == 0:
                    unit = l
                    break
            if unit == 0:
                self.conflict = True
                break
            self.propagations += 1
            self.assign(unit)
        if self.conflict:
            queue.clear()
            return False
        return True

    def assume(self, lits: Iterable[int]) -> bool:
        """Assign literals as unit facts at the current level and propagate."""
        for lit in lits:
            cur = self.value[abs(lit)]
            if cur == 0:
                self.assign(lit)
            elif (cur > 0) != (lit > 0):
                self.conflict = True
            if self.conflict:
                self.queue.clear()
                return False
        return self.propagate()

    def _count_decision(self) -> None:
        self.decisions += 1
        if self.decisions > self.budget:
            raise ResourceLimit(self.budget)

    def _pick(self) -> tuple[int, bool]:
        """Next branching literal and whether it may be flipped on backtrack.

        Pure variables get their only polarity and are not flippable.
        """
        value, sat = self.value, self.sat
        for v in range(1, self.n + 1):
            if value[v]:
                continue
            pos = any(sat[ci] == 0 for ci in self.pos_occ[v])
            negv = any(sat[ci] == 0 for ci in self.neg_occ[v])
            if pos and negv:
                return v, True
            if pos:
                return v, False
            if negv:
                return -v, False
        raise AssertionError("unsatisfied clause without unassigned literals")

    def search(self) -> bool:
        """Extend the current (propagated) state to a model; restore on failure."""
        start = len(self.trail)
        if not self.propagate():
            self.backtrack(start)
            return False
        stack: list[tuple[int, int, bool]] = []  # (trail length, literal, flippable)
        while True:
            if self.unsat_left == 0:
                return True
            lit, flippable = self._pick()
            if flippable:
                self._count_decision()
            stack.append((len(self.trail), lit, flippable))
            self.assign(lit)
            while not self.propagate():
                while stack and not stack[-1][2]:
                    stack.pop()
                if not stack:
                    self.backtrack(start)
                    return False
                tl, lit, _ = stack.pop()
                self.backtrack(tl)
                stack.append((tl, -lit, False))
                self.assign(-lit)

    def model_values(self) -> list[bool]:
        return [v > 0 for v in self.value]


def _decode(cnf: CnfFormula, values: Sequence[bool]) -> Configuration:
    return Configuration((name, values[i + 1]) for i, name in enumerate(cnf.options))


def _assumption_lits(cnf: CnfFormula, assumptions: Mapping[str, bool] | None) -> list[int]:
    if not assumptions:
        return []
    index = cnf.index
    lits = []
    for name, val in assumptions.items():
        if name not in index:
            raise ValueError(f"assumption on unknown option {name!r}")
        lits.append(index[name] if val else -index[name])
    return lits


def solve(cnf: CnfFormula, assumptions: Mapping[str, bool] | None = None,
          budget: int | None = None) -> SolveResult:
    """Decide satisfiability; the model is total over ``cnf.options``."""
    engine = _Engine(_prepared(cnf), default_budget() if budget is None else budget)
    ok = engine.assume(_assumption_lits(cnf, assumptions)) and engine.search()
    stats = SolveStats(engine.decisions, engine.propagations)
    if not ok:
        return SolveResult(False, None, stats)
    return SolveResult(True, _decode(cnf, engine.model_values()), stats)


# ---------------------------------------------------------------------------
# Constraint models


@dataclass(frozen=True)
class ConstraintModel:
    """Valid configurations over ``space``: those satisfying ``formula``."""

    space: tuple[str, ...]
    formula: Formula = TRUE
    source: str = ""

    def __post_init__(self):
        space = tuple(sorted(set(self.space)))
        object.__setattr__(self, "space", space)
        missing = variables(self.formula) - set(space)
        if missing:
            raise ValueError(f"constraint mentions undeclared options: {sorted(missing)}")

    @classmethod
    def unconstrained(cls, space: Iterable[str]) -> ConstraintModel:
        return cls(tuple(space), TRUE, "unconstrained")

    @classmethod
    def from_text(cls, text: str, space: Iterable[str] = (), source: str = "") -> ConstraintModel:
        """One formula per line, conjoined; ``#`` starts a comment."""
        parts = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                parts.append(parse_formula(line))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        f = conj(*parts)
        return cls(tuple(set(space) | variables(f)), f, source)

    def to_text(self) -> str:
        lines = [f"# options: {' '.join(self.space)}"]
        f = self.formula
        from .formula import And
        clauses = f.args if isinstance(f, And) else (() if f == TRUE else (f,))
        lines.extend(print_formula(c) for c in clauses)
        return "\n".join(lines) + "\n"

    @property
    def is_trivial(self) -> bool:
        return self.formula == TRUE

    @cached_property
    def cnf(self) -> CnfFormula:
        return to_cnf(self.formula, self.space)

    def extend_space(self, options: Iterable[str]) -> ConstraintModel:
        extra = set(options) - set(self.space)
        if not extra:
            return self
        return ConstraintModel(self.space + tuple(extra), self.formula, self.source)

    def is_valid(self, c: Mapping[str, bool]) -> bool:
        return evaluate(self.formula, c)


def _check_model(m: ConstraintModel, c: Configuration) -> Configuration:
    if __debug__ and not evaluate(m.formula, c):
        raise AssertionError(f"solver returned an invalid model {c!r}")
    return c


def constrained_extreme(m: ConstraintModel, fixed: Mapping[str, bool] | None, polarity: bool,
                        objective: Sequence[str] | None = None,
                        budget: int | None = None) -> Configuration:
    """Valid configuration honouring ``fixed`` with the most ``objective`` options at ``polarity``.

    Branch-and-bound over the objective options in name order, trying
    ``polarity`` first; only strict improvements replace the incumbent, so
    among optima the result is the first in that order (the earliest option
    that can take ``polarity`` does).  Non-objective options are completed by
    :func:`solve`'s default branching.
    """
    cnf = m.cnf
    index = cnf.index
    fixed = dict(fixed or {})
    names = sorted(objective) if objective is not None else list(m.space)
    for n in names:
        if n not in index:
            raise ValueError(f"objective option {n!r} not in constraint space")
    obj = [index[n] for n in names]
    engine = _Engine(_prepared(cnf), default_budget() if budget is None else budget)
    if not engine.assume(_assumption_lits(cnf, fixed)):
        raise Unsatisfiable(f"no valid configuration with {fixed}")
    want = 1 if polarity else -1
    value = engine.value
    best: list[bool] | None = None
    best_count = -1
    k = len(obj)

    # frames: [position in obj, trail length at entry, branches tried]
    frames: list[list[int]] = [[0, 0, 0]]
    while frames:
        fr = frames[-1]
        if fr[2] == 0:
            i = fr[0]
            while i < k and value[obj[i]] != 0:
                i += 1
            fr[0] = i
            count = free = 0
            for v in obj:
                if value[v] == 0:
                    free += 1
                elif value[v] == want:
                    count += 1
            if count + free <= best_count:
                frames.pop()
                continue
            fr[1] = len(engine.trail)
            if i == k:
                if engine.search():
                    best, best_count = engine.model_values(), count
                engine.backtrack(fr[1])
                frames.pop()
                continue
        else:
            engine.backtrack(fr[1])
            if fr[2] == 2:
                frames.pop()
                continue
        v = obj[fr[0]]
        lit = v * want if fr[2] == 0 else -v * want
        fr[2] += 1
        engine._count_decision()
        engine.assign(lit)
        if engine.propagate():
            frames.append([fr[0] + 1, 0, 0])

    if best is None:
        raise Unsatisfiable(f"no valid configuration with {fixed}")
    return _check_model(m, _decode(cnf, best))


def max_polarity_model(m: ConstraintModel, polarity: bool,
                       objective: Sequence[str] | None = None,
                       budget: int | None = None) -> Configuration:
    return constrained_extreme(m, None, polarity, objective=objective, budget=budget)


@dataclass(frozen=True)
class Enumeration:
    configurations: tuple[Configuration, ...]
    exhaustive: bool

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self):
        return iter(self.configurations)


def count_or_enumerate(m: ConstraintModel, limit: int, project: Sequence[str] | None = None,
                       budget: int | None = None) -> Enumeration:
    """Up to ``limit`` valid configurations, distinct on ``project`` (default: whole space).

    ``exhaustive`` is true when every valid configuration (projected) was found.
    """
    if limit < 1:
        raise ValueError("limit must be at least 1")
    cnf = m.cnf
    index = cnf.index
    proj = sorted(project) if project is not None else list(m.space)
    proj_vars = [index[n] for n in proj]
    blocking: list[tuple[int, ...]] = []
    found: list[Configuration] = []
    budget = default_budget() if budget is None else budget
    spent = 0
    while len(found) < limit:
        engine = _Engine(_Prepared(cnf.num_vars, list(cnf.clauses) + blocking), budget - spent)
        ok = engine.search()
        spent += engine.decisions
        if not ok:
            return Enumeration(tuple(found), True)
        values = engine.model_values()
        found.append(_check_model(m, _decode(cnf, values)))
        blocking.append(tuple(-v if values[v] else v for v in proj_vars))
    engine = _Engine(_Prepared(cnf.num_vars, list(cnf.clauses) + blocking), budget - spent)
    return Enumeration(tuple(found), not engine.search())


class Oracle:
    """Cached "is this partial assignment extendable to a valid configuration?"."""

    def __init__(self, m: ConstraintModel, budget: int | None = None):
        self.model = m
        self.budget = default_budget() if budget is None else budget
        self.trivial = m.is_trivial
        self._cache: dict[frozenset, bool] = {}
        self.calls = 0

    def feasible(self, partial: Mapping[str, bool]) -> bool:
        if self.trivial:
            return True
        key = frozenset(partial.items())
        hit = self._cache.get(key)
        if hit is None:
            self.calls += 1
            hit = solve(self.model.cnf, partial, self.budget).satisfiable
            self._cache[key] = hit
        return hit

    def complete(self, partial: Mapping[str, bool]) -> Configuration:
        """A valid total configuration over the model space extending ``partial``."""
        if self.trivial:
            return Configuration({o: partial.get(o, False) for o in self.model.space} | dict(partial))
        res = solve(self.model.cnf, partial, self.budget)
        if not res.satisfiable:
            raise Unsatisfiable(f"{dict(partial)} has no valid extension")
        return _check_model(self.model, res.model)


# ---------------------------------------------------------------------------
# DIMACS


def write_dimacs(cnf: CnfFormula, out: TextIO) -> None:
    for i, name in enumerate(cnf.options, 1):
        out.write(f"c map {i} {name}\n")
    out.write(f"p cnf {cnf.num_vars} {len(cnf.clauses)}\n")
    for clause in cnf.clauses:
        out.write(" ".join(map(str, clause)) + " 0\n")


def read_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF; ``c map <index> <name>`` comments name option variables.

    Mapped variables must be numbered ``1..k`` consecutively; the rest are
    treated as auxiliaries.
    """
    names: dict[int, str] = {}
    clauses: list[tuple[int, ...]] = []
    num_vars = 0
    current: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "c":
            if len(parts) == 4 and parts[1] == "map":
                names[int(parts[2])] = parts[3]
            continue
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: malformed problem line")
            num_vars = int(parts[2])
            continue
        for tok in parts:
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
                num_vars = max(num_vars, abs(lit))
    if current:
        clauses.append(tuple(current))
    if sorted(names) != list(range(1, len(names) + 1)):
        raise ValueError("option map must number variables 1..k")
    options = tuple(names[i] for i in range(1, len(names) + 1))
    if list(options) != sorted(options):
        # keep the name-order invariant by renumbering
        order = sorted(range(1, len(options) + 1), key=lambda i: names[i])
        remap = {old: new for new, old in enumerate(order, 1)}
        clauses = [tuple((remap.get(abs(l), abs(l))) * (1 if l > 0 else -1) for l in c) for c in clauses]
        options = tuple(sorted(options))
    return CnfFormula(tuple(clauses), max(num_vars, len(options)), options, {})
