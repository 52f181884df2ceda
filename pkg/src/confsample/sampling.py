"""The ten sampling algorithms, their combinations, and project-level drivers.

Every algorithm takes a :class:`FileVariabilityModel` (one file, or the merged
global model) and an optional :class:`ConstraintModel`.  Without constraints
the algorithms work on the model's options alone.  With constraints, every
returned configuration is valid and is total over the file options plus the
constraint variables, while objectives ("most enabled", "one disabled") only
count the file options.  A build-system file presence condition is conjoined
into the constraints in constrained mode, so the file is actually compiled in
every sampled configuration.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import os
import random
import re
import time
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .covering import TWiseSpec, generate_covering_array
from .cppscan import BuildManifest, FileVariabilityModel, apply_build_manifest, merge_global
from .formula import TRUE, Configuration, Formula, conj, evaluate, to_cnf, variables
from .samples import CONSTRAINED, GLOBAL, UNCONSTRAINED, SampleSet, dedupe
from .satsolver import (
    ConstraintModel, Oracle, ResourceLimit, Unsatisfiable, constrained_extreme, count_or_enumerate, solve,
)

__all__ = [
    "AlgorithmId", "Combination", "parse_algorithm", "ALGORITHMS", "COMBINABLE", "T_WISE",
    "SpaceMismatch", "InfeasibleAtScale", "most_enabled_disabled", "one_enabled", "one_disabled",
    "random_sample", "statement_coverage", "t_wise", "combine", "run_algorithm", "sample_project",
    "all_combinations", "DEFAULT_GLOBAL_THRESHOLD", "DEFAULT_REJECTION_CAP",
]

log = logging.getLogger(__name__)

T_WISE = {"pair-wise": 2, "three-wise": 3, "four-wise": 4, "five-wise": 5, "six-wise": 6}
ALGORITHMS = (*T_WISE, "statement-coverage", "most-enabled-disabled", "one-enabled", "one-disabled", "random")
COMBINABLE = ("pair-wise", "three-wise", "four-wise", "statement-coverage",
              "most-enabled-disabled", "one-enabled", "one-disabled")
DEFAULT_GLOBAL_THRESHOLD = 200
DEFAULT_REJECTION_CAP = 1_000_000
_REJECTION_ENV = "CONFSAMPLE_REJECTION_CAP"


class SpaceMismatch(ValueError):
    pass


class InfeasibleAtScale(RuntimeError):
    def __init__(self, algorithm: str, options: int, threshold: int):
        super().__init__(f"{algorithm}: global sampling over {options} options exceeds the "
                         f"threshold of {threshold}")
        self.algorithm = algorithm
        self.options = options
        self.threshold = threshold


# ---------------------------------------------------------------------------
# Algorithm identifiers


@dataclass(frozen=True)
class AlgorithmId:
    name: str
    n: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}")
        if self.name == "random":
            if self.n is None or self.n < 1:
                raise ValueError("random sampling needs n >= 1")
            if self.seed is None:
                object.__setattr__(self, "seed", 0)
        elif self.n is not None or self.seed is not None:
            raise ValueError(f"{self.name} takes no parameters")

    def __str__(self) -> str:
        if self.name == "random":
            return f"random({self.n},{self.seed})"
        return self.name

    @property
    def t(self) -> int | None:
        return T_WISE.get(self.name)

    @property
    def members(self) -> tuple[AlgorithmId, ...]:
        return (self,)


@dataclass(frozen=True)
class Combination:
    members: tuple[AlgorithmId, ...]

    def __post_init__(self):
        members = tuple(sorted(set(self.members), key=lambda a: COMBINABLE.index(a.name)
                               if a.name in COMBINABLE else -1))
        if not 2 <= len(members) <= 3:
            raise ValueError("a combination has 2 or 3 distinct members")
        bad = [str(a) for a in members if a.name not in COMBINABLE]
        if bad:
            raise ValueError(f"not combinable: {', '.join(bad)}")
        object.__setattr__(self, "members", members)

    @property
    def name(self) -> str:
        return "+".join(str(a) for a in self.members)

    def __str__(self) -> str:
        return self.name


_RANDOM_RE = re.compile(r"random\s*(?:\(\s*(?:n\s*=\s*)?(\d+)\s*(?:,\s*(?:seed\s*=\s*)?(-?\d+)\s*)?\))?\Z")


def parse_algorithm(text: str, n: int | None = None, seed: int | None = None) -> AlgorithmId | Combination:
    """``pair-wise``, ``random(5,7)``, ``random`` (n/seed from the arguments), or ``a+b[+c]``."""
    parts = [p.strip() for p in text.split("+")]
    if len(parts) > 1:
        return Combination(tuple(parse_algorithm(p, n, seed) for p in parts))
    text = parts[0]
    m = _RANDOM_RE.match(text)
    if m:
        return AlgorithmId("random", int(m.group(1)) if m.group(1) else n,
                           int(m.group(2)) if m.group(2) else seed)
    return AlgorithmId(text)


def all_combinations() -> list[Combination]:
    algs = [AlgorithmId(a) for a in COMBINABLE]
    return [Combination(c) for r in (2, 3) for c in itertools.combinations(algs, r)]


# ---------------------------------------------------------------------------
# Shared plumbing


def _effective_constraints(model: FileVariabilityModel,
                           constraints: ConstraintModel | None) -> ConstraintModel | None:
    if constraints is None:
        return None
    m = constraints.extend_space(model.options)
    if model.file_pc != TRUE:
        m = ConstraintModel(m.space, conj(m.formula, model.file_pc), m.source)
    return m


def _make(name: str, model: FileVariabilityModel, constraints: ConstraintModel | None,
          configs: Sequence[Configuration], started: float, scope: str | None = None,
          skips: Sequence[tuple[str, str]] = ()) -> SampleSet:
    return SampleSet(name, scope if scope is not None else model.file,
                     CONSTRAINED if constraints is not None else UNCONSTRAINED,
                     model.sorted_options, tuple(dedupe(configs)), tuple(skips), model.file_pc,
                     time.perf_counter() - started)


def _extreme(m: ConstraintModel, fixed: dict[str, bool] | None, polarity: bool,
             focus: Sequence[str], budget: int | None) -> Configuration:
    return constrained_extreme(m, fixed, polarity, objective=focus, budget=budget)


# ---------------------------------------------------------------------------
# Algorithms


def most_enabled_disabled(model: FileVariabilityModel, constraints: ConstraintModel | None = None,
                          budget: int | None = None) -> SampleSet:
    started = time.perf_counter()
    focus = model.sorted_options
    m = _effective_constraints(model, constraints)
    if m is None:
        configs = [Configuration.uniform(focus, True), Configuration.uniform(focus, False)]
    else:
        configs = [_extreme(m, None, True, focus, budget), _extreme(m, None, False, focus, budget)]
    return _make("most-enabled-disabled", model, constraints, configs, started)


def _one_flipped(model: FileVariabilityModel, constraints: ConstraintModel | None,
                 flipped: bool, name: str, budget: int | None) -> SampleSet:
    started = time.perf_counter()
    focus = model.sorted_options
    m = _effective_constraints(model, constraints)
    configs: list[Configuration] = []
    skips: list[tuple[str, str]] = []
    if not focus:
        configs.append(Configuration({}) if m is None else _extreme(m, None, not flipped, focus, budget))
    for o in focus:
        if m is None:
            configs.append(Configuration.uniform(focus, not flipped).updated({o: flipped}))
            continue
        try:
            configs.append(_extreme(m, {o: flipped}, not flipped, focus, budget))
        except Unsatisfiable:
            state = "enabled" if flipped else "disabled"
            log.info("%s: %s cannot be %s under the constraints", name, o, state)
            skips.append((o, f"cannot be {state} under constraints"))
    return _make(name, model, constraints, configs, started, skips=skips)


def one_disabled(model: FileVariabilityModel, constraints: ConstraintModel | None = None,
                 budget: int | None = None) -> SampleSet:
    """Each option disabled in turn, with as many others enabled as possible."""
    return _one_flipped(model, constraints, False, "one-disabled", budget)


def one_enabled(model: FileVariabilityModel, constraints: ConstraintModel | None = None,
                budget: int | None = None) -> SampleSet:
    """Each option enabled in turn, with as many others disabled as possible."""
    return _one_flipped(model, constraints, True, "one-enabled", budget)


def _rejection_cap() -> int:
    raw = os.environ.get(_REJECTION_ENV)
    return int(raw) if raw else DEFAULT_REJECTION_CAP


def random_sample(model: FileVariabilityModel, constraints: ConstraintModel | None = None,
                  n: int = 10, seed: int = 0, budget: int | None = None,
                  max_rejections: int | None = None) -> SampleSet:
    """Up to ``n`` distinct configurations drawn uniformly over the file options.

    When at most ``n`` valid configurations exist they are all returned.
    Otherwise assignments are drawn from ``random.Random(seed)``; invalid and
    repeated draws are rejected, and more than ``max_rejections`` of them
    raises :class:`ResourceLimit`.  Draws assign the file options only; under
    constraints with extra variables a valid completion is chosen by the
    solver.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    started = time.perf_counter()
    name = str(AlgorithmId("random", n, seed))
    focus = model.sorted_options
    k = len(focus)
    m = _effective_constraints(model, constraints)
    cap = _rejection_cap() if max_rejections is None else max_rejections

    if m is None:
        if 2**k <= n:
            configs = [Configuration(zip(focus, bits)) for bits in itertools.product((False, True), repeat=k)]
            return _make(name, model, constraints, configs, started)
    else:
        found = count_or_enumerate(m, n + 1, project=focus, budget=budget)
        if found.exhaustive and len(found) <= n:
            return _make(name, model, constraints, list(found), started)

    rng = random.Random(seed)
    oracle = Oracle(m, budget) if m is not None else None
    closed = m is not None and set(m.space) == set(focus)
    seen: set[int] = set()
    configs = []
    rejected = 0
    while len(configs) < n:
        bits = rng.getrandbits(k) if k else 0
        draw = {o: bool(bits >> i & 1) for i, o in enumerate(focus)}
        if bits in seen:
            ok = False
        elif oracle is None:
            ok = True
        elif closed:
            ok = evaluate(m.formula, draw)
        else:
            ok = oracle.feasible(draw)
        if not ok:
            rejected += 1
            if rejected > cap:
                raise ResourceLimit(cap, "rejection-sampling")
            continue
        seen.add(bits)
        if oracle is None or closed:
            configs.append(Configuration(draw))
        else:
            configs.append(oracle.complete(draw))
    return _make(name, model, constraints, configs, started)


def statement_coverage(model: FileVariabilityModel, constraints: ConstraintModel | None = None,
                       budget: int | None = None, headers: bool = False) -> SampleSet:
    """Greedy cover: every block whose effective PC is satisfiable is enabled at least once.

    Blocks are visited in file order.  Each new configuration starts from the
    first uncovered block and conjoins further uncovered blocks while the
    conjunction stays satisfiable; the result is completed with as many file
    options disabled as possible.  Blocks from headers count only when
    ``headers`` is set.  Dead blocks are recorded as skips.
    """
    started = time.perf_counter()
    focus = model.sorted_options
    m = _effective_constraints(model, constraints)
    base = m if m is not None else ConstraintModel.unconstrained(focus)
    blocks = model.blocks if headers else model.source_blocks()

    def with_formula(f: Formula) -> ConstraintModel:
        return ConstraintModel(base.space, conj(base.formula, f), base.source)

    def satisfiable(f: Formula) -> bool:
        return solve(to_cnf(conj(base.formula, f), base.space), None, budget).satisfiable

    live: list[tuple[str, Formula]] = []
    skips: list[tuple[str, str]] = []
    for b in blocks:
        pc = model.effective_pc(b)
        if satisfiable(pc):
            live.append((b.label, pc))
        else:
            skips.append((b.label, "dead block"))

    configs: list[Configuration] = []
    pending = live
    while pending:
        work = [pending[0][1]]
        for _, pc in pending[1:]:
            if satisfiable(conj(*work, pc)):
                work.append(pc)
        config = _extreme(with_formula(conj(*work)), None, False, focus, budget)
        configs.append(config)
        still = [(label, pc) for label, pc in pending if not evaluate(pc, config)]
        if len(still) == len(pending):
            raise AssertionError("statement-coverage made no progress")
        pending = still
    if not configs:
        configs.append(Configuration.uniform(focus, False) if m is None
                       else _extreme(m, None, False, focus, budget))
    return _make("statement-coverage", model, constraints, configs, started, skips=skips)


def option_order(model: FileVariabilityModel) -> tuple[str, ...]:
    """Options by descending number of block PCs mentioning them, ties by name."""
    counts: Counter[str] = Counter()
    for b in model.blocks:
        counts.update(variables(model.effective_pc(b)))
    return tuple(sorted(model.options, key=lambda o: (-counts[o], o)))


def t_wise(model: FileVariabilityModel, constraints: ConstraintModel | None = None, t: int = 2,
           budget: int | None = None) -> SampleSet:
    started = time.perf_counter()
    m = _effective_constraints(model, constraints)
    spec = TWiseSpec(t, model.sorted_options, m, option_order(model))
    name = next((a for a, v in T_WISE.items() if v == t), f"{t}-wise")
    raw = generate_covering_array(spec, budget=budget, algorithm=name)
    return _make(name, model, constraints, raw.configurations, started)


def combine(sets: Sequence[SampleSet], algorithm: str | None = None) -> SampleSet:
    """Deduplicated union of sample sets over the same scope and options."""
    if not sets:
        raise ValueError("combine needs at least one sample set")
    first = sets[0]
    for s in sets[1:]:
        if (s.scope, s.options, s.mode) != (first.scope, first.options, first.mode):
            raise SpaceMismatch(f"cannot combine {first.algorithm} ({first.scope}, {first.mode}) "
                                f"with {s.algorithm} ({s.scope}, {s.mode})")
    names = list(dict.fromkeys(s.algorithm for s in sets))
    configs = [c for s in sets for c in s.configurations]
    skips = tuple(dict.fromkeys(sk for s in sets for sk in s.skips))
    return SampleSet(algorithm or "+".join(names), first.scope, first.mode, first.options,
                     tuple(dedupe(configs)), skips, first.file_pc, sum(s.elapsed for s in sets))


# ---------------------------------------------------------------------------
# Drivers


def run_algorithm(algorithm: AlgorithmId | Combination, model: FileVariabilityModel,
                  constraints: ConstraintModel | None = None, budget: int | None = None,
                  headers: bool = False, scope: str | None = None) -> SampleSet:
    if isinstance(algorithm, Combination):
        parts = [run_algorithm(a, model, constraints, budget, headers, scope) for a in algorithm.members]
        return combine(parts, algorithm.name)
    name = algorithm.name
    if name == "most-enabled-disabled":
        s = most_enabled_disabled(model, constraints, budget)
    elif name == "one-enabled":
        s = one_enabled(model, constraints, budget)
    elif name == "one-disabled":
        s = one_disabled(model, constraints, budget)
    elif name == "statement-coverage":
        s = statement_coverage(model, constraints, budget, headers)
    elif name == "random":
        s = random_sample(model, constraints, algorithm.n, algorithm.seed, budget)
    else:
        s = t_wise(model, constraints, algorithm.t, budget)
    if scope is not None and s.scope != scope:
        s = dataclasses.replace(s, scope=scope)
    return s


def _heavy(algorithm: AlgorithmId | Combination) -> list[str]:
    return [a.name for a in algorithm.members if a.t is not None or a.name == "statement-coverage"]


def _run_one(args: tuple) -> SampleSet:
    return run_algorithm(*args)


def sample_project(models: Sequence[FileVariabilityModel], algorithm: AlgorithmId | Combination,
                   scope: str = "per-file", constraints: ConstraintModel | None = None,
                   manifest: BuildManifest | None = None, budget: int | None = None,
                   headers: bool = False, threshold: int = DEFAULT_GLOBAL_THRESHOLD,
                   jobs: int = 1) -> list[SampleSet]:
    """Sample every file (``scope="per-file"``) or the merged model (``scope="global"``).

    Per-file results come back sorted by path whatever ``jobs`` is.  In global
    scope, t-wise and statement-coverage refuse merged models with more than
    ``threshold`` options by raising :class:`InfeasibleAtScale`.
    """
    if scope not in ("per-file", GLOBAL):
        raise ValueError(f"unknown scope {scope!r}")
    if manifest is not None:
        models = [apply_build_manifest(m, manifest) for m in models]
    models = sorted(models, key=lambda m: m.file)
    if scope == GLOBAL:
        if not models:
            raise ValueError("global sampling needs at least one model")
        extra = manifest.options if manifest is not None else ()
        merged = merge_global(models, extra)
        if len(models) == 1:
            merged = dataclasses.replace(merged, file="global")
        heavy = _heavy(algorithm)
        if heavy and len(merged.options) > threshold:
            raise InfeasibleAtScale(heavy[0], len(merged.options), threshold)
        return [run_algorithm(algorithm, merged, constraints, budget, headers, GLOBAL)]
    tasks = [(algorithm, m, constraints, budget, headers) for m in models]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]

