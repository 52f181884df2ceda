import random
from pathlib import Path

import pytest

from confsample import ConstraintModel, Var, Not, conj, disj, scan_file, solve

DATA = Path(__file__).resolve().parents[1] / "src" / "confsample" / "data"

# filled by test_acceptance, printed at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def nested_model():
    path = DATA / "nested3" / "example.c"
    return scan_file(path.read_text(), "example.c")


@pytest.fixture
def libpng_model():
    path = DATA / "libpng" / "pngset.c"
    return scan_file(path.read_text(), "pngset.c")


def random_constraints(rng: random.Random, options, max_clauses=6, max_width=3) -> ConstraintModel:
    """A satisfiable random CNF over ``options``."""
    options = list(options)
    while True:
        clauses = []
        for _ in range(rng.randint(1, max_clauses)):
            picked = rng.sample(options, rng.randint(1, min(max_width, len(options))))
            clauses.append(disj(*[Var(o) if rng.random() < 0.5 else Not(Var(o)) for o in picked]))
        m = ConstraintModel(tuple(options), conj(*clauses))
        if solve(m.cnf).satisfiable:
            return m
