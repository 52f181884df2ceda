import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_constraints
from confsample.cppscan import FileVariabilityModel, parse_manifest, scan_file
from confsample.formula import evaluate, parse_formula
from confsample.samples import CONSTRAINED, GLOBAL, UNCONSTRAINED, SampleSet
from confsample.sampling import (
    AlgorithmId, Combination, InfeasibleAtScale, SpaceMismatch, all_combinations, combine,
    most_enabled_disabled, one_disabled, one_enabled, option_order, parse_algorithm, random_sample,
    run_algorithm, sample_project, statement_coverage, t_wise,
)
from confsample.satsolver import ConstraintModel, ResourceLimit, Unsatisfiable


def bits(s: SampleSet):
    return [c.bits(s.options) for c in s]


def flat(options):
    return FileVariabilityModel("f.c", frozenset(options))


def blocks_model(*pcs):
    text = "".join(f"#if {pc}\ncode\n#endif\n" for pc in pcs)
    return scan_file(text, "f.c")


# ---------------------------------------------------------------------------
# examples


def test_most_enabled_disabled_examples(nested_model):
    s = most_enabled_disabled(nested_model)
    assert bits(s) == [(1, 1, 1), (0, 0, 0)] and s.mode == UNCONSTRAINED
    assert list(most_enabled_disabled(flat([]))) == [{}]
    m = ConstraintModel(("A", "B", "C"), parse_formula("A || B"))
    s = most_enabled_disabled(flat("ABC"), m)
    assert s.mode == CONSTRAINED
    assert sum(s.configurations[1].values()) == 1


def test_most_enabled_disabled_unsatisfiable():
    with pytest.raises(Unsatisfiable):
        most_enabled_disabled(flat("A"), ConstraintModel(("A",), parse_formula("A && !A")))


def test_one_disabled_and_enabled_examples(nested_model):
    assert bits(one_disabled(nested_model)) == [(0, 1, 1), (1, 0, 1), (1, 1, 0)]
    assert bits(one_enabled(nested_model)) == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert bits(one_enabled(flat("A"))) == [(1,)]
    m = ConstraintModel(("A",), parse_formula("A"))
    s = one_disabled(flat("ABC"), m)
    assert [k for k, _ in s.skips] == ["A"]
    assert len(s) == 2 and all(c["A"] for c in s)


def test_random_examples():
    s = random_sample(flat("AB"), None, n=10, seed=1)
    assert len(s) == 4
    one = random_sample(flat("ABCDEFGH"), None, n=1, seed=42)
    assert one == random_sample(flat("ABCDEFGH"), None, n=1, seed=42)
    assert len(one) == 1
    m = ConstraintModel(("A", "B"), parse_formula("!A && !B"))
    s = random_sample(flat("AB"), m, n=5, seed=0)
    assert bits(s) == [(0, 0)]
    with pytest.raises(ValueError):
        random_sample(flat("A"), None, n=0)


def test_random_rejection_cap(monkeypatch):
    names = [f"O{i:02d}" for i in range(20)]
    m = ConstraintModel(tuple(names), parse_formula(" && ".join(names[:10])))
    with pytest.raises(ResourceLimit):
        random_sample(flat(names), m, n=5, seed=0, max_rejections=50)
    monkeypatch.setenv("CONFSAMPLE_REJECTION_CAP", "50")
    with pytest.raises(ResourceLimit):
        random_sample(flat(names), m, n=5, seed=0)
    s = random_sample(flat(names), m, n=5, seed=0, max_rejections=100_000)
    assert len(s) == 5 and all(m.is_valid(c) for c in s)


def test_random_with_extra_constraint_variables():
    m = ConstraintModel(("A", "B", "Z"), parse_formula("(Z || !A) && (!Z || B)"))
    s = random_sample(flat("AB"), m, n=2, seed=3)
    assert len(s) == 2
    assert all(set(c) == {"A", "B", "Z"} and m.is_valid(c) for c in s)


def test_statement_coverage_examples(nested_model):
    s = statement_coverage(nested_model)
    assert bits(s) == [(1, 1, 1), (1, 0, 0)]
    assert list(statement_coverage(scan_file("int x;\n", "f.c"))) == [{}]
    assert len(statement_coverage(blocks_model("A", "!A"))) == 2


def test_statement_coverage_dead_blocks_and_headers():
    m = blocks_model("A && !A", "B")
    s = statement_coverage(m)
    assert len(s) == 1 and [r for _, r in s.skips] == ["dead block"]
    all_dead = statement_coverage(blocks_model("A && !A"))
    assert bits(all_dead) == [(0,)]
    c = ConstraintModel(("A", "B"), parse_formula("!B"))
    s = statement_coverage(blocks_model("A", "B"), c)
    assert len(s.skips) == 1 and all(c.is_valid(x) for x in s)


def test_statement_coverage_ignores_header_blocks_by_default(tmp_path):
    from confsample.cppscan import resolve_headers
    (tmp_path / "h.h").write_text("#ifdef H\n#endif\n")
    (tmp_path / "m.c").write_text('#include "h.h"\n#ifdef A\n#endif\n')
    model = resolve_headers(scan_file((tmp_path / "m.c").read_text(), "m.c"), [], root=tmp_path)
    plain = statement_coverage(model)
    assert all(not c["H"] for c in plain)
    with_h = statement_coverage(model, headers=True)
    assert any(c["H"] for c in with_h)


def test_t_wise_delegates(nested_model):
    s = t_wise(nested_model, None, 2)
    assert len(s) == 4 and s.algorithm == "pair-wise" and s.scope == "example.c"
    assert len(t_wise(nested_model, None, 3)) == 8


def test_option_order_by_occurrence(nested_model):
    assert option_order(nested_model) == ("A", "B", "C")
    assert option_order(blocks_model("Z", "Z && Y", "Z || Y || X")) == ("Z", "Y", "X")


def test_combine_examples(nested_model):
    med, od = most_enabled_disabled(nested_model), one_disabled(nested_model)
    u = combine([med, od])
    assert len(u) == 5 and u.algorithm == "most-enabled-disabled+one-disabled"
    assert set(bits(u)) == {(1, 1, 1), (0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)}
    assert combine([med, med]).configurations == med.configurations
    assert parse_algorithm("pair-wise+one-disabled").name == "pair-wise+one-disabled"
    other = most_enabled_disabled(flat("AB"))
    with pytest.raises(SpaceMismatch):
        combine([med, other])


def test_algorithm_ids():
    assert parse_algorithm("random(5,7)") == AlgorithmId("random", 5, 7)
    assert parse_algorithm("random", n=3) == AlgorithmId("random", 3, 0)
    assert str(parse_algorithm("random(n=4, seed=2)")) == "random(4,2)"
    with pytest.raises(ValueError):
        parse_algorithm("random")
    with pytest.raises(ValueError):
        parse_algorithm("seven-wise")
    with pytest.raises(ValueError):
        Combination((AlgorithmId("pair-wise"), AlgorithmId("five-wise")))
    with pytest.raises(ValueError):
        parse_algorithm("random(3,1)+pair-wise")
    with pytest.raises(ValueError):
        Combination((AlgorithmId("pair-wise"),))
    combos = all_combinations()
    assert len(combos) == 56 and len(set(combos)) == 56
    # member order is canonical
    assert parse_algorithm("one-disabled+pair-wise") == parse_algorithm("pair-wise+one-disabled")


def test_sample_project_per_file_and_global(nested_model):
    other = scan_file("#ifdef X\n#endif\n", "b.c")
    sets = sample_project([other, nested_model], parse_algorithm("most-enabled-disabled"))
    assert [s.scope for s in sets] == ["b.c", "example.c"]
    assert all(len(s) <= 2 for s in sets)
    (g,) = sample_project([other, nested_model], parse_algorithm("most-enabled-disabled"), GLOBAL)
    assert g.scope == GLOBAL and g.options == ("A", "B", "C", "X") and len(g) == 2
    (g,) = sample_project([nested_model], parse_algorithm("pair-wise"), GLOBAL)
    assert g.scope == GLOBAL
    with pytest.raises(ValueError):
        sample_project([nested_model], parse_algorithm("pair-wise"), "everything")


def test_sample_project_threshold():
    big = [scan_file("".join(f"#ifdef O{i}_{j}\n#endif\n" for j in range(5)), f"f{i}.c") for i in range(3)]
    with pytest.raises(InfeasibleAtScale) as info:
        sample_project(big, parse_algorithm("pair-wise+most-enabled-disabled"), GLOBAL, threshold=10)
    assert info.value.algorithm == "pair-wise"
    (s,) = sample_project(big, parse_algorithm("pair-wise"), GLOBAL, threshold=15)
    assert len(s.options) == 15


def test_sample_project_manifest():
    m = scan_file("#ifdef A\n#endif\n", "a.c")
    man = parse_manifest("option EXTRA\na.c :: BUILD\n")
    (s,) = sample_project([m], parse_algorithm("one-disabled"), manifest=man)
    assert s.options == ("A", "BUILD")
    (c,) = sample_project([m], parse_algorithm("most-enabled-disabled"), constraints=ConstraintModel(()),
                          manifest=man)
    assert all(x["BUILD"] for x in c)  # the file is compiled in every constrained sample
    (g,) = sample_project([m], parse_algorithm("most-enabled-disabled"), GLOBAL, manifest=man)
    assert "EXTRA" in g.options


def test_jobs_do_not_change_results():
    models = [scan_file(f"#ifdef A{i}\n#elif B{i}\n#endif\n", f"m{i}.c") for i in range(4)]
    alg = parse_algorithm("statement-coverage")
    assert sample_project(models, alg, jobs=2) == sample_project(models, alg, jobs=1)


def test_run_algorithm_dispatches_every_name(nested_model):
    for name in ("pair-wise", "three-wise", "four-wise", "five-wise", "six-wise", "statement-coverage",
                 "most-enabled-disabled", "one-enabled", "one-disabled", "random(3,1)"):
        s = run_algorithm(parse_algorithm(name), nested_model)
        assert s.algorithm == name and len(s) >= 1


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 7))
def test_size_laws(k):
    model = flat([f"O{i}" for i in range(k)])
    assert len(most_enabled_disabled(model)) == (2 if k else 1)
    assert len(one_enabled(model)) == len(one_disabled(model)) == max(k, 1)
    if 1 <= k <= 4:
        assert len(t_wise(model, None, k)) == 2**k


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_constrained_validity_everywhere(seed):
    rng = random.Random(seed)
    names = [f"O{i}" for i in range(rng.randint(1, 6))]
    m = random_constraints(rng, names)
    pcs = [" && ".join(rng.sample(names, rng.randint(1, len(names)))) for _ in range(3)]
    model = scan_file("".join(f"#if {pc}\n#endif\n" for pc in pcs), "g.c")
    for name in ("pair-wise", "three-wise", "statement-coverage", "most-enabled-disabled",
                 "one-enabled", "one-disabled", f"random(4,{seed})"):
        s = run_algorithm(parse_algorithm(name), model, m)
        assert all(m.is_valid(c) for c in s), name
        assert len(set(s)) == len(s)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_seeded_random_is_reproducible(seed, n):
    model = flat([f"O{i}" for i in range(6)])
    assert random_sample(model, None, n, seed) == random_sample(model, None, n, seed)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_statement_coverage_covers_live_blocks(seed):
    rng = random.Random(seed)
    names = ["A", "B", "C", "D"]
    lines = []
    for _ in range(rng.randint(1, 4)):
        a, b = rng.sample(names, 2)
        lines += [f"#if {a} && !{b}", f"#ifdef {b}", "#endif", "#elif " + b, "#else", "#endif"]
    model = scan_file("\n".join(lines) + "\n", "s.c")
    m = random_constraints(rng, names) if rng.random() < 0.5 else None
    s = statement_coverage(model, m)
    dead = {label for label, _ in s.skips}
    for blk in model.blocks:
        if blk.label in dead:
            continue
        assert any(evaluate(blk.presence_condition, c) for c in s), blk.label
