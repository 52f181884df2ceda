"""Sampling configurations of preprocessor-based C code and scoring the samples against known faults."""

__version__ = "0.1.0"

from .formula import (
    FALSE, TRUE, And, CnfFormula, Configuration, Formula, Not, Or, Var, conj, disj, evaluate, neg,
    parse_formula, print_formula, to_cnf, variables,
)
from .satsolver import (
    ConstraintModel, Oracle, ResourceLimit, Unsatisfiable, constrained_extreme, count_or_enumerate,
    max_polarity_model, solve,
)
from .cppscan import (
    BuildManifest, ConditionalBlock, FileVariabilityModel, apply_build_manifest, merge_global,
    parse_manifest, resolve_headers, scan_file,
)
from .covering import TWiseSpec, generate_covering_array, uncovered, verify_coverage
from .samples import SampleSet
from .sampling import (
    AlgorithmId, Combination, InfeasibleAtScale, SpaceMismatch, combine, most_enabled_disabled,
    one_disabled, one_enabled, parse_algorithm, random_sample, run_algorithm, sample_project,
    statement_coverage, t_wise,
)
from .evaluation import (
    EfficiencyScore, FaultRecord, ParetoPoint, UnsatisfiablePC, detect, evaluate_algorithms,
    ingest_corpus, pareto_front, rank, score,
)
