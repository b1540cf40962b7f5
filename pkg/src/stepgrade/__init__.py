"""stepgrade: process-level grading of stepwise formula derivations.

Candidate solutions are parsed into formulas, matched against a reference
rubric DAG by randomized equation-equivalence testing, and scored by
ancestor closure over the dependency graph.
"""

from .constants import ConstantsMap, default_constants_map, substitute_constants
from .dag import (
    RubricDag,
    RubricNode,
    ScoreReport,
    ValidationReport,
    ancestor_closure,
    from_kernel,
    kernel_roundtrip,
    score,
    to_kernel,
    validate,
)
from .difficulty import DifficultyInput, dag_entropy, difficulty_label
from .equiv import EquivParams, EquivVerdict, check_equivalence
from .expr import Expr, Formula, free_variables
from .latex import (
    ParseError,
    extract_formulas,
    formula_to_latex,
    normalize_source,
    parse_formula,
)
from .pipeline import (
    AggregateReport,
    CandidateSolution,
    grade_dataset,
    grade_solution,
    match_against_dag,
    numeric_final_check,
)
from .ranks import DegenerateRankingError, RankPairs, kendall_tau_b, permutation_test
from .solve import SolveResult, all_close, solve_target
from .units import UnitTable, default_unit_table, load_unit_table_file

__version__ = "0.1.0"

DEFAULT_SEED = 1729
