"""
GARP verdicts, violation enumeration and pairwise violation proportions.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from choice_consistency.choice_data import (
    ChoiceDataset,
    RelationMatrix,
    direct_relations,
    transitive_closure,
)
from choice_consistency.utils.error_handling import DataValidationError
from choice_consistency.utils.validation import ChoiceDataValidator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GarpReport:
    """GARP verdict at one efficiency level. Pairs are 1-based."""
    passes: bool
    efficiency: float
    violating_pairs: Tuple[Tuple[int, int], ...] = ()
    two_cycles: Tuple[Tuple[int, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            'passes': self.passes,
            'efficiency': self.efficiency,
            'violating_pairs': [list(pair) for pair in self.violating_pairs],
            'two_cycles': [list(pair) for pair in self.two_cycles],
        }


@dataclass(frozen=True)
class AfriatSolution:
    """Utility levels and marginal-utility multipliers rationalizing a dataset."""
    utilities: Tuple[float, ...]
    multipliers: Tuple[float, ...]

    def utility(self, ds: ChoiceDataset, bundle: Sequence[float]) -> float:
        """Afriat utility of a bundle: min over budgets of U_t + lambda_t * p^t.(x - x^t)."""
        x = np.asarray(bundle, dtype=float)
        gaps = ds.prices @ x - ds.expenditures
        return float(np.min(np.asarray(self.utilities) + np.asarray(self.multipliers) * gaps))


def violation_matrix(rel: RelationMatrix) -> np.ndarray:
    """viol[i, j] iff x^i is revealed preferred to x^j while x^j is strictly directly preferred to x^i."""
    if rel.closure is None:
        rel = transitive_closure(rel)
    return rel.closure & rel.strict.T


def passes_relations(rel: RelationMatrix) -> bool:
    return not bool(violation_matrix(rel).any())


def pair_violations(rel: RelationMatrix) -> np.ndarray:
    """Symmetric matrix: the two-observation sub-dataset {i, j} violates GARP."""
    weak, strict = rel.weak, rel.strict
    one_way = weak & strict.T
    pairs = one_way | one_way.T
    np.fill_diagonal(pairs, False)
    return pairs


def check_garp(ds: ChoiceDataset, e: float = 1.0) -> GarpReport:
    rel = transitive_closure(direct_relations(ds, e))
    viol = violation_matrix(rel)
    rows, cols = np.nonzero(viol)
    violating = tuple((int(i) + 1, int(j) + 1) for i, j in zip(rows, cols))
    two = pair_violations(rel)
    cycles = tuple((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(np.triu(two))))
    return GarpReport(passes=not violating, efficiency=rel.efficiency,
                      violating_pairs=violating, two_cycles=cycles)


def violation_two_cycles(ds: ChoiceDataset) -> List[Tuple[int, int]]:
    """Unordered pairs (1-based, i < j) violating GARP through their direct relations alone."""
    two = pair_violations(direct_relations(ds, 1.0))
    return [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(np.triu(two)))]


def pairwise_violation_proportion(ds: ChoiceDataset, group_a: Sequence[int],
                                  group_b: Sequence[int]) -> float:
    """
    Share of two-observation sub-datasets violating GARP across two groups.

    Groups hold 0-based observation indices and must be disjoint or identical;
    identical groups count each unordered pair once.
    """
    ok, groups, error = ChoiceDataValidator.validate_index_groups(group_a, group_b, ds.n_obs)
    if not ok:
        raise DataValidationError("garp_engine", "pairwise_violation_proportion", error)
    a, b = groups
    two = pair_violations(direct_relations(ds, 1.0))
    if a == b:
        pairs = list(itertools.combinations(a, 2))
    else:
        pairs = [(i, j) for i in a for j in b if i != j]
    if not pairs:
        return 0.0
    return sum(bool(two[i, j]) for i, j in pairs) / len(pairs)


def season_violation_table(ds: ChoiceDataset,
                           groups: Mapping[str, Sequence[int]]) -> Dict[Tuple[str, str], float]:
    """Violation proportion for every unordered pair of labelled groups, each group with itself included."""
    labels = sorted(groups)
    table = {}
    for first, second in itertools.combinations_with_replacement(labels, 2):
        if first == second and len(groups[first]) < 2:
            continue
        table[(first, second)] = pairwise_violation_proportion(ds, groups[first], groups[second])
    return table


def afriat_numbers(ds: ChoiceDataset) -> Optional[AfriatSolution]:
    """
    Solve U_s <= U_t + lambda_t * p^t.(x^s - x^t) with lambda_t >= 1 by linear programming.

    Returns None when the dataset violates GARP (the inequalities are then infeasible).
    """
    if not check_garp(ds).passes:
        return None
    t = ds.n_obs
    if t == 1:
        return AfriatSolution(utilities=(0.0,), multipliers=(1.0,))
    costs = ds.cost_matrix()
    expenditures = ds.expenditures
    # Variables: U_0..U_{T-1}, lambda_0..lambda_{T-1}
    rows, rhs = [], []
    for s, r in itertools.permutations(range(t), 2):
        row = np.zeros(2 * t)
        row[s] += 1.0
        row[r] -= 1.0
        row[t + r] -= costs[r, s] - expenditures[r]
        rows.append(row)
        rhs.append(0.0)
    bounds = [(None, None)] * t + [(1.0, None)] * t
    bounds[0] = (0.0, 0.0)
    objective = np.concatenate([np.zeros(t), np.ones(t)])
    result = linprog(objective, A_ub=np.array(rows), b_ub=np.array(rhs),
                     bounds=bounds, method="highs")
    if not result.success:
        logger.warning(f"Afriat LP failed for {ds.label!r}: {result.message}")
        return None
    return AfriatSolution(utilities=tuple(float(u) for u in result.x[:t]),
                          multipliers=tuple(float(m) for m in result.x[t:]))
