"""
Consistency indices: CCEI, HMI, MPI and MCI.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Tuple

import numpy as np

from choice_consistency.choice_data import (
    ChoiceDataset,
    direct_relations,
    relations_from_costs,
    transitive_closure,
)
from choice_consistency.config.constants import SearchConfig, Tolerances
from choice_consistency.services.cycles import (
    FeedbackArcSearch,
    VertexRemovalSearch,
    cyclic_components,
)
from choice_consistency.services.garp_engine import (
    check_garp,
    passes_relations,
    violation_two_cycles,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexReport:
    label: str
    ccei: float
    hmi: float
    mpi: float
    mci: float
    hmi_kept: int
    mci_exact: bool
    violating_pairs: int
    two_cycles: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_row(self) -> dict:
        """Row for the index CSV."""
        return {
            'label': self.label,
            'ccei': self.ccei,
            'hmi': self.hmi,
            'mpi': self.mpi,
            'mci': self.mci,
            'hmi_kept': self.hmi_kept,
            'mci_exact': self.mci_exact,
            'two_cycles': self.two_cycles,
        }


def efficiency_candidates(ratios: np.ndarray, tol: float = Tolerances.RELATION) -> np.ndarray:
    """Sorted thresholds in (0, 1] where relations can change, 1 included, ties merged within tol."""
    off_diagonal = ratios[~np.eye(ratios.shape[0], dtype=bool)]
    values = np.sort(np.concatenate([off_diagonal[(off_diagonal > 0) & (off_diagonal < 1.0)], [1.0]]))
    merged = [values[0]]
    for value in values[1:]:
        if value - merged[-1] > tol:
            merged.append(value)
        else:
            merged[-1] = value
    return np.array(merged)


def supremum_efficiency(ratios: np.ndarray, passes_at: Callable[[float], bool],
                        resolution: float = Tolerances.INDEX_RESOLUTION) -> float:
    """
    Largest efficiency at which `passes_at` holds, found by binary search over thresholds.

    Relations are constant strictly between consecutive thresholds, so each
    open interval is tested at its midpoint. When the supremum c is not
    attained the result is c - resolution.
    """
    if passes_at(1.0):
        return 1.0
    candidates = efficiency_candidates(ratios)
    lower = np.concatenate([[0.0], candidates[:-1]])
    midpoints = 0.5 * (lower + candidates)

    # Interval 0 always passes: no off-diagonal relation exists below the smallest ratio
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if passes_at(float(midpoints[mid])):
            lo = mid
        else:
            hi = mid - 1
    supremum = float(candidates[lo])
    if supremum < 1.0 and passes_at(supremum):
        return supremum
    return max(0.0, supremum - resolution)


def garp_passes_at(ds: ChoiceDataset) -> Callable[[float], bool]:
    costs, expenditures = ds.cost_matrix(), ds.expenditures

    def passes_at(e: float) -> bool:
        return passes_relations(transitive_closure(relations_from_costs(costs, expenditures, e)))
    return passes_at


def ccei(ds: ChoiceDataset) -> float:
    ratios = ds.cost_matrix() / ds.expenditures[:, None]
    return supremum_efficiency(ratios, garp_passes_at(ds))


def hmi(ds: ChoiceDataset, node_cap: int = SearchConfig.NODE_CAP) -> Tuple[float, int]:
    """
    Houtman-Maks index as (kept fraction, kept count).

    Violations live inside strongly connected components of the weak relation,
    so each component is searched independently.

    Raises:
        SearchBudgetExceeded: when the exact search exceeds node_cap
    """
    rel = direct_relations(ds, 1.0)
    search = VertexRemovalSearch(rel.weak, rel.strict, node_cap=node_cap)
    removed = 0
    for component in cyclic_components(rel.weak):
        block = np.ix_(component, component)
        if rel.strict[block].any():
            removed += search.min_removal(component)
    kept = ds.n_obs - removed
    logger.debug(f"hmi {ds.label!r}: kept {kept}/{ds.n_obs} after {search.nodes} nodes")
    return kept / ds.n_obs, kept


def two_cycle_costs(ds: ChoiceDataset) -> np.ndarray:
    """Money-pump cost fraction of every violating 2-cycle (unordered pairs)."""
    pairs = np.array(violation_two_cycles(ds), dtype=int).reshape(-1, 2) - 1
    rows, cols = pairs[:, 0], pairs[:, 1]
    costs, expenditures = ds.cost_matrix(), ds.expenditures
    pumped = (expenditures[rows] - costs[rows, cols]) + (expenditures[cols] - costs[cols, rows])
    return pumped / (expenditures[rows] + expenditures[cols])


def mpi(ds: ChoiceDataset) -> float:
    cycle_costs = two_cycle_costs(ds)
    if cycle_costs.size == 0:
        return 0.0
    return float(np.clip(cycle_costs.mean(), 0.0, 1.0))


def mci(ds: ChoiceDataset, node_cap: int = SearchConfig.NODE_CAP) -> Tuple[float, bool]:
    """
    Minimum cost index as (value, exact).

    Relations on a budget line cost nothing to remove, so only strict relations
    enter the weighted feedback arc search, one strongly connected component at a time.
    """
    rel = direct_relations(ds, 1.0)
    costs = ds.cost_matrix()
    expenditures = ds.expenditures
    removal_cost = np.maximum(expenditures[:, None] - costs, 0.0)
    arcs = rel.strict.copy()
    np.fill_diagonal(arcs, False)

    total, exact = 0.0, True
    for component in cyclic_components(arcs):
        block = np.ix_(component, component)
        search = FeedbackArcSearch(arcs[block], removal_cost[block], node_cap=node_cap)
        total += search.solve()
        exact = exact and search.exact

    value = total / float(expenditures.sum())
    if not check_garp(ds).passes:
        value = max(value, Tolerances.INDEX_RESOLUTION)
    return float(min(value, 1.0)), exact


def index_report(ds: ChoiceDataset, node_cap: int = SearchConfig.NODE_CAP) -> IndexReport:
    garp = check_garp(ds)
    hmi_value, kept = hmi(ds, node_cap=node_cap)
    mci_value, exact = mci(ds, node_cap=node_cap)
    return IndexReport(
        label=ds.label,
        ccei=ccei(ds),
        hmi=hmi_value,
        mpi=mpi(ds),
        mci=mci_value,
        hmi_kept=kept,
        mci_exact=exact,
        violating_pairs=len(garp.violating_pairs),
        two_cycles=len(violation_two_cycles(ds)),
    )
