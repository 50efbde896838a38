"""
Choice datasets and revealed-preference relations.

An observation is a (price vector, chosen bundle) pair; a dataset is an ordered
list of observations over the same K goods. Relations are computed at an
efficiency level e in [0, 1] that deflates every budget uniformly.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from choice_consistency.config.constants import ErrorMessages, Tolerances
from choice_consistency.utils.error_handling import DataValidationError
from choice_consistency.utils.validation import ChoiceDataValidator

logger = logging.getLogger(__name__)


def _frozen(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Observation:
    """One budget and the bundle chosen on it."""
    obs_id: str
    prices: np.ndarray
    bundle: np.ndarray

    @property
    def expenditure(self) -> float:
        return float(self.prices @ self.bundle)

    @property
    def shares(self) -> np.ndarray:
        """Expenditure shares across goods."""
        return self.prices * self.bundle / self.expenditure

    def to_dict(self) -> dict:
        return {
            'obs_id': self.obs_id,
            'prices': self.prices.tolist(),
            'bundle': self.bundle.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ChoiceDataset:
    """Ordered observations sharing the same number of goods."""
    observations: Tuple[Observation, ...]
    label: str = ""

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def n_obs(self) -> int:
        return len(self.observations)

    @property
    def n_goods(self) -> int:
        return len(self.observations[0].prices)

    @property
    def prices(self) -> np.ndarray:
        """T x K price matrix."""
        return np.vstack([obs.prices for obs in self.observations])

    @property
    def bundles(self) -> np.ndarray:
        """T x K bundle matrix."""
        return np.vstack([obs.bundle for obs in self.observations])

    @property
    def expenditures(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.prices, self.bundles)

    @property
    def obs_ids(self) -> List[str]:
        return [obs.obs_id for obs in self.observations]

    def cost_matrix(self) -> np.ndarray:
        """C[i, j] = p^i . x^j, the cost of bundle j at the prices of budget i."""
        return self.prices @ self.bundles.T

    def subset(self, indices: Sequence[int], label: Optional[str] = None) -> "ChoiceDataset":
        """Sub-dataset in the given (0-based) index order."""
        return ChoiceDataset(
            observations=tuple(self.observations[i] for i in indices),
            label=self.label if label is None else label,
        )

    def with_bundles(self, bundles: np.ndarray, label: Optional[str] = None) -> "ChoiceDataset":
        """Same budgets, new chosen bundles."""
        return make_dataset(
            list(zip(self.prices, bundles)),
            label=self.label if label is None else label,
            obs_ids=self.obs_ids,
        )

    def equals(self, other: "ChoiceDataset") -> bool:
        return (
            self.label == other.label
            and self.obs_ids == other.obs_ids
            and self.prices.shape == other.prices.shape
            and bool(np.array_equal(self.prices, other.prices))
            and bool(np.array_equal(self.bundles, other.bundles))
        )


@dataclass(frozen=True, eq=False)
class RelationMatrix:
    """Direct (weak, strict) and transitive revealed-preference relations at one efficiency."""
    weak: np.ndarray
    strict: np.ndarray
    efficiency: float
    closure: Optional[np.ndarray] = field(default=None)

    @property
    def size(self) -> int:
        return self.weak.shape[0]


def make_dataset(rows: Sequence[Tuple[Sequence[float], Sequence[float]]],
                 label: str = "", obs_ids: Optional[Sequence[str]] = None) -> ChoiceDataset:
    """
    Build a validated dataset from (prices, bundle) rows.

    Args:
        rows: Sequence of (prices, bundle) pairs
        label: Free-text dataset label (consumer id, task name)
        obs_ids: Optional identifiers; defaults to 1-based row numbers

    Raises:
        DataValidationError: with the offending 1-based row number
    """
    if len(rows) == 0:
        raise DataValidationError("choice_data", "make_dataset", ErrorMessages.EMPTY_DATASET)
    if obs_ids is not None and len(obs_ids) != len(rows):
        raise DataValidationError("choice_data", "make_dataset",
                                  f"{len(obs_ids)} obs_ids for {len(rows)} rows")

    observations = []
    expected_k = None
    for index, (prices, bundle) in enumerate(rows):
        row = index + 1
        ok, value, error = ChoiceDataValidator.validate_observation(prices, bundle, row, expected_k)
        if not ok:
            raise DataValidationError("choice_data", "make_dataset", error, row=row)
        p, x = value
        expected_k = len(p)
        obs_id = str(obs_ids[index]) if obs_ids is not None else str(row)
        observations.append(Observation(obs_id=obs_id, prices=_frozen(p), bundle=_frozen(x)))

    return ChoiceDataset(observations=tuple(observations), label=label)


def expenditure(obs: Observation) -> float:
    return obs.expenditure


def _check_efficiency(e: float, operation: str) -> float:
    ok, value, error = ChoiceDataValidator.validate_efficiency(e)
    if not ok:
        raise DataValidationError("choice_data", operation, error)
    return value


def relations_from_costs(costs: np.ndarray, budgets: np.ndarray, e: float,
                         tol: float = Tolerances.RELATION) -> RelationMatrix:
    """
    Relations from a cost matrix against per-row budget levels:
    weak[i, j] iff costs[i, j] <= (e + tol) * budgets[i], strict iff < (e - tol) * budgets[i].

    The tolerance is relative to each budget, so relations do not change when
    prices or quantities are rescaled.
    """
    threshold = e * budgets[:, None]
    band = tol * budgets[:, None]
    weak = costs <= threshold + band
    strict = costs < threshold - band
    weak.flags.writeable = False
    strict.flags.writeable = False
    return RelationMatrix(weak=weak, strict=strict, efficiency=float(e))


def direct_relations(ds: ChoiceDataset, e: float = 1.0,
                     tol: float = Tolerances.RELATION) -> RelationMatrix:
    """Directly revealed (weak) and strictly revealed preference at efficiency e."""
    e = _check_efficiency(e, "direct_relations")
    return relations_from_costs(ds.cost_matrix(), ds.expenditures, e, tol)


def closure_of(adjacency: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure by path composition over every intermediate index."""
    reach = adjacency.astype(bool) | np.eye(adjacency.shape[0], dtype=bool)
    for k in range(reach.shape[0]):
        reach |= reach[:, k:k + 1] & reach[k:k + 1, :]
    return reach


def transitive_closure(rel: RelationMatrix) -> RelationMatrix:
    closure = closure_of(rel.weak)
    closure.flags.writeable = False
    return replace(rel, closure=closure)
