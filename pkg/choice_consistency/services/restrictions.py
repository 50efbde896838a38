"""
Consistency under additional preference structure.

Symmetric monotone preferences over two equiprobable states (mirror augmentation),
homothetic preferences (cycle products of cost ratios), quasilinear preferences
(cyclical monotonicity) and the price-preference axiom.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from choice_consistency.choice_data import (
    ChoiceDataset,
    Observation,
    RelationMatrix,
    relations_from_costs,
    transitive_closure,
)
from choice_consistency.config.constants import ErrorMessages, Tolerances
from choice_consistency.services.cycles import minimum_mean_cycle, minimum_ratio_cycle
from choice_consistency.services.garp_engine import passes_relations
from choice_consistency.services.indices import ccei, supremum_efficiency
from choice_consistency.utils.error_handling import DataValidationError
from choice_consistency.utils.validation import ChoiceDataValidator

logger = logging.getLogger(__name__)

RESTRICTION_KINDS = ("fosd", "homothetic", "quasilinear", "gapp")


@dataclass(frozen=True)
class RestrictionReport:
    kind: str
    efficiency: float
    passes_at_1: bool
    passes: Optional[bool] = None
    tested_efficiency: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def mirrored(ds: ChoiceDataset) -> ChoiceDataset:
    """The dataset with both goods swapped in every observation."""
    if ds.n_goods != 2:
        raise DataValidationError("restrictions", "mirror",
                                  ErrorMessages.TWO_GOODS.format(operation="mirror", k=ds.n_goods))
    return ChoiceDataset(
        observations=tuple(
            Observation(obs_id=f"{obs.obs_id}~", prices=obs.prices[::-1], bundle=obs.bundle[::-1])
            for obs in ds.observations
        ),
        label=ds.label,
    )


def fosd_ccei(ds: ChoiceDataset) -> float:
    """CCEI of the dataset augmented with its mirror image."""
    augmented = ChoiceDataset(observations=ds.observations + mirrored(ds).observations,
                              label=ds.label)
    return ccei(augmented)


def _log_cost_ratios(ds: ChoiceDataset) -> np.ndarray:
    weights = np.log(ds.cost_matrix()) - np.log(ds.expenditures)[:, None]
    np.fill_diagonal(weights, np.inf)
    return weights


def harp_efficiency(ds: ChoiceDataset) -> float:
    """exp of the minimum mean log cost ratio over cycles, capped at 1."""
    mean = minimum_mean_cycle(_log_cost_ratios(ds))
    if mean is None or mean >= -Tolerances.RELATION:
        return 1.0
    return float(min(1.0, np.exp(mean)))


def quasilinear_efficiency(ds: ChoiceDataset) -> float:
    """Minimum over cycles of (sum of cross costs) / (sum of own expenditures), capped at 1."""
    if ds.n_obs == 1:
        return 1.0
    costs = ds.cost_matrix().astype(float)
    np.fill_diagonal(costs, np.inf)
    own = np.repeat(ds.expenditures[:, None], ds.n_obs, axis=1)
    return float(np.clip(minimum_ratio_cycle(costs, own, upper=1.0), 0.0, 1.0))


def price_relations(ds: ChoiceDataset, e: float) -> RelationMatrix:
    """p^i revealed preferred to p^j iff p^i.x^j <= e * p^j.x^j (strict with <)."""
    base = relations_from_costs(ds.cost_matrix().T, ds.expenditures, e)
    return RelationMatrix(weak=base.weak.T, strict=base.strict.T, efficiency=base.efficiency)


def _gapp_passes_at(ds: ChoiceDataset):
    def passes_at(e: float) -> bool:
        return passes_relations(transitive_closure(price_relations(ds, e)))
    return passes_at


def gapp_efficiency(ds: ChoiceDataset) -> float:
    ratios = ds.cost_matrix() / ds.expenditures[None, :]
    return supremum_efficiency(ratios, _gapp_passes_at(ds))


def check_gapp(ds: ChoiceDataset, e: float = 1.0) -> RestrictionReport:
    ok, e, error = ChoiceDataValidator.validate_efficiency(e)
    if not ok:
        raise DataValidationError("restrictions", "check_gapp", error)
    passes_at = _gapp_passes_at(ds)
    efficiency = gapp_efficiency(ds)
    return RestrictionReport(
        kind="gapp",
        efficiency=efficiency,
        passes_at_1=passes_at(1.0),
        passes=passes_at(e),
        tested_efficiency=e,
    )


def restriction_report(ds: ChoiceDataset, kind: str) -> RestrictionReport:
    if kind == "gapp":
        return check_gapp(ds, 1.0)
    if kind == "fosd":
        value = fosd_ccei(ds)
    elif kind == "homothetic":
        value = harp_efficiency(ds)
    elif kind == "quasilinear":
        value = quasilinear_efficiency(ds)
    else:
        raise DataValidationError("restrictions", "restriction_report",
                                  f"unknown restriction '{kind}', expected one of {RESTRICTION_KINDS}")
    return RestrictionReport(kind=kind, efficiency=value, passes_at_1=value >= 1.0)
