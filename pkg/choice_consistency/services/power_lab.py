"""
Power diagnostics.

Random-chooser benchmarks on fixed budgets, Selten scores, power-adjusted CCEI
and the share-permutation test separating random choosers from approximate
utility maximizers.
"""

import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from choice_consistency.choice_data import ChoiceDataset, make_dataset
from choice_consistency.config.constants import ErrorMessages, PowerConfig, Tolerances
from choice_consistency.services.indices import ccei
from choice_consistency.utils.error_handling import DataValidationError, InsufficientVariationError
from choice_consistency.utils.rng import substream

logger = logging.getLogger(__name__)

REGRESSION_DIRECTIONS = ("simulated-on-observed", "observed-on-simulated")


@dataclass(frozen=True)
class BudgetDesign:
    """Budgets a simulated chooser faces: T price vectors and per-budget expenditure."""
    prices: np.ndarray
    expenditures: np.ndarray

    def __post_init__(self):
        if self.prices.ndim != 2 or self.prices.shape[0] < 1:
            raise DataValidationError("power_lab", "BudgetDesign", "design needs at least one budget")
        if self.expenditures.shape != (self.prices.shape[0],):
            raise DataValidationError("power_lab", "BudgetDesign", "one expenditure per budget is required")
        if not (np.all(self.prices > 0) and np.all(self.expenditures > 0)):
            raise DataValidationError("power_lab", "BudgetDesign", "prices and expenditures must be positive")

    @property
    def n_rounds(self) -> int:
        return self.prices.shape[0]

    @property
    def n_goods(self) -> int:
        return self.prices.shape[1]

    def dataset_from_shares(self, shares: np.ndarray, label: str = "") -> ChoiceDataset:
        """Bundles spending the given expenditure shares on each budget."""
        bundles = shares * self.expenditures[:, None] / self.prices
        return make_dataset(list(zip(self.prices, bundles)), label=label)


@dataclass(frozen=True)
class SimulationSummary:
    n_sims: int
    scores: Tuple[float, ...]
    mean: float
    sd: float
    min: float
    median: float
    max: float

    @classmethod
    def from_scores(cls, scores: Sequence[float]) -> "SimulationSummary":
        values = np.asarray(scores, dtype=float)
        return cls(
            n_sims=len(values),
            scores=tuple(float(v) for v in values),
            mean=float(values.mean()),
            sd=float(values.std(ddof=1)) if len(values) > 1 else 0.0,
            min=float(values.min()),
            median=float(np.median(values)),
            max=float(values.max()),
        )

    def to_dict(self, include_scores: bool = False) -> dict:
        data = asdict(self)
        if not include_scores:
            data.pop("scores")
        return data


@dataclass(frozen=True)
class PermutationResult:
    p_value: float
    aborted: bool
    n_drawn: int
    observed_ccei: float
    is_approximate_maximizer: bool

    def to_dict(self) -> dict:
        return asdict(self)


def default_experiment_design(n_rounds: int = PowerConfig.N_ROUNDS, seed: int = PowerConfig.DEFAULT_SEED,
                              tokens: float = PowerConfig.TOKENS,
                              ratio_bound: float = PowerConfig.PRICE_RATIO_BOUND) -> BudgetDesign:
    """
    Two-good budgets with log price ratio uniform on [-ln b, ln b] and a fixed token endowment.

    Prices are normalized so that p1 * p2 = 1.
    """
    rng = substream(seed, "experiment-design")
    log_ratio = rng.uniform(-np.log(ratio_bound), np.log(ratio_bound), size=n_rounds)
    prices = np.column_stack([np.exp(log_ratio / 2), np.exp(-log_ratio / 2)])
    return BudgetDesign(prices=prices, expenditures=np.full(n_rounds, float(tokens)))


def design_from_dataset(ds: ChoiceDataset) -> BudgetDesign:
    """Scanner-style design: the observed prices and expenditures."""
    return BudgetDesign(prices=ds.prices, expenditures=ds.expenditures)


def option_shares(n_options: int) -> np.ndarray:
    """Equally spaced allocation shares for good 1, from all-in-good-2 to all-in-good-1."""
    return np.linspace(0.0, 1.0, n_options)


def bronars_discrete(design: BudgetDesign, n_options: int = PowerConfig.N_OPTIONS,
                     n_sims: int = PowerConfig.N_SIMS, seed: int = PowerConfig.DEFAULT_SEED,
                     label: str = "") -> SimulationSummary:
    """CCEI of choosers picking one of n_options allocations uniformly at random on each two-good budget."""
    if n_options < 2 or n_sims < 1:
        raise DataValidationError("power_lab", "bronars_discrete", "n_options >= 2 and n_sims >= 1 required")
    if design.n_goods != 2:
        raise DataValidationError("power_lab", "bronars_discrete",
                                  ErrorMessages.TWO_GOODS.format(operation="bronars_discrete", k=design.n_goods))
    rng = substream(seed, f"bronars-discrete:{label}")
    grid = option_shares(n_options)
    scores = []
    for _ in range(n_sims):
        first = grid[rng.integers(0, n_options, size=design.n_rounds)]
        shares = np.column_stack([first, 1.0 - first])
        scores.append(ccei(design.dataset_from_shares(shares)))
    return SimulationSummary.from_scores(scores)


def bronars_shares(ds: ChoiceDataset, n_sims: int = PowerConfig.N_SIMS,
                   seed: int = PowerConfig.DEFAULT_SEED) -> SimulationSummary:
    """CCEI of choosers splitting each observed expenditure uniformly at random over the simplex of shares."""
    if n_sims < 1:
        raise DataValidationError("power_lab", "bronars_shares", "n_sims >= 1 required")
    design = design_from_dataset(ds)
    rng = substream(seed, f"bronars-shares:{ds.label}")
    alpha = np.ones(design.n_goods)
    scores = [ccei(design.dataset_from_shares(rng.dirichlet(alpha, size=design.n_rounds)))
              for _ in range(n_sims)]
    return SimulationSummary.from_scores(scores)


def selten_score(observed_ccei: float, simulated: SimulationSummary) -> float:
    return float(observed_ccei - simulated.mean)


def power_adjusted_ccei(observed: Sequence[float], simulated_means: Sequence[float],
                        direction: str = "simulated-on-observed") -> List[float]:
    """
    OLS residuals with intercept, in input order.

    The default regresses simulated CCEI on observed CCEI; `observed-on-simulated`
    reverses the roles.
    """
    observed = np.asarray(observed, dtype=float)
    simulated = np.asarray(simulated_means, dtype=float)
    if observed.shape != simulated.shape or observed.size < 3:
        raise DataValidationError("power_lab", "power_adjusted_ccei", "equal lengths of at least 3 required")
    if direction not in REGRESSION_DIRECTIONS:
        raise DataValidationError("power_lab", "power_adjusted_ccei",
                                  f"direction must be one of {REGRESSION_DIRECTIONS}")
    regressor, regressand = (observed, simulated) if direction == "simulated-on-observed" else (simulated, observed)
    if np.ptp(regressor) == 0.0:
        raise InsufficientVariationError("power_lab", "power_adjusted_ccei",
                                         ErrorMessages.ZERO_VARIANCE.format(what="regressor"))
    fit = stats.linregress(regressor, regressand)
    residuals = regressand - (fit.intercept + fit.slope * regressor)
    return [float(r) for r in residuals]


def permutation_test(ds: ChoiceDataset, n_perm: int = PowerConfig.N_PERMUTATIONS,
                     abort_threshold: float = PowerConfig.ABORT_THRESHOLD,
                     abort_check_at: int = PowerConfig.ABORT_CHECK_AT,
                     seed: int = PowerConfig.DEFAULT_SEED, alpha: float = PowerConfig.ALPHA,
                     observed_ccei: Optional[float] = None) -> PermutationResult:
    """
    Shuffle expenditure-share vectors across rounds, keeping prices and expenditures.

    p_value is the fraction of permuted datasets whose CCEI reaches the observed
    CCEI. After abort_check_at draws, a running fraction above abort_threshold
    stops the test early.
    """
    if ds.n_obs < 2:
        raise DataValidationError("power_lab", "permutation_test", "at least two observations required")
    if n_perm < 1:
        raise DataValidationError("power_lab", "permutation_test", "n_perm >= 1 required")
    observed = ccei(ds) if observed_ccei is None else float(observed_ccei)
    design = design_from_dataset(ds)
    shares = ds.prices * ds.bundles / ds.expenditures[:, None]
    rng = substream(seed, f"permutation:{ds.label}")

    exceed = 0
    drawn = 0
    aborted = False
    for drawn in range(1, n_perm + 1):
        order = rng.permutation(ds.n_obs)
        if ccei(design.dataset_from_shares(shares[order])) >= observed - Tolerances.RELATION:
            exceed += 1
        if drawn == abort_check_at and drawn < n_perm and exceed / drawn > abort_threshold:
            aborted = True
            logger.debug(f"permutation test {ds.label!r} aborted after {drawn} draws")
            break
    p_value = exceed / drawn
    return PermutationResult(
        p_value=p_value,
        aborted=aborted,
        n_drawn=drawn,
        observed_ccei=observed,
        is_approximate_maximizer=classify_maximizer(p_value, alpha),
    )


def classify_maximizer(p_value: float, alpha: float = PowerConfig.ALPHA) -> bool:
    return p_value < alpha
