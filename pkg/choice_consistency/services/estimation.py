"""
Structural CES and disappointment-aversion estimation from two-good budget shares.

The share of good 1 is modelled as g / ((p1/p2)^m + g) plus a normal error,
censored at 0 and 1, and fitted by nonlinear Tobit maximum likelihood over
(log g, m, log sigma). Estimates map back to (alpha, rho) through
rho = m / (1 + m) and alpha = g^(1-rho) / (1 + g^(1-rho)).
"""

import itertools
import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from scipy import optimize, stats
from scipy.special import expit

from choice_consistency.choice_data import ChoiceDataset, make_dataset
from choice_consistency.config.constants import ErrorMessages, EstimationConfig, Tolerances
from choice_consistency.utils.error_handling import DataValidationError, InsufficientVariationError

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ces", "disappointment_aversion")


@dataclass(frozen=True)
class EstimationResult:
    label: str
    model_kind: str
    alpha_hat: float
    rho_hat: float
    g_hat: float
    m_hat: float
    sigma_hat: float
    loglik: float
    converged: bool
    iterations: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_row(self) -> dict:
        return {
            'label': self.label,
            'alpha': self.alpha_hat,
            'rho': self.rho_hat,
            'g': self.g_hat,
            'm': self.m_hat,
            'sigma': self.sigma_hat,
            'loglik': self.loglik,
            'converged': self.converged,
            'iterations': self.iterations,
        }


def predicted_share(g: float, m: float, price_ratio: float) -> float:
    """Expenditure share of good 1 at price ratio p1/p2."""
    return float(expit(np.log(g) - m * np.log(price_ratio)))


def gm_to_params(g: float, m: float) -> Tuple[float, float]:
    """(g, m) -> (alpha, rho)."""
    if g <= 0 or m <= -1.0:
        raise DataValidationError("estimation", "gm_to_params", f"need g > 0 and m > -1, got g={g}, m={m}")
    return float(expit(np.log(g) / (1.0 + m))), float(m / (1.0 + m))


def params_to_gm(alpha: float, rho: float) -> Tuple[float, float]:
    """(alpha, rho) -> (g, m)."""
    if not 0.0 < alpha < 1.0 or rho >= 1.0:
        raise DataValidationError("estimation", "params_to_gm",
                                  f"need 0 < alpha < 1 and rho < 1, got alpha={alpha}, rho={rho}")
    g = float(np.exp(np.log(alpha / (1.0 - alpha)) / (1.0 - rho)))
    return g, float(rho / (1.0 - rho))


def _require_two_goods(ds: ChoiceDataset, operation: str) -> None:
    if ds.n_goods != 2:
        raise DataValidationError("estimation", operation,
                                  ErrorMessages.TWO_GOODS.format(operation=operation, k=ds.n_goods))


def share_data(ds: ChoiceDataset) -> Tuple[np.ndarray, np.ndarray]:
    """(shares of good 1 clipped to [0, 1], log price ratios)."""
    _require_two_goods(ds, "share_data")
    prices, bundles = ds.prices, ds.bundles
    shares = prices[:, 0] * bundles[:, 0] / ds.expenditures
    return np.clip(shares, 0.0, 1.0), np.log(prices[:, 0] / prices[:, 1])


def sorted_by_payout(ds: ChoiceDataset) -> ChoiceDataset:
    """Each observation reordered so that the first account holds the larger payout."""
    _require_two_goods(ds, "sorted_by_payout")
    rows = []
    for obs in ds.observations:
        order = [0, 1] if obs.bundle[0] >= obs.bundle[1] else [1, 0]
        rows.append((obs.prices[order], obs.bundle[order]))
    return make_dataset(rows, label=ds.label, obs_ids=ds.obs_ids)


def _tobit(theta: np.ndarray, shares: np.ndarray, log_ratios: np.ndarray) -> Tuple[float, np.ndarray]:
    """Censored-normal log-likelihood and its gradient in (log g, m, log sigma)."""
    log_g, m, log_sigma = theta
    sigma = np.exp(log_sigma)
    fitted = expit(log_g - m * log_ratios)
    left = shares <= Tolerances.SHARE
    right = shares >= 1.0 - Tolerances.SHARE
    interior = ~(left | right)

    d_fitted = np.zeros_like(shares)
    d_log_sigma = np.zeros_like(shares)
    total = 0.0

    z = (shares[interior] - fitted[interior]) / sigma
    total += float(np.sum(stats.norm.logpdf(z) - log_sigma))
    d_fitted[interior] = z / sigma
    d_log_sigma[interior] = z ** 2 - 1.0

    a = -fitted[left] / sigma
    total += float(np.sum(stats.norm.logcdf(a)))
    mills_left = np.exp(stats.norm.logpdf(a) - stats.norm.logcdf(a))
    d_fitted[left] = -mills_left / sigma
    d_log_sigma[left] = -a * mills_left

    b = (1.0 - fitted[right]) / sigma
    total += float(np.sum(stats.norm.logsf(b)))
    mills_right = np.exp(stats.norm.logpdf(b) - stats.norm.logsf(b))
    d_fitted[right] = mills_right / sigma
    d_log_sigma[right] = b * mills_right

    slope = fitted * (1.0 - fitted)
    gradient = np.array([
        np.sum(d_fitted * slope),
        np.sum(-d_fitted * slope * log_ratios),
        np.sum(d_log_sigma),
    ])
    return total, gradient


def loglik(g: float, m: float, sigma: float, ds: ChoiceDataset) -> float:
    if sigma <= 0:
        raise DataValidationError("estimation", "loglik", f"sigma must be positive, got {sigma}")
    if g <= 0:
        raise DataValidationError("estimation", "loglik", f"g must be positive, got {g}")
    shares, log_ratios = share_data(ds)
    value, _ = _tobit(np.array([np.log(g), m, np.log(sigma)]), shares, log_ratios)
    return value


def loglik_gradient(g: float, m: float, sigma: float, ds: ChoiceDataset) -> np.ndarray:
    """Gradient of loglik with respect to (log g, m, log sigma)."""
    if sigma <= 0 or g <= 0:
        raise DataValidationError("estimation", "loglik_gradient", "g and sigma must be positive")
    shares, log_ratios = share_data(ds)
    _, gradient = _tobit(np.array([np.log(g), m, np.log(sigma)]), shares, log_ratios)
    return gradient


def _bounds() -> list:
    return [
        (-EstimationConfig.LOG_G_BOUND, EstimationConfig.LOG_G_BOUND),
        (EstimationConfig.M_FLOOR, EstimationConfig.M_CAP),
        (np.log(EstimationConfig.SIGMA_FLOOR), None),
    ]


def _projected_gradient(theta: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """Ascent gradient with components pushing through an active bound zeroed."""
    projected = gradient.copy()
    for k, (low, high) in enumerate(_bounds()):
        if low is not None and theta[k] <= low + 1e-12 and gradient[k] < 0:
            projected[k] = 0.0
        if high is not None and theta[k] >= high - 1e-12 and gradient[k] > 0:
            projected[k] = 0.0
    return projected


def _warm_start(log_g: float, m: float, shares: np.ndarray, log_ratios: np.ndarray) -> np.ndarray:
    """Least-squares fit of the share curve, with sigma from the residual spread."""
    def residuals(params):
        return expit(params[0] - params[1] * log_ratios) - shares

    fit = optimize.least_squares(
        residuals, x0=[log_g, m],
        bounds=([-EstimationConfig.LOG_G_BOUND, EstimationConfig.M_FLOOR],
                [EstimationConfig.LOG_G_BOUND, EstimationConfig.M_CAP]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    spread = float(np.sqrt(np.mean(fit.fun ** 2)))
    sigma = max(spread, 10 * EstimationConfig.SIGMA_FLOOR)
    return np.array([fit.x[0], fit.x[1], np.log(sigma)])


def _fit_from(start: np.ndarray, shares: np.ndarray, log_ratios: np.ndarray):
    def objective(theta):
        value, gradient = _tobit(theta, shares, log_ratios)
        return -value, -gradient

    return optimize.minimize(
        objective, start, jac=True, method="L-BFGS-B", bounds=_bounds(),
        options={'maxiter': EstimationConfig.MAX_ITERATIONS, 'ftol': 1e-15,
                 'gtol': EstimationConfig.GRADIENT_TOLERANCE},
    )


def estimate_ces(ds: ChoiceDataset, model_kind: str = "ces") -> EstimationResult:
    """
    Multi-start Tobit fit over the fixed (g, m) start grid.

    The best start wins on log-likelihood, ties going to the smaller |m|. The
    result is flagged unconverged when the projected gradient exceeds the
    tolerance or m sits on its bounds; the best point is returned either way.
    """
    if model_kind not in MODEL_KINDS:
        raise DataValidationError("estimation", "estimate_ces",
                                  f"model_kind must be one of {MODEL_KINDS}, got '{model_kind}'")
    _require_two_goods(ds, "estimate_ces")
    if ds.n_obs < 3:
        raise InsufficientVariationError("estimation", "estimate_ces", "at least three observations required")
    fitted_ds = sorted_by_payout(ds) if model_kind == "disappointment_aversion" else ds
    shares, log_ratios = share_data(fitted_ds)
    if np.ptp(log_ratios) <= Tolerances.RELATION:
        raise InsufficientVariationError("estimation", "estimate_ces",
                                         ErrorMessages.ZERO_VARIANCE.format(what="price ratios"))

    fits = []
    for g0, m0 in itertools.product(EstimationConfig.G_STARTS, EstimationConfig.M_STARTS):
        start = _warm_start(np.log(g0), m0, shares, log_ratios)
        result = _fit_from(start, shares, log_ratios)
        fits.append((-float(result.fun), result))

    best_value = max(value for value, _ in fits)
    tied = [(value, r) for value, r in fits if best_value - value <= 1e-9 * max(1.0, abs(best_value))]
    value, best = min(tied, key=lambda item: abs(item[1].x[1]))

    theta = best.x
    _, gradient = _tobit(theta, shares, log_ratios)
    m_hat = float(theta[1])
    m_active = m_hat <= EstimationConfig.M_FLOOR + 1e-12 or m_hat >= EstimationConfig.M_CAP - 1e-12
    gradient_norm = float(np.linalg.norm(_projected_gradient(theta, gradient)))
    converged = gradient_norm <= EstimationConfig.GRADIENT_TOLERANCE * max(1.0, ds.n_obs) and not m_active
    if not converged:
        logger.info(f"estimate {ds.label!r}: projected gradient {gradient_norm:.3g}, m bound active={m_active}")

    g_hat = float(np.exp(theta[0]))
    alpha_hat, rho_hat = gm_to_params(g_hat, m_hat)
    return EstimationResult(
        label=ds.label,
        model_kind=model_kind,
        alpha_hat=alpha_hat,
        rho_hat=rho_hat,
        g_hat=g_hat,
        m_hat=m_hat,
        sigma_hat=float(np.exp(theta[2])),
        loglik=value,
        converged=bool(converged),
        iterations=int(best.nit),
    )
