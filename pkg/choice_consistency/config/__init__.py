"""
Configuration Module
Tool identity, numeric constants and data schemas.
"""

from .app_config import APP_NAME, APP_VERSION, TITLE
from .constants import (
    AnalyticsConfig,
    DevConfig,
    ErrorMessages,
    EstimationConfig,
    EtlConfig,
    ExitCodes,
    Paths,
    PowerConfig,
    SearchConfig,
    Tolerances,
)

__all__ = [
    'APP_NAME',
    'APP_VERSION',
    'TITLE',
    'AnalyticsConfig',
    'DevConfig',
    'ErrorMessages',
    'EstimationConfig',
    'EtlConfig',
    'ExitCodes',
    'Paths',
    'PowerConfig',
    'SearchConfig',
    'Tolerances',
]
