"""
choice-consistency
Revealed-preference consistency measures, power diagnostics and structural
estimates for budget-choice datasets, plus a scanner-data ETL.
"""

from .config.app_config import APP_VERSION as __version__

__all__ = ['__version__']
