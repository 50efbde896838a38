"""
Services Module
Revealed-preference computations: GARP, indices, restrictions, power, estimation and analytics.
"""

from .garp_engine import check_garp
from .indices import ccei, hmi, index_report, mci, mpi

__all__ = [
    'ccei',
    'check_garp',
    'hmi',
    'index_report',
    'mci',
    'mpi',
]
