"""
Pipelines Module
Scanner transaction ingestion, monthly aggregation and scenario splits.
"""
