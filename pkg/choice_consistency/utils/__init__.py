"""
Utility Functions Module
Errors, validators, random streams, parallel mapping and run manifests.
"""
