"""
Application Configuration
Tool identity recorded in every run manifest.
"""

# Version information
APP_VERSION = "0.3.0"
APP_NAME = "choice-consistency"

TITLE = "Revealed Preference Consistency Toolkit"
