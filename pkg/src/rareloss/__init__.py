"""Rare-event estimators for credit portfolio losses."""

__version__ = "0.1.0"
