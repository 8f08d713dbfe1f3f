"""Defect-prediction experimentation toolkit built around metric-set simplification.

The package is organized as a core library (corpus ingestion, filter-based
feature selection, Top-k / minimum metric-subset derivation, five classifiers,
scenario grids, and nonparametric statistics), a FastAPI service wrapping the
core, and a thin command-line client that talks to the service.
"""

__version__ = "0.1.0"
