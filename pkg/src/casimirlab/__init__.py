"""Desk-scale workbench for a sphere-plate Casimir force experiment:
Lifshitz multilayer force computation, electrostatic AFM calibration,
roughness averaging, error budgets and comparison against embedded
measurement tables."""

from importlib import resources

__version__ = "0.1.0"


def data_path(name: str):
    """Path to a shipped data file (synthetic spectra, roughness tables)."""
    return resources.files(__name__) / "data" / name
