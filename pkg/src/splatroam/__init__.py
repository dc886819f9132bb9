"""splatroam: explore-restore-refine pipeline for Gaussian splat worlds."""

__version__ = "0.1.0"
