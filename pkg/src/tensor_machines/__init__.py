"""Low-rank polynomial predictors with batch and stochastic solvers."""

__version__ = "0.1.0"
