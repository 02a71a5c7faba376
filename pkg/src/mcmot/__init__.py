"""Batch Bayesian multi-object tracking by MCMC over associations and trajectories."""

__version__ = "0.1.0"
