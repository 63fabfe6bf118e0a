"""Desk-scale model-based RL with IMLE world-model ensembles and
uncertainty-weighted actor-critic learning."""

__version__ = "0.1.0"
