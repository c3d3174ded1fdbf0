"""Simulation and mean-field analysis of L0-regularized compressed sensing on a coherent Ising machine."""

__version__ = "0.1.0"
