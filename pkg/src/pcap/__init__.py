"""Discrete p-capacities, isocapacitary constants and p-Laplacian eigenvalues
on finite weighted graphs, with numerical checks of the two-sided
eigenvalue/isocapacity estimates."""

__version__ = "0.1.0"
