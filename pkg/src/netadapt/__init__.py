"""Distributed adaptive estimation over graphs: primal (diffusion, consensus) and
primal-dual (Arrow-Hurwicz, augmented Lagrangian) strategies, with simulation
and closed-form stability/MSD theory side by side."""

__version__ = "0.1.0"
