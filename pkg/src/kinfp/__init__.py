"""Numerical toolbox for the kinetic equation  df/dt + v.grad_x f = Delta_v f^m.

Closed-form self-similar solutions and stationary profiles, a structure
preserving splitting solver in self-similar variables, entropy and moment
diagnostics, the spectrum of the linearized collision-transport operator,
and the macroscopic nonlinear-diffusion limit.
"""

from .params import ModelParams, model_params

__all__ = ["ModelParams", "model_params"]
__version__ = "0.1.0"
