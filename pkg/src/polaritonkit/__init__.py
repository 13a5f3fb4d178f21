"""Polariton dynamics in dispersive, absorbing media.

Modules: ``medium`` (Lorentz permittivity models), ``dispersion`` (complex
polariton roots), ``propagators`` (modal response functions), ``greens``
(dyadic Green tensors and Lippmann-Schwinger solves), ``hopfield`` (lossless
normal modes), ``quasimode`` (weak-loss commutator integrals), ``evolution``
(time-domain simulator with discretized baths) and ``cli``.
"""
from .errors import NumericalError, ValidationError
from .medium import Medium, LorentzResonance, epsilon, hopfield_medium, lorentz, vacuum

__all__ = ["Medium", "LorentzResonance", "epsilon", "lorentz", "vacuum", "hopfield_medium",
           "ValidationError", "NumericalError"]
__version__ = "0.1.0"
