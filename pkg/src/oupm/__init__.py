"""Open-universe probabilistic models: a small modelling language, a contingent
Bayesian network runtime over partial worlds, MCMC samplers and an exact
enumeration oracle."""

from .dsl import load, load_file
from .errors import (ContractViolation, InitializationError, ModelError, ModelRuntimeError,
                     OracleLimitation, ParseError)

__version__ = "0.1.0"

__all__ = ["load", "load_file", "ContractViolation", "InitializationError", "ModelError",
           "ModelRuntimeError", "OracleLimitation", "ParseError"]
