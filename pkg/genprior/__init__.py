"""genprior: generative transport-map priors for Bayesian inverse problems."""
from __future__ import annotations

__version__ = "0.1.0"
