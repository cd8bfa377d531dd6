"""Rule-regularized Bayesian regression and classification.

Domain rules are evolved as symbolic expressions, turned into soft penalties
on model outputs and combined with a likelihood and priors for Metropolis
sampling.
"""

__version__ = "0.1.0"
