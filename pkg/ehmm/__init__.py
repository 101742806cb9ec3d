"""ehmm - embedded-HMM Markov chain sampling for non-linear state space models."""

__version__ = "0.1.0"
__author__ = "josephedward"
