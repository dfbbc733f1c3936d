"""Flows and Markov processes for scalar ODEs with discontinuous right-hand side."""
__version__ = "0.1.0"
