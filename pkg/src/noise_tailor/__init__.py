"""Noise tailoring at desk scale: simulate noisy two-qubit gate sets, apply
randomized compiling, fit nested Markovian error models by maximum
likelihood, and compare average-case to worst-case error rates."""

__version__ = "0.1.0"
