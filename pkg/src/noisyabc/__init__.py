"""Noisy-ABC maximum likelihood estimation for HMMs with intractable observation densities."""

__version__ = "0.1.0"
