"""Deep RBF value functions for continuous-action reinforcement learning."""

__version__ = "0.1.0"
