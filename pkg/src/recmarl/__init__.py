"""Distributed policy-gradient learning for reward-coupled networked MDPs."""

__version__ = "0.1.0"
