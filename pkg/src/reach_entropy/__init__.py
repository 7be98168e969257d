"""Reachability entropy of finite and continuous-space control systems."""

__version__ = "0.1.0"
