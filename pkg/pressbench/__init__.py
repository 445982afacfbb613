"""Instrumentation-guided button pressing testbed: simulator, perception, diffusion policies, evaluation."""

__version__ = "0.1.0"
