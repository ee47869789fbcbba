"""Diffusion-model schedules, samplers and guidance on exact Gaussian-mixture targets."""

__version__ = "0.1.0"
