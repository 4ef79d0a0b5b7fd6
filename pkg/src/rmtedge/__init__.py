"""Finite-n correlation kernels of orthogonal and unitary invariant ensembles and
their edge-scaling limits (Airy kernel, Tracy-Widom laws)."""

__version__ = "0.1.0"
