"""Isometric tensor-hypercontraction factorizations, exact Fock-space
simulation of the ancilla-extended Trotter step they enable, and
fault-tolerant resource estimates for the resulting circuits."""

__version__ = "0.1.0"
