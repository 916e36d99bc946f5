"""Bit-line computing simulator for relaxed-retention STT-RAM hierarchies."""

__version__ = "0.1.0"
