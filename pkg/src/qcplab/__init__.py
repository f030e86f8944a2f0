"""Desk-scale simulation lab for coset-state copy protection and its building blocks."""

__version__ = "0.1.0"
