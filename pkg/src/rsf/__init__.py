"""Reduced state of field: single-particle density matrix plus averaged field."""
