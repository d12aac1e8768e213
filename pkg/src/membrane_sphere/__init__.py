"""Pseudo-spectral phase-field / membrane-height model on a sphere."""
