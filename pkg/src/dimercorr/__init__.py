"""Directional two-photon correlations of quantum-emitter dimers near surfaces and spheres."""

__version__ = "0.1.0"
