"""Angle-dependent normal Casimir force between corrugated gold surfaces.

Lifshitz energies for real materials, the derivative expansion beyond the
proximity force approximation for two crossed sinusoidal corrugations, the
sphere-grating electrostatic model and the AFM calibration pipeline.
"""

__version__ = "0.1.0"
