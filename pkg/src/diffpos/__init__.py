"""Diffraction-aided NLoS positioning toolkit.

Synthesizes outdoor-to-indoor multipath from scene geometry and material
physics, selects first-arriving paths, and estimates 3D receiver positions
with a diffraction path model, benchmarked against the position error bound.
"""

__version__ = "0.1.0"
