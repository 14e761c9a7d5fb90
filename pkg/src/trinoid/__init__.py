"""Conformally parametrized constant mean curvature one trinoids in H^3.

The package classifies triples of conical half-angles, builds the rank-one
connection whose frames sweep out the surface, computes and unitarizes its
monodromy, and samples the immersion into an exportable mesh.
"""

__version__ = "0.1.0"
