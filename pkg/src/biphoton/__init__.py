"""Simulation and analysis of narrowband OAM-entangled photon pairs.

Synthetic time tags from a phenomenological pair source, coincidence
histograms and normalized cross-correlation, the Cauchy-Schwarz test,
coherence-time fits, and maximum-likelihood two-qubit tomography.
"""

__version__ = "0.1.0"
