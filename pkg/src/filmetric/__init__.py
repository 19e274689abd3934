"""Thin-film interferometry toolkit.

Forward model (optics), procedural thickness fields (fieldgen), interferogram
rendering and augmentation (synth), dataset composition (dataset), classical
regularized inversion (reconstruct), depth-style metrics (metrics) and a CLI.
"""

__version__ = "0.1.0"
