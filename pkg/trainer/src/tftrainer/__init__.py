"""Toy transformer depth regressor for thin-film interferograms.

Consumes dataset directories in the filmetric pair/manifest format and emits
predictions the filmetric CLI can score; nothing here imports the toolkit.
"""

__version__ = "0.1.0"
