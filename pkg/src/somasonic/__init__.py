"""somasonic: physically-informed sonification of anatomical meshes.

Builds modal vibration models from tissue mechanics and surface geometry,
renders real-time audio driven by a proximity probe, speaks OSC on the
wire, and scores localization trials with a volumetric Dice pipeline.
"""

__version__ = "0.1.0"

from .errors import SomasonicError

__all__ = ["SomasonicError", "__version__"]
