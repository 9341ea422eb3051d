"""Crackle detection in lung sounds: features, augmentation, a numpy CNN and transfer learning."""

__version__ = "0.1.0"
