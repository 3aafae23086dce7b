"""Registration, mosaicking and evaluation toolkit for fetoscopic video frames."""

__version__ = "0.1.0"
