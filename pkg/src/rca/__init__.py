"""Remote care platform: simulated smart homes observed and controlled
through a token-relaying API gateway backed by small cooperating services."""

__version__ = "0.1.0"
