"""Option-critic: end-to-end learning of options with an exact gradient oracle."""

__version__ = "0.1.0"
