"""Light field x4 super-resolution: reference generation, texture transfer, joint refinement."""

__version__ = "0.1.0"
