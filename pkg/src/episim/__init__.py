"""GPS-driven agent-based simulation of airborne and vector-borne disease spread."""

__version__ = "0.1.0"
