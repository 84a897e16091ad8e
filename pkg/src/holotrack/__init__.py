"""holotrack: 2D particle tracking and 3D holographic reconstruction."""

__version__ = "0.1.0"
