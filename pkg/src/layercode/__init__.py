"""3D layer codes: construction, decoders, and thermal benchmarks."""

__version__ = "0.1.0"
