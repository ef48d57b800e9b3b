"""Unit-physics verification engine, 0-D constant-volume ignition benchmark
and a candidate-code orchestration loop."""

__version__ = "0.1.0"
