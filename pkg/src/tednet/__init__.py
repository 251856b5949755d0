"""Exact ReLU networks that enumerate tree edit neighborhoods."""

from tednet.trees import Tree, decode_euler, euler_string

__all__ = ["Tree", "decode_euler", "euler_string"]
__version__ = "0.1.0"
