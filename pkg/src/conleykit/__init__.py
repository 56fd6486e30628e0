"""Conley index computations on cubical grids.

Flows are sampled into transition graphs on a uniform grid; isolating
neighbourhoods, index pairs and blocks are built from graph closures, and
their relative homology is computed with exact integer arithmetic.
"""
from ._accel import BACKEND
from .errors import ConleyError

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConleyError", "__version__"]
