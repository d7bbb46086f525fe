"""Operator-valued dyadic BMO norms, paraproducts and sweeps at finite depth."""
from .dyadic import DyadicIndex, MatrixSymbol, SignPattern, VectorField, adjoint
from .hardy import TraceField, circledast, pairing
from .norms import NORM_NAMES, NormReport, compute_norms
from .sweep import bilinear_sweep, factor_sweep, sweep
from .verify import verify_suite

__version__ = "0.1.0"
