"""Run-wide numeric configuration.

Every tolerance in the package is relative by default: a comparison at scale s
uses ``tol * (1 + s)``.  The global default can be overridden per call or via
the ``EQUILAB_TOL`` environment variable.
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_TOL = float(os.environ.get("EQUILAB_TOL", "1e-7"))

#: Norm used for nonconvexity measures and imbalance unless overridden.
DEFAULT_NORM = "l2"

VERSION = "0.1.0"


def resolve_tol(tol: float | None) -> float:
    return DEFAULT_TOL if tol is None else float(tol)


def vector_norm(v, norm: str = DEFAULT_NORM) -> float:
    """Norm of a vector under the injectable norm choice ('l1', 'l2', 'linf')."""
    v = np.asarray(v, dtype=float)
    if norm == "l2":
        return float(np.linalg.norm(v))
    if norm == "l1":
        return float(np.sum(np.abs(v)))
    if norm == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unknown norm {norm!r}")


def close(a: float, b: float, tol: float | None = None) -> bool:
    """Relative closeness at the magnitude of the larger operand."""
    t = resolve_tol(tol)
    return abs(a - b) <= t * (1.0 + max(abs(a), abs(b)))
