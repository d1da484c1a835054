"""The matricization bijection between even-order tensors and matrices, and the
group operations pulled back through it.

Row index of ``(i_1..i_N)`` is the column-major linear index over the left
extents, column index likewise over the right extents.  Because tensors are
stored column-major the map is a pure reshape of the buffer.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .core import (
    DenseTensor,
    EinsteinOperator,
    _check_shape,
    as_operator,
    as_tensor,
)
from .errors import NonSquare, ShapeMismatch, SingularTensor

__all__ = ["flatten", "unflatten", "inverse", "direct_solve", "rcond", "RCOND_MIN"]

# reciprocal condition number below which a flattened operator counts as singular
RCOND_MIN = 1e-14


def flatten(t) -> np.ndarray:
    """Matrix ``f(t)`` of shape ``(prod(left), prod(right))``; a read-only view."""
    op = as_operator(t)
    return op.data.reshape((op.rows, op.cols), order="F")


def unflatten(m, left_modes, right_modes) -> EinsteinOperator:
    """Inverse of :func:`flatten`."""
    left = _check_shape(left_modes)
    right = _check_shape(right_modes)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape != (math.prod(left), math.prod(right)):
        raise ShapeMismatch(
            f"matrix of shape {m.shape} does not match modes {left} x {right}"
        )
    if len(left) != len(right):
        raise ShapeMismatch("left and right mode lists must have equal length")
    return EinsteinOperator(m.reshape(left + right, order="F"), len(left))


def _lu(op: EinsteinOperator):
    if not op.is_square:
        raise NonSquare(f"left modes {op.left_modes} != right modes {op.right_modes}")
    mat = flatten(op)
    with warnings.catch_warnings():
        # exact zero pivots are reported through the rcond check below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(mat, check_finite=True)
    anorm = np.linalg.norm(mat, 1)
    rc = _rcond_from_lu(lu, anorm)
    if not rc >= RCOND_MIN:
        raise SingularTensor(f"flattened operator is singular (rcond={rc:.3e})")
    return lu, piv


def _rcond_from_lu(lu, anorm: float) -> float:
    if anorm == 0.0:
        return 0.0
    rc, info = lapack.dgecon(lu, anorm, norm="1")
    return float(rc) if info == 0 else 0.0


def rcond(t) -> float:
    """1-norm reciprocal condition estimate of ``f(t)``."""
    mat = flatten(t)
    lu, _ = sla.lu_factor(mat)
    return _rcond_from_lu(lu, np.linalg.norm(mat, 1))


def inverse(t) -> EinsteinOperator:
    """Group inverse under ``*_N`` via LU of the flattened matrix.

    Raises
    ------
    OddOrder
        Odd-order tensors have no inverse (they are not closed under ``*_N``).
    NonSquare, SingularTensor
    """
    op = as_operator(t)
    lu, piv = _lu(op)
    inv = sla.lu_solve((lu, piv), np.eye(op.rows))
    return unflatten(inv, op.left_modes, op.right_modes)


def direct_solve(a, b) -> DenseTensor:
    """Solve ``a *_N x = b`` by dense LU on the flattened system.

    ``b`` has the left modes of ``a`` first, optionally followed by trailing
    modes that are carried through to ``x``.
    """
    op = as_operator(a)
    b = as_tensor(b)
    if b.shape[: op.n] != op.left_modes:
        raise ShapeMismatch(
            f"rhs leading modes {b.shape[:op.n]} do not match {op.left_modes}"
        )
    lu, piv = _lu(op)
    trail = b.shape[op.n :]
    bm = b.data.reshape((op.rows, math.prod(trail)), order="F")
    xm = sla.lu_solve((lu, piv), bm)
    return DenseTensor._wrap(xm.reshape(op.right_modes + trail, order="F"))
