"""Multilinear least squares through higher-order normal equations.

For ``A x_3 x = B`` with ``A`` of shape ``(I, J, K)`` the minimizer of
``||A x_3 x - B||_F^2`` solves ``(A^T *_2 A) x = A^T *_2 B`` where ``A^T`` is the
cyclic transpose of shape ``(K, I, J)``.  The even-order analogue
``A *_2 X = B`` uses the ordinary block transpose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .core import (
    DenseTensor,
    EinsteinOperator,
    as_operator,
    as_tensor,
    einstein_product,
    frobenius_norm,
    transpose,
)
from .errors import ShapeMismatch, SingularNormal, UnsupportedLayout, WrongOrder
from .isomorphism import RCOND_MIN, flatten

__all__ = [
    "TABLE2",
    "NormalSystem",
    "transpose3",
    "contract_mode3",
    "objective_mode3",
    "layout_shapes",
    "normal_system_for",
    "ls_solve_mode3",
    "ls_solve_einstein",
]

# (A, x, B, A^T) letter patterns for the six third-order layouts.  Row 4
# prints B as K x I; the contraction only typechecks with B = I x K, which is
# what is used here.
TABLE2 = {
    1: ("IJK", "K", "IJ", "KIJ"),
    2: ("JKI", "I", "JK", "IJK"),
    3: ("KIJ", "J", "KI", "JKI"),
    4: ("IKJ", "J", "IK", "JIK"),
    5: ("KJI", "I", "KJ", "IKJ"),
    6: ("JIK", "K", "JI", "KJI"),
}


def transpose3(a) -> DenseTensor:
    """Cyclic transpose ``(I, J, K) -> (K, I, J)``: ``out[k, i, j] = a[i, j, k]``.

    Three applications give back ``a``.
    """
    a = as_tensor(a)
    if a.order != 3:
        raise WrongOrder(f"third-order transpose needs order 3, got {a.order}")
    return DenseTensor._wrap(np.transpose(a.data, (2, 0, 1)))


def contract_mode3(a, x) -> DenseTensor:
    """``(A x_3 x)[i, j] = sum_k a[i, j, k] x[k]``."""
    return einstein_product(a, DenseTensor(np.ravel(np.asarray(x, dtype=float))), 1)


def objective_mode3(a, b, x) -> float:
    """``||A x_3 x - B||_F^2``."""
    r = contract_mode3(a, x) - as_tensor(b)
    return frobenius_norm(r) ** 2


@dataclass
class NormalSystem:
    gram: EinsteinOperator
    rhs: DenseTensor
    transpose: DenseTensor
    layout: object = None

    def gram_condition(self) -> float:
        return float(np.linalg.cond(flatten(self.gram)))

    def solve(self, ridge: float = 0.0) -> DenseTensor:
        return _spd_solve(self.gram, self.rhs, ridge)


def layout_shapes(layout: int, dims) -> dict:
    """Concrete shapes of ``A``, ``x``, ``B`` and ``A^T`` for a layout row.

    ``dims`` is ``(I, J, K)``.
    """
    if layout not in TABLE2:
        raise UnsupportedLayout(f"layout must be one of 1..6, got {layout!r}")
    size = dict(zip("IJK", (int(d) for d in dims)))
    return {
        name: tuple(size[c] for c in pattern)
        for name, pattern in zip(("a", "x", "b", "at"), TABLE2[layout])
    }


def normal_system_for(layout: int, a, b, dims=None) -> NormalSystem:
    """Gram ``A^T *_2 A`` and rhs ``A^T *_2 B`` for one third-order layout.

    If ``dims = (I, J, K)`` is given, the shapes of ``a`` and ``b`` are checked
    against that row; otherwise only internal consistency is checked.
    """
    if layout not in TABLE2:
        raise UnsupportedLayout(f"layout must be one of 1..6, got {layout!r}")
    a, b = as_tensor(a), as_tensor(b)
    if a.order != 3:
        raise WrongOrder(f"layout {layout} needs a third-order A, got order {a.order}")
    if b.shape != a.shape[:2]:
        raise ShapeMismatch(f"B has shape {b.shape}, expected {a.shape[:2]}")
    if dims is not None:
        want = layout_shapes(layout, dims)
        if a.shape != want["a"] or b.shape != want["b"]:
            raise UnsupportedLayout(
                f"shapes {a.shape}, {b.shape} do not fit layout {layout} with dims {tuple(dims)}"
            )
    at = transpose3(a)
    gram = einstein_product(at, a, 2)
    rhs = einstein_product(at, b, 2)
    return NormalSystem(gram=as_operator(gram, 1), rhs=rhs, transpose=at, layout=layout)


def _spd_solve(gram: EinsteinOperator, rhs: DenseTensor, ridge: float = 0.0) -> DenseTensor:
    mat = np.array(flatten(gram))
    if ridge:
        mat += ridge * np.eye(mat.shape[0])
    mat = 0.5 * (mat + mat.T)
    anorm = np.linalg.norm(mat, 1)
    chol, info = lapack.dpotrf(mat, lower=False)
    if info != 0 or anorm == 0.0:
        raise SingularNormal("normal-equation Gram operator is not positive definite")
    rc, info = lapack.dpocon(chol, anorm)
    if info != 0 or not rc >= RCOND_MIN:
        raise SingularNormal(f"normal-equation Gram operator is singular (rcond={rc:.3e})")
    trail = rhs.shape[gram.n :]
    rm = rhs.data.reshape((mat.shape[0], math.prod(trail)), order="F")
    xm = sla.cho_solve((chol, False), rm)
    return DenseTensor._wrap(xm.reshape(gram.right_modes + trail, order="F"))


def ls_solve_mode3(a, b, ridge: float = 0.0) -> np.ndarray:
    """Least-squares ``x`` (length ``K``) for ``A x_3 x = B``.

    Raises
    ------
    SingularNormal
        The ``K x K`` Gram matrix is numerically singular (e.g. ``IJ < K``).
    """
    sysm = normal_system_for(1, a, b)
    return np.asarray(sysm.solve(ridge).data).copy()


def ls_solve_einstein(a, b, ridge: float = 0.0) -> DenseTensor:
    """Least-squares ``X`` for ``A *_N X = B`` with ``A`` of shape ``(I.., R..)``.

    ``B`` has the left modes of ``A`` first, then any trailing modes.
    """
    op = as_operator(a)
    b = as_tensor(b)
    if b.shape[: op.n] != op.left_modes:
        raise ShapeMismatch(
            f"rhs leading modes {b.shape[:op.n]} do not match {op.left_modes}"
        )
    at = transpose(op)
    gram = einstein_product(at, op)
    rhs = einstein_product(at, b, op.n)
    return _spd_solve(gram, rhs, ridge)
