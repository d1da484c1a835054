"""Iterative solvers for ``A *_N X = B`` that work on tensors directly.

``bicg_solve`` is conjugate gradients on the normal equations
``A^T *_N A *_N X = A^T *_N B`` (CGNR) with the tensor inner product;
``jacobi_solve`` splits ``A`` into its paired-index diagonal and the rest.
Both start from ``X_0 = 0`` and measure convergence on the residual of the
original system, ``||A *_N X_k - B||_F / ||B||_F``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import (
    DenseTensor,
    _square,
    as_tensor,
    frobenius_norm,
    inner_product,
)
from .errors import Diverged, ShapeMismatch, ZeroDiagonal
from .isomorphism import flatten

__all__ = [
    "Status",
    "SolverConfig",
    "SolveReport",
    "bicg_solve",
    "jacobi_solve",
    "write_residual_csv",
]

DIVERGENCE_FACTOR = 1e6


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    BREAKDOWN = "Breakdown"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 10_000
    record_history: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class SolveReport:
    x: DenseTensor
    residuals: list = field(default_factory=list)
    iterations: int = 0
    status: Status = Status.MAX_ITER
    final_residual: float = math.nan

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _setup(a, b):
    op = _square(a)
    b = as_tensor(b)
    if b.shape != op.left_modes:
        raise ShapeMismatch(f"rhs shape {b.shape} does not match {op.left_modes}")
    return op, b


def _applier(mat: np.ndarray, shape):
    """``X -> A *_N X`` through the flattened operator (one BLAS matvec)."""

    def apply(x: DenseTensor) -> DenseTensor:
        return DenseTensor._wrap((mat @ x.vec).reshape(shape, order="F"))

    return apply


def bicg_solve(
    a,
    b,
    cfg: SolverConfig | None = None,
    callback: Optional[Callable[[int, DenseTensor], None]] = None,
) -> SolveReport:
    """Higher-order conjugate gradients on the normal equations.

    Each step moves along ``X_k = X_{k-1} + alpha P_{k-1}`` where ``alpha``
    minimizes the quadratic model along the conjugate direction ``P``.

    Parameters
    ----------
    a : EinsteinOperator
        Square even-order operator.
    b : DenseTensor
        Right-hand side with the left-mode shape of ``a``.
    cfg : SolverConfig
    callback : callable, optional
        Called as ``callback(k, X_k)`` after every iteration.

    Returns
    -------
    SolveReport
        ``status`` is ``Breakdown`` if a search direction has no positive
        curvature ``<A P, A P>``.
    """
    cfg = cfg or SolverConfig()
    op, b = _setup(a, b)
    mat = np.asarray(flatten(op))
    apply_a = _applier(mat, op.left_modes)
    apply_at = _applier(mat.T, op.left_modes)
    bnorm = frobenius_norm(b)
    x = b * 0.0
    report = SolveReport(x=x)
    if bnorm == 0.0:
        report.status, report.final_residual = Status.CONVERGED, 0.0
        return report

    r = b - apply_a(x)
    z = apply_at(r)
    p = z
    zz = inner_product(z, z)
    res = math.nan
    for k in range(1, int(cfg.max_iter) + 1):
        w = apply_a(p)
        curv = inner_product(w, w)
        if not curv > 0.0 or not math.isfinite(curv):
            report.status = Status.BREAKDOWN
            break
        alpha = zz / curv
        x = x + p * alpha
        r = b - apply_a(x)
        res = frobenius_norm(r) / bnorm
        report.iterations = k
        if cfg.record_history:
            report.residuals.append(res)
        if callback is not None:
            callback(k, x)
        if res <= cfg.tol:
            report.status = Status.CONVERGED
            break
        z = apply_at(r)
        zz_new = inner_product(z, z)
        p = z + p * (zz_new / zz)
        zz = zz_new
    report.x = x
    report.final_residual = res
    return report


def jacobi_solve(
    a,
    b,
    cfg: SolverConfig | None = None,
    callback: Optional[Callable[[int, DenseTensor], None]] = None,
) -> SolveReport:
    """Higher-order Jacobi iteration.

    ``x_{k+1}[i..] = (b[i..] - sum_{u.. != i..} a[i.., u..] x_k[u..]) / a[i.., i..]``

    Raises
    ------
    ZeroDiagonal
        Some paired-index diagonal entry is zero.
    Diverged
        The relative residual grew past ``1e6``; the partial report is attached.
    """
    cfg = cfg or SolverConfig()
    op, b = _setup(a, b)
    mat = flatten(op)
    diag_flat = np.diag(mat).copy()
    if np.any(diag_flat == 0.0):
        raise ZeroDiagonal("Jacobi needs every diagonal entry a[i.., i..] nonzero")
    off_mat = np.array(mat, order="F")
    np.fill_diagonal(off_mat, 0.0)
    apply_off = _applier(off_mat, op.left_modes)
    diag = DenseTensor._wrap(diag_flat.reshape(op.left_modes, order="F"))

    bnorm = frobenius_norm(b)
    x = b * 0.0
    report = SolveReport(x=x)
    if bnorm == 0.0:
        report.status, report.final_residual = Status.CONVERGED, 0.0
        return report

    q = apply_off(x)
    res = math.nan
    for k in range(1, int(cfg.max_iter) + 1):
        x = (b - q) / diag
        q = apply_off(x)
        # residual of the new iterate reuses the off-diagonal product
        res = frobenius_norm(diag * x + q - b) / bnorm
        report.iterations = k
        if cfg.record_history:
            report.residuals.append(res)
        if callback is not None:
            callback(k, x)
        if res <= cfg.tol:
            report.status = Status.CONVERGED
            break
        if not math.isfinite(res) or res > DIVERGENCE_FACTOR:
            report.x, report.final_residual = x, res
            raise Diverged(f"Jacobi residual reached {res:.3e} at iteration {k}", report)
    report.x = x
    report.final_residual = res
    return report


def write_residual_csv(report: SolveReport, path) -> Path:
    """``iter,residual`` rows with 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "residual"])
        for k, res in enumerate(report.residuals, start=1):
            w.writerow([k, f"{res:.17g}"])
    return path
