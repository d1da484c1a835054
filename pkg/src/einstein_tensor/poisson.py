"""Tensor-format finite-difference Poisson problems on the unit square/cube.

Unknowns live on the ``n`` interior nodes per side, ``x_i = i*dx`` with
``dx = 1/(n+1)`` and ``i = 1..n``; homogeneous Dirichlet data is imposed by
dropping neighbours that fall on the boundary.

The 2D operator is order 4 with a five-point stencil (center ``4/dx^2``,
neighbours ``-1/dx^2``).  The 3D operator is order 6 with a seven-point
stencil; under ``scaling="paper"`` its entries are divided by ``dx^3``
(center ``6/dx^3``), under ``scaling="standard"`` by ``dx^2``.  Note that the
two 3D scalings solve different discrete equations for the same ``f``: the
``paper`` solution equals ``dx`` times the ``standard`` one.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .core import DenseTensor, EinsteinOperator, as_tensor, einstein_product, frobenius_norm
from .errors import InvalidSize
from .isomorphism import direct_solve
from .solvers import SolveReport, SolverConfig, Status, bicg_solve, jacobi_solve

__all__ = [
    "PoissonProblem",
    "build_poisson_operator",
    "assemble_rhs",
    "manufactured_solution",
    "solve_poisson",
    "error_report",
    "convergence_order",
    "write_grid_csv",
]

SCALINGS = ("paper", "standard")
Source = Union[str, float, Callable, np.ndarray, DenseTensor]


def _check(dim: int, n: int, scaling: str = "paper") -> None:
    if dim not in (2, 3):
        raise InvalidSize(f"dim must be 2 or 3, got {dim}")
    if int(n) < 2:
        raise InvalidSize(f"need at least 2 interior points per side, got {n}")
    if scaling not in SCALINGS:
        raise InvalidSize(f"scaling must be one of {SCALINGS}, got {scaling!r}")


def stencil_scale(dim: int, n: int, scaling: str = "paper") -> float:
    """``1/dx^p``: ``p = 2`` in 2D, ``p = 3`` in 3D unless ``scaling='standard'``."""
    power = 3 if (dim == 3 and scaling == "paper") else 2
    # (n+1)**p is exact in floating point, unlike (1/dx)**p
    return float((n + 1) ** power)


def build_poisson_operator(dim: int, n: int, scaling: str = "paper") -> EinsteinOperator:
    """Discrete ``-Laplacian`` as an order-``2*dim`` operator on the interior grid.

    Entries are written slice by slice: for the slice pinned at node ``c``,
    the center entry ``(c, c)`` gets ``2*dim*s`` and each in-range axis
    neighbour gets ``-s`` with ``s = stencil_scale(dim, n, scaling)``.
    """
    _check(dim, n, scaling)
    s = stencil_scale(dim, n, scaling)
    shape = (n,) * dim
    arr = np.zeros(shape + shape, order="F")
    nodes = np.array(list(itertools.product(range(n), repeat=dim)))
    centre = tuple(nodes.T)
    arr[centre + centre] = 2 * dim * s
    for axis in range(dim):
        for step in (-1, 1):
            nb = nodes.copy()
            nb[:, axis] += step
            ok = (nb[:, axis] >= 0) & (nb[:, axis] < n)
            arr[tuple(nb[ok].T) + tuple(nodes[ok].T)] = -s
    return EinsteinOperator._wrap(arr, dim)


def _grid(dim: int, n: int) -> list[np.ndarray]:
    pts = np.arange(1, n + 1) / (n + 1)
    return np.meshgrid(*([pts] * dim), indexing="ij")


def _manufactured_source(*xs):
    dim = len(xs)
    return dim * math.pi**2 * np.prod([np.sin(math.pi * x) for x in xs], axis=0)


def manufactured_solution(dim: int, n: int) -> DenseTensor:
    """``v = prod_d sin(pi x_d)`` sampled at the interior nodes."""
    xs = _grid(dim, n)
    return DenseTensor(np.prod([np.sin(math.pi * x) for x in xs], axis=0))


def assemble_rhs(dim: int, n: int, source: Source = "manufactured") -> DenseTensor:
    """Sample the source term at the interior nodes.

    ``source`` is ``"manufactured"`` (``f = dim*pi^2 prod sin(pi x)``),
    ``"constant"`` (``f = 1``), a number, a callable ``f(x, y[, z])``
    evaluated on the node arrays, or an explicit ``(n,)*dim`` array/tensor.
    """
    _check(dim, n)
    shape = (n,) * dim
    if isinstance(source, DenseTensor) or isinstance(source, np.ndarray):
        t = as_tensor(source)
        if t.shape != shape:
            raise InvalidSize(f"source grid has shape {t.shape}, expected {shape}")
        return t
    if isinstance(source, str):
        if source == "manufactured":
            return DenseTensor(_manufactured_source(*_grid(dim, n)))
        if source == "constant":
            return DenseTensor(np.ones(shape))
        raise InvalidSize(f"unknown source {source!r}")
    if callable(source):
        vals = np.broadcast_to(np.asarray(source(*_grid(dim, n)), dtype=float), shape)
        return DenseTensor(vals)
    return DenseTensor(np.full(shape, float(source)))


@dataclass
class PoissonProblem:
    dim: int
    n: int
    rhs: DenseTensor
    scaling: str = "paper"
    source: str = "manufactured"

    @classmethod
    def build(cls, dim: int, n: int, source: Source = "manufactured", scaling: str = "paper"):
        _check(dim, n, scaling)
        label = source if isinstance(source, str) else type(source).__name__
        return cls(dim=dim, n=n, rhs=assemble_rhs(dim, n, source), scaling=scaling, source=label)

    @property
    def dx(self) -> float:
        return 1.0 / (self.n + 1)

    def operator(self) -> EinsteinOperator:
        return build_poisson_operator(self.dim, self.n, self.scaling)


def solve_poisson(
    problem: PoissonProblem, method: str = "bicg", cfg: SolverConfig | None = None
) -> SolveReport:
    """Solve ``A *_dim V = F`` with ``bicg``, ``jacobi`` or ``direct``."""
    cfg = cfg or SolverConfig()
    op = problem.operator()
    if method == "bicg":
        return bicg_solve(op, problem.rhs, cfg)
    if method == "jacobi":
        return jacobi_solve(op, problem.rhs, cfg)
    if method == "direct":
        x = direct_solve(op, problem.rhs)
        bnorm = frobenius_norm(problem.rhs)
        resid = frobenius_norm(einstein_product(op, x) - problem.rhs)
        rel = resid / bnorm if bnorm else resid
        return SolveReport(
            x=x, residuals=[rel], iterations=1, status=Status.CONVERGED, final_residual=rel
        )
    raise ValueError(f"unknown method {method!r}")


def error_report(x, exact) -> dict:
    """Max and discrete-L2 error of ``x`` against the exact nodal values."""
    x, exact = as_tensor(x), as_tensor(exact)
    err = x.data - exact.data
    n = x.shape[0]
    h = 1.0 / (n + 1)
    return {
        "max_err": float(np.max(np.abs(err))),
        "l2_err": float(math.sqrt(h**x.order * np.sum(err**2))),
    }


def convergence_order(ns, errors) -> list[float]:
    """Observed orders ``log(e1/e2)/log(h1/h2)`` between consecutive grids."""
    hs = [1.0 / (n + 1) for n in ns]
    return [
        math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1])
        for i in range(len(ns) - 1)
    ]


def write_grid_csv(x, path) -> Path:
    """``i,j[,k],x,y[,z],v`` with 1-based node numbers and 17 significant digits."""
    x = as_tensor(x)
    dim, n = x.order, x.shape[0]
    idx_names = ["i", "j", "k"][:dim]
    coord_names = ["x", "y", "z"][:dim]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(idx_names + coord_names + ["v"])
        # column-major walk: first index fastest
        for idx in itertools.product(range(n), repeat=dim):
            idx = idx[::-1]
            nodes = [i + 1 for i in idx]
            coords = [f"{m / (n + 1):.17g}" for m in nodes]
            w.writerow(nodes + coords + [f"{x.data[idx]:.17g}"])
    return path
