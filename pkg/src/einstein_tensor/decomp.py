"""Tensor SVD and symmetric EVD obtained through the matricization isomorphism,
and the CP / multilinear-SVD forms they reduce to when the singular (eigen)
matrices have the required rank-one structure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    EinsteinOperator,
    _square,
    einstein_product,
    is_symmetric,
    transpose,
)
from .errors import (
    NotSymmetric,
    RankOneViolation,
    SeparabilityViolation,
    UnsupportedOrder,
)
from .isomorphism import flatten, unflatten

__all__ = [
    "SvdResult",
    "EvdResult",
    "CpForm",
    "MultilinearSvd",
    "tensor_svd",
    "tensor_evd",
    "as_outer_sum",
    "extract_cp",
    "extract_multilinear_svd",
]

RANK_TOL = 1e-12
RANK_ONE_TOL = 1e-8
SYM_TOL = 1e-10


def _fix_signs(vecs: np.ndarray, *others: np.ndarray) -> None:
    """Flip columns in place so the first non-negligible entry is positive."""
    scale = np.max(np.abs(vecs), axis=0)
    for r in range(vecs.shape[1]):
        col = vecs[:, r]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * scale[r])
        if nz.size and col[nz[0]] < 0:
            vecs[:, r] *= -1.0
            for o in others:
                o[:, r] *= -1.0


@dataclass(frozen=True)
class SvdResult:
    """``a = u *_N d *_N v^T`` with orthogonal ``u``, ``v`` and diagonal ``d``."""

    u: EinsteinOperator
    d: EinsteinOperator
    v: EinsteinOperator
    singular_values: np.ndarray
    rank: int
    rank_tol: float = RANK_TOL

    def reconstruct(self) -> EinsteinOperator:
        ud = einstein_product(self.u, self.d, ordered=False)
        return einstein_product(ud, transpose(self.v), ordered=False)


@dataclass(frozen=True)
class EvdResult:
    """``a = p *_N d *_N p^T`` for symmetric ``a``; eigenvalues ascending."""

    p: EinsteinOperator
    d: EinsteinOperator
    eigenvalues: np.ndarray
    rank: int

    def reconstruct(self) -> EinsteinOperator:
        pd = einstein_product(self.p, self.d, ordered=False)
        return einstein_product(pd, transpose(self.p), ordered=False)

    def eigenmatrix(self, r: int) -> np.ndarray:
        """Eigen-tensor belonging to the ``r``-th eigenvalue (left-mode shaped)."""
        p = self.p
        return flatten(p)[:, r].reshape(p.left_modes, order="F")

    # the SVD-shaped accessors let the extraction helpers treat both alike
    @property
    def u(self):
        return self.p

    @property
    def v(self):
        return self.p

    @property
    def singular_values(self):
        return self.eigenvalues


@dataclass
class CpForm:
    """``t = sum_r weights[r] a_r o b_r o c_r o d_r`` (columns of the factors)."""

    weights: np.ndarray
    factors: list[np.ndarray]
    terms: list[int]
    sidiropoulos_bro: dict = field(default_factory=dict)

    def full(self) -> np.ndarray:
        a, b, c, d = self.factors
        return np.einsum("r,ir,jr,kr,lr->ijkl", self.weights, a, b, c, d)


@dataclass
class MultilinearSvd:
    """``t = core x_1 A x_2 B x_3 C x_4 D`` with a diagonal-pattern core."""

    core: EinsteinOperator
    factors: list[np.ndarray]

    def full(self) -> np.ndarray:
        a, b, c, d = self.factors
        return np.einsum("klmn,ik,jl,pm,qn->ijpq", self.core.data, a, b, c, d)


def tensor_svd(a, rank_tol: float = RANK_TOL) -> SvdResult:
    """Singular value decomposition of a square even-order operator.

    Singular values come out descending in flattened column order; each left
    singular vector has its first non-negligible entry positive (the right one
    is flipped along with it).
    """
    op = _square(a)
    mat = np.array(flatten(op))
    u, s, vt = np.linalg.svd(mat)
    v = vt.T.copy()
    _fix_signs(u, v)
    rank = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    lm, rm = op.left_modes, op.right_modes
    return SvdResult(
        u=unflatten(u, lm, lm),
        d=unflatten(np.diag(s), lm, rm),
        v=unflatten(v, rm, rm),
        singular_values=s,
        rank=rank,
        rank_tol=rank_tol,
    )


def tensor_evd(a, sym_tol: float = SYM_TOL, rank_tol: float = RANK_TOL) -> EvdResult:
    """Eigen decomposition of a symmetric square even-order operator.

    Raises
    ------
    NotSymmetric
        If ``||a - a^T||_F > sym_tol ||a||_F``.
    """
    op = _square(a)
    if not is_symmetric(op, sym_tol):
        raise NotSymmetric("tensor EVD requires a symmetric operator")
    mat = flatten(op)
    w, p = np.linalg.eigh(0.5 * (mat + mat.T))
    _fix_signs(p)
    top = np.max(np.abs(w)) if w.size else 0.0
    rank = int(np.sum(np.abs(w) > rank_tol * top)) if top > 0 else 0
    lm = op.left_modes
    return EvdResult(
        p=unflatten(p, lm, lm), d=unflatten(np.diag(w), lm, lm), eigenvalues=w, rank=rank
    )


def _order4(res) -> tuple[int, int]:
    if res.u.order != 4:
        raise UnsupportedOrder("the outer-sum form is only defined for order-4 tensors")
    return res.u.left_modes


def as_outer_sum(res) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Split an order-4 SVD/EVD into ``(sigma_r, U_r, V_r)`` terms.

    ``U_r`` and ``V_r`` are the matrix slices of ``u`` and ``v`` with the last
    two modes pinned at ``(k, l)``, ``r = k + l*I``, so that
    ``a = sum_r sigma_r U_r o V_r``.
    """
    _order4(res)
    uf, vf = flatten(res.u), flatten(res.v)
    lm, rm = res.u.left_modes, res.v.left_modes
    terms = []
    for r, sig in enumerate(res.singular_values):
        terms.append(
            (
                float(sig),
                uf[:, r].reshape(lm, order="F"),
                vf[:, r].reshape(rm, order="F"),
            )
        )
    return terms


def _rank_one(mat: np.ndarray, tol: float):
    """Return ``(x, y)`` with ``mat ~ outer(x, y)`` and unit ``x``, or None."""
    uu, ss, vvt = np.linalg.svd(mat)
    if ss[0] == 0.0 or (ss.size > 1 and ss[1] > tol * ss[0]):
        return None
    x = uu[:, 0].copy()
    y = ss[0] * vvt[0].copy()
    nz = np.flatnonzero(np.abs(x) > 1e-12 * np.max(np.abs(x)))
    if x[nz[0]] < 0:
        x, y = -x, -y
    return x, y


def _retained(res) -> list[int]:
    s = np.abs(np.asarray(res.singular_values))
    top = s.max() if s.size else 0.0
    if top == 0.0:
        return []
    return [r for r in range(s.size) if s[r] > RANK_TOL * top]


def extract_cp(res, tol: float = RANK_ONE_TOL) -> CpForm:
    """Rewrite an order-4 SVD (or EVD) as a CP decomposition.

    Only the terms with non-negligible singular value enter the sum, so only
    their slices have to be rank-one.  For term ``r = k + l*I``,
    ``U_r = a_r b_r^T`` and ``V_r = c_r d_r^T``; the weight is ``sigma_r``.

    Raises
    ------
    RankOneViolation
        Lists the term indices whose slices are not rank-one within ``tol``.
    """
    _order4(res)
    terms = as_outer_sum(res)
    keep = _retained(res)
    cols: list[list[np.ndarray]] = [[], [], [], []]
    bad = []
    for r in keep:
        _, um, vm = terms[r]
        left = _rank_one(um, tol)
        right = left if res.u is res.v else _rank_one(vm, tol)
        if left is None or right is None:
            bad.append(r)
            continue
        for slot, vec in zip(cols, (*left, *right)):
            slot.append(vec)
    if bad:
        raise RankOneViolation(
            f"{len(bad)} of {len(keep)} singular matrices are not rank-one", bad
        )
    factors = [np.column_stack(c) if c else np.zeros((0, 0)) for c in cols]
    weights = np.array([terms[r][0] for r in keep])
    big_r = len(keep)
    ranks = [int(np.linalg.matrix_rank(f)) if f.size else 0 for f in factors]
    lhs = 2 * big_r + (4 - 1)
    bound = {"lhs": lhs, "factor_ranks": ranks, "rhs": sum(ranks), "holds": lhs <= sum(ranks)}
    return CpForm(weights=weights, factors=factors, terms=keep, sidiropoulos_bro=bound)


def _kron_split(op: EinsteinOperator, tol: float):
    """Factor ``op[i, j, k, l] = a[i, k] b[j, l]`` with orthogonal ``a``, ``b``."""
    i, j = op.left_modes
    # rearrange to rows (i, k), cols (j, l): a rank-one matrix iff separable
    rearr = np.transpose(op.data, (0, 2, 1, 3)).reshape((i * i, j * j), order="F")
    split = _rank_one(rearr, tol)
    if split is None:
        return None
    x, y = split
    a = x.reshape((i, i), order="F")
    b = y.reshape((j, j), order="F")
    # u orthogonal => a^T a and b^T b are reciprocal multiples of the identity
    scale = math.sqrt(i) / np.linalg.norm(a)
    return a * scale, b / scale


def extract_multilinear_svd(res, tol: float = RANK_ONE_TOL) -> MultilinearSvd:
    """Rewrite an order-4 SVD (or EVD) as a Tucker form with sparse core.

    Succeeds when ``u[i,j,k,l] = A[i,k] B[j,l]`` and ``v[i,j,k,l] = C[i,k] D[j,l]``.
    The core is the diagonal tensor of singular values, so it has at most
    ``I*J`` nonzeros out of ``I^2 J^2``.

    Raises
    ------
    SeparabilityViolation
    """
    _order4(res)
    left = _kron_split(res.u, tol)
    if left is None:
        raise SeparabilityViolation("left factor tensor is not Kronecker separable")
    if res.u is res.v:
        right = left
    else:
        right = _kron_split(res.v, tol)
        if right is None:
            raise SeparabilityViolation("right factor tensor is not Kronecker separable")
    return MultilinearSvd(core=res.d, factors=[left[0], left[1], right[0], right[1]])
