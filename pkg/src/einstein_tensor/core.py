"""Dense real tensors in column-major storage, contracted products, slices and
structural predicates.

Index convention
----------------
The mathematics is usually written 1-based: entry ``(i_1, ..., i_N)`` of an
``I_1 x ... x I_N`` tensor sits at buffer offset
``i_1 - 1 + sum_{k>=2} (i_k - 1) prod_{l<k} I_l``.  This package is 0-based
everywhere (modes, indices, slice positions), so the same entry is
``t[i_1 - 1, ..., i_N - 1]`` at offset ``sum_k idx_k prod_{l<k} I_l``.
That is the only place the two conventions meet.
"""
from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    InvalidOrder,
    NonSquare,
    OddOrder,
    ShapeMismatch,
)

__all__ = [
    "DenseTensor",
    "EinsteinOperator",
    "as_tensor",
    "as_operator",
    "einstein_product",
    "mode_n_product",
    "matrix_slice",
    "transpose",
    "identity_tensor",
    "is_symmetric",
    "is_diagonal",
    "is_orthogonal",
    "frobenius_norm",
    "inner_product",
]

def _check_shape(shape) -> tuple[int, ...]:
    dims = tuple(int(d) for d in shape)
    if len(dims) == 0:
        raise InvalidOrder("tensor order must be >= 1")
    if any(d < 1 for d in dims):
        raise ShapeMismatch(f"every extent must be >= 1, got {dims}")
    return dims


class DenseTensor:
    """Order-N real tensor with an immutable column-major buffer.

    Parameters
    ----------
    data : array_like
        Either an N-dimensional array (its logical indexing is kept), or a flat
        sequence in column-major order when ``shape`` is given.
    shape : sequence of int, optional
        Extents ``(I_1, ..., I_N)`` used to fold a flat ``data`` buffer.

    Examples
    --------
    >>> t = DenseTensor([1, 2, 3, 4, 5, 6], shape=(2, 3))
    >>> t.get((1, 0))
    2.0
    """

    __slots__ = ("_data",)
    __array_priority__ = 20

    def __init__(self, data, shape=None):
        arr = np.asarray(data, dtype=np.float64)
        if shape is not None:
            dims = _check_shape(shape)
            if arr.size != math.prod(dims):
                raise ShapeMismatch(
                    f"{arr.size} values cannot fill a tensor of shape {dims}"
                )
            arr = arr.reshape(-1, order="F").reshape(dims, order="F")
        else:
            _check_shape(arr.shape)
        arr = np.array(arr, dtype=np.float64, order="F", copy=True)
        arr.flags.writeable = False
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray, **kwargs):
        # trusted fast path for freshly computed arrays: no defensive copy
        obj = cls.__new__(cls)
        arr = np.asfortranarray(arr, dtype=np.float64)
        _check_shape(arr.shape)
        arr.flags.writeable = False
        obj._data = arr
        for key, val in kwargs.items():
            setattr(obj, key, val)
        return obj

    def _like(self, arr: np.ndarray) -> "DenseTensor":
        return DenseTensor._wrap(arr)

    @property
    def data(self) -> np.ndarray:
        """Read-only N-dimensional view (Fortran-contiguous)."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    @property
    def vec(self) -> np.ndarray:
        """Column-major flat buffer (a view, no copy)."""
        return self._data.reshape(-1, order="F")

    def _check_index(self, idx) -> tuple[int, ...]:
        idx = tuple(int(i) for i in np.atleast_1d(idx))
        if len(idx) != self.order:
            raise IndexOutOfRange(f"index {idx} has wrong length for order {self.order}")
        for i, d in zip(idx, self.shape):
            if not 0 <= i < d:
                raise IndexOutOfRange(f"index {idx} out of range for shape {self.shape}")
        return idx

    def get(self, idx) -> float:
        return float(self._data[self._check_index(idx)])

    def with_entry(self, idx, value) -> "DenseTensor":
        """Return a copy with one entry replaced."""
        idx = self._check_index(idx)
        arr = np.array(self._data, order="F", copy=True)
        arr[idx] = value
        return self._like(arr)

    def offset(self, idx) -> int:
        """Column-major buffer offset of a (0-based) multi-index."""
        idx = self._check_index(idx)
        return int(np.ravel_multi_index(idx, self.shape, order="F"))

    def copy(self) -> "DenseTensor":
        return self._like(np.array(self._data, order="F", copy=True))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"

    # scalar/elementwise arithmetic; shapes must agree exactly
    def _other(self, other):
        if isinstance(other, DenseTensor):
            if other.shape != self.shape:
                raise ShapeMismatch(f"shapes {self.shape} and {other.shape} differ")
            return other._data
        if np.ndim(other) != 0:
            raise TypeError("only scalars or equally shaped tensors are supported")
        return float(other)

    def __add__(self, other):
        return self._like(self._data + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._like(self._data - self._other(other))

    def __rsub__(self, other):
        return self._like(self._other(other) - self._data)

    def __mul__(self, other):
        return self._like(self._data * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._like(self._data / self._other(other))

    def __neg__(self):
        return self._like(-self._data)


class EinsteinOperator(DenseTensor):
    """Even-order tensor of shape ``(I_1..I_N, J_1..J_N)`` acting by ``*_N``.

    ``n`` is the number of left (row) modes; it defaults to half the order.
    """

    __slots__ = ("_n",)

    def __init__(self, data, n: int | None = None, shape=None):
        super().__init__(data, shape=shape)
        self._n = _split(self.order, n)

    @classmethod
    def _wrap(cls, arr, n=None):
        obj = super()._wrap(arr)
        obj._n = _split(obj.order, n)
        return obj

    def _like(self, arr):
        return EinsteinOperator._wrap(arr, self._n)

    @property
    def n(self) -> int:
        return self._n

    @property
    def left_modes(self) -> tuple[int, ...]:
        return self.shape[: self._n]

    @property
    def right_modes(self) -> tuple[int, ...]:
        return self.shape[self._n :]

    @property
    def rows(self) -> int:
        return math.prod(self.left_modes)

    @property
    def cols(self) -> int:
        return math.prod(self.right_modes)

    @property
    def is_square(self) -> bool:
        return self.left_modes == self.right_modes

    def __repr__(self):
        return f"EinsteinOperator(left={self.left_modes}, right={self.right_modes})"


def _split(order: int, n: int | None) -> int:
    if n is None:
        if order % 2:
            raise OddOrder(f"an operator needs an even order, got {order}")
        return order // 2
    n = int(n)
    if n < 1 or 2 * n != order:
        raise OddOrder(f"order {order} cannot be split into two blocks of {n} modes")
    return n


def as_tensor(x) -> DenseTensor:
    if isinstance(x, DenseTensor):
        return x
    return DenseTensor(x)


def as_operator(x, n: int | None = None) -> EinsteinOperator:
    """Interpret ``x`` as an Einstein operator (raises OddOrder if impossible)."""
    if isinstance(x, EinsteinOperator) and (n is None or n == x.n):
        return x
    if isinstance(x, DenseTensor):
        return EinsteinOperator._wrap(x.data, n)
    return EinsteinOperator(x, n)


def _ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product whose every entry is summed left to right.

    ``out[i, j] = (((a[i,0] b[0,j]) + a[i,1] b[1,j]) + ...)``, i.e. ascending
    contracted index, so results are reproducible bit for bit.
    """
    k = a.shape[1]
    out = a[:, 0:1] * b[0:1, :]
    tmp = np.empty_like(out)
    for r in range(1, k):
        np.multiply(a[:, r : r + 1], b[r : r + 1, :], out=tmp)
        out += tmp
    return out


def einstein_product(a, b, n: int | None = None, *, ordered: bool = True):
    """Contract the last ``n`` modes of ``a`` with the first ``n`` modes of ``b``.

    ``(a *_n b)[i.., k..] = sum_{j..} a[i.., j..] b[j.., k..]``.  With
    ``n = 1`` on matrices this is the ordinary matrix product.

    Parameters
    ----------
    a, b : DenseTensor or array_like
    n : int, optional
        Contraction order.  Defaults to ``a.n`` when ``a`` is an
        :class:`EinsteinOperator`.
    ordered : bool
        Sum in ascending column-major contracted index (deterministic).  Set
        False to hand large products to BLAS.

    Returns
    -------
    DenseTensor, EinsteinOperator or float
        An operator when both inputs are operators split at ``n``; a float
        when every mode is contracted.
    """
    a_t, b_t = as_tensor(a), as_tensor(b)
    if n is None:
        if not isinstance(a_t, EinsteinOperator):
            raise InvalidOrder("contraction order n is required for plain tensors")
        n = a_t.n
    n = int(n)
    if n < 0 or n > a_t.order or n > b_t.order:
        raise InvalidOrder(
            f"cannot contract {n} modes of orders {a_t.order} and {b_t.order}"
        )
    shared_a = a_t.shape[a_t.order - n :]
    shared_b = b_t.shape[:n]
    if shared_a != shared_b:
        raise ShapeMismatch(f"contracted extents differ: {shared_a} vs {shared_b}")
    lead = a_t.shape[: a_t.order - n]
    trail = b_t.shape[n:]
    k = math.prod(shared_a)
    am = a_t.data.reshape((math.prod(lead), k), order="F")
    bm = b_t.data.reshape((k, math.prod(trail)), order="F")
    if ordered:
        cm = _ordered_matmul(am, bm)
    else:
        cm = am @ bm
    out_shape = lead + trail
    if not out_shape:
        return float(cm[0, 0])
    arr = cm.reshape(out_shape, order="F")
    if (
        isinstance(a_t, EinsteinOperator)
        and isinstance(b_t, EinsteinOperator)
        and a_t.n == n == b_t.n
    ):
        return EinsteinOperator._wrap(arr, n)
    return DenseTensor._wrap(arr)


def mode_n_product(t, m, mode: int) -> DenseTensor:
    """Tucker mode product ``t x_mode m`` (0-based ``mode``).

    ``out[.., h, ..] = sum_j t[.., j, ..] m[h, j]``; the contracted mode keeps
    its position, only its extent changes to ``m.shape[0]``.
    """
    t = as_tensor(t)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch("mode product needs a matrix")
    if not 0 <= mode < t.order:
        raise InvalidOrder(f"mode {mode} out of range for order {t.order}")
    if m.shape[1] != t.shape[mode]:
        raise ShapeMismatch(
            f"matrix has {m.shape[1]} columns but mode {mode} has extent {t.shape[mode]}"
        )
    moved = np.tensordot(m, t.data, axes=([1], [mode]))
    return DenseTensor._wrap(np.moveaxis(moved, 0, mode))


def matrix_slice(t, fixed: Mapping[int, int]) -> DenseTensor:
    """Pin the modes in ``fixed`` (mode -> index) and return the free subtensor.

    For an order-4 ``S``, ``matrix_slice(S, {2: k, 3: l})[i, j] == S[i, j, k, l]``.
    """
    t = as_tensor(t)
    sel: list = [slice(None)] * t.order
    for mode, idx in fixed.items():
        if not 0 <= mode < t.order:
            raise IndexOutOfRange(f"mode {mode} out of range for order {t.order}")
        if not 0 <= idx < t.shape[mode]:
            raise IndexOutOfRange(
                f"index {idx} out of range for mode {mode} of extent {t.shape[mode]}"
            )
        sel[mode] = int(idx)
    if len(fixed) >= t.order:
        raise IndexOutOfRange("at least one mode must stay free")
    return DenseTensor._wrap(t.data[tuple(sel)])


def transpose(t) -> EinsteinOperator:
    """Swap the row and column blocks: ``out[i.., j..] = t[j.., i..]``."""
    if isinstance(t, DenseTensor) and not isinstance(t, EinsteinOperator):
        if t.order % 2:
            raise OddOrder(f"transpose needs an even order, got {t.order}")
    op = as_operator(t)
    n = op.n
    perm = tuple(range(n, 2 * n)) + tuple(range(n))
    return EinsteinOperator._wrap(np.transpose(op.data, perm), n)


def identity_tensor(left_modes: Sequence[int]) -> EinsteinOperator:
    """``E[i.., j..] = prod_k delta(i_k, j_k)``."""
    dims = _check_shape(left_modes)
    size = math.prod(dims)
    return EinsteinOperator._wrap(
        np.eye(size).reshape(dims + dims, order="F"), len(dims)
    )


def _square(t) -> EinsteinOperator:
    op = as_operator(t)
    if not op.is_square:
        raise NonSquare(f"left modes {op.left_modes} != right modes {op.right_modes}")
    return op


def is_symmetric(t, tol: float = 1e-10) -> bool:
    """``||t - t^T||_F <= tol * ||t||_F``."""
    op = _square(t)
    mat = op.data.reshape((op.rows, op.cols), order="F")
    return np.linalg.norm(mat - mat.T) <= tol * np.linalg.norm(mat)


def is_diagonal(t, tol: float = 1e-10) -> bool:
    """Nonzeros only where every row index equals its paired column index."""
    op = _square(t)
    mat = op.data.reshape((op.rows, op.cols), order="F")
    off = mat - np.diag(np.diag(mat))
    return np.linalg.norm(off) <= tol * np.linalg.norm(mat)


def is_orthogonal(t, tol: float = 1e-10) -> bool:
    """``||U^T *_N U - E||_F <= tol * ||U||_F``."""
    op = _square(t)
    mat = op.data.reshape((op.rows, op.cols), order="F")
    resid = np.linalg.norm(mat.T @ mat - np.eye(op.cols))
    return resid <= tol * np.linalg.norm(mat)


def frobenius_norm(t) -> float:
    """``sqrt(sum t^2)`` with a correctly rounded sum, so it is layout invariant."""
    v = as_tensor(t).vec
    return math.sqrt(math.fsum((v * v).tolist()))


def inner_product(a, b) -> float:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(a.vec @ b.vec)
