"""Dense multilinear algebra under the Einstein product.

Even-order tensors with the contracted product ``*_N`` form a group that is
isomorphic, through column-major matricization, to the general linear group.
This package builds tensor inversion, SVD/EVD, iterative multilinear solvers,
tensor-format Poisson and Anderson problems and multilinear least squares on
top of that correspondence.
"""
from .core import (
    DenseTensor,
    EinsteinOperator,
    as_operator,
    as_tensor,
    einstein_product,
    frobenius_norm,
    identity_tensor,
    inner_product,
    is_diagonal,
    is_orthogonal,
    is_symmetric,
    matrix_slice,
    mode_n_product,
    transpose,
)
from .decomp import (
    CpForm,
    EvdResult,
    MultilinearSvd,
    SvdResult,
    as_outer_sum,
    extract_cp,
    extract_multilinear_svd,
    tensor_evd,
    tensor_svd,
)
from .errors import *  # noqa: F401,F403
from .isomorphism import direct_solve, flatten, inverse, unflatten
from .solvers import SolveReport, SolverConfig, Status, bicg_solve, jacobi_solve

__version__ = "0.1.0"
