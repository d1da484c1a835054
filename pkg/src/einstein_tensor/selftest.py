"""Small-size property suites behind the ``selftest`` command.

Each check compares a library path with an independent route (plain loops,
textbook matrix algorithms on the flattened system, QR least squares) and
returns :class:`PropertyResult` rows.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import decomp, isomorphism, lstsq, solvers
from .core import (
    EinsteinOperator,
    DenseTensor,
    einstein_product,
    identity_tensor,
    transpose,
)
from .errors import OddOrder, RankOneViolation, SeparabilityViolation


@dataclass
class PropertyResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)


def textbook_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple loop, each entry summed in ascending contracted index."""
    m, k = a.shape
    p = b.shape[1]
    out = np.zeros((m, p))
    al, bl = a.tolist(), b.tolist()
    for i in range(m):
        for j in range(p):
            s = 0.0
            for r in range(k):
                s += al[i][r] * bl[r][j]
            out[i, j] = s
    return out


def _rel(x, y) -> float:
    x, y = np.asarray(x), np.asarray(y)
    den = np.linalg.norm(y)
    return float(np.linalg.norm(x - y) / (den if den else 1.0))


def _op(rng, shape) -> EinsteinOperator:
    return EinsteinOperator(rng.standard_normal(shape))


def check_isomorphism(rng, pairs: int = 200) -> list[PropertyResult]:
    shape = (2, 3, 2, 3)
    exact = True
    assoc = ident = inv = 0.0
    e = identity_tensor(shape[:2])
    for _ in range(pairs):
        a, b, c = _op(rng, shape), _op(rng, shape), _op(rng, shape)
        lhs = isomorphism.flatten(einstein_product(a, b))
        rhs = textbook_matmul(np.asarray(isomorphism.flatten(a)), np.asarray(isomorphism.flatten(b)))
        exact &= bool(np.array_equal(lhs, rhs))
        ab_c = einstein_product(einstein_product(a, b), c)
        a_bc = einstein_product(a, einstein_product(b, c))
        assoc = max(assoc, _rel(ab_c.data, a_bc.data))
        ident = max(
            ident,
            _rel(einstein_product(e, a).data, a.data),
            _rel(einstein_product(a, e).data, a.data),
        )
        ai = isomorphism.inverse(a)
        inv = max(
            inv,
            _rel(einstein_product(ai, a).data, e.data),
            _rel(einstein_product(a, ai).data, e.data),
        )
    return [
        PropertyResult("1", "homomorphism f(a*b) == f(a)f(b) exactly", exact),
        PropertyResult("1", "A1 associativity", assoc <= 1e-12, f"max rel {assoc:.2e}"),
        PropertyResult("1", "A2 two-sided identity", ident <= 1e-12, f"max rel {ident:.2e}"),
        PropertyResult("1", "A3 two-sided inverse", inv <= 1e-12, f"max rel {inv:.2e}"),
    ]


def _well_conditioned(rng, shape) -> EinsteinOperator:
    n = len(shape) // 2
    size = math.prod(shape[:n])
    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    mat = q @ np.diag(rng.uniform(1.0, 3.0, size))
    return isomorphism.unflatten(mat, shape[:n], shape[n:])


def check_inversion(rng) -> list[PropertyResult]:
    worst = 0.0
    for shape in [(2, 3, 2, 3), (3, 2, 3, 2), (2, 2, 2, 2, 2, 2), (2, 3, 2, 2, 3, 2)]:
        for _ in range(5):
            a = _well_conditioned(rng, shape)
            e = identity_tensor(a.left_modes)
            worst = max(worst, float(np.linalg.norm(einstein_product(isomorphism.inverse(a), a).data - e.data)))
    odd = True
    for shape in [(2, 3, 2), (2, 2, 2, 2, 2)]:
        try:
            isomorphism.inverse(DenseTensor(rng.standard_normal(shape)))
            odd = False
        except OddOrder:
            pass
    return [
        PropertyResult("2", "inverse(a)*a = E (order 4 and 6)", worst <= 1e-10, f"max {worst:.2e}"),
        PropertyResult("2", "odd order raises OddOrder", odd),
    ]


def check_decompositions(rng) -> list[PropertyResult]:
    rec = orth = eig = sv = 0.0
    for shape in [(3, 2, 3, 2), (4, 3, 4, 3), (2, 2, 2, 2, 2, 2)]:
        a = _op(rng, shape)
        nrm = np.linalg.norm(a.data)
        res = decomp.tensor_svd(a)
        ij = res.u.rows
        rec = max(rec, np.linalg.norm(res.reconstruct().data - a.data) / nrm)
        for f in (res.u, res.v):
            ft = isomorphism.flatten(f)
            orth = max(orth, np.linalg.norm(ft.T @ ft - np.eye(ij)) / math.sqrt(ij))
        ref = np.linalg.svd(np.asarray(isomorphism.flatten(a)), compute_uv=False)
        sv = max(sv, _rel(res.singular_values, ref))
        sym = EinsteinOperator(a.data + np.asarray(transpose(a).data), a.n)
        evd = decomp.tensor_evd(sym)
        snrm = np.linalg.norm(sym.data)
        rec = max(rec, np.linalg.norm(evd.reconstruct().data - sym.data) / snrm)
        pm = isomorphism.flatten(evd.p)
        orth = max(orth, np.linalg.norm(pm.T @ pm - np.eye(ij)) / math.sqrt(ij))
        for r, lam in enumerate(evd.eigenvalues):
            pr = DenseTensor(evd.eigenmatrix(r))
            eig = max(eig, np.linalg.norm((einstein_product(sym, pr) - pr * lam).data) / snrm)
    return [
        PropertyResult("3", "SVD/EVD reconstruction <= 1e-10 ||a||", rec <= 1e-10, f"{rec:.2e}"),
        PropertyResult("3", "orthogonality <= 1e-10 sqrt(IJ)", orth <= 1e-10, f"{orth:.2e}"),
        PropertyResult("3", "eigen-relation <= 1e-8 ||a||", eig <= 1e-8, f"{eig:.2e}"),
        PropertyResult("3", "singular values match matrix SVD", sv <= 1e-12, f"{sv:.2e}"),
    ]


def _orth(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q


def check_extraction(rng) -> list[PropertyResult]:
    i, j = 3, 2
    a_, b_, c_, d_ = _orth(rng, i), _orth(rng, j), _orth(rng, i), _orth(rng, j)
    sig = np.sort(rng.uniform(1.0, 5.0, i * j))[::-1]
    # singular tensors u[i,j,k,l] = A[i,k] B[j,l]: every slice is rank-one
    u = np.einsum("ik,jl->ijkl", a_, b_)
    v = np.einsum("ik,jl->ijkl", c_, d_)
    sigma = np.zeros((i, j, i, j))
    for r in range(i * j):
        k, l = r % i, r // i
        sigma[k, l, k, l] = sig[r]
    t = np.einsum("ijkl,klmn,pqmn->ijpq", u, sigma, v)
    res = decomp.tensor_svd(EinsteinOperator(t))
    cp = decomp.extract_cp(res)
    cp_err = np.linalg.norm(cp.full() - t) / np.linalg.norm(t)
    ml = decomp.extract_multilinear_svd(res)
    ml_err = np.linalg.norm(ml.full() - t) / np.linalg.norm(t)
    recovered = max(
        np.max(np.abs(np.abs(np.einsum("ik,ik->k", ml.factors[0], a_)) - 1.0)),
        np.max(np.abs(np.abs(np.einsum("jl,jl->l", ml.factors[1], b_)) - 1.0)),
    )
    generic = decomp.tensor_svd(_op(rng, (i, j, i, j)))
    cp_viol = ml_viol = False
    try:
        decomp.extract_cp(generic)
    except RankOneViolation:
        cp_viol = True
    try:
        decomp.extract_multilinear_svd(generic)
    except SeparabilityViolation:
        ml_viol = True
    return [
        PropertyResult("4", "CP round-trip <= 1e-10", cp_err <= 1e-10, f"{cp_err:.2e}"),
        PropertyResult("4", "multilinear SVD round-trip <= 1e-10", ml_err <= 1e-10, f"{ml_err:.2e}"),
        PropertyResult("4", "orthogonal factors recovered up to sign", recovered <= 1e-10, f"{recovered:.2e}"),
        PropertyResult("4", "generic tensor -> RankOneViolation", cp_viol),
        PropertyResult("4", "generic tensor -> SeparabilityViolation", ml_viol),
    ]


def spd_operator(rng, shape) -> EinsteinOperator:
    """Random symmetric, strictly diagonally dominant (hence SPD) operator."""
    n = len(shape) // 2
    size = math.prod(shape[:n])
    r = rng.uniform(-1.0, 1.0, (size, size))
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 0.0)
    r += np.diag(np.abs(r).sum(axis=1) + rng.uniform(0.5, 1.5, size))
    return isomorphism.unflatten(r, shape[:n], shape[n:])


def matrix_cgnr(m, b, tol, max_iter):
    x = np.zeros_like(b)
    bn = np.linalg.norm(b)
    r = b - m @ x
    z = m.T @ r
    p = z.copy()
    zz = z @ z
    out = []
    for _ in range(max_iter):
        w = m @ p
        alpha = zz / (w @ w)
        x = x + alpha * p
        r = b - m @ x
        out.append(x.copy())
        if np.linalg.norm(r) / bn <= tol:
            break
        z = m.T @ r
        zz_new = z @ z
        p = z + (zz_new / zz) * p
        zz = zz_new
    return out


def matrix_jacobi(m, b, tol, max_iter):
    d = np.diag(m)
    off = m - np.diag(d)
    x = np.zeros_like(b)
    bn = np.linalg.norm(b)
    out = []
    for _ in range(max_iter):
        x = (b - off @ x) / d
        out.append(x.copy())
        if np.linalg.norm(m @ x - b) / bn <= tol:
            break
    return out


def _trace(solve, op, b, cfg):
    steps = []
    solve(op, b, cfg, callback=lambda k, x: steps.append(np.array(x.vec)))
    return steps


def check_solver_oracles(rng, instances: int = 20) -> list[PropertyResult]:
    shapes = [(2, 3, 2, 3), (3, 3, 3, 3), (2, 2, 2, 2, 2, 2), (4, 2, 4, 2)]
    cfg = solvers.SolverConfig(tol=1e-12, max_iter=500)
    worst_b = worst_j = 0.0
    same_len = True
    for t in range(instances):
        op = spd_operator(rng, shapes[t % len(shapes)])
        b = DenseTensor(rng.standard_normal(op.left_modes))
        m = np.array(isomorphism.flatten(op))
        bv = np.array(b.vec)
        for solve, oracle, slot in (
            (solvers.bicg_solve, matrix_cgnr, "b"),
            (solvers.jacobi_solve, matrix_jacobi, "j"),
        ):
            mine = _trace(solve, op, b, cfg)
            ref = oracle(m, bv, cfg.tol, cfg.max_iter)
            same_len &= len(mine) == len(ref)
            dev = max(_rel(x, y) for x, y in zip(mine, ref))
            if slot == "b":
                worst_b = max(worst_b, dev)
            else:
                worst_j = max(worst_j, dev)
    return [
        PropertyResult("5", "BiCG iterates == matrix CGNR", worst_b <= 1e-13, f"{worst_b:.2e}"),
        PropertyResult("5", "Jacobi iterates == matrix Jacobi", worst_j <= 1e-13, f"{worst_j:.2e}"),
        PropertyResult("5", "iteration counts agree", same_len),
    ]


def qr_lstsq(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(mat)
    return np.linalg.solve(r, q.T @ rhs)


def check_least_squares(rng) -> list[PropertyResult]:
    dims = (4, 5, 3)
    worst = 0.0
    for layout in sorted(lstsq.TABLE2):
        shapes = lstsq.layout_shapes(layout, dims)
        a = rng.standard_normal(shapes["a"])
        b = rng.standard_normal(shapes["b"])
        x = lstsq.normal_system_for(layout, a, b, dims=dims).solve().data
        p, q, k = a.shape
        ref = qr_lstsq(a.reshape((p * q, k), order="F"), b.reshape(-1, order="F"))
        worst = max(worst, _rel(x, ref))
    a = rng.standard_normal((4, 5, 3))
    b = rng.standard_normal((4, 5))
    xr = rng.standard_normal(3)
    sysm = lstsq.normal_system_for(1, a, b)
    grad = 2 * np.asarray(sysm.gram.data) @ xr - 2 * np.asarray(sysm.rhs.data)
    h = 1e-6
    fd = np.array(
        [
            (lstsq.objective_mode3(a, b, xr + h * e) - lstsq.objective_mode3(a, b, xr - h * e)) / (2 * h)
            for e in np.eye(3)
        ]
    )
    gerr = float(np.max(np.abs(fd - grad)))
    t = DenseTensor(rng.standard_normal((2, 3, 4)))
    t3 = lstsq.transpose3(lstsq.transpose3(lstsq.transpose3(t)))
    return [
        PropertyResult("9", "six layouts match QR oracle", worst <= 1e-10, f"{worst:.2e}"),
        PropertyResult("9", "finite-difference gradient", gerr <= 1e-5, f"{gerr:.2e}"),
        PropertyResult("9", "transpose3 applied thrice is identity", bool(np.array_equal(t3.data, t.data))),
    ]


SUITES = {
    "1": check_isomorphism,
    "2": check_inversion,
    "3": check_decompositions,
    "4": check_extraction,
    "5": check_solver_oracles,
    "9": check_least_squares,
}


def run_selftest(seed: int = 0, suites=None) -> tuple[list[PropertyResult], float]:
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    results: list[PropertyResult] = []
    for key in suites or SUITES:
        results.extend(SUITES[key](rng))
    return results, time.perf_counter() - t0


def format_table(results: list[PropertyResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<6}{'property':<{width + 2}}{'result':<8}detail"]
    for r in results:
        lines.append(f"{r.suite:<6}{r.name:<{width + 2}}{'PASS' if r.passed else 'FAIL':<8}{r.detail}")
    return "\n".join(lines)
