import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from einstein_tensor import decomp
from einstein_tensor.core import EinsteinOperator, einstein_product, identity_tensor, is_orthogonal, transpose
from einstein_tensor.errors import (
    NonSquare,
    NotSymmetric,
    OddOrder,
    RankOneViolation,
    SeparabilityViolation,
    UnsupportedOrder,
)
from einstein_tensor.isomorphism import flatten, unflatten
from einstein_tensor.poisson import build_poisson_operator

import oracles


def _orth(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q


@pytest.fixture
def sym4(rng):
    a = rng.standard_normal((3, 2, 3, 2))
    return EinsteinOperator(a + transpose(a).data)


class TestSvd:
    def test_identity(self):
        res = decomp.tensor_svd(identity_tensor((2, 3)))
        assert np.array_equal(res.singular_values, np.ones(6))
        assert np.array_equal(res.u.data, identity_tensor((2, 3)).data)
        assert np.array_equal(res.v.data, identity_tensor((2, 3)).data)
        assert res.rank == 6

    def test_diagonal(self, rng):
        c = rng.uniform(0.5, 5.0, 6)
        d = unflatten(np.diag(c), (2, 3), (2, 3))
        assert np.allclose(decomp.tensor_svd(d).singular_values, np.sort(c)[::-1], rtol=1e-15)

    def test_matches_matrix_svd(self, rng):
        a = EinsteinOperator(rng.standard_normal((3, 2, 3, 2)))
        res = decomp.tensor_svd(a)
        ref = np.linalg.svd(oracles.unfold(a.data, 2), compute_uv=False)
        assert oracles.rel(res.singular_values, ref) <= 1e-12

    def test_factors(self, rng):
        a = EinsteinOperator(rng.standard_normal((2, 3, 2, 3)))
        res = decomp.tensor_svd(a)
        assert oracles.rel(res.reconstruct().data, a.data) <= 1e-10
        for f in (res.u, res.v):
            assert is_orthogonal(f)
            m = flatten(f)
            assert np.linalg.norm(m.T @ m - np.eye(6)) <= 1e-10 * math.sqrt(6)
        # sign convention lives on the left vectors; right ones follow
        m = flatten(res.u)
        first = m[np.argmax(np.abs(m) > 1e-12, axis=0), np.arange(6)]
        assert np.all(first > 0)

    def test_rank(self, rng):
        x = rng.standard_normal((6, 2))
        a = unflatten(x @ x.T, (2, 3), (2, 3))
        assert decomp.tensor_svd(a).rank == 2

    def test_order6(self, rng):
        a = EinsteinOperator(rng.standard_normal((2, 2, 2, 2, 2, 2)))
        assert oracles.rel(decomp.tensor_svd(a).reconstruct().data, a.data) <= 1e-10

    def test_errors(self):
        with pytest.raises(OddOrder):
            decomp.tensor_svd(np.zeros((2, 2, 2)))
        with pytest.raises(NonSquare):
            decomp.tensor_svd(np.zeros((2, 3, 3, 2)))


class TestEvd:
    def test_scaled_identity(self):
        res = decomp.tensor_evd(identity_tensor((2, 3)) * 2.0)
        assert np.allclose(res.eigenvalues, 2.0, rtol=0, atol=1e-15)
        assert is_orthogonal(res.p)

    def test_laplacian_spectrum(self):
        op = build_poisson_operator(2, 6)
        ref = np.linalg.eigvalsh(oracles.kron_laplacian_2d(6) * 49.0)
        assert oracles.rel(decomp.tensor_evd(op).eigenvalues, ref) <= 1e-13

    def test_spectral_sum_round_trip(self, rng):
        p = _orth(rng, 6)
        w = np.sort(rng.uniform(-3, 3, 6))
        a = unflatten(p @ np.diag(w) @ p.T, (3, 2), (3, 2))
        res = decomp.tensor_evd(a)
        assert oracles.rel(res.eigenvalues, w) <= 1e-12
        assert oracles.rel(res.reconstruct().data, a.data) <= 1e-12

    def test_eigen_relation_per_eigenmatrix(self, sym4):
        res = decomp.tensor_evd(sym4)
        nrm = np.linalg.norm(sym4.data)
        for r, lam in enumerate(res.eigenvalues):
            pr = res.eigenmatrix(r)
            lhs = einstein_product(sym4, pr, 2).data
            assert np.linalg.norm(lhs - lam * pr) <= 1e-8 * nrm

    def test_not_symmetric(self, rng):
        with pytest.raises(NotSymmetric):
            decomp.tensor_evd(rng.standard_normal((2, 3, 2, 3)))


class TestOuterSum:
    def test_rank_one(self, rng):
        x = rng.standard_normal(6)
        y = rng.standard_normal(6)
        a = unflatten(np.outer(x, y), (2, 3), (2, 3))
        res = decomp.tensor_svd(a)
        sig, um, vm = decomp.as_outer_sum(res)[0]
        assert oracles.rel(sig * np.einsum("ij,kl->ijkl", um, vm), a.data) <= 1e-12

    def test_full_sum(self, rng):
        a = rng.standard_normal((2, 3, 2, 3))
        total = sum(s * np.einsum("ij,kl->ijkl", u, v) for s, u, v in decomp.as_outer_sum(decomp.tensor_svd(a)))
        assert oracles.rel(total, a) <= 1e-10

    def test_order6_unsupported(self, rng):
        res = decomp.tensor_svd(rng.standard_normal((2,) * 6))
        with pytest.raises(UnsupportedOrder):
            decomp.as_outer_sum(res)
        with pytest.raises(UnsupportedOrder):
            decomp.extract_cp(res)


def _separable(rng, i, j, vals):
    a, b, c, d = _orth(rng, i), _orth(rng, j), _orth(rng, i), _orth(rng, j)
    core = np.zeros((i, j, i, j))
    for r in range(i * j):
        core[r % i, r // i, r % i, r // i] = vals[r]
    return np.einsum("ik,jl,klmn,pm,qn->ijpq", a, b, core, c, d), (a, b, c, d)


class TestCp:
    def test_recover_factors(self, rng):
        vals = np.linspace(6, 1, 6)
        t, (a, b, c, d) = _separable(rng, 3, 2, vals)
        cp = decomp.extract_cp(decomp.tensor_svd(t))
        assert oracles.rel(cp.full(), t) <= 1e-10
        for r in range(6):
            k, l = r % 3, r // 3
            want = np.einsum("i,j,p,q->ijpq", a[:, k], b[:, l], c[:, k], d[:, l])
            got = cp.weights[r] * np.einsum("i,j,p,q->ijpq", *(f[:, r] for f in cp.factors))
            assert oracles.rel(got, vals[r] * want) <= 1e-10
        assert cp.sidiropoulos_bro["lhs"] == 2 * 6 + 3

    def test_generic_violation_lists_terms(self, rng):
        with pytest.raises(RankOneViolation) as err:
            decomp.extract_cp(decomp.tensor_svd(rng.standard_normal((3, 2, 3, 2))))
        assert err.value.offending == list(range(6))

    def test_symmetric_identical_factors(self, rng):
        a = _orth(rng, 3)
        sig = [3.0, 2.0, 1.0]
        t = sum(s * np.einsum("i,j,k,l->ijkl", a[:, r], a[:, r], a[:, r], a[:, r]) for r, s in enumerate(sig))
        assert np.array_equal(t, np.transpose(t, (1, 0, 2, 3)))
        for res in (decomp.tensor_svd(t), decomp.tensor_evd(t)):
            cp = decomp.extract_cp(res)
            assert len(cp.terms) == 3
            fa, fb, fc, fd = cp.factors
            for x, y in ((fa, fb), (fa, fc), (fb, fd)):
                assert np.allclose(np.abs(x), np.abs(y), atol=1e-10)
            assert oracles.rel(cp.full(), t) <= 1e-10

    def test_evd_path_shares_factors(self, rng):
        a, b = _orth(rng, 2), _orth(rng, 3)
        u = np.kron(b, a)
        w = np.sort(rng.uniform(-4, 4, 6))
        t = unflatten(u @ np.diag(w) @ u.T, (2, 3), (2, 3))
        cp = decomp.extract_cp(decomp.tensor_evd(t))
        assert np.array_equal(cp.factors[0], cp.factors[2])
        assert oracles.rel(cp.full(), t.data) <= 1e-10


class TestMultilinearSvd:
    def test_recover(self, rng):
        vals = np.linspace(9, 1, 12)
        t, facs = _separable(rng, 4, 3, vals)
        ml = decomp.extract_multilinear_svd(decomp.tensor_svd(t))
        assert oracles.rel(ml.full(), t) <= 1e-10
        for got, want in zip(ml.factors, facs):
            assert np.allclose(np.abs(got), np.abs(want), atol=1e-10)
        # diagonal-pattern core: at most I*J nonzeros
        assert np.count_nonzero(np.abs(ml.core.data) > 1e-14) <= 12

    def test_identity_gives_identity_factors(self):
        ml = decomp.extract_multilinear_svd(decomp.tensor_svd(identity_tensor((2, 3))))
        for f, n in zip(ml.factors, (2, 3, 2, 3)):
            assert np.allclose(np.abs(f), np.eye(n), atol=1e-14)

    def test_generic_orthogonal(self, rng):
        u = unflatten(_orth(rng, 6), (2, 3), (2, 3))
        res = decomp.tensor_svd(einstein_product(u, transpose(u)) * 1.0 + einstein_product(u, u))
        with pytest.raises(SeparabilityViolation):
            decomp.extract_multilinear_svd(res)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([(2, 2), (2, 3), (3, 1), (2, 2, 2)]), st.integers(0, 2**32 - 1))
def test_svd_properties(left, seed):
    g = np.random.default_rng(seed)
    a = EinsteinOperator(g.standard_normal(left + left))
    res = decomp.tensor_svd(a)
    ij = math.prod(left)
    assert oracles.rel(res.reconstruct().data, a.data) <= 1e-10
    for f in (res.u, res.v):
        m = flatten(f)
        assert np.linalg.norm(m.T @ m - np.eye(ij)) <= 1e-10 * math.sqrt(ij)
    ref = np.linalg.svd(flatten(a), compute_uv=False)
    assert oracles.rel(res.singular_values, ref) <= 1e-12
    assert np.all(np.diff(res.singular_values) <= 0)
