import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from einstein_tensor.core import DenseTensor, einstein_product, identity_tensor
from einstein_tensor.errors import Diverged, NonSquare, ShapeMismatch, ZeroDiagonal
from einstein_tensor.isomorphism import direct_solve, flatten, unflatten
from einstein_tensor.poisson import PoissonProblem, solve_poisson
from einstein_tensor.solvers import (
    SolverConfig,
    Status,
    bicg_solve,
    jacobi_solve,
    write_residual_csv,
)

import oracles


def spd(rng, left, margin=0.5):
    size = math.prod(left)
    r = rng.uniform(-1, 1, (size, size))
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 0.0)
    r += np.diag(np.abs(r).sum(axis=1) + margin)
    return unflatten(r, left, left)


def trace(solve, a, b, cfg):
    steps = []
    rep = solve(a, b, cfg, callback=lambda k, x: steps.append(np.array(x.vec)))
    return rep, steps


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(tol=0)
        with pytest.raises(ValueError):
            SolverConfig(max_iter=0)


class TestBicg:
    def test_identity_one_step(self, rng):
        b = rng.standard_normal((2, 3))
        rep = bicg_solve(identity_tensor((2, 3)), b)
        assert rep.status is Status.CONVERGED and rep.iterations == 1
        assert np.allclose(rep.x.data, b, rtol=1e-15)

    def test_recovers_against_direct(self, rng):
        a = spd(rng, (3, 2))
        x = rng.standard_normal((3, 2))
        b = einstein_product(a, x, 2)
        rep = bicg_solve(a, b, SolverConfig(tol=1e-12))
        assert rep.converged
        assert oracles.rel(rep.x.data, direct_solve(a, b).data) <= 1e-10

    def test_nonsymmetric(self, rng):
        a = unflatten(rng.standard_normal((6, 6)) + 6 * np.eye(6), (2, 3), (2, 3))
        b = rng.standard_normal((2, 3))
        rep = bicg_solve(a, b, SolverConfig(tol=1e-11))
        assert rep.converged
        assert oracles.rel(rep.x.data, direct_solve(a, b).data) <= 1e-9

    def test_matches_matrix_cgnr(self, rng):
        a = spd(rng, (2, 2, 2))
        b = DenseTensor(rng.standard_normal((2, 2, 2)))
        cfg = SolverConfig(tol=1e-12)
        rep, steps = trace(bicg_solve, a, b, cfg)
        ref = oracles.matrix_cgnr(np.array(flatten(a)), np.array(b.vec), cfg.tol, cfg.max_iter)
        assert len(steps) == len(ref) == rep.iterations
        for x, y in zip(steps, ref):
            assert oracles.rel(x, y) <= 1e-13

    def test_breakdown(self):
        rep = bicg_solve(np.zeros((2, 2, 2, 2)), np.ones((2, 2)))
        assert rep.status is Status.BREAKDOWN and not rep.converged

    def test_max_iter(self):
        rep = solve_poisson(PoissonProblem.build(2, 12, "constant"), "bicg", SolverConfig(tol=1e-14, max_iter=3))
        assert rep.status is Status.MAX_ITER and rep.iterations == 3

    def test_zero_rhs(self):
        rep = bicg_solve(identity_tensor((2,)), np.zeros(2))
        assert rep.converged and rep.iterations == 0
        assert np.array_equal(rep.x.data, np.zeros(2))

    def test_errors(self):
        with pytest.raises(ShapeMismatch):
            bicg_solve(identity_tensor((2, 3)), np.ones((3, 2)))
        with pytest.raises(NonSquare):
            bicg_solve(np.ones((2, 3, 3, 2)), np.ones((2, 3)))

    def test_history_optional(self, rng):
        a = spd(rng, (3,))
        rep = bicg_solve(a, np.ones(3), SolverConfig(record_history=False))
        assert rep.residuals == [] and rep.converged


class TestJacobi:
    def test_diagonal_one_step(self, rng):
        d = rng.uniform(1, 3, (2, 3))
        a = unflatten(np.diag(d.ravel(order="F")), (2, 3), (2, 3))
        b = rng.standard_normal((2, 3))
        rep = jacobi_solve(a, b)
        assert rep.iterations == 1 and rep.converged
        assert np.array_equal(rep.x.data, b / d)

    def test_matches_matrix_jacobi(self, rng):
        a = spd(rng, (3, 2), margin=0.2)
        b = DenseTensor(rng.standard_normal((3, 2)))
        cfg = SolverConfig(tol=1e-12)
        rep, steps = trace(jacobi_solve, a, b, cfg)
        ref = oracles.matrix_jacobi(np.array(flatten(a)), np.array(b.vec), cfg.tol, cfg.max_iter)
        assert len(steps) == len(ref) == rep.iterations
        for x, y in zip(steps, ref):
            assert oracles.rel(x, y) <= 1e-14

    def test_zero_diagonal(self):
        with pytest.raises(ZeroDiagonal):
            jacobi_solve(unflatten(np.array([[0.0, 1.0], [1.0, 2.0]]), (2,), (2,)), np.ones(2))

    def test_diverged_carries_report(self):
        a = unflatten(np.array([[1.0, 3.0], [3.0, 1.0]]), (2,), (2,))
        with pytest.raises(Diverged) as err:
            jacobi_solve(a, np.array([1.0, 0.0]))
        rep = err.value.report
        assert rep.final_residual > 1e6 and rep.iterations == len(rep.residuals)


class TestPoissonComparison:
    def test_bicg_fewer_iterations_than_jacobi(self):
        prob = PoissonProblem.build(2, 30, "constant")
        cfg = SolverConfig(tol=1e-8, max_iter=20_000)
        b, j = solve_poisson(prob, "bicg", cfg), solve_poisson(prob, "jacobi", cfg)
        assert b.converged and j.converged
        assert b.iterations < j.iterations


def test_residual_csv(tmp_path, rng):
    rep = bicg_solve(spd(rng, (4,)), np.ones(4), SolverConfig(tol=1e-12))
    path = write_residual_csv(rep, tmp_path / "r.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["iter", "residual"]
    assert [int(r[0]) for r in rows[1:]] == list(range(1, rep.iterations + 1))
    assert [float(r[1]) for r in rows[1:]] == rep.residuals


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(2,), (3, 2), (2, 2, 2), (4, 3)]), st.integers(0, 2**32 - 1))
def test_cgnr_descent_and_posthoc_residual(left, seed):
    g = np.random.default_rng(seed)
    a = spd(g, left, margin=g.uniform(0.1, 2.0))
    b = DenseTensor(g.standard_normal(left))
    cfg = SolverConfig(tol=1e-10)
    rep, steps = trace(bicg_solve, a, b, cfg)
    m = np.array(flatten(a))
    # CGNR minimizes phi(x) = ||A x - b||^2 over growing Krylov spaces
    phi = [float(np.sum((m @ x - b.vec) ** 2)) for x in steps]
    scale = float(b.vec @ b.vec)
    assert all(p2 <= p1 + 1e-13 * scale for p1, p2 in zip(phi, phi[1:]))
    assert rep.converged
    actual = np.linalg.norm(m @ rep.x.vec - b.vec) / np.linalg.norm(b.vec)
    assert actual <= cfg.tol
