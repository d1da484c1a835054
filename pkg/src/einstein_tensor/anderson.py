"""Discrete Schroedinger / Anderson Hamiltonians as even-order tensors.

``H = -Delta + lam * V`` on an ``n^d`` box with Dirichlet truncation.  The
hopping term puts ``-1`` on every nearest-neighbour pair and the center entry
of each slice carries the on-site potential ``lam * v_x`` with ``v_x`` i.i.d.
uniform on ``[-1, 1]``.  ``scaling="paper"`` divides every entry by ``dx^d``,
``dx = 1/(n+1)``, which rescales eigenvalues but leaves eigenvectors alone.

Random numbers come from numpy's PCG64 bit generator seeded with
``spec.seed``; site values are drawn in column-major site order as
``2*u - 1`` where ``u`` is a 53-bit uniform double.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DenseTensor, EinsteinOperator
from .decomp import tensor_evd
from .errors import InvalidSpec
from .isomorphism import flatten

__all__ = [
    "RNG_ALGORITHM",
    "LatticeSpec",
    "EigReport",
    "site_potential",
    "build_hamiltonian",
    "ipr",
    "eig_spectrum",
    "localization_sweep",
]

RNG_ALGORITHM = "numpy.random.PCG64/uniform53"


@dataclass(frozen=True)
class LatticeSpec:
    dim: int
    n: int
    lam: float = 0.0
    seed: int = 0
    scaling: str = "lattice"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise InvalidSpec(f"dim must be 1, 2 or 3, got {self.dim}")
        if int(self.n) < 2:
            raise InvalidSpec(f"n must be >= 2, got {self.n}")
        if not self.lam >= 0:
            raise InvalidSpec(f"disorder must be non-negative, got {self.lam}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must fit in an unsigned 64-bit integer")
        if self.scaling not in ("lattice", "paper"):
            raise InvalidSpec(f"unknown scaling {self.scaling!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def site_potential(spec: LatticeSpec) -> np.ndarray:
    """The ``(n,)*d`` array of on-site values ``v_x`` in ``[-1, 1]``."""
    gen = np.random.Generator(np.random.PCG64(int(spec.seed)))
    vals = 2.0 * gen.random(spec.n**spec.dim) - 1.0
    return vals.reshape((spec.n,) * spec.dim, order="F")


def build_hamiltonian(spec: LatticeSpec) -> EinsteinOperator:
    """Order-``2d`` Hamiltonian tensor for ``spec``."""
    d, n = spec.dim, spec.n
    scale = float((n + 1) ** d) if spec.scaling == "paper" else 1.0
    shape = (n,) * d
    arr = np.zeros(shape + shape, order="F")
    nodes = np.array(list(itertools.product(range(n), repeat=d)))
    centre = tuple(nodes.T)
    if spec.lam:
        arr[centre + centre] = spec.lam * site_potential(spec)[centre] * scale
    for axis in range(d):
        for step in (-1, 1):
            nb = nodes.copy()
            nb[:, axis] += step
            ok = (nb[:, axis] >= 0) & (nb[:, axis] < n)
            arr[tuple(nb[ok].T) + tuple(nodes[ok].T)] = -scale
    return EinsteinOperator._wrap(arr, d)


def ipr(psi) -> float:
    """Inverse participation ratio ``sum psi^4 / (sum psi^2)^2``."""
    v = np.asarray(psi, dtype=float).ravel()
    sq = v * v
    return float(np.sum(sq * sq) / np.sum(sq) ** 2)


@dataclass
class EigReport:
    eigenvalues: np.ndarray
    indices: list
    eigenvectors: list
    ipr: np.ndarray

    @property
    def selected_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.indices]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "indices": [int(i) for i in self.indices],
            "selected_eigenvalues": [float(e) for e in self.selected_eigenvalues],
            "ipr": [float(p) for p in self.ipr],
        }


def _select(evals: np.ndarray, which, energy, k) -> list[int]:
    if energy is not None:
        order = np.argsort(np.abs(evals - energy), kind="stable")
        return sorted(int(i) for i in order[:k])
    if which is None:
        return list(range(evals.size))
    if isinstance(which, slice):
        return list(range(evals.size))[which]
    if isinstance(which, tuple) and len(which) == 2:
        return list(range(evals.size))[slice(*which)]
    return [int(i) for i in np.atleast_1d(which)]


def eig_spectrum(h, which=None, *, energy: float | None = None, k: int = 1) -> EigReport:
    """Eigenpairs of a symmetric Hamiltonian through the tensor EVD.

    Parameters
    ----------
    which : slice, tuple or list of int, optional
        Indices into the ascending spectrum; a 2-tuple means ``(start, stop)``,
        a list names indices explicitly.  All by default.
    energy : float, optional
        Select the ``k`` eigenvalues closest to ``energy`` instead.
    """
    evd = tensor_evd(h)
    pm = flatten(evd.p)
    lattice = evd.p.left_modes
    idx = _select(evd.eigenvalues, which, energy, k)
    vecs = [DenseTensor(pm[:, i].reshape(lattice, order="F")) for i in idx]
    return EigReport(
        eigenvalues=evd.eigenvalues,
        indices=idx,
        eigenvectors=vecs,
        ipr=np.array([ipr(v.data) for v in vecs]),
    )


def _sweep_row(spec: LatticeSpec, which) -> dict:
    rep = eig_spectrum(build_hamiltonian(spec), which)
    return {
        "dim": spec.dim,
        "lam": spec.lam,
        "n": spec.n,
        "seed": spec.seed,
        "mean_ipr": float(np.mean(rep.ipr)),
        "max_ipr": float(np.max(rep.ipr)),
    }


def localization_sweep(
    specs: Iterable[LatticeSpec], which=None, workers: int = 1
) -> list[dict]:
    """Mean and max IPR for each spec, rows in input order."""
    specs: Sequence[LatticeSpec] = list(specs)
    if workers <= 1:
        return [_sweep_row(s, which) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _sweep_row(s, which), specs))
