"""``einstein-tensor`` command line.

Subcommands ``poisson``, ``anderson``, ``decompose``, ``lstsq`` and
``selftest``.  Every run writes ``manifest.json`` (plus its tensors and CSVs)
into ``--out``; a one-line summary goes to standard output.

Exit codes: 0 on success/convergence, 2 when an iterative solve hits
``--max-iter``, 1 on any error (message on standard error).
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, anderson, decomp, io, lstsq, poisson, selftest
from .core import EinsteinOperator, as_operator, einstein_product, transpose
from .errors import Diverged, TensorError
from .isomorphism import flatten
from .solvers import SolverConfig, Status, write_residual_csv

THREADS_ENV = "EINSTEIN_TENSOR_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which would collide with MaxIter
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunManifest:
    command: str
    flags: dict
    seed: int | None
    version: str = __version__
    rng_algorithm: str | None = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    results: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(self.to_json())
        return path


def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v

    return parse


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _index_range(text):
    """``a:b`` (half-open), ``a:`` or a single index ``a``."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return slice(int(lo) if lo else None, int(hi) if hi else None)
        i = int(text)
        return slice(i, i + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}")


def _layout(text):
    if text == "einstein":
        return text
    try:
        v = int(text)
    except ValueError:
        v = None
    if v not in lstsq.TABLE2:
        raise argparse.ArgumentTypeError(f"layout must be 1..6 or 'einstein', got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="einstein-tensor", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory (default out/<command>)")
    common.add_argument(
        "--threads", type=_int_at_least(1), help=f"BLAS/worker thread cap (env {THREADS_ENV})"
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("poisson", parents=[common], help="tensor Poisson solve")
    ps.add_argument("--dim", type=int, choices=(2, 3), default=2)
    ps.add_argument("--n", type=_int_at_least(2), default=30, help="interior points per side")
    ps.add_argument("--method", choices=("bicg", "jacobi", "direct"), default="bicg")
    ps.add_argument("--tol", type=_positive_float, default=1e-8)
    ps.add_argument("--max-iter", type=_int_at_least(1), default=10_000)
    ps.add_argument(
        "--source", default="manufactured", help="manufactured, constant or file:PATH"
    )
    ps.add_argument("--scaling", choices=poisson.SCALINGS, default="paper")
    ps.set_defaults(func=cmd_poisson)

    pa = sub.add_parser("anderson", parents=[common], help="Anderson eigenvectors")
    pa.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
    pa.add_argument("--n", type=_int_at_least(2), default=100)
    pa.add_argument("--lambda", dest="lam", type=_nonneg_float, default=0.0)
    pa.add_argument("--seed", type=_int_at_least(0), default=0)
    pa.add_argument("--which", type=_index_range, default=slice(0, 4), help="a:b into the ascending spectrum")
    pa.add_argument("--energy", type=float, help="pick the --k eigenvalues closest to this")
    pa.add_argument("--k", type=_int_at_least(1), default=1)
    pa.add_argument("--scaling", choices=("lattice", "paper"), default="lattice")
    pa.set_defaults(func=cmd_anderson)

    pd = sub.add_parser("decompose", parents=[common], help="tensor SVD/EVD/CP/MLSVD")
    pd.add_argument("--kind", choices=("svd", "evd", "cp", "mlsvd"), required=True)
    pd.add_argument("--input", type=Path, required=True, help="TNS-JSON or .tns operator")
    pd.add_argument("--via", choices=("svd", "evd"), default="svd", help="base factorization for cp/mlsvd")
    pd.add_argument("--rank-tol", type=_positive_float, default=decomp.RANK_TOL)
    pd.add_argument("--sym-tol", type=_positive_float, default=decomp.SYM_TOL)
    pd.add_argument("--tol", type=_positive_float, default=decomp.RANK_ONE_TOL, help="rank-one tolerance")
    pd.set_defaults(func=cmd_decompose)

    pl = sub.add_parser("lstsq", parents=[common], help="least squares via normal equations")
    pl.add_argument("--a", type=Path, required=True)
    pl.add_argument("--b", type=Path, required=True)
    pl.add_argument("--layout", type=_layout, help="1..6 for third-order A, or 'einstein'")
    pl.add_argument("--ridge", type=_nonneg_float, default=0.0)
    pl.set_defaults(func=cmd_lstsq)

    pt = sub.add_parser("selftest", parents=[common], help="run the property suites")
    pt.add_argument("--seed", type=_int_at_least(0), default=0)
    pt.add_argument("--suite", action="append", choices=sorted(selftest.SUITES))
    pt.set_defaults(func=cmd_selftest)
    return p


def _flags(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        if isinstance(v, slice):
            v = f"{'' if v.start is None else v.start}:{'' if v.stop is None else v.stop}"
        elif isinstance(v, Path):
            v = str(v)
        out[k] = v
    return out


def _save_tensor(out: Path, stem: str, t, outputs: list) -> None:
    for suffix in (".json", ".tns"):
        io.save(t, out / f"{stem}{suffix}")
        outputs.append(f"{stem}{suffix}")


def _relres(x, ref) -> float:
    x, ref = np.asarray(x), np.asarray(ref)
    den = np.linalg.norm(ref)
    return float(np.linalg.norm(x - ref) / (den if den else 1.0))


def cmd_poisson(args, man: RunManifest, out: Path) -> int:
    if args.source.startswith("file:"):
        source = io.load(args.source[5:]).data
    elif args.source in ("manufactured", "constant"):
        source = args.source
    else:
        raise UsageError(f"--source must be manufactured, constant or file:PATH, got {args.source!r}")
    prob = poisson.PoissonProblem.build(args.dim, args.n, source, args.scaling)
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    t0 = time.perf_counter()
    try:
        rep = poisson.solve_poisson(prob, args.method, cfg)
        status = rep.status.value
    except Diverged as exc:
        rep, status = exc.report, "Diverged"
    man.timings["solve_s"] = time.perf_counter() - t0
    _save_tensor(out, "solution", rep.x, man.outputs)
    write_residual_csv(rep, out / "residuals.csv")
    poisson.write_grid_csv(rep.x, out / "grid.csv")
    man.outputs += ["residuals.csv", "grid.csv"]
    res = {
        "status": status,
        "iterations": rep.iterations,
        "final_residual": rep.final_residual,
    }
    if args.source == "manufactured":
        exact = poisson.manufactured_solution(args.dim, args.n)
        if args.dim == 3 and args.scaling == "paper":
            # the dx^3-scaled system solves for dx * v
            exact = exact * prob.dx
        res.update(poisson.error_report(rep.x, exact))
    man.results = res
    summary = (
        f"poisson dim={args.dim} n={args.n} {args.method}: {status} after "
        f"{rep.iterations} iterations, residual {rep.final_residual:.3e}"
    )
    if "max_err" in res:
        summary += f", max error {res['max_err']:.3e}"
    print(summary)
    if status == Status.CONVERGED.value:
        return 0
    if status == Status.MAX_ITER.value:
        return 2
    print(f"error: solver stopped with status {status}", file=sys.stderr)
    return 1


def write_lattice_csv(psi, path: Path) -> None:
    """``i[,j[,k]],psi`` with 1-based sites, first index fastest."""
    psi = np.asarray(psi)
    d, n = psi.ndim, psi.shape[0]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k"][:d] + ["psi"])
        for idx in itertools.product(range(n), repeat=d):
            idx = idx[::-1]
            w.writerow([i + 1 for i in idx] + [f"{psi[idx]:.17g}"])


def cmd_anderson(args, man: RunManifest, out: Path) -> int:
    spec = anderson.LatticeSpec(args.dim, args.n, args.lam, args.seed, args.scaling)
    man.rng_algorithm = anderson.RNG_ALGORITHM
    t0 = time.perf_counter()
    h = anderson.build_hamiltonian(spec)
    rep = anderson.eig_spectrum(h)
    man.timings["eig_s"] = time.perf_counter() - t0
    idx = anderson._select(rep.eigenvalues, args.which, args.energy, args.k)
    if not idx:
        raise UsageError("--which selects no eigenvectors")
    for i in idx:
        name = f"eigvec_{i:05d}.csv"
        write_lattice_csv(rep.eigenvectors[i].data, out / name)
        man.outputs.append(name)
    man.results = {
        "spec": spec.to_dict(),
        "eigenvalues": [float(e) for e in rep.eigenvalues],
        "indices": idx,
        "selected_eigenvalues": [float(rep.eigenvalues[i]) for i in idx],
        "ipr": [float(rep.ipr[i]) for i in idx],
        "mean_ipr": float(np.mean(rep.ipr)),
    }
    print(
        f"anderson dim={args.dim} n={args.n} lambda={args.lam} seed={args.seed}: "
        f"{rep.eigenvalues.size} eigenpairs, mean IPR {np.mean(rep.ipr):.4e}, "
        f"wrote {len(idx)} eigenvectors"
    )
    return 0


def _orth_residual(u: EinsteinOperator) -> float:
    m = np.asarray(flatten(u))
    return float(np.linalg.norm(m.T @ m - np.eye(m.shape[1])))


def cmd_decompose(args, man: RunManifest, out: Path) -> int:
    a = as_operator(io.load(args.input))
    nrm = float(np.linalg.norm(a.data))
    kind = args.kind
    base = "evd" if kind == "evd" else (args.via if kind in ("cp", "mlsvd") else "svd")
    if base == "evd":
        res = decomp.tensor_evd(a, args.sym_tol, args.rank_tol)
    else:
        res = decomp.tensor_svd(a, args.rank_tol)
    resid = {"reconstruction": _relres(res.reconstruct().data, a.data)}
    if kind == "svd":
        for stem, t in (("u", res.u), ("d", res.d), ("v", res.v)):
            _save_tensor(out, stem, t, man.outputs)
        resid["orthogonality_u"] = _orth_residual(res.u)
        resid["orthogonality_v"] = _orth_residual(res.v)
        spectrum = {"singular_values": [float(s) for s in res.singular_values]}
    elif kind == "evd":
        for stem, t in (("p", res.p), ("d", res.d)):
            _save_tensor(out, stem, t, man.outputs)
        resid["orthogonality_p"] = _orth_residual(res.p)
        pd = einstein_product(res.p, res.d, ordered=False)
        ap = einstein_product(a, res.p, ordered=False)
        resid["eigen_relation"] = _relres(ap.data, pd.data) if nrm else 0.0
        spectrum = {"eigenvalues": [float(s) for s in res.eigenvalues]}
    elif kind == "cp":
        cp = decomp.extract_cp(res, args.tol)
        _save_tensor(out, "weights", cp.weights, man.outputs)
        for i, f in enumerate(cp.factors, 1):
            _save_tensor(out, f"factor_{i}", f, man.outputs)
        resid["cp_reconstruction"] = _relres(cp.full(), a.data)
        spectrum = {"terms": cp.terms, "sidiropoulos_bro": cp.sidiropoulos_bro}
    else:
        ml = decomp.extract_multilinear_svd(res, args.tol)
        _save_tensor(out, "core", ml.core, man.outputs)
        for i, f in enumerate(ml.factors, 1):
            _save_tensor(out, f"factor_{i}", f, man.outputs)
        resid["mlsvd_reconstruction"] = _relres(ml.full(), a.data)
        spectrum = {}
    man.results = {
        "kind": kind,
        "base": base,
        "rank": int(res.rank),
        "tolerances": {"rank_tol": args.rank_tol, "sym_tol": args.sym_tol, "rank_one_tol": args.tol},
        "residuals": resid,
        **spectrum,
    }
    print(f"decompose {kind}: rank {res.rank}, reconstruction {resid['reconstruction']:.3e}")
    return 0


def _layout_dims(layout: int, shape) -> tuple:
    pattern = lstsq.TABLE2[layout][0]
    size = dict(zip(pattern, shape))
    return tuple(size[c] for c in "IJK")


def cmd_lstsq(args, man: RunManifest, out: Path) -> int:
    a, b = io.load(args.a), io.load(args.b)
    layout = args.layout or (1 if a.order == 3 else "einstein")
    if layout == "einstein":
        op = as_operator(a)
        x = lstsq.ls_solve_einstein(op, b, args.ridge)
        fit = einstein_product(op, x, op.n)
        gram = einstein_product(transpose(op), op, ordered=False)
        cond = float(np.linalg.cond(flatten(gram)))
    else:
        if a.order != 3:
            raise UsageError(f"layout {layout} needs a third-order A, got order {a.order}")
        sysm = lstsq.normal_system_for(layout, a, b, dims=_layout_dims(layout, a.shape))
        x = sysm.solve(args.ridge)
        fit = lstsq.contract_mode3(a, x.data)
        cond = sysm.gram_condition()
    residual = float(np.linalg.norm(fit.data - b.data))
    _save_tensor(out, "x", x, man.outputs)
    report = {
        "layout": layout,
        "residual": residual,
        "relative_residual": residual / (float(np.linalg.norm(b.data)) or 1.0),
        "gram_condition": cond,
        "ridge": args.ridge,
    }
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    man.outputs.append("report.json")
    man.results = report
    print(f"lstsq layout={layout}: residual {residual:.6e}, gram condition {cond:.3e}")
    return 0


def cmd_selftest(args, man: RunManifest, out: Path) -> int:
    results, elapsed = selftest.run_selftest(args.seed, args.suite)
    man.timings["selftest_s"] = elapsed
    print(selftest.format_table(results))
    failed = [r for r in results if not r.passed]
    man.results = {
        "passed": len(results) - len(failed),
        "failed": len(failed),
        "properties": [asdict(r) for r in results],
    }
    print(f"{len(results) - len(failed)}/{len(results)} properties passed in {elapsed:.1f}s")
    return 1 if failed else 0


def _thread_cap(args):
    n = args.threads
    if n is None and os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer")
    return threadpool_limits(limits=n) if n else contextlib.nullcontext()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        out = args.out or Path("out") / args.command
        out.mkdir(parents=True, exist_ok=True)
        man = RunManifest(
            command=args.command, flags=_flags(args), seed=getattr(args, "seed", None)
        )
        t0 = time.perf_counter()
        with _thread_cap(args):
            code = args.func(args, man, out)
        man.timings["total_s"] = time.perf_counter() - t0
        man.outputs.sort()
        man.write(out)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TensorError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
