"""Command-line front end.

Each subcommand runs a desk-scale experiment over the library primitives and
emits plot-ready RunRecord rows (CSV or JSON lines; no figures are drawn).
All randomness hangs off --seed, so identical invocations produce identical
output bytes.  Wall-clock timings are opt-in via --timing because they break
byte-for-byte reproducibility.

Set KRYLOV_GRAD_THREADS to parallelize probe and sample loops; results are
accumulated in a fixed order either way.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .estimators import (
    ProbeConfig,
    SensitivityQuery,
    dense_network_sensitivity,
    generate_hamiltonian_dataset,
    hamiltonian_loss_and_grad,
    hamiltonian_train,
    network_sensitivity,
    trace_estimate,
)
from .gradient import (
    boundary_term_diagnostic,
    dense_bilinear_reference,
    dense_quadform_reference,
    gradient_forward_only,
    projected_sensitivity,
    relative_gradient_error,
)
from .io import RunRecord, emit_records, load_edge_list, load_matrix_market
from .lanczos import LanczosConfig, lanczos_factorize
from .operator import (
    DenseSymmetricOperator,
    RbfKernelOperator,
    SparseGraphOperator,
    build_pauli_dictionary,
)
from .spectral import LOG, phase_function, quadrature_value, resolve_function

DENSE_REFERENCE_CAP = 3000


def _worker_count() -> int:
    raw = os.environ.get("KRYLOV_GRAD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _rel_err(value: float, reference: float) -> float:
    diff = abs(value - reference)
    if reference == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / abs(reference)


def _parse_diag(spec: str) -> np.ndarray:
    if spec.startswith("lin:"):
        try:
            lo, hi, num = spec[4:].split(":")
            return np.linspace(float(lo), float(hi), int(num))
        except ValueError:
            raise ValueError(f"malformed diagonal spec {spec!r}; want lin:LO:HI:N") from None
    try:
        return np.array([float(tok) for tok in spec.split(",")])
    except ValueError:
        raise ValueError(f"malformed diagonal spec {spec!r}") from None


def _random_directions(n: int, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng([seed, 1729])
    dirs = []
    for _ in range(count):
        M = rng.standard_normal((n, n))
        E = M + M.T
        dirs.append(E / np.linalg.norm(E))
    return dirs


def _operator_from_args(args) -> tuple[object, str, np.ndarray]:
    """Build (operator, source description, theta) from the matrix flags."""
    ndirs = getattr(args, "dirs", 0)
    if getattr(args, "rbf", None):
        try:
            n, d = (int(tok) for tok in args.rbf.split(","))
        except ValueError:
            raise ValueError(f"malformed --rbf spec {args.rbf!r}; want N,D") from None
        rng = np.random.default_rng([args.seed, 7])
        op = RbfKernelOperator(rng.standard_normal((n, d)))
        theta = np.array([float(t) for t in args.theta.split(",")]) if args.theta else np.array([0.9, 1.1, 0.15])
        if theta.shape != (3,):
            raise ValueError("--theta for an RBF operator needs exactly l,sf,sn")
        return op, f"rbf:{n},{d}", theta
    if getattr(args, "diag", None):
        values = _parse_diag(args.diag)
        entries = np.diag(values)
        dirs = _random_directions(values.shape[0], ndirs, args.seed) if ndirs else []
        op = DenseSymmetricOperator(entries, dirs)
        return op, f"diag:{values.shape[0]}", np.zeros(len(dirs))
    if getattr(args, "matrix", None):
        loaded = load_matrix_market(args.matrix)
        if isinstance(loaded, SparseGraphOperator):
            if ndirs:
                raise ValueError("parameter directions need a dense matrix source")
            return loaded, args.matrix, np.zeros(0)
        dirs = _random_directions(loaded.dim, ndirs, args.seed) if ndirs else []
        op = DenseSymmetricOperator(loaded.matrix(np.zeros(0)), dirs)
        return op, args.matrix, np.zeros(len(dirs))
    raise ValueError("no matrix source given; use --matrix, --rbf or --diag")


def _dense_pieces(op, theta):
    """Dense matrix and parameter directions when the operator is desk scale."""
    if isinstance(op, RbfKernelOperator):
        return op.dense_matrices(theta)
    if isinstance(op, DenseSymmetricOperator):
        return op.matrix(theta), op.param_directions
    if isinstance(op, SparseGraphOperator):
        return op.dense(), []
    raise ValueError(f"no dense form for {type(op).__name__}")


def _probe_vector(spec: str, n: int, seed: int) -> np.ndarray:
    if spec == "e1":
        u = np.zeros(n)
        u[0] = 1.0
        return u
    if spec == "rademacher":
        return ProbeConfig(count=1, distribution="rademacher", seed=seed).sample(n)[0]
    if spec.startswith("file:"):
        u = np.loadtxt(spec[5:], dtype=float).ravel()
        if u.shape != (n,):
            raise ValueError(f"probe file has {u.shape[0]} entries, operator needs {n}")
        return u
    raise ValueError(f"unknown probe spec {spec!r}; use e1, rademacher or file:PATH")


def _maybe_time(args, metrics: dict, t0: float) -> None:
    if args.timing:
        metrics["wall_seconds"] = time.perf_counter() - t0


# -- subcommands ---------------------------------------------------------------


def _cmd_quadform(args) -> list[RunRecord]:
    t0 = time.perf_counter()
    op, source, theta = _operator_from_args(args)
    f = resolve_function(args.function)
    u = _probe_vector(args.probe, op.dim, args.seed)
    cfg = LanczosConfig(steps=args.steps, reorth=args.reorth)
    fac = lanczos_factorize(op, theta, u, cfg)
    value = quadrature_value(fac, f)
    metrics = {
        "value": value,
        "beta_residual": fac.beta_residual,
        "steps_used": fac.steps_used,
    }
    if op.dim <= args.dense_cap or args.force_dense:
        matrix, _ = _dense_pieces(op, theta)
        ref, _ = dense_quadform_reference(matrix, [], u, f)
        metrics["ref_value"] = ref
        metrics["value_rel_err"] = _rel_err(value, ref)
    _maybe_time(args, metrics, t0)
    params = {
        "source": source,
        "n": op.dim,
        "m": args.steps,
        "function": args.function,
        "reorth": args.reorth,
        "probe": args.probe,
        "seed": args.seed,
        "theta": list(theta),
    }
    return [RunRecord("quadform", params, metrics)]


def _cmd_gradcheck(args) -> list[RunRecord]:
    op, source, theta = _operator_from_args(args)
    if op.num_params == 0:
        raise ValueError("gradcheck needs a parameterized source (--rbf or --dirs)")
    f = resolve_function(args.function)
    u = _probe_vector(args.probe, op.dim, args.seed)
    sweep = [int(tok) for tok in args.param_sweep.split(",")]
    have_ref = op.dim <= args.dense_cap or args.force_dense
    if have_ref:
        matrix, dirs = _dense_pieces(op, theta)
        ref_value, ref_grad = dense_quadform_reference(matrix, dirs, u, f)
    records = []
    for m in sweep:
        t0 = time.perf_counter()
        rep = gradient_forward_only(op, theta, u, f, LanczosConfig(steps=m, reorth=args.reorth))
        grad_out = [complex(g) for g in rep.grad] if f.complex_valued else [float(np.real(g)) for g in rep.grad]
        metrics = {
            "value": rep.value,
            "grad": grad_out,
            "beta_residual": rep.beta_residual,
            "steps_used": rep.steps_used,
        }
        if have_ref:
            metrics["value_rel_err"] = _rel_err(rep.value, ref_value)
            metrics["grad_rel_err"] = relative_gradient_error(rep.grad, ref_grad)
        _maybe_time(args, metrics, t0)
        params = {
            "source": source,
            "n": op.dim,
            "m": m,
            "function": args.function,
            "reorth": args.reorth,
            "probe": args.probe,
            "seed": args.seed,
            "theta": list(theta),
        }
        records.append(RunRecord("gradcheck", params, metrics))
    return records


def _cmd_logdet(args) -> list[RunRecord]:
    t0 = time.perf_counter()
    op, source, theta = _operator_from_args(args)
    probes = ProbeConfig(count=args.probes, distribution=args.distribution, seed=args.seed)
    cfg = LanczosConfig(steps=args.steps, reorth=args.reorth)
    est = trace_estimate(op, theta, LOG, probes, cfg, max_workers=_worker_count())
    metrics = {"estimate": est.mean, "stderr": est.stderr}
    if op.dim <= args.dense_cap or args.force_dense:
        matrix, _ = _dense_pieces(op, theta)
        sign, ref = np.linalg.slogdet(matrix)
        if sign <= 0:
            raise ValueError("matrix is not positive definite; log-determinant undefined")
        metrics["ref_logdet"] = float(ref)
        metrics["abs_err"] = abs(est.mean - float(ref))
        metrics["err_over_stderr"] = (
            metrics["abs_err"] / est.stderr if est.stderr > 0 else 0.0
        )
    _maybe_time(args, metrics, t0)
    params = {
        "source": source,
        "n": op.dim,
        "m": args.steps,
        "probes": args.probes,
        "distribution": args.distribution,
        "reorth": args.reorth,
        "seed": args.seed,
    }
    return [RunRecord("logdet", params, metrics)]


def _cmd_netsens(args) -> list[RunRecord]:
    t0 = time.perf_counter()
    if args.graph.endswith(".mtx"):
        graph = load_matrix_market(args.graph, as_dense=False)
    else:
        graph = load_edge_list(args.graph)
    kind = args.kind.upper()
    query = SensitivityQuery(kind=kind, i=args.i, j=args.j, ell=args.ell if kind == "SC" else None)
    value = network_sensitivity(graph, query, args.steps)
    metrics = {"value": value}
    if graph.dim <= args.dense_cap or args.force_dense:
        ref = dense_network_sensitivity(graph, query)
        metrics["ref_value"] = ref
        metrics["rel_err"] = _rel_err(value, ref)
    _maybe_time(args, metrics, t0)
    params = {
        "graph": args.graph,
        "kind": kind,
        "i": args.i,
        "j": args.j,
        "ell": args.ell if kind == "SC" else None,
        "n": graph.dim,
        "m": args.steps,
        "seed": args.seed,
    }
    return [RunRecord("netsens", params, metrics)]


def _cmd_hamlearn(args) -> list[RunRecord]:
    op = build_pauli_dictionary(args.sites)
    data = generate_hamiltonian_dataset(op, num_samples=args.samples, seed=args.seed)
    rng = np.random.default_rng([args.seed, 11])
    theta0 = data.theta_star + 0.1 * rng.standard_normal(op.num_params)
    workers = _worker_count()

    records = []
    base = {
        "L": args.sites,
        "p": op.num_params,
        "samples": args.samples,
        "m": args.m,
        "lr": args.lr,
        "optimizer": args.optimizer,
        "seed": args.seed,
    }
    _, grad0 = hamiltonian_loss_and_grad(op, theta0, data, args.m, max_workers=workers)
    init_metrics = {}
    if args.sites <= 8:
        H_dirs = [op.dense_term(j) for j in range(op.num_params)]
        H = op.dense_matrix(theta0)
        ref_grad = np.zeros(op.num_params)
        for s in range(data.num_samples):
            _, g = dense_bilinear_reference(
                H, H_dirs, data.targets[s], data.states[s], phase_function(data.times[s])
            )
            ref_grad += -2.0 * np.real(g)
        init_metrics["initial_grad_rel_err"] = relative_gradient_error(grad0, ref_grad)
    records.append(RunRecord("hamlearn-init", {**base, "step": -1}, init_metrics))

    for rec in hamiltonian_train(
        op, data, theta0, args.steps, args.lr, args.m,
        optimizer=args.optimizer, max_workers=workers,
    ):
        records.append(
            RunRecord(
                "hamlearn",
                {**base, "step": rec.step},
                {"loss": rec.loss, "param_error": rec.param_error},
            )
        )
    return records


def _cmd_errorstudy(args) -> list[RunRecord]:
    op, source, theta = _operator_from_args(args)
    if not isinstance(op, DenseSymmetricOperator) or op.num_params == 0:
        raise ValueError("errorstudy needs a dense parameterized source (--diag/--matrix with --dirs)")
    f = resolve_function(args.function)
    u = _probe_vector(args.probe, op.dim, args.seed)
    sweep = [int(tok) for tok in args.param_sweep.split(",")]
    records = []
    for m in sweep:
        t0 = time.perf_counter()
        cfg = LanczosConfig(steps=m, reorth=args.reorth)
        diag = boundary_term_diagnostic(op, theta, u, f, cfg, args.param_index, h=args.fd_step)
        k = diag.S.shape[0]
        fac = lanczos_factorize(op, theta, u, cfg)
        G = projected_sensitivity(fac, f).G
        bound = 2.0 * diag.beta_residual * float(np.linalg.norm(G[k - 1, :]) * np.linalg.norm(diag.eta))
        metrics = {
            "beta_residual": diag.beta_residual,
            "boundary_term": diag.boundary_term,
            "boundary_bound": bound,
            "fd_dphi": diag.fd_dphi,
            "direct_term": diag.direct_term,
            "grad_error": abs(diag.fd_dphi - diag.direct_term),
            "identity_residual": abs(diag.fd_dphi - diag.direct_term - diag.boundary_term),
        }
        _maybe_time(args, metrics, t0)
        params = {
            "source": source,
            "n": op.dim,
            "m": m,
            "function": args.function,
            "reorth": args.reorth,
            "param_index": args.param_index,
            "fd_step": args.fd_step,
            "seed": args.seed,
        }
        records.append(RunRecord("errorstudy", params, metrics))
    return records


# -- argument parsing -----------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, steps_help: str = "Lanczos steps m") -> None:
    parser.add_argument("--steps", type=int, default=30, help=steps_help)
    parser.add_argument("--reorth", choices=("none", "full"), default="full")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("--out", default="-", help="output path, '-' for stdout")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    parser.add_argument(
        "--function",
        default="log",
        help="scalar function: log, exp, sqrt, inv, identity or phase:<t>",
    )
    parser.add_argument("--timing", action="store_true", help="include wall times (breaks byte determinism)")
    parser.add_argument("--dense-cap", dest="dense_cap", type=int, default=DENSE_REFERENCE_CAP)
    parser.add_argument("--force-dense", dest="force_dense", action="store_true")


def _add_matrix_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--matrix", help="MatrixMarket file (coordinate real symmetric)")
    parser.add_argument("--rbf", help="N,D synthetic kernel operator on random inputs")
    parser.add_argument("--diag", help="diagonal spec: comma values or lin:LO:HI:N")
    parser.add_argument("--dirs", type=int, default=0, help="number of seeded random parameter directions")
    parser.add_argument("--theta", default=None, help="operator parameters (RBF: l,sf,sn)")
    parser.add_argument("--probe", default="rademacher", help="probe vector: e1, rademacher or file:PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krylov-grad",
        description="Quadratic forms of matrix functions and their forward-only parameter gradients.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quadform", help="single quadratic-form estimate")
    _add_common(p)
    _add_matrix_source(p)
    p.set_defaults(func=_cmd_quadform)

    p = sub.add_parser("gradcheck", help="forward/gradient error sweep against the dense reference")
    _add_common(p)
    _add_matrix_source(p)
    p.add_argument("--param-sweep", default="10,20,30,40,60,80", help="comma list of m values")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("logdet", help="stochastic log-determinant estimate")
    _add_common(p)
    _add_matrix_source(p)
    p.add_argument("--probes", type=int, default=32)
    p.add_argument("--distribution", choices=("rademacher", "gaussian"), default="rademacher")
    p.set_defaults(func=_cmd_logdet)

    p = sub.add_parser("netsens", help="graph communicability sensitivities")
    _add_common(p)
    p.add_argument("--graph", required=True, help="edge-list file or .mtx")
    p.add_argument("--kind", choices=("tn", "sc"), required=True)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--ell", type=int, default=None, help="center node for SC")
    p.set_defaults(func=_cmd_netsens)

    p = sub.add_parser("hamlearn", help="spin-chain Hamiltonian recovery by gradient descent")
    _add_common(p, steps_help="training steps")
    p.add_argument("--sites", type=int, default=4)
    p.add_argument("--samples", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--m", type=int, default=16, help="Lanczos steps per quadrature")
    p.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    p.set_defaults(func=_cmd_hamlearn, steps=400)

    p = sub.add_parser("errorstudy", help="residual-scaled gradient error diagnostics per m")
    _add_common(p)
    _add_matrix_source(p)
    p.add_argument("--param-sweep", default="2,4,6,8,10", help="comma list of m values")
    p.add_argument("--param-index", type=int, default=0)
    p.add_argument("--fd-step", dest="fd_step", type=float, default=1e-6)
    p.set_defaults(func=_cmd_errorstudy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        records = args.func(args)
        emit_records(records, args.format, args.out)
    except Exception as exc:  # CLI boundary: report, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
