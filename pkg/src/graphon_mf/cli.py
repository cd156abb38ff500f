"""Command-line front end.

Exit codes: 0 on success, 1 when an experiment assertion fails, 2 on usage,
configuration or output errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, dynamics, experiments, kernels, meanfield, sampling, spectral
from ._rng import derive_seed

log = logging.getLogger("graphon_mf")

EXPERIMENT_COMMANDS = {
    "converge": "convergence",
    "threshold": "threshold_sweep",
    "sparse-cx": "sparse_counterexample",
    "opnorm": "empirical_opnorm",
    "equilibrium": "equilibrium_crosscheck",
}


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p):
    p.add_argument("--output-dir", "-o", default=None, help="directory for CSV/JSON outputs")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_experiment_flags(p, kind):
    defaults = experiments.default_config(kind)
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--kernel", help=f"kernel spec or JSON path (default {defaults.kernel})")
    p.add_argument("--model", help="preset name or JSON path (default sis)")
    p.add_argument("--beta", type=float, help="infection rate")
    if kind == "threshold_sweep":
        p.add_argument("--betas", type=_floats, help="increasing infection rates to sweep")
    else:
        p.add_argument("--N", type=_ints, dest="N_list", help="comma-separated graph sizes")
        p.add_argument("--kappa-c", type=float, help="kappa_N = c * N**-gamma: the constant c")
        p.add_argument("--gamma", type=float, dest="kappa_gamma", help="kappa_N = c * N**-gamma: the exponent")
        p.add_argument("--n-seeds", type=int, help=f"number of replicas (default {len(defaults.seeds)})")
        p.add_argument("--vertex-mode", choices=sampling.VERTEX_MODES)
        p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--M", type=int, help="grid cells")
    p.add_argument("--T", type=float, help="time horizon")
    p.add_argument("--dt", type=float, help="mean-field step size")
    p.add_argument("--record-dt", type=float, help="recording interval")
    p.add_argument("--initial", type=_floats, help="initial infected fraction (scalar or per-cell list)")
    _add_common(p)


def build_parser():
    parser = argparse.ArgumentParser(prog="graphon-mf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="store_true", help="print version and golden-file hash")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("sample", help="sample a graph from a kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--vertex-mode", choices=sampling.VERTEX_MODES, default="grid")
    p.add_argument("--format", choices=("text", "binary"), default="text")
    _add_common(p)

    p = sub.add_parser("simulate", help="simulate the Markov process on a sampled graph")
    p.add_argument("--kernel", required=True)
    p.add_argument("--model", default="sis")
    p.add_argument("--beta", type=float)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--vertex-mode", choices=sampling.VERTEX_MODES, default="grid")
    p.add_argument("--initial", default="0.5", help="infected fraction or 'degree_zero'")
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--record-dt", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("meanfield", help="solve the grid mean-field equations")
    p.add_argument("--kernel", required=True)
    p.add_argument("--model", default="sis")
    p.add_argument("--beta", type=float)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--record-dt", type=float, default=None)
    p.add_argument("--initial", type=_floats, default=[0.01], help="infected fraction (scalar or per-cell list)")
    _add_common(p)

    p = sub.add_parser("spectral", help="print eigenvalues as 'index,lambda' lines")
    p.add_argument("--kernel", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--K", type=int, default=None, help="number of eigenvalues (default M)")
    p.add_argument("--eigenfunctions", action="store_true", help="also write eigenfunctions.csv (cell, index, value)")
    p.add_argument("--output-dir", "-o", default=None, help="directory for eigenfunctions.csv")
    p.add_argument("-v", "--verbose", action="count", default=0)

    for name, kind in EXPERIMENT_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {kind.replace('_', ' ')} experiment")
        _add_experiment_flags(p, kind)
    return parser


# ---------------------------------------------------------------------------
# commands


def _output_dir(args):
    out = Path(args.output_dir or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory not writable: {exc}") from None
    return out


def _cmd_sample(args):
    out = _output_dir(args)
    kernel = kernels.parse_kernel(args.kernel)
    seed = derive_seed(args.seed or 0, "graph")
    g = sampling.sample_graph(kernel, args.N, args.kappa, args.vertex_mode, seed)
    if args.format == "text":
        path = out / "graph.txt"
        sampling.write_edgelist(g, path)
    else:
        path = out / "graph.bin"
        sampling.write_binary(g, path)
    print(f"{g.n} vertices, {g.n_edges} edges -> {path}")
    return 0


def _cmd_simulate(args):
    out = _output_dir(args)
    kernel = kernels.parse_kernel(args.kernel)
    model = dynamics.parse_model(args.model, args.beta)
    base = args.seed or 0
    g = sampling.sample_graph(kernel, args.N, args.kappa, args.vertex_mode, derive_seed(base, "graph"))
    if args.initial in ("degree_zero", "degree-zero"):
        initial = dynamics.DegreeZero()
    else:
        vals = _floats(args.initial)
        initial = dynamics.FromDensity(meanfield.sis_initial(vals, len(vals)))
    proc = dynamics.init_process(g, model, initial, derive_seed(base, "process"))
    traj = proc.run(args.T, args.M, args.record_dt)
    traj.to_csv(out / "trajectory.csv")
    summary = {
        "N": g.n, "edges": g.n_edges, "events": traj.n_events, "seed": base,
        "final_mean_density": dict(zip(traj.labels, traj.mean_density[-1].tolist())),
    }
    (out / "simulate.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def _cmd_meanfield(args):
    out = _output_dir(args)
    kernel = kernels.parse_kernel(args.kernel)
    model = dynamics.parse_model(args.model, args.beta)
    u0 = meanfield.sis_initial(args.initial, len(args.initial))
    sol = meanfield.solve(kernel, model, u0, args.M, args.dt, args.T, args.record_dt)
    sol.to_csv(out / "meanfield.csv")
    final = dict(zip(sol.labels, sol.mean()[-1].tolist()))
    print(json.dumps({"T": args.T, "M": args.M, "final_mean_density": final}))
    return 0


def _cmd_spectral(args):
    kernel = kernels.parse_kernel(args.kernel)
    K = args.M if args.K is None else args.K
    if not 1 <= K <= args.M:
        raise UsageError("need 1 <= K <= M")
    vals = spectral.eigenvalues(kernel, args.M)[:K]
    cutoff = 1e-12 * max(1.0, float(np.abs(vals).max(initial=0.0)))
    for i, v in enumerate(vals, start=1):
        v = 0.0 if abs(v) < cutoff else float(v)
        print(f"{i},{v:.12g}")
    if args.eigenfunctions:
        out = _output_dir(args)
        spec = spectral.spectrum(kernel, args.M, K)
        F = np.column_stack([f.values[:, 0] for f in spec.eigenfunctions])
        with open(out / "eigenfunctions.csv", "w") as fh:
            fh.write("cell,index,value\n")
            for k in range(args.M):
                for i in range(K):
                    fh.write(f"{k},{i + 1},{F[k, i]!r}\n")
    return 0


def _experiment_config(args, kind):
    cfg = experiments.ExperimentConfig.from_json(args.config) if args.config else experiments.default_config(kind)
    if cfg.kind != kind:
        raise experiments.ExperimentError("config", f"config kind {cfg.kind!r} does not match command ({kind!r})")
    changes = {}
    for name in ("kernel", "model", "beta", "M", "T", "dt", "record_dt", "N_list", "kappa_c", "kappa_gamma", "vertex_mode", "workers", "output_dir"):
        val = getattr(args, name, None)
        if val is not None:
            changes[name] = val
    if getattr(args, "betas", None) is not None:
        changes["beta_list"] = args.betas
    if args.initial is not None:
        changes["initial"] = args.initial[0] if len(args.initial) == 1 else args.initial
    n_seeds = getattr(args, "n_seeds", None)
    if args.seed is not None or n_seeds is not None:
        base = args.seed if args.seed is not None else (cfg.seeds[0] if cfg.seeds else 0)
        n = n_seeds if n_seeds is not None else len(cfg.seeds)
        if n < 1:
            raise UsageError("--n-seeds must be >= 1")
        changes["seeds"] = [base + r for r in range(n)]
    if changes.get("output_dir"):
        _output_dir(args)
    return cfg.replace(**changes)


def _cmd_experiment(args, kind):
    cfg = _experiment_config(args, kind)
    log.info("running %s with %s", kind, cfg.to_dict())
    report = experiments.run_experiment(cfg)
    print("\n".join(report.summary_lines()))
    return 0 if report.passed else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(f"graphon_mf {__version__} golden {experiments.golden_hash()}")
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in EXPERIMENT_COMMANDS:
            return _cmd_experiment(args, EXPERIMENT_COMMANDS[args.command])
        return {"sample": _cmd_sample, "simulate": _cmd_simulate, "meanfield": _cmd_meanfield, "spectral": _cmd_spectral}[args.command](args)
    except experiments.ExperimentError as exc:
        if exc.stage in ("config", "output"):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise
    except (UsageError, kernels.KernelError, dynamics.ModelError, sampling.SamplingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
