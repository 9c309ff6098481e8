"""Command-line entry point ``unbalanced-sbm``.

Every output starts with (CSV) or contains (JSON) an echo of the fully
resolved configuration, which is enough to rerun the command. Identical
flags give byte-identical output.

Exit codes: 0 success, 1 usage or precondition error, 2 runtime failure.
Errors are reported on stderr as one line of JSON.
"""
from __future__ import annotations

import argparse
import io
import math
import sys

from . import __version__
from . import density_evolution as de
from . import experiments as ex
from . import io as sio
from .graphs import BudgetExceeded, sample_gw, sample_sbm
from .model import derive_params, params_from_abc


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` with ``stop`` included (up to rounding)."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise UsageError("grid needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def _params(args, need_d: bool):
    """Model parameters from ``--p`` with ``--lambda`` or ``--a/--b/--c``.

    Without ``--d`` only the large-degree limit is meaningful, so ``need_d``
    commands insist on it.
    """
    if args.p is None:
        raise UsageError("--p is required")
    if need_d and args.d is None:
        raise UsageError("--d is required")
    abc = (args.a, args.b, args.c)
    if any(x is not None for x in abc):
        if None in abc or args.d is None:
            raise UsageError("--a, --b and --c must be given together with --d")
        if args.lam is not None:
            raise UsageError("give either --lambda or --a/--b/--c, not both")
        return params_from_abc(args.p, args.d, *abc)
    if args.lam is None:
        raise UsageError("--lambda is required")
    if args.d is None:
        return de.limit_params(args.p, args.lam)
    return derive_params(args.p, args.d, args.lam)


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid_output(args, rows, columns, config) -> str:
    if args.format == "json":
        return sio.json_report({"rows": rows}, config)
    return sio.csv_text(rows, columns, config)


# -- subcommands ------------------------------------------------------------

def cmd_params(args, config):
    params = _params(args, need_d=False)
    return sio.json_report(params.as_dict("full"), config)


def cmd_sample_sbm(args, config):
    _require(args, "n")
    params = _params(args, need_d=True)
    graph = sample_sbm(params, args.n, seed=args.seed)
    buf = io.StringIO()
    sio.write_edge_list(graph, buf, header={"schema_version": sio.SCHEMA_VERSION, **config})
    return buf.getvalue()


def cmd_sample_gw(args, config):
    _require(args, "depth")
    params = _params(args, need_d=True)
    tree = sample_gw(params, args.depth, seed=args.seed)
    return sio.tree_to_json(tree, header=config) + "\n"


def cmd_de_iterate(args, config):
    _require(args, "q")
    params = _params(args, need_d=False)
    trace = de.iterate_mu(args.q, params, tol=args.tol, quad_nodes=args.quad_nodes)
    rows = [{"k": k, "mu_k": mu, "success": de.success_from_mu(mu)}
            for k, mu in enumerate(trace.mus, start=1)]
    config = {**config, "converged": trace.converged, "classification": trace.classification}
    return _grid_output(args, rows, ["k", "mu_k", "success"], config)


def cmd_fixed_points(args, config):
    params = _params(args, need_d=False)
    report = de.fixed_points(params, quad_nodes=args.quad_nodes)
    return sio.json_report(report.as_dict(), config)


def cmd_spinodal(args, config):
    if args.p is None:
        raise UsageError("--p is required")
    lam = de.spinodal(args.p, tol=args.tol, quad_nodes=args.quad_nodes)
    return _grid_output(args, [{"p": args.p, "lambda_sp": lam}], ["p", "lambda_sp"], config)


def cmd_phase_diagram(args, config):
    _require(args, "p_grid")
    grid = parse_grid(args.p_grid)
    if grid[0] <= 0 or grid[-1] > 0.5:
        raise UsageError("p grid must lie in (0, 0.5]")
    rows = de.phase_diagram(grid, tol=args.tol, quad_nodes=args.quad_nodes)
    return _grid_output(args, rows, ["p", "lambda_sp", "lambda_ks"], config)


def cmd_perf_curve(args, config):
    _require(args, "p", "lambda_grid")
    rows = []
    for lam in parse_grid(args.lambda_grid):
        rep = de.fixed_points(de.limit_params(args.p, lam), quad_nodes=args.quad_nodes)
        alpha = rep.alpha if rep.alpha is not None else 0.0
        q_thr = (rep.beta * args.p * (1 - args.p) / lam) if rep.beta is not None else None
        rows.append({"lambda": lam, "alpha": alpha, "success": de.success_from_mu(alpha),
                     "beta": rep.beta, "q_threshold": q_thr})
    return _grid_output(args, rows, ["lambda", "alpha", "success", "beta", "q_threshold"],
                        config)


def cmd_simulate_tree(args, config):
    _require(args, "q", "depth")
    params = _params(args, need_d=True)
    rep = ex.estimate_psucc_tree(params, args.q, args.depth, args.reps, seed=args.seed,
                                 workers=args.workers)
    if args.samples_out:
        xi, _ = ex.sample_tree_messages(params, args.q, args.depth, args.reps, args.seed,
                                        args.workers)
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            sio.write_samples(xi, fh)
    out = rep.as_dict()
    out.pop("config")
    return sio.json_report(out, config)


def cmd_simulate_sbm(args, config):
    _require(args, "q", "n", "radius")
    params = _params(args, need_d=True)
    rep = ex.estimate_psucc_sbm(params, args.n, args.q, args.radius, args.reps, seed=args.seed,
                                graphs=args.graphs, workers=args.workers, budget=args.budget,
                                cyclic=args.cyclic)
    out = rep.as_dict()
    out.pop("config")
    return sio.json_report(out, config)


def cmd_nishimori(args, config):
    _require(args, "q", "depth")
    params = _params(args, need_d=True)
    pair = ex.population_dynamics(params, args.q, args.depth, pool=args.pool, seed=args.seed)
    if args.samples_out:
        with open(args.samples_out, "w", encoding="utf-8") as fh:
            sio.write_samples(pair.xi1, fh)
    terms = ex.nishimori_terms(pair)
    result = {"terms": terms, "max_z": max(t["z"] for t in terms),
              "moments": ex.gaussian_moments(pair)}
    if args.depth >= 1:
        mus = [de.mu_one(args.q, params)]
        while len(mus) < args.depth:
            mus.append(de.g_map(mus[-1], params, args.quad_nodes))
        mu_r = mus[args.depth - 1]
        result["gaussian_limit"] = {"mu": mu_r, "mean": params.h + mu_r / 2, "var": mu_r}
    return sio.json_report(result, config)


COMMANDS = {
    "params": (cmd_params, "derive and validate model parameters"),
    "sample-sbm": (cmd_sample_sbm, "sample a labeled block-model graph as an edge list"),
    "sample-gw": (cmd_sample_gw, "sample a labeled Galton-Watson tree as parent-array JSON"),
    "de-iterate": (cmd_de_iterate, "density-evolution trace k, mu_k"),
    "fixed-points": (cmd_fixed_points, "fixed points of G with stability"),
    "spinodal": (cmd_spinodal, "spinodal lambda for one p"),
    "phase-diagram": (cmd_phase_diagram, "spinodal and Kesten-Stigum lines over a p grid"),
    "perf-curve": (cmd_perf_curve, "success probability and q-threshold over a lambda grid"),
    "simulate-tree": (cmd_simulate_tree, "Monte Carlo success of the tree test"),
    "simulate-sbm": (cmd_simulate_sbm, "Monte Carlo success of the local test on graphs"),
    "nishimori": (cmd_nishimori, "population dynamics with Nishimori and Gaussian checks"),
}

JSON_DEFAULT = {"params", "fixed-points", "simulate-tree", "simulate-sbm", "nishimori",
                "sample-gw"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unbalanced-sbm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--p", type=float)
        sp.add_argument("--d", type=float)
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--a", type=float)
        sp.add_argument("--b", type=float)
        sp.add_argument("--c", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--n", type=int)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--radius", type=int)
        sp.add_argument("--pool", type=int, default=100_000)
        sp.add_argument("--reps", type=int, default=1000)
        sp.add_argument("--graphs", type=int, default=1)
        sp.add_argument("--budget", type=int, default=22)
        sp.add_argument("--cyclic", choices=["bfs_tree", "prior"], default="bfs_tree")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--quad-nodes", type=int, default=de.DEFAULT_QUAD_NODES)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--p-grid")
        sp.add_argument("--lambda-grid")
        sp.add_argument("--out")
        sp.add_argument("--samples-out")
        sp.add_argument("--format", choices=["csv", "json", "text"])
    return parser


def _config(args) -> dict:
    skip = {"out", "samples_out"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["lambda"] = cfg.pop("lam")
    return cfg


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(sio.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.command == "sample-sbm":
            if args.format not in (None, "text"):
                raise UsageError("sample-sbm only writes the edge-list text format")
            args.format = "text"
        elif args.format == "text":
            raise UsageError("--format text applies to sample-sbm only")
        elif args.format is None:
            args.format = "json" if args.command in JSON_DEFAULT else "csv"
        elif args.format == "csv" and args.command in JSON_DEFAULT:
            raise UsageError(f"{args.command} writes JSON only")
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        func = COMMANDS[args.command][0]
        text = func(args, _config(args))
        _emit(args, text)
    except UsageError as exc:
        return _error("usage", str(exc), 1)
    except ValueError as exc:
        return _error("precondition", str(exc), 1)
    except (BudgetExceeded, RuntimeError, MemoryError, OSError) as exc:
        return _error(type(exc).__name__, str(exc), 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
