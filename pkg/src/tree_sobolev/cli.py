"""Command line entry point.

Subcommands: extend, simulate, kernels, opnorm, report, verify.  Every run
echoes its configuration digest and seed.  Exit codes: 0 success,
1 invariant violation (verify), 2 malformed configuration,
3 numerical non-convergence (a diagnostic JSON document is emitted).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .config import (COMMANDS, STOCHASTIC, ConfigError, RunConfig, WeightSpec,
                     canonical_json, load_leaf_values)
from .extension import harmonic_extend
from .hardy import theoretical_constants
from .kernels import kernel_parts, reduced_L0, reduced_L1, reversed_kernel
from .norms import sobolev_seminorm
from .report import norm_report, weights_digest
from .trace import ConvergenceError, trace_seminorm
from .tree_core import KERNEL_N_MAX, VertexRef
from .verify import run_checks
from .walk import WalkProfile, walk_stats

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class NonConvergence(RuntimeError):
    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with a RunConfig; flags override it")
    common.add_argument("--n", type=int, dest="N", help="tree height N")
    common.add_argument("--p", type=_floats, help="exponent, or comma-separated list")
    common.add_argument("--weights", action="append",
                        help="unit | dyadic[:c] | geometric:beta[:c] | explicit:w1,..,wN | "
                             "JSON file; repeat for a family grid")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int, help="walks per start depth (simulate)")
    common.add_argument("--samples", type=int, help="random leaf functions per cell")
    common.add_argument("--start-depth", type=int, dest="start_depth",
                        help="start depth for simulate (default: every depth 1..N-1)")
    common.add_argument("--leaf-values", dest="leaf_values",
                        help="JSON file with 2^N numbers | random:seed | delta:index")
    common.add_argument("--output", help="write here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))

    parser = argparse.ArgumentParser(prog="tree-sobolev", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "extend": "harmonic extension of leaf data, seminorm and trace",
        "simulate": "Monte Carlo walk statistics against the exact probabilities",
        "kernels": "edge kernels K, K0, K1 and reduced kernels as CSV",
        "opnorm": "extension ratios and operator-norm estimates (NormReport)",
        "report": "grid of p x weight families as a CSV table",
        "verify": "run the invariant suite; exit 1 on any violation",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        base = RunConfig.from_json(path.read_text())
        if base.command != args.command:
            base = base.with_updates(command=args.command)
    else:
        base = RunConfig(command=args.command, format=_default_format(args.command))
    weights = tuple(WeightSpec.parse(w) for w in args.weights) if args.weights else None
    return base.with_updates(N=args.N, p=tuple(args.p) if args.p else None, weights=weights,
                             seed=args.seed, trials=args.trials, samples=args.samples,
                             start_depth=args.start_depth, leaf_values=args.leaf_values,
                             output=args.output, format=args.format)


def _default_format(command: str) -> str:
    return "csv" if command in ("kernels", "report") else "json"


def _envelope(config: RunConfig) -> dict:
    return {"config": config.to_dict(), "config_digest": config.digest, "seed": config.seed}


def _require(config: RunConfig, *names: str) -> None:
    for name in names:
        value = getattr(config, name)
        if value is None or value == ():
            raise ConfigError(f"{config.command} needs --{name.lower().replace('_', '-')}")


def run_extend(config: RunConfig) -> str:
    _require(config, "p", "weights")
    weights = config.tree_weights()
    N, p = weights.N, config.single_p()
    spec = config.leaf_values
    if spec is None:
        if config.seed is None:
            raise ConfigError("extend needs --leaf-values (or --seed for random values)")
        spec = f"random:{config.seed}"
    f = load_leaf_values(spec, N)
    profile = WalkProfile.from_weights(weights, p)
    F = harmonic_extend(profile, f)
    seminorm = float(sobolev_seminorm(weights, F, p))
    try:
        trace = trace_seminorm(weights, f, p)
    except ConvergenceError as exc:
        raise NonConvergence(str(exc), {"iterations": exc.result.iterations,
                                        "residual": exc.result.kkt_residual}) from None
    ratio = 1.0 if trace.value <= 1e-12 * max(1.0, np.max(np.abs(f))) else seminorm / trace.value
    doc = _envelope(config)
    doc.update({
        "N": N, "p": p, "weights": weights.to_dict(), "leaf_values": f.tolist(),
        "q": profile.q.tolist(), "vertex_field": F.tolist(), "seminorm": seminorm,
        "trace_seminorm": trace.value, "trace_iterations": trace.iterations,
        "trace_residual": trace.kkt_residual, "extension_ratio": ratio,
    })
    return _dump(config, doc)


def _start_seed(seed: int, depth: int) -> int:
    return int(np.random.SeedSequence([seed, depth]).generate_state(1)[0])


def run_simulate(config: RunConfig) -> str:
    _require(config, "p", "weights")
    seed = config.require_seed()
    weights = config.tree_weights()
    N, p = weights.N, config.single_p()
    profile = WalkProfile.from_weights(weights, p)
    if config.start_depth is None:
        depths = list(range(1, N)) or [0]
    else:
        if not 0 <= config.start_depth <= N:
            raise ConfigError(f"start depth must lie in 0..{N}")
        depths = [config.start_depth]
    runs = []
    for s in depths:
        stats = walk_stats(profile, VertexRef(s, 0), config.trials, _start_seed(seed, s))
        row = stats.to_dict()
        row["expected"] = {"q": float(profile.q[s]), "p": profile.P[s].tolist(),
                           "b": profile.B[s, :s + 1].tolist()}
        runs.append(row)
    doc = _envelope(config)
    doc.update({"N": N, "p": p, "weights": weights.to_dict(), "runs": runs})
    return _dump(config, doc)


def run_kernels(config: RunConfig) -> str:
    _require(config, "p", "weights")
    weights = config.tree_weights()
    N, p = weights.N, config.single_p()
    profile = WalkProfile.from_weights(weights, p)
    mats = {}
    dense = N <= KERNEL_N_MAX
    if dense:
        K0, K1 = kernel_parts(profile)
        mats.update(K=K0 + K1, K0=K0, K1=K1)
    mats.update(L0=reduced_L0(profile), L1=reduced_L1(profile),
                script_K=reversed_kernel(weights, p).kernel)
    header = _envelope(config)
    header.update({"N": N, "p": p, "weights_digest": weights_digest(weights),
                   "dense_edge_kernels": dense})
    if config.format == "json":
        header["matrices"] = {k: v.tolist() for k, v in mats.items()}
        return _dump(config, header)
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["matrix", "row", "col", "value"])
    for name, M in mats.items():
        for (i, j), v in np.ndenumerate(M):
            writer.writerow([name, i, j, repr(float(v))])
    return buf.getvalue()


def run_opnorm(config: RunConfig) -> str:
    _require(config, "p", "weights")
    seed = config.require_seed()
    weights = config.tree_weights()
    p = config.single_p()
    rep = _norm_report(weights, p, config.samples, seed, t_lower=None)
    doc = _envelope(config)
    doc.update(rep.to_dict())
    doc["within_theorem"] = rep.within_theorem
    return _dump(config, doc)


def _norm_report(weights, p, samples, seed, t_lower):
    try:
        return norm_report(weights, p, samples=samples, seed=seed, t_lower=t_lower)
    except ConvergenceError as exc:
        raise NonConvergence(str(exc), {"p": p, "weights": weights.to_dict()}) from None
    except RuntimeError as exc:
        raise NonConvergence(str(exc), {"p": p, "weights": weights.to_dict()}) from None


REPORT_COLUMNS = ("N", "p", "weights", "max_ratio", "bound_2S0", "C_bar", "C_hat",
                  "within_bound", "samples", "seed", "config_digest")


def run_report(config: RunConfig) -> str:
    _require(config, "N", "p", "weights")
    seed = config.require_seed()
    rows = []
    for p in config.p:
        consts = theoretical_constants(p)
        for spec in config.weights:
            weights = config.tree_weights(spec)
            rep = _norm_report(weights, p, config.samples, seed, t_lower=False)
            rows.append({
                "N": weights.N, "p": p, "weights": spec.label,
                "max_ratio": rep.max_ratio, "bound_2S0": rep.bound_2S0,
                "C_bar": consts.C_bar, "C_hat": consts.C_hat,
                "within_bound": bool(rep.max_ratio <= consts.C_bar
                                     and rep.bound_2S0 <= 2 * consts.C_hat),
                "samples": config.samples, "seed": seed, "config_digest": config.digest,
            })
    if config.format == "json":
        doc = _envelope(config)
        doc["rows"] = rows
        return _dump(config, doc)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def run_verify(config: RunConfig) -> tuple[str, bool]:
    if config.N is None and not any(w.kind == "explicit" for w in config.weights):
        raise ConfigError("verify needs --n")
    seed = 0 if config.seed is None else config.seed
    ps = config.p or (2.0,)
    specs = config.weights or (WeightSpec("dyadic"),)
    cells = []
    ok = True
    for p in ps:
        for spec in specs:
            weights = config.tree_weights(spec)
            try:
                checks = run_checks(weights, p, seed=seed, samples=min(config.samples, 50))
            except RuntimeError as exc:
                raise NonConvergence(str(exc), {"p": p, "weights": spec.to_dict()}) from None
            passed = all(c.passed for c in checks)
            ok &= passed
            cells.append({"p": p, "weights": spec.label, "passed": passed,
                          "checks": [c.to_dict() for c in checks]})
    doc = _envelope(config)
    doc.update({"seed": seed, "passed": ok, "cells": cells})
    return _dump(config, doc), ok


def _dump(config: RunConfig, doc: dict) -> str:
    if config.format == "csv" and config.command not in ("kernels", "report"):
        raise ConfigError(f"{config.command} emits JSON only")
    return canonical_json(doc)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = None
    try:
        config = config_from_args(args)
        if config.command in STOCHASTIC:
            config.require_seed()
        if config.command == "verify":
            text, ok = run_verify(config)
            _emit(text, config.output)
            return EXIT_OK if ok else EXIT_VIOLATION
        runner = {"extend": run_extend, "simulate": run_simulate, "kernels": run_kernels,
                  "opnorm": run_opnorm, "report": run_report}[config.command]
        _emit(runner(config), config.output)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        diag = {"error": "non-convergence", "message": str(exc), "details": exc.details,
                "command": args.command}
        if config is not None:
            diag.update(config_digest=config.digest, seed=config.seed)
        sys.stdout.write(canonical_json(diag))
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    raise SystemExit(main())
