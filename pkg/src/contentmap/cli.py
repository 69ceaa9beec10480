"""Command-line entry point: ``contentmap partition|score|toy|convert-linqs``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attrgraph import (ATTR_MODES, InputError, load_attributes, load_graph, load_labels,
                        load_partition, write_nodes, write_partition)
from .codelength import ME, FlowContext, evaluate, relabel
from .flow import DEFAULT_MAX_ITER, DEFAULT_TAU, DEFAULT_TOL, ConvergenceError, FlowError, stationary
from .metrics import MetricError, score
from .optimize import OptimizerConfig, optimize
from .toy import CUT_NAMES, toy_table

log = logging.getLogger("contentmap")

EXIT_INPUT = 2
EXIT_CONVERGENCE = 3


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edge list: src<TAB>dst[<TAB>weight]")
    p.add_argument("--attrs", help="attribute triples: node<TAB>attr_index<TAB>value")
    p.add_argument("--labels", help="ground truth: node<TAB>class")
    p.add_argument("--attr-mode", choices=ATTR_MODES, default="raw",
                   help="raw counts, tf-idf weighting, or rows already normalized")
    p.add_argument("--directed", action="store_true", help="treat links as directed (teleporting walk)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="teleport probability (directed only)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="power-iteration L1 tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="power-iteration limit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contentmap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="find a partition minimizing the codelength")
    _add_graph_args(p)
    p.add_argument("--objective", choices=("me", "cme"), default="cme")
    p.add_argument("--method", choices=("bottom-up", "top-down", "exhaustive"), default="top-down")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=None, help="random starts (default ceil(sqrt(n)))")
    p.add_argument("--workers", type=int, default=1, help="threads for scoring random starts")
    p.add_argument("--init", help="initial partition node<TAB>module (top-down only)")
    p.add_argument("--connected-only", action="store_true",
                   help="bottom-up: only merge modules joined by a link")
    p.add_argument("--trace", help="write the optimization trace as CSV")
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("score", help="evaluate a given partition")
    _add_graph_args(p)
    p.add_argument("--partition", required=True, help="node<TAB>module")
    p.add_argument("--out", help="also write the JSON report here")

    p = sub.add_parser("toy", help="codelengths of the cuts of the illustrative networks")
    p.add_argument("--figure", choices=("1a", "1b"), required=True)
    p.add_argument("--d", type=int, default=4, help="attribute dimension (multiple of 4)")
    p.add_argument("--cut", action="append", help="restrict to this cut (repeatable)")
    p.add_argument("--json", action="store_true", help="print JSON instead of a text table")

    p = sub.add_parser("convert-linqs", help="convert .content/.cites files to the TSV formats")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--isolated", choices=("self-loop", "drop"), default="self-loop",
                   help="how to keep nodes without links")
    return parser


def _load(args):
    graph = load_graph(args.edges, directed=args.directed)
    if args.attrs:
        graph = load_attributes(graph, args.attrs, mode=args.attr_mode)
    if args.labels:
        graph = graph.with_labels(load_labels(graph, args.labels))
    profile = stationary(graph, tau=args.tau, tol=args.tol, max_iter=args.max_iter)
    log.info("loaded %d nodes, %d links, %d attributes", graph.n, graph.n_links, graph.n_attributes)
    return graph, profile


def _inputs(args, names) -> dict:
    return {getattr(args, k): sha256(getattr(args, k)) for k in names if getattr(args, k, None)}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_partition(args) -> int:
    if args.objective == "cme" and not args.attrs:
        raise InputError("cme requires --attrs")
    if args.init and args.method != "top-down":
        raise InputError("--init only applies to --method top-down")
    t0 = time.perf_counter()
    graph, profile = _load(args)
    init = load_partition(graph, args.init) if args.init else None
    config = OptimizerConfig(objective=args.objective, method=args.method.replace("-", "_"), seed=args.seed,
                             restarts=args.restarts, tau=args.tau, initial_partition=init,
                             connected_only=args.connected_only, workers=args.workers)
    part, trace = optimize(graph, profile, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_partition(graph, part, out / "partition.tsv")
    write_nodes(graph, out / "nodes.tsv")
    report = trace.report.to_dict()
    report["objective"] = args.objective
    if graph.labels is not None:
        report["metrics"] = score(part, graph.labels).to_dict()
    _write_json(out / "report.json", report)
    outputs = ["partition.tsv", "nodes.tsv", "report.json"]
    if args.trace:
        Path(args.trace).write_text(trace.to_csv(), encoding="utf-8")
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    manifest = {
        "command": "partition",
        "argv": sys.argv[1:],
        "flags": flags,
        "seed": args.seed,
        "restarts": config.n_restarts(graph.n),
        "inputs": _inputs(args, ("edges", "attrs", "labels", "init")),
        "outputs": {name: sha256(out / name) for name in outputs},
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    _write_json(out / "manifest.json", manifest)
    log.info("total %.6f bits, m=%d", trace.report.total, trace.report.m)
    return 0


def cmd_score(args) -> int:
    graph, profile = _load(args)
    part = relabel(load_partition(graph, args.partition))
    ctx = FlowContext(graph, profile)
    me = evaluate(ctx, part, False)
    result = {"me": me.to_dict()}
    if graph.attributes is not None:
        cme = evaluate(ctx, part, True)
        result["cme"] = cme.to_dict()
        result.update(cme.to_dict())
    else:
        result.update(me.to_dict())
    if graph.labels is not None:
        result["metrics"] = score(part, graph.labels).to_dict()
    text = json.dumps(result, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_toy(args) -> int:
    cuts = args.cut
    if cuts:
        for c in cuts:
            if c not in CUT_NAMES[args.figure]:
                raise InputError(f"unknown cut {c!r} for figure {args.figure}; "
                                 f"choose from {', '.join(CUT_NAMES[args.figure])}")
    try:
        table = toy_table(args.figure, args.d, cuts)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.json:
        rows = [vars(r) for r in table.rows]
        argmin = {conv: {col: table.argmin(conv, col) for col in ("links", "attributes", "cme")}
                  for conv in ("undirected", "directed")}
        print(json.dumps({"figure": args.figure, "d": args.d, "rows": rows, "argmin": argmin}, indent=2))
    else:
        print(table.format())
    return 0


def cmd_convert_linqs(args) -> int:
    """Citeseer/Cora style: ``id w_1 .. w_d class`` and ``cited citing`` lines."""
    content, cites = Path(args.content), Path(args.cites)
    ids, words, classes = [], [], []
    with open(content, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise InputError("expected 'id features... class'", content, lineno)
            ids.append(parts[0])
            words.append(np.flatnonzero(np.array(parts[1:-1], dtype=np.float64)))
            classes.append(parts[-1])
    known = set(ids)
    if len(known) != len(ids):
        raise InputError("duplicate paper ids", content)
    links, linked, skipped = set(), set(), 0
    with open(cites, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise InputError("expected 'cited citing'", cites, lineno)
            a, b = parts
            if a not in known or b not in known:
                skipped += 1
                continue
            if a == b:
                continue
            links.add((min(a, b), max(a, b)))
            linked.update((a, b))
    keep = [i for i in ids if i in linked or args.isolated == "self-loop"]
    index = {i: k for k, i in enumerate(ids)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        for a, b in sorted(links):
            fh.write(f"{a}\t{b}\n")
        for i in keep:
            if i not in linked:
                fh.write(f"{i}\t{i}\n")
    with open(out / "attrs.tsv", "w", encoding="utf-8") as fh:
        for i in keep:
            for j in words[index[i]]:
                fh.write(f"{i}\t{j}\t1\n")
    with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
        for i in keep:
            fh.write(f"{i}\t{classes[index[i]]}\n")
    log.info("%d nodes (%d without links), %d links; %d citations to unknown ids skipped",
             len(keep), len(keep) - len(linked), len(links), skipped)
    return 0


COMMANDS = {"partition": cmd_partition, "score": cmd_score, "toy": cmd_toy,
            "convert-linqs": cmd_convert_linqs}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (InputError, FlowError, MetricError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
