"""Batch command-line front end.

Subcommands: reach, verify, radius, witness, trace.  Queries live in JSON
files (specs contain vectors, which do not fit in flags); reports are JSON
with a stable schema and traces are CSV suitable for external plotting.

Exit codes are a contract:
    0  ok / safe
    1  input error
    2  unsafe
    3  budget exhausted before convergence
    4  unknown verdict
    5  witness not found
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import lipopt, nnkit, perturb, verify

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNSAFE = 2
EXIT_BUDGET = 3
EXIT_UNKNOWN = 4
EXIT_NO_WITNESS = 5


class QueryError(ValueError):
    pass


def _load_query(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise QueryError(f"cannot read query file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise QueryError(f"query file is not valid JSON: {exc}") from None
    if doc.get("format_version") != 1:
        raise QueryError("query field 'format_version' must equal 1")
    for key in ("model", "spec"):
        if key not in doc:
            raise QueryError(f"query field '{key}' is missing")
    return doc


def _resolve_labels(model, labels):
    resolved = []
    for item in labels:
        if isinstance(item, str):
            if item not in model.labels:
                raise QueryError(f"unknown label name '{item}'")
            resolved.append(model.labels.index(item))
        else:
            idx = int(item)
            if idx < 0 or idx >= len(model.labels):
                raise QueryError(f"label index {idx} out of range")
            resolved.append(idx)
    return resolved


def _build(doc):
    model = nnkit.load_model(doc["model"])
    spec_doc = doc["spec"]
    spec = perturb.PerturbationSpec(
        anchor=spec_doc["anchor"],
        dims=spec_doc["dims"],
        theta=float(spec_doc["theta"]),
        clamp=tuple(spec_doc["clamp"]),
    )
    objective = None
    if "objective" in doc:
        obj_doc = doc["objective"]
        objective = perturb.Objective(
            kind=obj_doc["kind"],
            labels=tuple(_resolve_labels(model, obj_doc["labels"])),
            direction=obj_doc.get("direction", "minimize"),
        )
    solver_doc = doc.get("solver", {})
    cfg = lipopt.SolverConfig(
        eps=float(solver_doc.get("eps", 1e-3)),
        eta=float(solver_doc.get("eta", 1.5)),
        k_init=float(solver_doc.get("k_init", 1.0)),
        max_evals=int(solver_doc.get("max_evals", 10000)),
        inner_eps=solver_doc.get("inner_eps"),
        k_fixed=solver_doc.get("k_fixed"),
    )
    return model, spec, objective, cfg


def _write_report(report, out_path):
    text = json.dumps(report, indent=1, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_reach(doc, args):
    model, spec, objective, cfg = _build(doc)
    if objective is None:
        raise QueryError("query field 'objective' is missing")
    (interval, traces), wall = verify.timed(verify.reach, model, spec, objective, cfg)
    traces_json = None
    if args.trace:
        traces["min"].to_csv(args.trace)
    report = verify.make_report(doc, interval.to_json(), interval.evals, wall, traces_json)
    _write_report(report, args.out)
    if not (interval.converged_low and interval.converged_high):
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_verify(doc, args):
    model, spec, _, cfg = _build(doc)
    mode = args.mode or doc.get("mode", "difference")
    targets = doc.get("targets")
    if targets is not None:
        targets = _resolve_labels(model, targets)
    verdict, wall = verify.timed(
        verify.check_safety, model, spec, cfg, mode=mode, targets=targets
    )
    report = verify.make_report(doc, verdict.to_json(), verdict.evals, wall)
    _write_report(report, args.out)
    return {"safe": EXIT_OK, "unsafe": EXIT_UNSAFE, "unknown": EXIT_UNKNOWN}[verdict.verdict]


def _radius_report(doc, args):
    model, spec, _, cfg = _build(doc)
    opts = doc.get("radius", {})
    target = opts.get("target", "all")
    if target != "all":
        target = _resolve_labels(model, [target])[0]
    mode = args.mode or doc.get("mode", "difference")
    report, wall = verify.timed(
        verify.max_safe_radius,
        model,
        spec,
        target=target,
        cfg=cfg,
        max_iters=int(opts.get("max_iters", 30)),
        mode=mode,
        radius_tol=float(opts.get("tol", 1e-3)),
    )
    return model, report, wall


def _cmd_radius(doc, args):
    model, report, wall = _radius_report(doc, args)
    evals = 0  # per-probe costs are inside check_safety; report probe count instead
    out = verify.make_report(doc, report.to_json(), evals, wall)
    _write_report(out, args.out)
    return EXIT_OK


def _cmd_witness(doc, args):
    model, report, wall = _radius_report(doc, args)
    try:
        witness, meta = verify.ground_truth_adversarial(model, report)
    except verify.WitnessNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_WITNESS
    result = {"witness": list(witness), **meta}
    out = verify.make_report(doc, result, 0, wall)
    _write_report(out, args.out)
    return EXIT_OK


def _cmd_trace(doc, args):
    model, spec, objective, cfg = _build(doc)
    if objective is None:
        raise QueryError("query field 'objective' is missing")
    fn = perturb.make_box_function(model, spec, objective)
    result, trace = lipopt.minimize_nested(fn, cfg)
    path = args.trace or args.out
    text = trace.to_csv(path)
    if path is None:
        print(text, end="")
    return EXIT_OK if result.converged else EXIT_BUDGET


_COMMANDS = {
    "reach": _cmd_reach,
    "verify": _cmd_verify,
    "radius": _cmd_radius,
    "witness": _cmd_witness,
    "trace": _cmd_trace,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reachlip",
        description="Reachability and robustness verification of Lipschitz networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--query", required=True, help="path to the query JSON file")
        p.add_argument("--out", default=None, help="report output path (default stdout)")
        p.add_argument("--trace", default=None, help="CSV trace output path")
        p.add_argument("--mode", choices=["interval", "difference"], default=None)
        p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc = _load_query(args.query)
        return _COMMANDS[args.command](doc, args)
    except (QueryError, nnkit.FormatError, nnkit.DimensionError, nnkit.ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
