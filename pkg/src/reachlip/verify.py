"""Reachability intervals, safety verdicts, maximum-safe-radius search and
ground-truth adversarial witness extraction.

Two safety modes are shipped.  "interval" compares the original label's
reachable lower bound against every other label's reachable upper bound: it
is conservative, since overlapping intervals do not by themselves witness a
flip.  "difference" optimizes c_orig - c_k directly per competitor label and
is an exact decision up to the solver tolerance; it is the default.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import lipopt, nnkit, perturb
from .nnkit import ContractError

REPORT_VERSION = 1


class WitnessNotFoundError(LookupError):
    """No unsafe probe with a witness exists in the radius search history."""


@dataclass
class ReachInterval:
    """Certified output range [lower, upper] of one scalar objective."""

    objective_id: str
    lower: float
    upper: float
    converged_low: bool
    converged_high: bool
    evals: int
    tolerance: float

    @property
    def diameter(self):
        return self.upper - self.lower

    def to_json(self):
        return {
            "objective": self.objective_id,
            "l": self.lower,
            "u": self.upper,
            "diameter": self.diameter,
            "converged_low": self.converged_low,
            "converged_high": self.converged_high,
            "evals": self.evals,
            "tolerance": self.tolerance,
        }


@dataclass
class SafetyVerdict:
    verdict: str  # safe | unsafe | unknown
    mode: str  # interval | difference
    margin: float  # smallest separating quantity
    witness: np.ndarray | None = None
    witness_label: int | None = None
    evals: int = 0

    def to_json(self):
        return {
            "verdict": self.verdict,
            "mode": self.mode,
            "margin": self.margin,
            "witness": None if self.witness is None else list(self.witness),
            "witness_label": self.witness_label,
            "evals": self.evals,
        }


@dataclass
class ProbeRecord:
    theta: float
    verdict: str
    margin: float
    witness: np.ndarray | None
    witness_label: int | None


@dataclass
class RadiusReport:
    radius: float
    original_label: int
    targets: tuple
    deciding_target: int | None
    history: list
    iterations: int
    anchor: np.ndarray
    perturbed_dims: tuple
    note: str = ""

    def to_json(self):
        return {
            "r": self.radius,
            "original_label": self.original_label,
            "targets": list(self.targets),
            "deciding_target": self.deciding_target,
            "iterations": self.iterations,
            "note": self.note,
            "history": [
                {
                    "theta": p.theta,
                    "verdict": p.verdict,
                    "margin": p.margin,
                    "witness": None if p.witness is None else list(p.witness),
                    "witness_label": p.witness_label,
                }
                for p in self.history
            ],
        }


def _objective_id(objective):
    labels = ",".join(str(i) for i in objective.labels)
    return f"{objective.kind}({labels})"


def reach(model, spec, objective, cfg):
    """Certified reachability interval of the objective over the ball.

    Runs the nested minimizer and maximizer on the same box function and
    returns (ReachInterval, {"min": trace, "max": trace}).  The reported
    tolerance is the solver eps plus any composed inner slack.
    """
    base = replace(objective, direction="minimize")
    fn = perturb.make_box_function(model, spec, base)
    min_res, min_trace = lipopt.minimize_nested(fn, cfg)
    max_res, max_trace = lipopt.maximize_nested(fn, cfg)
    interval = ReachInterval(
        objective_id=_objective_id(objective),
        lower=min_res.lower,
        upper=max_res.upper,
        converged_low=min_res.converged,
        converged_high=max_res.converged,
        evals=fn.eval_count,
        tolerance=cfg.eps + max(min_res.slack, max_res.slack),
    )
    return interval, {"min": min_trace, "max": max_trace}


def _anchor_argmax(model, spec):
    out = nnkit.forward(model, spec.anchor)
    order = np.argsort(out)
    if out.size > 1 and out[order[-1]] == out[order[-2]]:
        raise ContractError("anchor argmax is tied; safety is ill-posed")
    return int(order[-1]), out


def check_safety(model, spec, cfg, mode="difference", targets=None):
    """Decide safety of the ball around the anchor.

    difference mode: for each competitor k, minimize c_orig - c_k; safe when
    every certified lower bound exceeds eps, unsafe when some evaluated point
    drops below -eps (that point is the witness), unknown otherwise.

    interval mode: safe when the original label's reachable lower bound
    exceeds every competitor's reachable upper bound by more than eps;
    unsafe only if some optimizer-evaluated extreme point actually flips the
    argmax; unknown otherwise.
    """
    orig, _ = _anchor_argmax(model, spec)
    competitors = [k for k in range(len(model.labels)) if k != orig]
    if targets is not None:
        competitors = [k for k in competitors if k in set(targets)]
        if not competitors:
            raise ContractError("no valid target labels")
    if spec.theta == 0.0:
        return SafetyVerdict("safe", mode, float("inf"), evals=0)

    if mode == "difference":
        return _check_difference(model, spec, cfg, orig, competitors)
    if mode == "interval":
        return _check_interval(model, spec, cfg, orig, competitors)
    raise ContractError(f"unknown safety mode '{mode}'")


def _check_difference(model, spec, cfg, orig, competitors):
    margin = float("inf")
    evals = 0
    unknown = False
    for k in competitors:
        obj = perturb.Objective("difference", (orig, k))
        fn = perturb.make_box_function(model, spec, obj)
        res, _ = lipopt.minimize_nested(fn, cfg)
        evals += fn.eval_count
        certified_low = res.lower - res.slack
        margin = min(margin, certified_low)
        if certified_low > cfg.eps:
            continue  # certified safe against k
        if res.upper < -cfg.eps:
            witness = perturb.embed(spec, res.witness)
            return SafetyVerdict("unsafe", "difference", res.upper, witness, k, evals)
        unknown = True
    verdict = "unknown" if unknown else "safe"
    return SafetyVerdict(verdict, "difference", margin, evals=evals)


def _check_interval(model, spec, cfg, orig, competitors):
    obj_orig = perturb.Objective("confidence", (orig,))
    fn = perturb.make_box_function(model, spec, obj_orig)
    low_res, _ = lipopt.minimize_nested(fn, cfg)
    evals = fn.eval_count
    l_orig = low_res.lower - low_res.slack
    worst = -float("inf")
    flip = None
    for k in competitors:
        obj = perturb.Objective("confidence", (k,))
        fn_k = perturb.make_box_function(model, spec, obj)
        high_res, _ = lipopt.maximize_nested(fn_k, cfg)
        evals += fn_k.eval_count
        worst = max(worst, high_res.upper + high_res.slack)
        point = perturb.embed(spec, high_res.witness)
        out = nnkit.forward(model, point)
        if int(np.argmax(out)) != orig:
            flip = (point, k)
    margin = l_orig - worst
    if margin > cfg.eps:
        return SafetyVerdict("safe", "interval", margin, evals=evals)
    if flip is not None:
        return SafetyVerdict("unsafe", "interval", margin, flip[0], flip[1], evals)
    return SafetyVerdict("unknown", "interval", margin, evals=evals)


def max_safe_radius(
    model,
    spec_template,
    target="all",
    cfg=None,
    max_iters=30,
    mode="difference",
    radius_tol=1e-3,
    declared_label=None,
):
    """Binary search for the maximum safe radius.

    Bisects theta over [0, b - a]: a safe probe raises the floor, an unsafe
    or unknown probe lowers the ceiling.  Stops when the safety margin sits
    within eps of the boundary (the intervals "meet") or when the bracket
    width drops below radius_tol, or after max_iters probes.  The returned
    radius is the largest certified-safe probe.
    """
    cfg = cfg or lipopt.SolverConfig()
    if max_iters < 1:
        raise ContractError("max_iters must be >= 1")
    orig, _ = _anchor_argmax(model, spec_template)
    if declared_label is not None and declared_label != orig:
        import warnings

        warnings.warn(
            "anchor is misclassified relative to the declared label; "
            "searching with the model's label"
        )
    targets = None if target == "all" else [int(target)]
    target_list = tuple(
        k for k in range(len(model.labels)) if k != orig and (targets is None or k in targets)
    )
    a, b = spec_template.clamp
    theta_hi = b - a

    history = []

    def probe(theta):
        spec = perturb.PerturbationSpec(
            spec_template.anchor, spec_template.dims, theta, spec_template.clamp
        )
        v = check_safety(model, spec, cfg, mode=mode, targets=targets)
        history.append(ProbeRecord(theta, v.verdict, v.margin, v.witness, v.witness_label))
        return v

    verdict = probe(theta_hi)
    iters = 1
    note = ""
    if verdict.verdict == "safe":
        report = RadiusReport(
            radius=theta_hi,
            original_label=orig,
            targets=target_list,
            deciding_target=None,
            history=history,
            iterations=iters,
            anchor=spec_template.anchor,
            perturbed_dims=spec_template.dims,
            note="never unsafe up to the clamp box width",
        )
        return report

    lo, hi = 0.0, theta_hi
    while iters < max_iters and hi - lo > radius_tol:
        theta = (lo + hi) / 2.0
        v = probe(theta)
        iters += 1
        if v.verdict == "safe":
            lo = theta
        else:
            hi = theta
        if abs(v.margin) <= cfg.eps:
            note = "boundary met: safety margin within eps"
            break

    unsafe = [p for p in history if p.verdict == "unsafe" and p.witness is not None]
    deciding = min(unsafe, key=lambda p: p.theta).witness_label if unsafe else None
    return RadiusReport(
        radius=lo,
        original_label=orig,
        targets=target_list,
        deciding_target=deciding,
        history=history,
        iterations=iters,
        anchor=spec_template.anchor,
        perturbed_dims=spec_template.dims,
        note=note,
    )


def ground_truth_adversarial(model, report):
    """Witness from the smallest unsafe probe: the minimally-distorted
    flipping point found by the search, with its sup-norm distortion and the
    confidences of both labels at that point."""
    unsafe = [p for p in report.history if p.verdict == "unsafe" and p.witness is not None]
    if not unsafe:
        raise WitnessNotFoundError("no unsafe probe with a witness in the history")
    best = min(unsafe, key=lambda p: p.theta)
    witness = best.witness
    dims = np.array(report.perturbed_dims, dtype=int)
    distortion = float(np.max(np.abs(witness[dims] - report.anchor[dims])))
    out = nnkit.forward(model, witness)
    meta = {
        "radius": distortion,
        "original_label": report.original_label,
        "flipped_label": int(np.argmax(out)),
        "original_confidence": float(out[report.original_label]),
        "flipped_confidence": float(out[int(np.argmax(out))]),
    }
    return witness, meta


# ---------------------------------------------------------------------------
# Versioned report serialization

def make_report(query_echo, result_json, evals, wall_ms, traces=None):
    report = {
        "format_version": REPORT_VERSION,
        "query": query_echo,
        "result": result_json,
        "cost": {"evals": evals, "wall_ms": wall_ms},
    }
    if traces is not None:
        report["traces"] = traces
    return report


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    value = fn(*args, **kwargs)
    return value, (time.perf_counter() - start) * 1000.0
