"""Sawtooth Lipschitz optimization, one-dimensional and nested.

The 1-D solver maintains the piecewise-linear underestimator
H(x; Y) = max_y { w(y) - K |x - y| } over the evaluated points Y.  Each
interval between consecutive points contributes one crossing value z; the
minimum z is the certified lower bound, the minimum evaluated value the upper
bound, and the next evaluation lands at the crossing point of the interval
with the smallest z.  The Lipschitz constant K is either fixed or updated
dynamically as eta times the largest observed difference quotient, never
decreasing; whenever K grows, every stored z is recomputed so stale lower
bounds cannot leak into the trace.

n-dimensional problems are solved by nesting: the outer 1-D solver optimizes
phi(x1) = min over the remaining coordinates, where each evaluation of phi is
itself a nested solve to an inner tolerance.  The certified bounds compose
additively: the true minimum lies in [l - slack, u] where slack accumulates
the inner tolerances.

The solver is anytime and deterministic: upper bounds are non-increasing,
every intermediate bound pair is recorded in a trace, and identical inputs
produce identical traces.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .nnkit import ContractError

_DUPLICATE_TOL = 1e-12


class EvaluationError(RuntimeError):
    """The objective returned NaN; the partial trace is attached."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverConfig:
    """Termination tolerance, Lipschitz handling and evaluation budget.

    eps: stop when u - l <= eps.
    eta: inflation factor for the dynamic Lipschitz update (> 1).
    k_init: bootstrap constant, also the floor of the dynamic estimate.
    max_evals: global budget of objective evaluations (inner solves included).
    inner_eps: None for equal split (each nesting level spends half its
        tolerance on the outer 1-D solve and half on the inner subproblem),
        or a fixed inner tolerance used at every level.
    k_fixed: when set, disables the dynamic update and uses this constant
        throughout (used for soundness ablations).
    """

    eps: float = 1e-3
    eta: float = 1.5
    k_init: float = 1.0
    max_evals: int = 10000
    inner_eps: float | None = None
    k_fixed: float | None = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ContractError("eps must be positive")
        if self.eta <= 1:
            raise ContractError("eta must be > 1")
        if self.k_init <= 0:
            raise ContractError("k_init must be positive")
        if self.max_evals < 3:
            raise ContractError("max_evals must be >= 3")
        if self.inner_eps is not None and self.inner_eps <= 0:
            raise ContractError("inner_eps must be positive")
        if self.k_fixed is not None and self.k_fixed <= 0:
            raise ContractError("k_fixed must be positive")


@dataclass
class TraceRecord:
    iteration: int
    lower: float
    upper: float
    point: float
    value: float
    k: float


class BoundsTrace:
    """Anytime audit trail of (iteration, l, u, y, w, K) records."""

    def __init__(self):
        self.records = []
        self.budget_exhausted = False

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["iter", "l", "u", "y", "w", "K"])
        for r in self.records:
            writer.writerow([r.iteration, repr(r.lower), repr(r.upper), repr(r.point), repr(r.value), repr(r.k)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self):
        return [
            {"iter": r.iteration, "l": r.lower, "u": r.upper, "y": r.point, "w": r.value, "K": r.k}
            for r in self.records
        ]


@dataclass
class OptResult:
    """Certified bounds and the witness achieving the upper bound.

    The witness is always an actually-evaluated point, so value(witness) == upper
    bit-exactly.  slack is the accumulated inner tolerance of nested solves:
    with a valid Lipschitz constant the true optimum lies in
    [lower - slack, upper] (minimization form).
    """

    lower: float
    upper: float
    witness: np.ndarray
    evals: int
    converged: bool
    k_final: float
    slack: float = 0.0


@dataclass
class SawtoothState:
    """Evaluated points (sorted), their values, per-interval crossing values
    and the current Lipschitz constant."""

    ys: list
    ws: list
    zs: list
    k: float

    def lower(self):
        return min(self.zs) if self.zs else -math.inf

    def upper(self):
        return min(self.ws)

    def best_index(self):
        return min(range(len(self.ws)), key=lambda i: (self.ws[i], i))


def _crossing(state, i):
    """Crossing value of the two slope-K lines anchored at points i and i+1."""
    y0, y1 = state.ys[i], state.ys[i + 1]
    w0, w1 = state.ws[i], state.ws[i + 1]
    return (w0 + w1) / 2.0 - state.k * (y1 - y0) / 2.0


def update_lipschitz(state, cfg, noise=0.0):
    """Dynamic Lipschitz update: eta times the largest absolute difference
    quotient over consecutive evaluated points, floored at k_init and at the
    current K (K never decreases).  Recomputes all crossing values when K
    grows.  Returns the (possibly unchanged) constant.

    noise is the worst-case evaluation error of the objective (the inner
    tolerance at nested outer levels); it is subtracted from the observed
    value differences so inexact inner solves cannot inflate K without bound
    as evaluation points cluster.
    """
    if len(state.ys) < 2:
        raise ContractError("need at least two evaluated points")
    slope = 0.0
    for i in range(len(state.ys) - 1):
        dy = state.ys[i + 1] - state.ys[i]
        if dy <= _DUPLICATE_TOL:
            continue  # duplicate abscissae: never divide by zero
        slope = max(slope, (abs(state.ws[i + 1] - state.ws[i]) - noise) / dy)
    new_k = max(cfg.k_init, cfg.eta * slope, state.k)
    if new_k > state.k:
        state.k = new_k
        state.zs = [_crossing(state, i) for i in range(len(state.ys) - 1)]
    return state.k


class _Budget:
    """Shared evaluation budget across nesting levels."""

    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def take(self):
        if self.used >= self.limit:
            return False
        self.used += 1
        return True


def _checked(fn, x, trace):
    value = fn(x)
    if math.isnan(value):
        raise EvaluationError(f"objective returned NaN at {x!r}", trace)
    return value


def _minimize_interval(fn, a, b, eps, cfg, budget, trace, noise=0.0):
    """Core 1-D sawtooth loop on fn over [a, b].  Returns an OptResult whose
    witness is the scalar best point; records every iteration in trace."""
    if a > b:
        raise ContractError("interval requires a <= b")
    if not budget.take():
        trace.budget_exhausted = True
        return OptResult(-math.inf, math.inf, np.array([a]), 0, False, cfg.k_init)
    wa = _checked(fn, a, trace)
    if b - a <= _DUPLICATE_TOL:
        trace.append(TraceRecord(0, wa, wa, a, wa, cfg.k_fixed or cfg.k_init))
        return OptResult(wa, wa, np.array([a]), 1, True, cfg.k_fixed or cfg.k_init)
    if not budget.take():
        trace.budget_exhausted = True
        return OptResult(-math.inf, wa, np.array([a]), 1, False, cfg.k_init)
    wb = _checked(fn, b, trace)

    state = SawtoothState(ys=[a, b], ws=[wa, wb], zs=[], k=cfg.k_fixed or cfg.k_init)
    if cfg.k_fixed is None:
        state.zs = [0.0]  # placeholder; update recomputes
        update_lipschitz(state, cfg, noise)
    state.zs = [_crossing(state, 0)]

    iteration = 0
    evals = 2
    while True:
        lower, upper = state.lower(), state.upper()
        best = state.best_index()
        point = state.ys[-1] if iteration == 0 else state.ys[new_idx]
        value = state.ws[-1] if iteration == 0 else state.ws[new_idx]
        trace.append(TraceRecord(iteration, lower, upper, point, value, state.k))
        if upper - lower <= eps:
            return OptResult(lower, upper, np.array([state.ys[best]]), evals, True, state.k)
        if not budget.take():
            trace.budget_exhausted = True
            return OptResult(lower, upper, np.array([state.ys[best]]), evals, False, state.k)

        # interval with the minimal crossing value; leftmost on ties
        k_idx = min(range(len(state.zs)), key=lambda i: (state.zs[i], i))
        y0, y1 = state.ys[k_idx], state.ys[k_idx + 1]
        w0, w1 = state.ws[k_idx], state.ws[k_idx + 1]
        y_new = (y0 + y1) / 2.0 - (w1 - w0) / (2.0 * state.k)
        if min(y_new - y0, y1 - y_new) <= _DUPLICATE_TOL:
            y_new = (y0 + y1) / 2.0  # numeric stall guard: bisect instead
        w_new = _checked(fn, y_new, trace)
        evals += 1
        iteration += 1

        state.ys.insert(k_idx + 1, y_new)
        state.ws.insert(k_idx + 1, w_new)
        new_idx = k_idx + 1
        k_before = state.k
        if cfg.k_fixed is None:
            update_lipschitz(state, cfg, noise)  # recomputes every z when K grows
        if state.k == k_before:
            state.zs[k_idx : k_idx + 1] = [_crossing(state, k_idx), _crossing(state, k_idx + 1)]


def minimize_1d(fn, bounds, cfg):
    """Minimize a deterministic scalar function on [a, b].

    Returns (OptResult, BoundsTrace).  With K >= the true Lipschitz constant
    the true minimum lies in [lower, upper]; on budget exhaustion the result
    carries converged=False with honest bounds.
    """
    a, b = float(bounds[0]), float(bounds[1])
    budget = _Budget(cfg.max_evals)
    trace = BoundsTrace()
    result = _minimize_interval(fn, a, b, cfg.eps, cfg, budget, trace)
    return result, trace


def _split_eps(eps, cfg):
    if cfg.inner_eps is not None:
        return eps, cfg.inner_eps
    return eps / 2.0, eps / 2.0


def _solve_nested(fn, prefix, eps, budget, cfg):
    """Depth-first nested minimization of fn with the leading coordinates
    fixed to prefix.  Returns (OptResult over the remaining dims, trace)."""
    remaining = fn.n - len(prefix)
    if remaining == 1:
        lo, hi = fn.bounds[len(prefix)]
        trace = BoundsTrace()
        result = _minimize_interval(
            lambda t: fn(np.array(prefix + [t])), lo, hi, eps, cfg, budget, trace
        )
        return result, trace

    eps_x, eps_y = _split_eps(eps, cfg)
    lo, hi = fn.bounds[len(prefix)]
    inner = {}

    def phi(t):
        res, _ = _solve_nested(fn, prefix + [t], eps_y, budget, cfg)
        inner[t] = res
        return res.upper

    trace = BoundsTrace()
    outer = _minimize_interval(phi, lo, hi, eps_x, cfg, budget, trace, noise=eps_y)
    evaluated = [r for r in inner.values() if np.isfinite(r.upper)]
    slack = max(
        ((r.upper - r.lower) + r.slack for r in evaluated), default=0.0
    )
    converged = outer.converged and all(r.converged for r in evaluated)
    t_best = float(outer.witness[0])
    best_inner = inner.get(t_best)
    if best_inner is None:
        # witness must be an evaluated point; find the stored key bit-equal
        t_best, best_inner = min(inner.items(), key=lambda kv: kv[1].upper)
    witness = np.concatenate([[t_best], best_inner.witness])
    return (
        OptResult(
            lower=outer.lower,
            upper=outer.upper,
            witness=witness,
            evals=budget.used,
            converged=converged,
            k_final=outer.k_final,
            slack=slack,
        ),
        trace,
    )


def minimize_nested(fn, cfg):
    """Minimize an n-dimensional BoxFunction via the nested 1-D scheme.

    Returns (OptResult, BoundsTrace of the outermost level).  The composed
    guarantee is lower - slack <= true minimum <= upper (for a valid K);
    slack is 0 for one-dimensional problems.
    """
    budget = _Budget(cfg.max_evals)
    if fn.n == 0:
        value = fn(())
        trace = BoundsTrace()
        trace.append(TraceRecord(0, value, value, 0.0, value, cfg.k_fixed or cfg.k_init))
        return OptResult(value, value, np.array([]), 1, True, cfg.k_fixed or cfg.k_init), trace
    result, trace = _solve_nested(fn, [], cfg.eps, budget, cfg)
    trace.budget_exhausted = not result.converged and budget.used >= budget.limit
    return replace(result, evals=budget.used), trace


def maximize_nested(fn, cfg):
    """Maximize fn by minimizing its negation; bounds are negated and swapped
    on return.  The returned trace is the internal minimization trace (of -w),
    which preserves the anytime non-increasing-upper-bound property."""
    result, trace = minimize_nested(fn.negated(), cfg)
    return (
        OptResult(
            lower=-result.upper,
            upper=-result.lower,
            witness=result.witness,
            evals=result.evals,
            converged=result.converged,
            k_final=result.k_final,
            slack=result.slack,
        ),
        trace,
    )
