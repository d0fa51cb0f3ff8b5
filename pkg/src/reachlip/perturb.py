"""Scalar objectives over perturbation boxes.

This module is the boundary between the model and the optimizer: it turns a
model, an anchor input, a set of perturbed coordinates and a scalar reduction
of the outputs into a BoxFunction.  The solver only ever sees BoxFunction
values, which keeps the whole pipeline black-box (confidence values only).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import nnkit
from .nnkit import ContractError

OBJECTIVE_KINDS = ("confidence", "logit", "difference")
DIRECTIONS = ("minimize", "maximize")


@dataclass(frozen=True)
class PerturbationSpec:
    """Anchor input, perturbed coordinate subset, radius and global clamp box.

    The perturbation geometry is a per-coordinate box: coordinate d ranges
    over [max(a, x0_d - theta), min(b, x0_d + theta)], i.e. the sup-norm ball
    of radius theta intersected with [a, b] on the selected coordinates.
    """

    anchor: np.ndarray
    dims: tuple
    theta: float
    clamp: tuple

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=np.float64)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "clamp", (float(self.clamp[0]), float(self.clamp[1])))
        a, b = self.clamp
        if not np.all(np.isfinite(anchor)):
            raise ContractError("anchor contains non-finite values")
        if len(set(self.dims)) != len(self.dims):
            raise ContractError("perturbed dims must be distinct")
        if any(d < 0 or d >= anchor.size for d in self.dims):
            raise ContractError("perturbed dim index out of range")
        if self.theta < 0:
            raise ContractError("theta must be non-negative")
        if not a < b:
            raise ContractError("clamp box requires a < b")
        if np.any(anchor < a) or np.any(anchor > b):
            raise ContractError("anchor lies outside the clamp box")

    def box_bounds(self):
        """Per-dimension closed intervals of the perturbed subspace."""
        a, b = self.clamp
        return tuple(
            (max(a, self.anchor[d] - self.theta), min(b, self.anchor[d] + self.theta))
            for d in self.dims
        )


@dataclass(frozen=True)
class Objective:
    """Scalar reduction of the network outputs.

    confidence(j): output j of the model as-is (the confidence c_j of Def-style
        safety; includes the softmax when the model ends in one).
    logit(j): output j with a trailing softmax layer stripped.
    difference(j, k): c_j - c_k on the model outputs.
    """

    kind: str
    labels: tuple
    direction: str = "minimize"

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(i) for i in self.labels))
        if self.kind not in OBJECTIVE_KINDS:
            raise ContractError(f"unknown objective kind '{self.kind}'")
        if self.direction not in DIRECTIONS:
            raise ContractError(f"unknown direction '{self.direction}'")
        want = 2 if self.kind == "difference" else 1
        if len(self.labels) != want:
            raise ContractError(f"objective '{self.kind}' needs {want} label(s)")
        if self.kind == "difference" and self.labels[0] == self.labels[1]:
            raise ContractError("difference objective requires distinct labels")


class BoxFunction:
    """A deterministic scalar function over an n-dimensional box, with an
    evaluation counter.  Evaluation is pure apart from the counter, which is
    lock-protected so independent queries may share a function."""

    def __init__(self, bounds, evaluator, batch_evaluator=None, degenerate=False):
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        for lo, hi in self.bounds:
            if hi < lo:
                raise ContractError("empty interval in box bounds")
        self._evaluator = evaluator
        self._batch_evaluator = batch_evaluator
        self.degenerate = degenerate
        self._count = 0
        self._lock = threading.Lock()

    @property
    def n(self):
        return len(self.bounds)

    @property
    def eval_count(self):
        return self._count

    def __call__(self, x=()):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.size != self.n:
            raise ContractError(f"expected {self.n} coordinates, got {x.size}")
        value = float(self._evaluator(x))
        with self._lock:
            self._count += 1
        return value

    def eval_batch(self, xs):
        """Evaluate a (batch, n) array of points; counts every row."""
        xs = np.asarray(xs, dtype=np.float64)
        if self._batch_evaluator is not None:
            values = np.asarray(self._batch_evaluator(xs), dtype=np.float64)
        else:
            values = np.array([float(self._evaluator(row)) for row in xs])
        with self._lock:
            self._count += xs.shape[0]
        return values

    def negated(self):
        """View of this function with the sign flipped; shares the counter."""
        return _NegatedBoxFunction(self)


class _NegatedBoxFunction(BoxFunction):
    """Sign-flipped view sharing the parent's evaluation counter."""

    def __init__(self, parent):
        self.parent = parent
        self.bounds = parent.bounds
        self.degenerate = parent.degenerate

    @property
    def eval_count(self):
        return self.parent.eval_count

    def __call__(self, x=()):
        return -self.parent(x)

    def eval_batch(self, xs):
        return -self.parent.eval_batch(xs)

    def negated(self):
        return self.parent


def _strip_softmax(model):
    if model.layers and model.layers[-1].kind == "softmax":
        return nnkit.Model(
            input_arity=model.input_arity,
            sequence_length=model.sequence_length,
            labels=model.labels,
            layers=model.layers[:-1],
        )
    return model


def make_box_function(model, spec, objective):
    """Build the scalar box function w over the perturbed coordinates.

    Free coordinates are embedded into the anchor at the perturbed dims and
    clamped into both the theta-ball and the global box before the forward
    pass; the objective reduces the outputs to a scalar.  For
    direction=maximize the evaluator is negated so callers always minimize.

    theta == 0 yields a valid zero-dimensional constant function (flagged
    degenerate) so radius searches have a well-defined lower endpoint.
    """
    if not spec.dims:
        raise ContractError("perturbed_dims must be non-empty")
    eff = _strip_softmax(model) if objective.kind == "logit" else model
    for j in objective.labels:
        if j < 0 or j >= len(model.labels):
            raise ContractError(f"label index {j} out of range")
    if spec.anchor.size != model.input_arity:
        raise ContractError("anchor length does not match model input arity")

    bounds = spec.box_bounds()
    dims = np.array(spec.dims, dtype=int)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    anchor = spec.anchor
    sign = -1.0 if objective.direction == "maximize" else 1.0

    if objective.kind == "difference":
        j, k = objective.labels
        reduce_batch = lambda out: out[:, j] - out[:, k]
    else:
        j = objective.labels[0]
        reduce_batch = lambda out: out[:, j]

    def embed_batch(xs):
        full = np.tile(anchor, (xs.shape[0], 1))
        full[:, dims] = np.clip(xs, lo, hi)
        return full

    def evaluator(x):
        out = nnkit.forward_batch(eff, embed_batch(x[None, :]))
        return sign * float(reduce_batch(out)[0])

    def batch_evaluator(xs):
        return sign * reduce_batch(nnkit.forward_batch(eff, embed_batch(xs)))

    if spec.theta == 0.0:
        const_bounds = ()
        value_point = embed_batch(np.array([[(l + h) / 2 for l, h in bounds]]))

        def const_eval(x):
            out = nnkit.forward_batch(eff, value_point)
            return sign * float(reduce_batch(out)[0])

        return BoxFunction(const_bounds, const_eval, degenerate=True)

    return BoxFunction(bounds, evaluator, batch_evaluator=batch_evaluator)


def embed(spec, x):
    """Embed free coordinates into the anchor (clamped), returning the full
    input vector actually fed to the network."""
    bounds = spec.box_bounds()
    full = spec.anchor.copy()
    for (lo, hi), d, value in zip(bounds, spec.dims, np.atleast_1d(np.asarray(x, float))):
        full[d] = min(max(value, lo), hi)
    return full


def eval_count(fn):
    """Number of forward evaluations the function has consumed so far."""
    return fn.eval_count


def spec_from_json(doc):
    """Parse a perturbation spec from its JSON form:
    {anchor, dims, theta, clamp, objective:{kind, labels, direction}}."""
    spec = PerturbationSpec(
        anchor=doc["anchor"], dims=doc["dims"], theta=float(doc["theta"]),
        clamp=tuple(doc["clamp"]),
    )
    objective = None
    if "objective" in doc:
        objective = objective_from_json(doc["objective"])
    return spec, objective


def objective_from_json(doc):
    return Objective(
        kind=doc["kind"],
        labels=tuple(doc["labels"]),
        direction=doc.get("direction", "minimize"),
    )
