"""Brute-force grid ground truth, used by tests to check the solver.

Deliberately independent of the optimizer: everything here is exhaustive
enumeration over lattices, built on the model's forward pass alone.  For a
K-Lipschitz function the lattice extrema are within K * step / 2 per
dimension of the true extrema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nnkit, perturb
from .nnkit import ContractError

DEFAULT_CAP = 10_000_000


class GridCapError(ContractError):
    """Requested lattice exceeds the point cap; message hints the step needed."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice: per-dimension step size, endpoints always included."""

    step: float
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.step <= 0:
            raise ContractError("grid step must be positive")


def _axis(lo, hi, step):
    if hi <= lo:
        return np.array([lo])
    count = int(np.floor((hi - lo) / step + 1e-12)) + 1
    pts = lo + step * np.arange(count)
    if pts[-1] < hi - 1e-15:
        pts = np.append(pts, hi)
    else:
        pts[-1] = hi  # keep the endpoint exact
    return pts


def _check_cap(sizes, grid, bounds):
    total = 1
    for s in sizes:
        total *= s
    if total > grid.cap:
        widths = [hi - lo for lo, hi in bounds]
        need = max(widths) / (grid.cap ** (1.0 / max(len(bounds), 1)))
        raise GridCapError(
            f"grid of {total} points exceeds cap {grid.cap}; "
            f"use a step of at least ~{need:.3g}"
        )
    return total


def grid_points(bounds, grid):
    """All lattice points of the box as a (count, n) array, index order."""
    axes = [_axis(lo, hi, grid.step) for lo, hi in bounds]
    _check_cap([len(a) for a in axes], grid, bounds)
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_extrema(fn, grid):
    """Exact extrema of a BoxFunction over the lattice.

    Returns ((min_value, min_point), (max_value, max_point)); ties resolve to
    the lowest lattice index, so results are deterministic.
    """
    if fn.n == 0:
        v = fn(())
        p = np.array([])
        return (v, p), (v, p)
    pts = grid_points(fn.bounds, grid)
    values = np.empty(pts.shape[0])
    chunk = 65536
    for start in range(0, pts.shape[0], chunk):
        values[start : start + chunk] = fn.eval_batch(pts[start : start + chunk])
    imin = int(np.argmin(values))
    imax = int(np.argmax(values))
    return (float(values[imin]), pts[imin]), (float(values[imax]), pts[imax])


def grid_flip_radius(model, spec, grid, theta_step):
    """Smallest perturbation radius at which some lattice point in the ball
    flips the argmax label, or None if no flip exists up to b - a.

    The lattice is anchored at x0 (points x0_d + k * step, clamped), so the
    sweep over theta in steps of theta_step visits a growing prefix of one
    fixed point set; the first radius whose ball contains a flipping point is
    returned together with that point.
    """
    if theta_step <= 0:
        raise ContractError("theta_step must be positive")
    anchor_out = nnkit.forward(model, spec.anchor)
    orig = int(np.argmax(anchor_out))
    a, b = spec.clamp
    full = perturb.PerturbationSpec(spec.anchor, spec.dims, b - a, spec.clamp)
    bounds = full.box_bounds()

    # anchored axes: x0_d, x0_d +- step, ... within the clamped max ball
    axes = []
    for (lo, hi), d in zip(bounds, full.dims):
        x0 = spec.anchor[d]
        down = np.floor((x0 - lo) / grid.step + 1e-12)
        up = np.floor((hi - x0) / grid.step + 1e-12)
        pts = x0 + grid.step * np.arange(-down, up + 1)
        pts = np.clip(pts, lo, hi)
        axes.append(pts)
    _check_cap([len(ax) for ax in axes], grid, bounds)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)

    dims = np.array(full.dims, dtype=int)
    inputs = np.tile(spec.anchor, (pts.shape[0], 1))
    inputs[:, dims] = pts
    flips = np.zeros(pts.shape[0], dtype=bool)
    chunk = 65536
    for start in range(0, pts.shape[0], chunk):
        out = nnkit.forward_batch(model, inputs[start : start + chunk])
        flips[start : start + chunk] = np.argmax(out, axis=1) != orig
    if not np.any(flips):
        return None
    dist = np.max(np.abs(pts - spec.anchor[dims]), axis=1)
    dist_flip = dist[flips]
    order = np.argsort(dist_flip, kind="stable")
    best = order[0]
    witness = inputs[np.flatnonzero(flips)[best]]
    # first swept radius (multiple of theta_step) whose ball contains the point
    radius = float(np.ceil(dist_flip[best] / theta_step - 1e-12) * theta_step)
    return radius, witness
