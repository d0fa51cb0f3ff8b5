"""Grid oracle: exhaustive enumeration used as ground truth elsewhere."""

import numpy as np
import pytest

import reachlip as rl
from reachlip.nnkit import ContractError
from reachlip.oracle import GridCapError, GridSpec, grid_points
from reachlip.perturb import BoxFunction
from conftest import random_dense_net


def flip_model():
    """One input, two logits c = (1 - x, x); the argmax flips at x = 0.5."""
    layer = rl.Layer(
        "dense",
        activation="identity",
        params={"W": np.array([[-1.0], [1.0]]), "b": np.array([1.0, 0.0])},
    )
    return rl.Model(1, 1, ("a", "b"), (layer,))


class TestGridPoints:
    def test_endpoints_always_included(self):
        pts = grid_points([(0.0, 1.0)], GridSpec(step=0.3))
        assert pts[0, 0] == 0.0 and pts[-1, 0] == 1.0

    def test_cartesian_structure(self):
        pts = grid_points([(0, 1), (0, 1)], GridSpec(step=0.5))
        assert pts.shape == (9, 2)

    def test_cap_error_suggests_step(self):
        with pytest.raises(GridCapError, match="step"):
            grid_points([(0, 1)] * 4, GridSpec(step=1e-3, cap=1000))

    def test_step_must_be_positive(self):
        with pytest.raises(ContractError):
            GridSpec(step=0.0)


class TestGridExtrema:
    def test_quadratic_extrema(self):
        fn = BoxFunction([(0, 1)], lambda x: (x[0] - 0.3) ** 2)
        (mn, argmn), (mx, argmx) = rl.grid_extrema(fn, GridSpec(step=1e-3))
        assert mn == pytest.approx(0.0, abs=1e-6)
        assert argmn[0] == pytest.approx(0.3, abs=1e-3)
        assert mx == pytest.approx(0.49, abs=1e-3)
        assert argmx[0] == pytest.approx(1.0)

    def test_two_dims_batched(self):
        fn = BoxFunction(
            [(0, 1), (0, 1)],
            lambda x: x[0] + 2 * x[1],
            batch_evaluator=lambda xs: xs[:, 0] + 2 * xs[:, 1],
        )
        (mn, _), (mx, _) = rl.grid_extrema(fn, GridSpec(step=0.01))
        assert mn == pytest.approx(0.0) and mx == pytest.approx(3.0)

    def test_deterministic_tie_break(self):
        fn = BoxFunction([(0, 1)], lambda x: 0.0)
        (_, argmn), _ = rl.grid_extrema(fn, GridSpec(step=0.25))
        assert argmn[0] == 0.0  # lowest index wins

    def test_zero_dimensional(self):
        fn = BoxFunction([], lambda x: 4.2, degenerate=True)
        (mn, _), (mx, _) = rl.grid_extrema(fn, GridSpec(step=0.1))
        assert mn == mx == 4.2


class TestGridFlipRadius:
    def test_analytic_flip_at_half(self):
        spec = rl.PerturbationSpec([0.2], [0], 0.1, (0, 1))
        got = rl.grid_flip_radius(flip_model(), spec, GridSpec(step=1e-5), theta_step=1e-4)
        assert got is not None
        radius, witness = got
        assert radius == pytest.approx(0.3, abs=2e-4)
        out = rl.forward(flip_model(), witness)
        assert np.argmax(out) == 1

    def test_none_when_no_flip(self, rng):
        # constant-argmax model: second logit always dominated
        layer = rl.Layer(
            "dense",
            activation="identity",
            params={"W": np.zeros((2, 1)), "b": np.array([1.0, 0.0])},
        )
        model = rl.Model(1, 1, ("a", "b"), (layer,))
        spec = rl.PerturbationSpec([0.5], [0], 0.1, (0, 1))
        assert rl.grid_flip_radius(model, spec, GridSpec(step=0.01), theta_step=0.01) is None

    def test_theta_step_must_be_positive(self):
        spec = rl.PerturbationSpec([0.2], [0], 0.1, (0, 1))
        with pytest.raises(ContractError):
            rl.grid_flip_radius(flip_model(), spec, GridSpec(step=0.01), theta_step=0.0)

    def test_unperturbed_coordinates_stay_anchored(self, rng):
        model = random_dense_net(rng, 3, 4, 2)
        spec = rl.PerturbationSpec([0.5, 0.5, 0.5], [1], 0.2, (0, 1))
        got = rl.grid_flip_radius(model, spec, GridSpec(step=0.01), theta_step=0.01)
        if got is not None:
            _, witness = got
            assert witness[0] == 0.5 and witness[2] == 0.5
