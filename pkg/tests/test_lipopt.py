"""Sawtooth optimizer: certified bounds, dynamic Lipschitz handling, traces
and the nested multidimensional scheme."""

import math

import numpy as np
import pytest

import reachlip as rl
from reachlip.lipopt import (
    EvaluationError,
    SawtoothState,
    _crossing,
    minimize_1d,
    update_lipschitz,
)
from reachlip.nnkit import ContractError
from reachlip.perturb import BoxFunction


def box(bounds, f):
    return BoxFunction(bounds, f)


class TestSolverConfig:
    def test_invariants(self):
        with pytest.raises(ContractError):
            rl.SolverConfig(eps=0)
        with pytest.raises(ContractError):
            rl.SolverConfig(eta=1.0)
        with pytest.raises(ContractError):
            rl.SolverConfig(max_evals=2)
        with pytest.raises(ContractError):
            rl.SolverConfig(k_fixed=0.0)


class TestOneDimensional:
    def test_vee_function_fixed_k(self):
        fn = box([(0, 1)], lambda x: abs(x[0] - 0.5))
        res, trace = minimize_1d(fn, (0, 1), rl.SolverConfig(eps=1e-3, k_fixed=2.0))
        assert res.converged
        assert -1e-3 <= res.lower <= 0.0 <= res.upper <= 1e-3
        assert abs(res.witness[0] - 0.5) <= 1e-3
        assert res.evals < 200

    def test_sine_example_dynamic_k(self):
        fn = box([(0, 2)], lambda x: math.sin(3 * x[0]))
        res, _ = minimize_1d(fn, (0, 2), rl.SolverConfig(eps=1e-3, k_init=3.3))
        true_min = math.sin(3 * (math.pi / 2))
        assert res.lower <= true_min <= res.upper
        assert res.upper - res.lower <= 1e-3
        assert abs(res.witness[0] - math.pi / 2) <= 1e-2

    def test_witness_value_equals_upper_bound(self):
        fn = box([(0, 1)], lambda x: (x[0] - 0.3) ** 2)
        res, _ = minimize_1d(fn, (0, 1), rl.SolverConfig(eps=1e-4))
        assert fn(res.witness) == res.upper

    def test_budget_exhaustion_keeps_honest_bounds(self):
        fn = box([(0, 1)], lambda x: abs(x[0] - 0.5))
        res, trace = minimize_1d(fn, (0, 1), rl.SolverConfig(eps=1e-12, k_fixed=2.0, max_evals=20))
        assert not res.converged
        assert trace.budget_exhausted
        assert res.lower <= 0.0 <= res.upper

    def test_degenerate_interval(self):
        fn = box([(0.5, 0.5)], lambda x: x[0] ** 2)
        res, _ = minimize_1d(fn, (0.5, 0.5), rl.SolverConfig())
        assert res.converged and res.lower == res.upper == 0.25

    def test_nan_objective_raises_with_trace(self):
        fn = box([(0, 1)], lambda x: float("nan") if x[0] > 0.9 else x[0])
        with pytest.raises(EvaluationError) as exc:
            minimize_1d(fn, (0, 1), rl.SolverConfig())
        assert exc.value.trace is not None

    def test_deterministic_reruns(self):
        cfg = rl.SolverConfig(eps=1e-4)
        f = lambda x: math.sin(5 * x[0]) + 0.3 * x[0]
        r1, t1 = minimize_1d(box([(0, 2)], f), (0, 2), cfg)
        r2, t2 = minimize_1d(box([(0, 2)], f), (0, 2), cfg)
        assert t1.to_csv() == t2.to_csv()
        assert (r1.lower, r1.upper) == (r2.lower, r2.upper)


class TestDynamicLipschitz:
    def test_matches_eta_times_max_quotient(self):
        cfg = rl.SolverConfig(eta=1.5, k_init=0.1)
        state = SawtoothState(ys=[0.0, 0.5, 1.0], ws=[0.0, 1.0, 0.5], zs=[0, 0], k=0.1)
        k = update_lipschitz(state, cfg)
        assert k == pytest.approx(1.5 * 2.0)

    def test_never_decreases(self):
        cfg = rl.SolverConfig(eta=1.5, k_init=0.1)
        state = SawtoothState(ys=[0.0, 1.0], ws=[0.0, 0.01], zs=[0], k=5.0)
        assert update_lipschitz(state, cfg) == 5.0

    def test_growth_recomputes_crossings(self):
        cfg = rl.SolverConfig(eta=2.0, k_init=0.1)
        state = SawtoothState(ys=[0.0, 1.0], ws=[0.0, 3.0], zs=[999.0], k=0.1)
        update_lipschitz(state, cfg)
        assert state.zs == [_crossing(state, 0)]

    def test_noise_discounts_quotients(self):
        cfg = rl.SolverConfig(eta=1.5, k_init=0.1)
        state = SawtoothState(ys=[0.0, 0.01], ws=[0.0, 0.005], zs=[0], k=0.1)
        noisy = update_lipschitz(state, cfg, noise=0.005)
        assert noisy == pytest.approx(0.1)  # slope fully explained by noise

    def test_duplicate_abscissae_skipped(self):
        cfg = rl.SolverConfig(eta=1.5, k_init=1.0)
        state = SawtoothState(ys=[0.0, 0.0, 1.0], ws=[0.0, 5.0, 0.5], zs=[0, 0], k=1.0)
        assert update_lipschitz(state, cfg) == pytest.approx(1.5 * 4.5)


class TestTrace:
    def test_anytime_properties(self):
        fn = box([(0, 2)], lambda x: math.sin(3 * x[0]))
        res, trace = minimize_1d(fn, (0, 2), rl.SolverConfig(eps=1e-4, k_init=1.0))
        uppers = [r.upper for r in trace]
        assert all(a >= b for a, b in zip(uppers, uppers[1:]))
        for prev, cur in zip(trace.records, trace.records[1:]):
            if cur.k == prev.k:
                assert cur.lower >= prev.lower - 1e-12
        assert res.converged and res.upper - res.lower <= 1e-4

    def test_csv_header_and_shape(self):
        fn = box([(0, 1)], lambda x: x[0])
        _, trace = minimize_1d(fn, (0, 1), rl.SolverConfig())
        lines = trace.to_csv().strip().splitlines()
        assert lines[0] == "iter,l,u,y,w,K"
        assert len(lines) == len(trace) + 1

    def test_csv_written_to_file(self, tmp_path):
        fn = box([(0, 1)], lambda x: x[0])
        _, trace = minimize_1d(fn, (0, 1), rl.SolverConfig())
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        assert path.read_text().startswith("iter,l,u,y,w,K")

    def test_json_mirror(self):
        fn = box([(0, 1)], lambda x: x[0])
        _, trace = minimize_1d(fn, (0, 1), rl.SolverConfig())
        rows = trace.to_json()
        assert rows and set(rows[0]) == {"iter", "l", "u", "y", "w", "K"}


class TestNested:
    def test_2d_paraboloid(self):
        fn = box([(0, 1), (0, 1)], lambda x: (x[0] - 0.25) ** 2 + (x[1] - 0.75) ** 2)
        res, _ = rl.minimize_nested(fn, rl.SolverConfig(eps=1e-3, max_evals=100000))
        assert res.converged
        assert res.lower - res.slack <= 0.0 <= res.upper
        assert res.upper <= 1e-3
        assert np.allclose(res.witness, [0.25, 0.75], atol=0.05)

    def test_witness_value_equals_upper(self):
        fn = box([(0, 1), (0, 1)], lambda x: abs(x[0] - 0.4) + abs(x[1] - 0.6))
        res, _ = rl.minimize_nested(fn, rl.SolverConfig(eps=1e-2, max_evals=50000))
        assert fn(res.witness) == res.upper

    def test_fixed_inner_eps_controls_slack(self):
        fn = box([(0, 1), (0, 1)], lambda x: (x[0] - 0.5) ** 2 + abs(x[1] - 0.5))
        cfg = rl.SolverConfig(eps=1e-2, inner_eps=1e-3, max_evals=50000)
        res, _ = rl.minimize_nested(fn, cfg)
        assert res.converged
        assert res.slack <= 1e-3 + 1e-12

    def test_zero_dimensional_constant(self):
        fn = BoxFunction([], lambda x: 7.5, degenerate=True)
        res, trace = rl.minimize_nested(fn, rl.SolverConfig())
        assert res.converged and res.lower == res.upper == 7.5
        assert len(trace) == 1

    def test_maximize_swaps_bounds(self):
        fn = box([(0, 1)], lambda x: x[0] * (1 - x[0]))
        res, _ = rl.maximize_nested(fn, rl.SolverConfig(eps=1e-4))
        assert res.lower <= 0.25 <= res.upper
        assert res.upper - res.lower <= 1e-4
        assert abs(res.witness[0] - 0.5) <= 0.02

    def test_budget_shared_across_levels(self):
        fn = box([(0, 1), (0, 1)], lambda x: (x[0] - 0.3) ** 2 + (x[1] - 0.3) ** 2)
        res, trace = rl.minimize_nested(fn, rl.SolverConfig(eps=1e-6, max_evals=500))
        assert not res.converged
        assert res.evals <= 500
        assert trace.budget_exhausted
