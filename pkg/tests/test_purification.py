import numpy as np
import pytest

from src.models.purification import BellDiagonalState, LocalRotation, PairSource, PurificationPlan, RegionPoint
from src.services.purification import (
    PAIR,
    bell_frame_rotation,
    oracle_step,
    pair_source_1cw,
    purified_region,
    recurrence_step,
    run_plan,
    steps_to_threshold,
)
from src.utils.bell import bell_coefficients, bell_state, werner
from src.utils.quantum import fidelity, random_density


def _random_bell_diagonal(rng):
    return BellDiagonalState.of(rng.dirichlet(np.ones(4)))


def _source_fidelity(source: PairSource) -> float:
    return fidelity(bell_state("psi_plus", PAIR), source.state)


class TestBellDiagonalState:
    def test_sum_validation(self):
        with pytest.raises(ValueError):
            BellDiagonalState(a=0.5, b=0.2, c=0.2, d=0.2)

    def test_density_coefficients(self):
        state = BellDiagonalState.from_density(werner(0.85, PAIR))
        assert state.fidelity == pytest.approx(0.85)
        assert state.b == pytest.approx(0.05)

    def test_to_density(self):
        rho = BellDiagonalState(a=0.7, b=0.1, c=0.1, d=0.1).to_density()
        np.testing.assert_allclose(bell_coefficients(rho), [0.7, 0.1, 0.1, 0.1], atol=1e-12)


class TestRecurrence:
    def test_werner_step(self):
        n, out = recurrence_step(BellDiagonalState(a=0.85, b=0.05, c=0.05, d=0.05))
        assert n == pytest.approx(0.82)
        assert out.a == pytest.approx(0.884146, abs=1e-6)

    def test_uniform_state_is_stationary(self):
        n, out = recurrence_step(BellDiagonalState(a=0.25, b=0.25, c=0.25, d=0.25))
        assert n == pytest.approx(0.5)
        assert out.a == pytest.approx(0.25)

    @pytest.mark.parametrize("rotation", list(LocalRotation))
    def test_phi_plus_is_fixed_point(self, rotation):
        n, out = recurrence_step(BellDiagonalState(a=1.0, b=0.0, c=0.0, d=0.0), rotation)
        assert n == pytest.approx(1.0)
        assert out.a == pytest.approx(1.0)

    def test_success_probability_at_least_half(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            for rotation in (LocalRotation.X, LocalRotation.Z):
                n, _ = recurrence_step(_random_bell_diagonal(rng), rotation)
                assert 0.5 - 1e-12 <= n <= 1.0 + 1e-12

    @pytest.mark.parametrize("rotation", [LocalRotation.X, LocalRotation.Z])
    def test_matches_circuit_simulation(self, rotation):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            state = _random_bell_diagonal(rng)
            n, out = recurrence_step(state, rotation)
            n_sim, rho, _ = oracle_step(state.to_density(), rotation)
            assert n_sim == pytest.approx(n, abs=1e-10)
            np.testing.assert_allclose(bell_coefficients(rho), out.coefficients, atol=1e-10)

    def test_adaptive_picks_larger_weight(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            state = _random_bell_diagonal(rng)
            _, adaptive = recurrence_step(state, LocalRotation.ADAPTIVE)
            _, x = recurrence_step(state, LocalRotation.X)
            _, z = recurrence_step(state, LocalRotation.Z)
            assert adaptive.a == pytest.approx(max(x.a, z.a))


class TestOracle:
    def test_rejects_wrong_dimension(self):
        rho = random_density(PAIR.compose(PAIR), np.random.default_rng(1))
        with pytest.raises(ValueError):
            oracle_step(rho)

    def test_output_is_density(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            n, rho, _ = oracle_step(random_density(PAIR, rng))
            assert 0.0 < n <= 1.0
            assert rho.trace == pytest.approx(1.0)

    def test_one_photon_source_prefers_z(self):
        source = pair_source_1cw(0.3, 0.1)
        f = _source_fidelity(source)
        n, rho, chosen = oracle_step(bell_frame_rotation(source.state), LocalRotation.ADAPTIVE)
        assert chosen is LocalRotation.Z
        assert n == pytest.approx(f ** 2 + (1 - f) ** 2, abs=1e-10)
        assert fidelity(bell_state("phi_plus", PAIR), rho) == pytest.approx(f ** 2 / n, abs=1e-10)

    def test_x_rotation_lowers_one_photon_fidelity(self):
        source = pair_source_1cw(0.3, 0.1)
        _, rho, _ = oracle_step(bell_frame_rotation(source.state), LocalRotation.X)
        assert fidelity(bell_state("phi_plus", PAIR), rho) < _source_fidelity(source)


class TestFrameRotation:
    def test_involution(self):
        rho = random_density(PAIR, np.random.default_rng(4))
        twice = bell_frame_rotation(bell_frame_rotation(rho), -1)
        np.testing.assert_allclose(twice.matrix, rho.matrix, atol=1e-14)

    def test_maps_psi_plus_to_phi_plus(self):
        rotated = bell_frame_rotation(bell_state("psi_plus", PAIR))
        assert fidelity(bell_state("phi_plus", PAIR), rotated) == pytest.approx(1.0)

    def test_direction(self):
        with pytest.raises(ValueError):
            bell_frame_rotation(bell_state("psi_plus", PAIR), 2)


class TestPlans:
    def test_zero_steps(self):
        source = pair_source_1cw(0.15, 0.005)
        plan = run_plan(source, 0)
        assert plan.n_pairs == 1
        assert plan.p_total == pytest.approx(source.p_suc)
        assert plan.fidelity == pytest.approx(0.850638, abs=1e-6)

    @pytest.mark.parametrize("f_source", np.linspace(0.7, 0.98, 15))
    def test_one_step_improves_one_photon_source(self, f_source):
        eta = 0.1
        source = pair_source_1cw((1.0 - f_source) / (1.0 - eta * f_source), eta)
        assert _source_fidelity(source) == pytest.approx(f_source, abs=1e-12)
        plan = run_plan(source, 1)
        assert plan.rotations == [LocalRotation.Z]
        assert plan.fidelity > f_source
        assert plan.fidelity == pytest.approx(f_source ** 2 / (f_source ** 2 + (1 - f_source) ** 2), abs=1e-10)

    def test_two_steps_follow_closed_form_chain(self):
        source = pair_source_1cw(0.15, 0.4)
        f0 = 0.85 / 0.94
        n0 = f0 ** 2 + (1 - f0) ** 2
        f1 = f0 ** 2 / n0
        n1 = f1 ** 2 + (1 - f1) ** 2
        f2 = f1 ** 2 / n1
        plan = run_plan(source, 2)
        assert source.p_suc == pytest.approx(2 * 0.06 * 0.94)
        assert plan.n_pairs == 4
        np.testing.assert_allclose(plan.step_probabilities, [n0, n1], atol=1e-10)
        assert plan.p_pur == pytest.approx(n0 ** 2 * n1, abs=1e-10)
        assert plan.p_total == pytest.approx(source.p_suc * n0 ** 2 * n1 / 4, abs=1e-12)
        assert plan.fidelity == pytest.approx(f2, abs=1e-10)

    def test_success_probability_product(self):
        source = pair_source_1cw(0.1, 0.05)
        plan = run_plan(source, 3)
        n0, n1, n2 = plan.step_probabilities
        assert plan.n_pairs == 8
        assert plan.p_pur == pytest.approx(n0 ** 4 * n1 ** 2 * n2)
        assert plan.p_total == pytest.approx(source.p_suc * plan.p_pur / 8)
        assert plan.fidelity > run_plan(source, 2).fidelity

    def test_engine_source_matches_closed_form(self):
        closed = pair_source_1cw(0.2, 0.3)
        engine = pair_source_1cw(0.2, 0.3, engine=True)
        assert engine.p_suc == pytest.approx(closed.p_suc, abs=1e-8)
        assert _source_fidelity(engine) == pytest.approx(_source_fidelity(closed), abs=1e-8)
        assert run_plan(engine, 2).fidelity == pytest.approx(run_plan(closed, 2).fidelity, abs=1e-7)

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            PurificationPlan(steps=1, n_pairs=1, step_probabilities=[0.5], rotations=["x"], p_pur=0.5, p_total=0.1, fidelity=0.9)
        with pytest.raises(ValueError):
            PurificationPlan(steps=1, n_pairs=2, step_probabilities=[0.5], rotations=["x"], p_pur=0.4, p_total=0.1, fidelity=0.9)
        with pytest.raises(ValueError):
            run_plan(pair_source_1cw(0.1, 0.1), -1)

    def test_steps_to_threshold(self):
        source = pair_source_1cw(0.2, 0.01)
        plan = steps_to_threshold(source, 0.99)
        assert plan is not None
        assert plan.steps >= 1
        assert plan.fidelity > 0.99
        assert run_plan(source, plan.steps - 1).fidelity <= 0.99

    def test_threshold_not_reached(self):
        assert steps_to_threshold(pair_source_1cw(0.2, 0.01), 0.99, max_steps=0) is None
        with pytest.raises(ValueError):
            steps_to_threshold(pair_source_1cw(0.2, 0.01), 1.0)


class TestRegion:
    def test_row_order(self):
        points = purified_region([0.01, 0.05], [0.01, 0.1], 0.9, [0, 1])
        keys = [(p.eta, p.p1, p.steps) for p in points]
        assert keys == [(e, p, j) for e in (0.01, 0.1) for p in (0.01, 0.05) for j in (0, 1)]

    def test_inside_requires_both(self):
        point = RegionPoint(p1=0.1, eta=0.1, steps=1, fidelity=0.95, p_total=1e-3, fidelity_ok=True, probability_ok=False)
        assert not point.inside
        assert point.model_dump()["inside"] is False

    def test_regions_nest_with_steps(self):
        points = purified_region([0.01, 0.05, 0.1, 0.2], [0.01, 0.1, 0.5], 0.9, [0, 1, 2])
        by_point = {}
        for p in points:
            by_point.setdefault((p.eta, p.p1), []).append(p)
        for series in by_point.values():
            for lower, upper in zip(series, series[1:]):
                assert upper.fidelity_ok >= lower.fidelity_ok
                assert upper.probability_ok <= lower.probability_ok
                assert upper.p_total <= lower.p_total / 2 + 1e-18

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            purified_region([0.1], [0.1], 0.9, [])
        with pytest.raises(ValueError):
            purified_region([0.1], [0.1], 1.5, [0])
