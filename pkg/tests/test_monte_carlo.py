import numpy as np
import pytest

from src.config import settings
from src.models.scheme import SchemeParams1cw
from src.models.unraveling import ClickRecord
from src.services.monte_carlo import NO_CLICKS, build_kernel, monte_carlo, sample_trajectory, trajectory_rng
from src.services.protocols import build_model
from src.services.unraveling import bundle_for, conditional_state_one_click, scenario_probabilities
from src.utils.quantum import fidelity


@pytest.fixture
def model():
    return build_model("1cw", SchemeParams1cw(eta=0.5, t_cw=1.0))


class TestClickRecord:
    def test_pattern(self):
        record = ClickRecord(window=1.0, events=[(0.1, "D+"), (0.4, "D-")])
        assert record.pattern == "D+,D-"

    def test_rejects_unordered_events(self):
        with pytest.raises(ValueError):
            ClickRecord(window=1.0, events=[(0.4, "D+"), (0.4, "D-")])

    def test_rejects_events_outside_window(self):
        with pytest.raises(ValueError):
            ClickRecord(window=1.0, events=[(1.5, "D+")])


class TestSampling:
    def test_trajectory_is_deterministic(self, model):
        kernel = build_kernel(bundle_for(model), model.rho0, model.window)
        first, psi1 = sample_trajectory(kernel, trajectory_rng(7, 3))
        second, psi2 = sample_trajectory(kernel, trajectory_rng(7, 3))
        assert first == second
        np.testing.assert_array_equal(psi1, psi2)

    def test_at_most_two_clicks(self, model):
        kernel = build_kernel(bundle_for(model), model.rho0, model.window)
        for i in range(200):
            record, psi = sample_trajectory(kernel, trajectory_rng(1, i))
            assert len(record.events) <= 2
            assert np.linalg.norm(psi) == pytest.approx(1.0)

    def test_zero_window(self, model):
        result = monte_carlo(bundle_for(model), model.rho0, 0.0, n_traj=50, seed=1, workers=1)
        assert result.counts == {0: 50}
        assert result.pattern_counts == {NO_CLICKS: 50}

    def test_invalid_arguments(self, model):
        with pytest.raises(ValueError):
            monte_carlo(bundle_for(model), model.rho0, 1.0, n_traj=0)
        with pytest.raises(ValueError):
            build_kernel(bundle_for(model), model.rho0, -1.0)


class TestMonteCarlo:
    def test_same_seed_same_result(self, model):
        bundle = bundle_for(model)
        a = monte_carlo(bundle, model.rho0, model.window, n_traj=300, seed=5, workers=1)
        b = monte_carlo(bundle, model.rho0, model.window, n_traj=300, seed=5, workers=1)
        assert a.counts == b.counts
        assert a.pattern_counts == b.pattern_counts

    def test_result_independent_of_workers(self, model, monkeypatch):
        monkeypatch.setattr(settings, "mc_chunk_size", 100)
        bundle = bundle_for(model)
        serial = monte_carlo(bundle, model.rho0, model.window, n_traj=400, seed=11, workers=1)
        parallel = monte_carlo(bundle, model.rho0, model.window, n_traj=400, seed=11, workers=2)
        assert serial.counts == parallel.counts
        assert serial.port_counts == parallel.port_counts
        for pattern, state in serial.conditional_states.items():
            np.testing.assert_array_equal(state.matrix, parallel.conditional_states[pattern].matrix)

    def test_counts_sum_to_trajectories(self, model):
        result = monte_carlo(bundle_for(model), model.rho0, model.window, n_traj=500, seed=2, workers=1)
        assert sum(result.counts.values()) == 500
        assert sum(result.pattern_counts.values()) == 500
        assert result.p0 + result.p1 + result.p2 == pytest.approx(1.0)

    def test_matches_engine_probabilities(self, model):
        bundle = bundle_for(model)
        exact = scenario_probabilities(bundle, model.rho0, model.window)
        result = monte_carlo(bundle, model.rho0, model.window, n_traj=4000, seed=3, workers=1)
        for clicks, p in ((0, exact.p0), (1, exact.p1), (2, exact.p2)):
            sigma = np.sqrt(p * (1 - p) / result.n_traj)
            assert abs(result.probability(clicks) - p) < 4 * sigma

    @pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("p1", [0.05, 0.15, 0.4])
    def test_matches_engine_over_grid(self, eta, p1):
        grid_model = build_model("1cw", SchemeParams1cw(p1=p1, eta=eta))
        bundle = bundle_for(grid_model)
        exact = scenario_probabilities(bundle, grid_model.rho0, grid_model.window)
        result = monte_carlo(bundle, grid_model.rho0, grid_model.window, n_traj=2000, seed=11, workers=1, keep_states=False)
        for clicks, p in ((0, exact.p0), (1, exact.p1), (2, exact.p2)):
            sigma = np.sqrt(p * (1 - p) / result.n_traj)
            # 稀有事件下再留一条轨迹的离散误差
            assert abs(result.probability(clicks) - p) < 4 * sigma + 1.0 / result.n_traj

    def test_conditional_state_matches_engine(self, model):
        bundle = bundle_for(model)
        result = monte_carlo(bundle, model.rho0, model.window, n_traj=4000, seed=4, workers=1)
        engine = conditional_state_one_click(bundle, model.rho0, "D+", model.window)
        sampled = result.conditional_states["D+"]
        assert fidelity(model.target, sampled) == pytest.approx(fidelity(model.target, engine.state), abs=0.05)

    def test_low_efficiency_benchmark(self):
        # p1 = 0.15, η = 0.005：单击概率约 1.499e-3
        low = build_model("1cw", SchemeParams1cw(p1=0.15, eta=0.005))
        result = monte_carlo(bundle_for(low), low.rho0, low.window, n_traj=20_000, seed=42, workers=1, keep_states=False)
        expected = 1.498875e-3
        sigma = np.sqrt(expected * (1 - expected) / result.n_traj)
        assert abs(result.p1 - expected) < 4 * sigma
        assert result.conditional_states == {}
