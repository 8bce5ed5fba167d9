import math

import numpy as np
import pytest

from src.config import settings
from src.models.run import PublishedValue, RegionSpec, SweepSpec
from src.services.sweeps import (
    FIGURE_SWEEPS,
    PRESETS,
    REGION_COLUMNS,
    benchmark,
    crossover_fidelity,
    figure_sweep,
    published_tolerance,
    region_map,
    region_success_dominance,
    region_threshold_1cw,
    sweep,
)


class TestRegionFormulas:
    def test_fidelity_threshold(self):
        p_max = region_threshold_1cw(0.99, 0.004)
        assert 0.005 < p_max
        assert region_threshold_1cw(0.9, 0.0) == pytest.approx(0.1)

    def test_dominance_interval(self):
        low, high = region_success_dominance(0.5)
        assert low == pytest.approx(0.13397, abs=1e-5)
        assert high == 1.0

    def test_dominance_without_detection(self):
        assert region_success_dominance(0.0) == (0.0, 0.0)

    @pytest.mark.parametrize("eta", [0.001, 0.01, 0.05])
    def test_crossover_at_small_efficiency(self, eta):
        f = crossover_fidelity(eta)
        p_max = region_threshold_1cw(f, eta)
        low, _ = region_success_dominance(eta)
        assert abs(p_max - low) / low < 2 * eta

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            region_threshold_1cw(1.0, 0.1)
        with pytest.raises(ValueError):
            region_success_dominance(1.5)
        with pytest.raises(ValueError):
            crossover_fidelity(-0.1)


class TestSweep:
    def test_grid_includes_endpoints(self):
        spec = SweepSpec(scheme="1cw", parameter="p1", start=0.0, stop=1.0, steps=11, fixed={"eta": 0.1})
        frame = sweep(spec, workers=1)
        assert list(frame.columns) == ["p1", "p_suc", "fidelity", "avg_fidelity"]
        assert len(frame) == 11
        assert frame["p1"].iloc[0] == 0.0
        assert frame["p1"].iloc[-1] == 1.0
        assert frame["p1"].is_monotonic_increasing

    def test_time_sweep_starts_without_success(self):
        spec = SweepSpec(scheme="2ph", parameter="t", start=0.0, stop=3.0, steps=7, fixed={"eta": 0.5})
        frame = sweep(spec, workers=1)
        assert frame["p_suc"].iloc[0] == 0.0
        assert frame["p_suc"].iloc[-1] == pytest.approx(0.125 * (1 - math.exp(-3.0)) ** 2)

    def test_engine_columns_match_closed_form(self):
        spec = SweepSpec(scheme="1cw", parameter="t", start=0.5, stop=1.5, steps=3, fixed={"eta": 0.3}, engine=True)
        frame = sweep(spec, workers=1)
        np.testing.assert_allclose(frame["engine_p_suc"], frame["p_suc"], atol=1e-8)
        np.testing.assert_allclose(frame["engine_fidelity"], frame["fidelity"], atol=1e-8)

    def test_parallel_rows_keep_order(self):
        spec = SweepSpec(scheme="1cw", parameter="eta", start=0.1, stop=0.9, steps=4, fixed={"t_cw": 1.0}, engine=True)
        serial = sweep(spec, workers=1)
        parallel = sweep(spec, workers=2)
        np.testing.assert_array_equal(serial.to_numpy(), parallel.to_numpy())

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(scheme="1cw", parameter="eps2", start=0.0, stop=1.0, steps=5)
        with pytest.raises(ValueError):
            SweepSpec(scheme="1cw", parameter="p1", start=0.0, stop=2.0, steps=5)
        with pytest.raises(ValueError):
            SweepSpec(scheme="1cw", parameter="p1", start=0.0, stop=1.0, steps=1)
        with pytest.raises(ValueError):
            SweepSpec(scheme="1cw", parameter="p1", start=0.0, stop=1.0, steps=5, fixed={"p1": 0.1})


class TestFigurePresets:
    def test_presets_are_complete(self):
        assert set(FIGURE_SWEEPS) == {"1cw-time", "1pls-time-eps2", "1pls-time-eta", "1pls-eps2-limit", "2ph-time"}

    def test_curves_are_labelled(self):
        frame = figure_sweep("1cw-time")
        assert len(frame) == 3 * 201
        assert list(frame["label"].unique()) == ["eta=0.05", "eta=0.5", "eta=0.95"]

    def test_long_window_limit(self):
        frame = figure_sweep("1pls-eps2-limit")
        row = frame[(frame["label"] == "eta=0.5") & np.isclose(frame["eps2"], 0.5)].iloc[0]
        assert row["fidelity"] == pytest.approx(0.5 / 0.75)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            figure_sweep("unknown-curve")


class TestBenchmark:
    def test_free_space_rate(self):
        result = benchmark("ca40-freespace")
        assert result.events_per_second == pytest.approx(149.9, rel=1e-3)

    def test_cavity_rate(self):
        result = benchmark("ca40-cavity")
        assert result.events_per_second == pytest.approx(1983, rel=1e-3)
        assert result.triple.fidelity == pytest.approx(0.877193, abs=1e-6)

    def test_two_photon_waiting_time(self):
        result = benchmark("yb171-twophoton")
        assert result.seconds_per_event == pytest.approx(38.56, rel=1e-3)
        assert result.triple.avg_fidelity == pytest.approx(4.040e-8, rel=1e-3)

    def test_presets(self):
        assert sorted(PRESETS) == ["ca40-cavity", "ca40-freespace", "yb171-twophoton"]
        with pytest.raises(ValueError):
            benchmark("rb87")

    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_presets_match_published_values(self, preset):
        result = benchmark(preset)
        assert result.passed
        assert set(result.deviations) == set(PRESETS[preset].published)
        for key, published in PRESETS[preset].published.items():
            assert result.deviations[key] * published.value <= published_tolerance(published)

    def test_published_tolerance(self, monkeypatch):
        assert published_tolerance(PublishedValue(value=0.85)) == pytest.approx(0.01)
        assert published_tolerance(PublishedValue(value=4e-8, digits=1)) == pytest.approx(1e-8)
        monkeypatch.setattr(settings, "benchmark_rtol", 0.1)
        assert published_tolerance(PublishedValue(value=0.85)) == pytest.approx(0.085)

    def test_mismatch_is_reported(self, monkeypatch):
        wrong = PRESETS["ca40-freespace"].model_copy(update={"published": {"p_suc": PublishedValue(value=3.0e-3)}})
        monkeypatch.setitem(PRESETS, "ca40-freespace", wrong)
        result = benchmark("ca40-freespace")
        assert not result.passed
        assert result.deviations["p_suc"] == pytest.approx(0.5, abs=1e-3)


class TestRegionMap:
    def test_closed_form_map(self):
        frame = region_map(RegionSpec(f_th=0.9, resolution=200), workers=1)
        assert list(frame.columns) == list(REGION_COLUMNS)
        assert len(frame) == 200 * 200
        p1 = frame["p1"].to_numpy()
        eta = frame["eta"].to_numpy()
        p_suc = 2.0 * eta * p1 * (1.0 - eta * p1)
        den = 1.0 - eta * p1
        with np.errstate(divide="ignore", invalid="ignore"):
            fid = np.where(den > 0, (1.0 - p1) / den, 0.0)
        np.testing.assert_array_equal(frame["fidelity_ok"].to_numpy(), fid > 0.9)
        np.testing.assert_array_equal(frame["probability_ok"].to_numpy(), p_suc > eta ** 2 / 2.0)
        np.testing.assert_array_equal(frame["inside"].to_numpy(), (fid > 0.9) & (p_suc > eta ** 2 / 2.0))

    def test_row_order(self):
        frame = region_map(RegionSpec(f_th=0.9, resolution=3, steps_list=[0, 1]), workers=1)
        assert list(frame["eta"]) == [0.0] * 6 + [0.5] * 6 + [1.0] * 6
        assert list(frame["p1"][:6]) == [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]
        assert list(frame["steps"][:6]) == [0, 1] * 3

    def test_example_point_inside(self):
        spec = RegionSpec(f_th=0.99, p1_range=(0.005, 0.005), eta_range=(0.004, 0.004), resolution=2)
        frame = region_map(spec, workers=1)
        assert frame["inside"].all()

    def test_purification_regions_nest(self):
        spec = RegionSpec(f_th=0.95, p1_range=(0.01, 0.3), eta_range=(0.01, 0.5), resolution=5, steps_list=[0, 1, 2])
        frame = region_map(spec, workers=1)
        for _, group in frame.groupby(["eta", "p1"]):
            group = group.sort_values("steps")
            assert group["fidelity_ok"].astype(int).is_monotonic_increasing
            assert group["probability_ok"].astype(int).is_monotonic_decreasing

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            RegionSpec(f_th=1.0)
        with pytest.raises(ValueError):
            RegionSpec(f_th=0.9, p1_range=(0.5, 0.2))
        with pytest.raises(ValueError):
            RegionSpec(f_th=0.9, steps_list=[-1])
