"""Tests for the built-in circuits and the characterisation/application studies."""

import math

import numpy as np
import pytest

from dendritesim.experiments import (
    BRANCH_GATES,
    DETECTOR_GATE,
    LOCALISATION_VALUES,
    RING_GATES,
    TABLED_P8_LEAKS,
    BurstSetting,
    Characterisation,
    ChainConfig,
    GeneralConfig,
    IntegrationConfig,
    LocalisationConfig,
    PassiveBaselineConfig,
    ResultTable,
    RingConfig,
    SweepConfig,
    Variant,
    build_active_chain,
    build_bursting_neuron,
    build_sound_localisation,
    count_bursts,
    curve_peak,
    delay_resistance_fit,
    find_burst_setting,
    input_pulse,
    run_burst_table,
    run_characterisation,
    run_general_response,
    run_passive_localisation_baseline,
    run_sound_localisation,
    spike_input,
)
from dendritesim.model import (
    Direction,
    Polarity,
    SegmentParams,
    SourceKind,
    TransistorModel,
    stimulus_samples,
)
from dendritesim.transient import SimConfig, simulate

SWEEP_HEADER = (
    "polarity",
    "r_axial_ohm",
    "r_leak_ohm",
    "amplitude_v",
    "delay_s",
    "gain",
    "peak_v",
)


def _single_peaked(values: list[float], tolerance: float) -> bool:
    top = int(np.argmax(values))
    rising = all(b >= a - tolerance for a, b in zip(values[:top], values[1 : top + 1], strict=True))
    falling = all(b <= a + tolerance for a, b in zip(values[top:], values[top + 1 :], strict=False))
    return rising and falling


class TestResultTable:
    def test_csv_with_empty_cells(self) -> None:
        table = ResultTable(("a", "b"), ((1.5, None), ("x", 2.0)))
        assert table.to_csv() == "a,b\r\n1.5,\r\nx,2\r\n"

    def test_where_and_floats(self) -> None:
        table = ResultTable(("pol", "v"), (("n", 1.0), ("p", None), ("n", 3.0)))
        assert table.where(pol="n").floats("v") == [1.0, 3.0]
        values = table.floats("v")
        assert math.isnan(values[1])

    def test_curve_peak_prefers_earliest(self) -> None:
        assert curve_peak([(0.0, 1.0), (1.0, 2.0), (2.0, 2.0)]) == (1.0, 2.0)


class TestBuilders:
    def test_p_type_input_pulls_down_from_vdd(self) -> None:
        stim = input_pulse(Polarity.P, 5.0, 2e-3, 1e-3, 5.0)
        assert stim.rest == 5.0
        assert stim.direction is Direction.DOWN

    def test_spike_input_reaches_requested_amplitude(self, n_segment: SegmentParams) -> None:
        stim = spike_input(5.0, n_segment, Polarity.N, 1e-3)
        values = stimulus_samples(stim, np.linspace(0.0, 6e-3, 60001))
        assert values.max() == pytest.approx(5.0, abs=1e-3)

    def test_active_chain_alternates_from_n(self) -> None:
        net = build_active_chain()
        assert net.names == ["N1", "P2", "N3", "P4", "N5"]
        assert net.segment("P2").gates[0].source.name == "N1"
        assert net.segment("P2").gates[0].model == TransistorModel.discrete_pair(Polarity.P)
        assert net.segment("N1").params.c_membrane == 22e-9

    def test_sound_localisation_values(self) -> None:
        detector = build_sound_localisation(Variant.C)
        net = detector.network
        n1 = net.segment("N1").params
        assert (n1.r_axial, n1.r_leak) == (2.7e3, 8.89e3)
        p1 = net.segment("P1")
        assert (p1.params.r_axial, p1.params.r_leak) == (13.0, 1e3)
        assert [g.source.name for g in p1.gates] == ["N1", "N2"]
        assert all(g.model == DETECTOR_GATE for g in p1.gates)
        for name in ("N1", "N2"):
            assert net.segment(name).gates[0].model == BRANCH_GATES[name]
        assert detector.inputs == ("in1", "in2")
        assert detector.rest("P1.vm") == 0.0

    @pytest.mark.parametrize("variant", list(Variant))
    def test_all_localisation_capacitors_are_one_microfarad(self, variant: Variant) -> None:
        net = build_sound_localisation(variant).network
        assert LOCALISATION_VALUES[variant][0] == net.segment("N1").params.r_axial
        assert {s.params.c_reservoir for s in net.segments} == {1e-6}

    def test_bursting_neuron_ring(self) -> None:
        net = build_bursting_neuron(231.0)
        assert net.names == ["N1", "P2", "N3", "P4", "N5", "P6", "N7", "P8"]
        n1 = net.segment("N1")
        assert [(g.source.kind, g.source.name) for g in n1.gates] == [
            (SourceKind.STIMULUS, "in"),
            (SourceKind.MEMBRANE, "P8"),
        ]
        assert n1.params.c_reservoir == 3.3e-9
        assert net.segment("P2").params.r_leak == 377.0
        assert net.segment("P8").params.r_leak == 231.0
        assert n1.gates[1].model == RING_GATES[Polarity.N]
        assert net.segment("P2").gates[0].model == RING_GATES[Polarity.P]
        assert TABLED_P8_LEAKS == (127.0, 231.0, 251.0)


class TestSweeps:
    def test_delay_saturates_and_grows_with_resistance(self) -> None:
        cfg = SweepConfig(
            amplitudes=(1.5, 2.0, 3.0, 5.0),
            delay_resistances=(2e3, 4e3, 6e3, 8e3),
            polarities=(Polarity.N,),
            workers=2,
        )
        table = run_characterisation(Characterisation.DELAY_SWEEP, cfg)
        assert len(table.rows) == 16
        for r in cfg.delay_resistances:
            rows = table.where(r_axial_ohm=r)
            delays = dict(zip(rows.column("amplitude_v"), rows.column("delay_s"), strict=True))
            assert delays[1.5] is None
            for amp in (2.0, 3.0):
                assert delays[amp] == pytest.approx(delays[5.0], rel=0.05)
        saturated = table.where(amplitude_v=5.0).floats("delay_s")
        assert all(b > a for a, b in zip(saturated, saturated[1:], strict=False))
        assert 1e-4 < saturated[0] < 20e-3
        slope, _, r2 = delay_resistance_fit(table, Polarity.N, 5.0)
        assert slope > 0
        assert r2 >= 0.98

    def test_gain_exceeds_one(self) -> None:
        cfg = SweepConfig(
            amplitudes=(2.0,), gain_leaks=(8e3,), polarities=(Polarity.N,), workers=1
        )
        table = run_characterisation(Characterisation.GAIN_SWEEP, cfg)
        assert table.header == SWEEP_HEADER
        assert table.floats("gain")[0] > 1.0

    def test_gain_shape(self) -> None:
        cfg = SweepConfig(polarities=(Polarity.N,))
        table = run_characterisation(Characterisation.GAIN_SWEEP, cfg)
        assert cfg.amplitudes[:2] == (1.5, 1.75)
        best = 0.0
        for leak in cfg.gain_leaks:
            gains = table.where(r_leak_ohm=leak).floats("gain")
            # 1.5 V sits below the gate threshold; 1.75 V already saturates the output
            assert gains[0] < 0.01
            assert gains[1] > 50 * gains[0]
            assert all(b < a for a, b in zip(gains[1:], gains[2:], strict=False))
            best = max(best, *gains)
        assert best > 1.0

    def test_fit_on_synthetic_table(self) -> None:
        rows = tuple(("n", r, r, 5.0, 1e-3 + r * 2e-7, 1.0, 1.0) for r in (4e3, 6e3, 8e3))
        table = ResultTable(SWEEP_HEADER, rows)
        slope, intercept, r2 = delay_resistance_fit(table, Polarity.N, 5.0)
        assert slope == pytest.approx(2e-7)
        assert intercept == pytest.approx(1e-3)
        assert r2 == pytest.approx(1.0)

    def test_deterministic(self) -> None:
        cfg = SweepConfig(
            amplitudes=(3.0, 5.0), delay_resistances=(1e3, 2e3), polarities=(Polarity.P,)
        )
        first = run_characterisation(Characterisation.DELAY_SWEEP, cfg)
        second = run_characterisation(Characterisation.DELAY_SWEEP, cfg)
        assert first.to_csv() == second.to_csv()


class TestGeneralResponse:
    def test_variants(self) -> None:
        table = run_general_response(GeneralConfig())
        assert table.column("variant") == ["n", "p", "np"]
        n_delay = table.column("delay_s")[0]
        assert isinstance(n_delay, float)
        assert 1e-4 < n_delay < 1e-2
        np_delay = table.column("delay_s")[2]
        assert np_delay is None or (isinstance(np_delay, float) and np_delay > n_delay)


class TestChainAndIntegration:
    def test_chain_comparison(self) -> None:
        table = run_characterisation(Characterisation.CHAIN_COMPARISON, ChainConfig())
        passive = table.where(chain="passive")
        active = table.where(chain="active")
        peaks = passive.floats("peak_v")
        times = passive.floats("t_peak_s")
        assert all(b < a for a, b in zip(peaks, peaks[1:], strict=False))
        assert all(b > a for a, b in zip(times, times[1:], strict=False))
        active_peaks = active.floats("peak_v")
        assert active_peaks[-1] >= active_peaks[0]
        assert active_peaks[-1] > 5 * peaks[-1]

    def test_temporal_integration(self) -> None:
        table = run_characterisation(Characterisation.TEMPORAL_INTEGRATION, IntegrationConfig())
        fast = table.where(period_s=1e-3).floats("peak_v")
        assert len(fast) == 4
        assert all(b > a for a, b in zip(fast, fast[1:], strict=False))
        growth: list[float] = []
        for period in (1e-3, 2e-3, 4e-3, 8e-3):
            peaks = table.where(period_s=period).floats("peak_v")
            growth.append(peaks[-1] / peaks[0] - 1)
        assert all(b < a for a, b in zip(growth, growth[1:], strict=False))
        # 1 uF and 1 kOhm leave a slow root near 2.6 ms, so 4 ms still carries some charge over
        assert 0.05 < growth[2] < 0.15
        assert growth[3] < 0.05

    def test_train_response_accumulates_for_every_circuit(self) -> None:
        table = run_characterisation(Characterisation.TRAIN_RESPONSE, IntegrationConfig())
        assert table.header == ("circuit", "pulse", "peak_v")
        for circuit in ("n", "p", "np"):
            peaks = table.where(circuit=circuit).floats("peak_v")
            assert len(peaks) == 4
            assert all(b > a for a, b in zip(peaks, peaks[1:], strict=False))
        # the pair only passes a pulse once the n stage has integrated past the p threshold
        pair = table.where(circuit="np").floats("peak_v")
        assert pair[0] < 0.01
        assert pair[-1] > 1.0

    def test_single_polarity_trains_mirror(self) -> None:
        table = run_characterisation(Characterisation.TRAIN_RESPONSE, IntegrationConfig())
        n = table.where(circuit="n").floats("peak_v")
        p = table.where(circuit="p").floats("peak_v")
        assert n == pytest.approx(p, rel=1e-9)

    def test_spatial_integration_is_sublinear(self) -> None:
        table = run_characterisation(Characterisation.SPATIAL_INTEGRATION, IntegrationConfig())
        ratios = table.floats("ratio")
        assert table.column("offset_s")[0] == 0.0
        assert all(1.0 < r < 2.0 for r in ratios)


@pytest.mark.slow
class TestSoundLocalisation:
    def test_detectors(self) -> None:
        curves = {v: run_sound_localisation(v, LocalisationConfig()) for v in Variant}
        for curve in curves.values():
            assert len(curve) == 41
            values = [m for _, m in curve]
            assert _single_peaked(values, 0.02 * max(values))
        peak_dt = [curve_peak(curves[v])[0] for v in Variant]
        assert peak_dt[0] < peak_dt[1] < peak_dt[2]
        separations = [s for s, _ in curves[Variant.A]]
        for variant, at in zip(Variant, peak_dt, strict=True):
            index = separations.index(at)
            own = curves[variant][index][1]
            for other in Variant:
                if other is not variant:
                    assert own > curves[other][index][1] + 5e-3

    def test_passive_baseline_attenuates(self) -> None:
        family = run_passive_localisation_baseline(cfg=PassiveBaselineConfig())
        assert [r for r, _ in family] == [250.0, 500.0, 750.0, 1000.0, 1250.0]
        peaks = [curve_peak(curve) for _, curve in family]
        magnitudes = [m for _, m in peaks]
        assert all(b < a for a, b in zip(magnitudes, magnitudes[1:], strict=False))
        separations = [s for s, _ in peaks]
        assert all(b >= a for a, b in zip(separations, separations[1:], strict=False))
        assert separations[-1] > separations[0]

    def test_passive_baseline_single_value(self) -> None:
        cfg = PassiveBaselineConfig(separations=(0.0, 1e-3))
        assert len(run_passive_localisation_baseline([500.0], cfg)) == 1

    def test_passive_baseline_needs_values(self) -> None:
        with pytest.raises(ValueError):
            run_passive_localisation_baseline([])


@pytest.mark.slow
class TestBurstingNeuron:
    def test_lowest_tabled_leak_gives_one_spike(self) -> None:
        assert count_bursts(127.0) == 1

    @pytest.mark.parametrize(("leak", "spikes"), [(250.0, 1), (400.0, 2), (495.0, 3)])
    def test_exact_counts(self, leak: float, spikes: int) -> None:
        assert count_bursts(leak) == spikes

    def test_high_leak_latches(self) -> None:
        assert count_bursts(1000.0) is None

    def test_counts_do_not_decrease_with_leak(self) -> None:
        counts = [count_bursts(r) for r in (127.0, 300.0, 400.0, 500.0, 540.0, 1000.0)]
        as_numbers = [math.inf if c is None else c for c in counts]
        assert all(b >= a for a, b in zip(as_numbers, as_numbers[1:], strict=False))

    @pytest.mark.parametrize(("target", "low", "high"), [(2, 305.0, 325.0), (3, 455.0, 475.0)])
    def test_search_lands_on_exact_count(self, target: int, low: float, high: float) -> None:
        setting = find_burst_setting(target, RingConfig())
        assert setting.spikes == target
        assert low < setting.p8_r_leak < high

    def test_search_for_one_spike_stops_at_lower_bound(self) -> None:
        cfg = RingConfig()
        assert find_burst_setting(1, cfg) == BurstSetting(cfg.search_low, 1)

    def test_burst_table(self) -> None:
        table = run_burst_table(RingConfig())
        searched = table.where(source="search>=3")
        assert searched.rows[0][2] == 3
        assert table.where(source="table").floats("p8_r_leak_ohm") == [127.0, 231.0, 251.0]

    def test_long_run_settles(self) -> None:
        net = build_bursting_neuron(127.0)
        cfg = RingConfig()
        sim = SimConfig(dt=50e-9, duration=100e-3, record_stride=100)
        stimulus = input_pulse(Polarity.N, 5.0, cfg.width, cfg.t_start, 5.0)
        trace = simulate(net, {"in": stimulus}, sim)
        assert trace["N1.vm"][-1] == pytest.approx(5.0, abs=0.05)
