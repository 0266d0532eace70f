"""Tests for trace measurements and the coincidence response sweep."""

import threading

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from dendritesim.experiments import BRANCH_GATES, DETECTOR_GATE, CoincidenceDetector
from dendritesim.measure import (
    MeasureConfig,
    MeasurementError,
    count_spikes,
    delay,
    gain,
    peak,
    response_curve,
    spike_onsets,
)
from dendritesim.model import (
    GateInput,
    GateSource,
    Network,
    Polarity,
    SegmentInstance,
    SegmentParams,
    Stimulus,
    Trace,
    stimulus_samples,
)
from dendritesim.transient import SimConfig

DT = 1e-4


def _trace(**channels: list[float]) -> Trace:
    return Trace(DT, 0.0, channels)


class TestPeak:
    def test_largest_deviation(self) -> None:
        trace = _trace(v=[5.0, 4.5, 3.0, 4.0, 5.0])
        info = peak(trace, "v", 5.0)
        assert info.t_peak == pytest.approx(2 * DT)
        assert info.magnitude == pytest.approx(2.0)
        assert info.rest == 5.0

    def test_ties_go_to_earliest(self) -> None:
        info = peak(_trace(v=[0.0, 1.0, 0.0, 1.0]), "v", 0.0)
        assert info.t_peak == pytest.approx(DT)

    def test_missing_channel(self) -> None:
        with pytest.raises(MeasurementError, match="nope"):
            peak(_trace(v=[0.0, 1.0]), "nope", 0.0)


class TestDelayAndGain:
    def test_delay_between_peaks(self) -> None:
        trace = _trace(a=[0.0, 2.0, 0.0, 0.0, 0.0], b=[5.0, 5.0, 5.0, 3.0, 5.0])
        assert delay(trace, "a", "b", (0.0, 5.0)) == pytest.approx(2 * DT)

    def test_identical_channels_have_zero_delay(self) -> None:
        trace = _trace(a=[0.0, 1.0, 3.0, 1.0], b=[0.0, 1.0, 3.0, 1.0])
        assert delay(trace, "a", "b", (0.0, 0.0)) == 0.0

    def test_small_output_is_undefined(self) -> None:
        trace = _trace(a=[0.0, 5.0, 0.0], b=[5.0, 4.95, 5.0])
        assert delay(trace, "a", "b", (0.0, 5.0)) is None

    def test_floor_follows_vdd(self) -> None:
        trace = _trace(a=[0.0, 1.0, 0.0], b=[1.0, 0.95, 1.0])
        assert delay(trace, "a", "b", (0.0, 1.0), MeasureConfig(vdd=1.0)) == pytest.approx(DT)

    def test_gain_ignores_sign(self) -> None:
        trace = _trace(a=[0.0, 2.0, 0.0], b=[5.0, 2.0, 5.0])
        assert gain(trace, "a", "b", (0.0, 5.0)) == pytest.approx(1.5)

    def test_gain_needs_input_activity(self) -> None:
        trace = _trace(a=[0.0, 0.0, 0.0], b=[5.0, 4.0, 5.0])
        with pytest.raises(MeasurementError, match="rest"):
            gain(trace, "a", "b", (0.0, 5.0))

    @given(
        st.lists(st.floats(min_value=0.0, max_value=5.0), min_size=2, max_size=40),
        st.lists(st.floats(min_value=0.0, max_value=5.0), min_size=2, max_size=40),
    )
    def test_delay_is_antisymmetric(self, a: list[float], b: list[float]) -> None:
        n = min(len(a), len(b))
        trace = _trace(a=a[:n], b=b[:n])
        forward = delay(trace, "a", "b", (0.0, 0.0))
        backward = delay(trace, "b", "a", (0.0, 0.0))
        assume(forward is not None and backward is not None)
        assert forward == -backward


class TestSpikes:
    def test_counts_excursions(self) -> None:
        values = [0.0, 4.0, 4.0, 0.0, 0.0, 0.0, 0.0, 4.0, 0.0]
        trace = Trace(1e-3, 0.0, {"v": values})
        onsets = spike_onsets(trace, "v", 0.0, refractory=1e-3)
        assert onsets.dtype == np.int64
        assert onsets.tolist() == [1, 7]

    def test_refractory_merges_short_dips(self) -> None:
        values = [0.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0, 4.0]
        trace = Trace(1e-3, 0.0, {"v": values})
        assert count_spikes(trace, "v", 0.0, refractory=1e-3) == 2
        assert count_spikes(trace, "v", 0.0, refractory=0.0) == 3

    def test_n_type_spikes_are_dips(self) -> None:
        trace = Trace(1e-3, 0.0, {"v": [5.0, 1.0, 5.0, 5.0, 1.0]})
        assert count_spikes(trace, "v", 5.0, refractory=0.0) == 2

    def test_threshold_fraction_bounds(self) -> None:
        with pytest.raises(MeasurementError):
            spike_onsets(_trace(v=[0.0, 1.0]), "v", 0.0, threshold_fraction=1.0)

    @given(
        st.lists(st.booleans(), min_size=1, max_size=60),
        st.integers(min_value=0, max_value=10),
    )
    def test_quiet_padding_shifts_onsets(self, pattern: list[bool], pad: int) -> None:
        values = [4.0 if on else 0.0 for on in pattern]
        base = spike_onsets(Trace(1e-3, 0.0, {"v": values}), "v", 0.0, refractory=2e-3)
        padded_trace = Trace(1e-3, 0.0, {"v": [0.0] * pad + values})
        padded = spike_onsets(padded_trace, "v", 0.0, refractory=2e-3)
        assert padded.tolist() == [i + pad for i in base.tolist()]


class _SumCircuit:
    """Two ideal inputs summed on one channel; records which threads ran it."""

    def __init__(self) -> None:
        self.threads: set[int] = set()

    def respond(self, lead: Stimulus, lag: Stimulus, sim: SimConfig) -> Trace:
        self.threads.add(threading.get_ident())
        times = np.arange(sim.n_steps + 1) * sim.dt
        total = stimulus_samples(lead, times) + stimulus_samples(lag, times)
        return Trace(sim.dt, 0.0, {"sum": total})

    def rest(self, channel: str) -> float:
        return 0.0


class TestResponseCurve:
    def test_coincidence_doubles_the_peak(self) -> None:
        circuit = _SumCircuit()
        separations = [0.0, 0.5e-3, 1e-3, 3e-3]
        curve = response_curve(
            lambda: circuit,
            separations,
            "sum",
            pulse=Stimulus.pulse(1.0, 1e-3, 1e-3),
            sim=SimConfig(dt=1e-5, duration=6e-3),
        )
        assert [s for s, _ in curve] == separations
        assert [m for _, m in curve] == pytest.approx([2.0, 2.0, 1.0, 1.0])

    def test_order_is_kept_with_workers(self) -> None:
        separations = [3e-3, 0.0, 2e-3, 0.25e-3, 1e-3]
        curve = response_curve(
            _SumCircuit,
            separations,
            "sum",
            pulse=Stimulus.pulse(1.0, 1e-3, 1e-3),
            sim=SimConfig(dt=1e-5, duration=6e-3),
            workers=3,
        )
        assert [s for s, _ in curve] == separations

    def test_swapping_identical_branches_mirrors_the_curve(self) -> None:
        branch = SegmentParams(Polarity.N, 205.0, 140.0, 1e-6, 1e-6)
        n_model = BRANCH_GATES["N2"]
        detector = SegmentParams(Polarity.P, 13.0, 1e3, 1e-6, 1e-6)
        net = Network(
            5.0,
            (
                SegmentInstance("N1", branch, (GateInput(GateSource.stimulus("in1"), n_model),)),
                SegmentInstance("N2", branch, (GateInput(GateSource.stimulus("in2"), n_model),)),
                SegmentInstance(
                    "P1",
                    detector,
                    (
                        GateInput(GateSource.membrane("N1"), DETECTOR_GATE),
                        GateInput(GateSource.membrane("N2"), DETECTOR_GATE),
                    ),
                ),
            ),
        )
        separations = [0.0, 0.5e-3, 1e-3, 2e-3, 4e-3]
        pulse = Stimulus.pulse(1.7, 2e-3, 1e-3)
        sim = SimConfig(dt=2e-6, duration=12e-3)
        forward = response_curve(
            lambda: CoincidenceDetector(net), separations, "P1.vm", pulse=pulse, sim=sim
        )
        swapped = response_curve(
            lambda: CoincidenceDetector(net, inputs=("in2", "in1")),
            separations,
            "P1.vm",
            pulse=pulse,
            sim=sim,
        )
        assert [v for _, v in forward] == pytest.approx([v for _, v in swapped], rel=1e-12)
        assert forward[0][1] != forward[-1][1]

    def test_empty_separations(self) -> None:
        with pytest.raises(MeasurementError):
            response_curve(
                _SumCircuit,
                [],
                "sum",
                pulse=Stimulus.pulse(1.0, 1e-3),
                sim=SimConfig(dt=1e-5, duration=1e-3),
            )
