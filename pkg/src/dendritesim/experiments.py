"""Built-in circuits and sweep drivers for the characterisation and application studies.

Every run takes a config dataclass whose defaults are the published
protocol, and returns either a response curve or a ``ResultTable`` that
exports as CSV. Sweep points are independent simulations; they are mapped
over a thread pool and reassembled in input order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TypeVar, cast

import numpy as np
from scipy import stats

from .analytic import membrane_peak, solve_segment
from .measure import delay, gain, peak, response_curve, spike_onsets
from .model import (
    Direction,
    GateInput,
    GateSource,
    Network,
    Polarity,
    SegmentInstance,
    SegmentParams,
    Stimulus,
    SwitchKind,
    Trace,
    TransistorModel,
    membrane_channel,
    rest_voltage,
)
from .netlist import Netlist
from .transient import SimConfig, simulate, simulate_passive_chain
from .utils import DEFAULT_VDD, write_csv

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

INPUT = "in"


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    n = round((stop - start) / step)
    return tuple(round(start + i * step, 12) for i in range(n + 1))


def _map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ResultTable:
    """Tidy table: one parameter combination per row. ``None`` cells export empty."""

    header: tuple[str, ...]
    rows: tuple[tuple[object, ...], ...] = ()

    def to_csv(self) -> str:
        return write_csv(self.header, self.rows)

    def column(self, name: str) -> list[object]:
        index = self.header.index(name)
        return [row[index] for row in self.rows]

    def floats(self, name: str) -> list[float]:
        """A numeric column; ``None`` cells become NaN."""
        return [math.nan if v is None else float(cast(float, v)) for v in self.column(name)]

    def where(self, **match: object) -> ResultTable:
        """Rows whose named columns equal the given values."""
        indices = {self.header.index(k): v for k, v in match.items()}
        rows = tuple(r for r in self.rows if all(r[i] == v for i, v in indices.items()))
        return ResultTable(self.header, rows)


# -- single segments --------------------------------------------------------


def input_pulse(
    polarity: Polarity, amplitude: float, width: float, t_start: float, vdd: float
) -> Stimulus:
    """Square pulse that switches a gate of the given polarity on.

    n-type gates are driven up from 0 V; p-type gates are pulled down from VDD.
    """
    if polarity is Polarity.N:
        return Stimulus.pulse(amplitude, width, t_start)
    return Stimulus.pulse(amplitude, width, t_start, offset=vdd, direction=Direction.DOWN)


def single_segment(
    params: SegmentParams,
    model: TransistorModel | None = None,
    *,
    name: str = "d1",
    gates: Sequence[str] = (INPUT,),
    vdd: float = DEFAULT_VDD,
) -> Network:
    """One segment whose gates are driven by the named stimuli."""
    model = model or TransistorModel.default(params.polarity)
    inputs = tuple(GateInput(GateSource.stimulus(g), model) for g in gates)
    return Network(vdd, (SegmentInstance(name, params, inputs),))


def chain(
    names: Sequence[str],
    params: Sequence[SegmentParams],
    models: Sequence[TransistorModel],
    *,
    source: str = INPUT,
    vdd: float = DEFAULT_VDD,
) -> Network:
    """Segments wired gate-to-membrane in order, the first one driven by ``source``."""
    segments: list[SegmentInstance] = []
    upstream = GateSource.stimulus(source)
    for name, p, model in zip(names, params, models, strict=True):
        segments.append(SegmentInstance(name, p, (GateInput(upstream, model),)))
        upstream = GateSource.membrane(name)
    return Network(vdd, tuple(segments))


def spike_input(
    amplitude: float,
    params: SegmentParams,
    polarity: Polarity,
    t_start: float,
    vdd: float = DEFAULT_VDD,
) -> Stimulus:
    """Analytic spike scaled so its extremum is ``amplitude`` volts away from rest."""
    ratio = membrane_peak(solve_segment(params, 1.0), params)[1]
    v0 = amplitude / ratio
    if polarity is Polarity.N:
        return Stimulus.spike(v0, params, t_start)
    return Stimulus.spike(v0, params, t_start, offset=vdd, direction=Direction.DOWN)


# -- general response --------------------------------------------------------


@dataclass(frozen=True)
class GeneralConfig:
    r: float = 1e3
    c: float = 1e-6
    amplitude: float = 5.0
    t_start: float = 1e-3
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-6, duration=20e-3))


def build_np_pair(
    n_params: SegmentParams | None = None,
    p_params: SegmentParams | None = None,
    vdd: float = DEFAULT_VDD,
) -> Network:
    """An n-type segment followed by a p-type one: a non-inverting composite."""
    n_params = n_params or SegmentParams.uniform(Polarity.N, 1e3, 1e-6)
    p_params = p_params or SegmentParams.uniform(Polarity.P, 1e3, 1e-6)
    return chain(
        ("n1", "p1"),
        (n_params, p_params),
        (TransistorModel.default(Polarity.N), TransistorModel.default(Polarity.P)),
        vdd=vdd,
    )


def run_general_response(cfg: GeneralConfig | None = None) -> ResultTable:
    """Delay and gain of the n-type, p-type and np-pair circuits for an analytic spike input."""
    cfg = cfg or GeneralConfig()
    n = SegmentParams.uniform(Polarity.N, cfg.r, cfg.c)
    p = SegmentParams.uniform(Polarity.P, cfg.r, cfg.c)
    cases: list[tuple[str, Network, Polarity, str]] = [
        ("n", single_segment(n, vdd=cfg.vdd), Polarity.N, "d1.vm"),
        ("p", single_segment(p, vdd=cfg.vdd), Polarity.P, "d1.vm"),
        ("np", build_np_pair(n, p, cfg.vdd), Polarity.N, "p1.vm"),
    ]
    rows: list[tuple[object, ...]] = []
    for variant, net, in_polarity, out in cases:
        stim = spike_input(cfg.amplitude, n, in_polarity, cfg.t_start, cfg.vdd)
        trace = simulate(net, {INPUT: stim}, cfg.sim)
        rests = (stim.rest, net.channel_rest(out))
        rows.append(
            (
                variant,
                delay(trace, INPUT, out, rests),
                gain(trace, INPUT, out, rests),
                peak(trace, out, rests[1]).magnitude,
            )
        )
    return ResultTable(("variant", "delay_s", "gain", "peak_v"), tuple(rows))


# -- characterisation --------------------------------------------------------


class Characterisation(str, Enum):
    DELAY_SWEEP = "delay"
    GAIN_SWEEP = "gain"
    CHAIN_COMPARISON = "chain"
    TEMPORAL_INTEGRATION = "temporal"
    SPATIAL_INTEGRATION = "spatial"
    TRAIN_RESPONSE = "trains"


@dataclass(frozen=True)
class SweepConfig:
    """Amplitude/resistance sweeps on single 1 uF segments."""

    amplitudes: tuple[float, ...] = _grid(1.5, 5.0, 0.25)
    delay_resistances: tuple[float, ...] = _grid(1e3, 10e3, 1e3)
    gain_r_axial: float = 2e3
    gain_leaks: tuple[float, ...] = _grid(1e3, 8e3, 1e3)
    capacitance: float = 1e-6
    polarities: tuple[Polarity, ...] = (Polarity.N, Polarity.P)
    width: float = 2e-3
    t_start: float = 1e-3
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-6, duration=30e-3))
    workers: int = 4


@dataclass(frozen=True)
class ChainConfig:
    """Five-stage passive ladder against an alternating n/p active chain (22 nF, 220 ohm)."""

    n_stages: int = 5
    r: float = 220.0
    c: float = 22e-9
    passive_leak: float = 220.0
    amplitude: float = 5.0
    width: float = 10e-6
    t_start: float = 5e-6
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=50e-9, duration=300e-6))


@dataclass(frozen=True)
class IntegrationConfig:
    """Temporal (pulse train) and spatial (two parallel gates) integration."""

    temporal_polarity: Polarity = Polarity.P
    temporal_r: float = 1e3
    temporal_c: float = 1e-6
    temporal_width: float = 0.3e-3
    periods: tuple[float, ...] = (1e-3, 2e-3, 4e-3, 8e-3)
    train_period: float = 1e-3
    count: int = 4
    spatial_r: float = 1e3
    spatial_c: float = 1e-6
    spatial_width: float = 2e-3
    offsets: tuple[float, ...] = (0.0, 0.5e-3, 1e-3, 2e-3, 3e-3, 4e-3)
    amplitude: float = 5.0
    t_start: float = 1e-3
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-6, duration=40e-3))


def _segment_point(
    polarity: Polarity,
    r_axial: float,
    r_leak: float,
    amplitude: float,
    cfg: SweepConfig,
) -> tuple[float | None, float, float]:
    params = SegmentParams(polarity, r_axial, r_leak, cfg.capacitance, cfg.capacitance)
    net = single_segment(params, vdd=cfg.vdd)
    stim = input_pulse(polarity, amplitude, cfg.width, cfg.t_start, cfg.vdd)
    trace = simulate(net, {INPUT: stim}, cfg.sim)
    out = membrane_channel("d1")
    rests = (stim.rest, rest_voltage(params, cfg.vdd))
    return (
        delay(trace, INPUT, out, rests),
        gain(trace, INPUT, out, rests),
        peak(trace, out, rests[1]).magnitude,
    )


def _sweep(
    points: list[tuple[Polarity, float, float, float]], cfg: SweepConfig
) -> ResultTable:
    logger.debug("sweep: %d points on %d workers", len(points), cfg.workers)
    results = _map(lambda pt: _segment_point(*pt, cfg), points, cfg.workers)
    rows = tuple(
        (pol.value, ra, rl, amp, d, g, pk)
        for (pol, ra, rl, amp), (d, g, pk) in zip(points, results, strict=True)
    )
    header = ("polarity", "r_axial_ohm", "r_leak_ohm", "amplitude_v", "delay_s", "gain", "peak_v")
    return ResultTable(header, rows)


def _delay_sweep(cfg: SweepConfig) -> ResultTable:
    points = [
        (pol, r, r, amp)
        for pol in cfg.polarities
        for r in cfg.delay_resistances
        for amp in cfg.amplitudes
    ]
    return _sweep(points, cfg)


def _gain_sweep(cfg: SweepConfig) -> ResultTable:
    points = [
        (pol, cfg.gain_r_axial, rl, amp)
        for pol in cfg.polarities
        for rl in cfg.gain_leaks
        for amp in cfg.amplitudes
    ]
    return _sweep(points, cfg)


def delay_resistance_fit(
    table: ResultTable, polarity: Polarity, amplitude: float, min_resistance: float = 4e3
) -> tuple[float, float, float]:
    """Least-squares line of delay against R_A = R_L in the saturation region.

    Returns:
        (slope s/ohm, intercept s, r squared).
    """
    rows = table.where(polarity=polarity.value, amplitude_v=amplitude)
    r = np.array(rows.column("r_axial_ohm"), dtype=np.float64)
    d = np.array(rows.column("delay_s"), dtype=np.float64)
    keep = r >= min_resistance
    fit = stats.linregress(r[keep], d[keep])
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def _stage_peaks(
    trace: Trace, channels: Iterable[str], rest: Callable[[str], float]
) -> list[tuple[float, float]]:
    peaks = [peak(trace, ch, rest(ch)) for ch in channels]
    return [(p.magnitude, p.t_peak) for p in peaks]


def build_active_chain(cfg: ChainConfig | None = None) -> Network:
    """Alternating n/p chain, n-type first, built from the discrete transistor pair."""
    cfg = cfg or ChainConfig()
    polarities = [Polarity.N if k % 2 == 0 else Polarity.P for k in range(cfg.n_stages)]
    names = [f"{pol.value.upper()}{k + 1}" for k, pol in enumerate(polarities)]
    return chain(
        names,
        [SegmentParams.uniform(pol, cfg.r, cfg.c) for pol in polarities],
        [TransistorModel.discrete_pair(pol) for pol in polarities],
        vdd=cfg.vdd,
    )


def _chain_comparison(cfg: ChainConfig) -> ResultTable:
    stim = Stimulus.pulse(cfg.amplitude, cfg.width, cfg.t_start)
    passive = simulate_passive_chain(
        cfg.n_stages, cfg.r, cfg.passive_leak, cfg.c, stim, cfg.sim
    )
    passive_channels = [f"stage{k + 1}" for k in range(cfg.n_stages)]
    rows: list[tuple[object, ...]] = []
    for k, (mag, t) in enumerate(_stage_peaks(passive, passive_channels, lambda _: 0.0)):
        rows.append(("passive", k + 1, mag, t))

    net = build_active_chain(cfg)
    active = simulate(net, {INPUT: stim}, cfg.sim)
    active_channels = [membrane_channel(n) for n in net.names]
    for k, (mag, t) in enumerate(_stage_peaks(active, active_channels, net.channel_rest)):
        rows.append(("active", k + 1, mag, t))
    return ResultTable(("chain", "stage", "peak_v", "t_peak_s"), tuple(rows))


def _train_peaks(
    net: Network,
    out: str,
    rest: float,
    polarity: Polarity,
    period: float,
    cfg: IntegrationConfig,
) -> list[float]:
    """Largest deviation of ``out`` in each pulse's window of a ``cfg.count``-pulse train."""
    base = input_pulse(polarity, cfg.amplitude, cfg.temporal_width, cfg.t_start, cfg.vdd)
    stim = Stimulus.train(
        base.amplitude,
        base.width,
        period,
        cfg.count,
        base.t_start,
        offset=base.offset,
        direction=base.direction,
    )
    trace = simulate(net, {INPUT: stim}, cfg.sim)
    deviation = np.abs(trace[out] - rest)
    peaks: list[float] = []
    for k in range(cfg.count):
        lo = round((cfg.t_start + k * period - trace.t0) / trace.dt)
        hi = round((cfg.t_start + (k + 1) * period - trace.t0) / trace.dt)
        window = deviation[lo : min(hi, deviation.size)]
        peaks.append(float(window.max()) if window.size else 0.0)
    return peaks


def _temporal_integration(cfg: IntegrationConfig) -> ResultTable:
    params = SegmentParams.uniform(cfg.temporal_polarity, cfg.temporal_r, cfg.temporal_c)
    net = single_segment(params, vdd=cfg.vdd)
    out = membrane_channel("d1")
    rest = rest_voltage(params, cfg.vdd)
    rows: list[tuple[object, ...]] = []
    for period in cfg.periods:
        peaks = _train_peaks(net, out, rest, cfg.temporal_polarity, period, cfg)
        rows.extend((period, k + 1, value) for k, value in enumerate(peaks))
    return ResultTable(("period_s", "pulse", "peak_v"), tuple(rows))


def _train_response(cfg: IntegrationConfig) -> ResultTable:
    n = SegmentParams.uniform(Polarity.N, cfg.temporal_r, cfg.temporal_c)
    p = SegmentParams.uniform(Polarity.P, cfg.temporal_r, cfg.temporal_c)
    # (circuit, network, input polarity, output channel, output rest)
    circuits: list[tuple[str, Network, Polarity, str, float]] = [
        ("n", single_segment(n, vdd=cfg.vdd), Polarity.N, "d1.vm", rest_voltage(n, cfg.vdd)),
        ("p", single_segment(p, vdd=cfg.vdd), Polarity.P, "d1.vm", rest_voltage(p, cfg.vdd)),
        ("np", build_np_pair(n, p, cfg.vdd), Polarity.N, "p1.vm", rest_voltage(p, cfg.vdd)),
    ]
    rows: list[tuple[object, ...]] = []
    for name, net, polarity, out, rest in circuits:
        peaks = _train_peaks(net, out, rest, polarity, cfg.train_period, cfg)
        rows.extend((name, k + 1, value) for k, value in enumerate(peaks))
    return ResultTable(("circuit", "pulse", "peak_v"), tuple(rows))


def _spatial_integration(cfg: IntegrationConfig) -> ResultTable:
    params = SegmentParams.uniform(Polarity.N, cfg.spatial_r, cfg.spatial_c)
    net = single_segment(params, gates=("a", "b"), vdd=cfg.vdd)
    out = membrane_channel("d1")
    rest = rest_voltage(params, cfg.vdd)
    a = Stimulus.pulse(cfg.amplitude, cfg.spatial_width, cfg.t_start)
    silent = Stimulus.pulse(0.0, cfg.spatial_width, cfg.t_start)
    single = peak(simulate(net, {"a": a, "b": silent}, cfg.sim), out, rest).magnitude
    rows: list[tuple[object, ...]] = []
    for offset in cfg.offsets:
        dual_trace = simulate(net, {"a": a, "b": a.shifted(offset)}, cfg.sim)
        dual = peak(dual_trace, out, rest).magnitude
        rows.append((offset, single, dual, dual / single))
    return ResultTable(("offset_s", "single_peak_v", "dual_peak_v", "ratio"), tuple(rows))


def run_characterisation(
    kind: Characterisation,
    cfg: SweepConfig | ChainConfig | IntegrationConfig | None = None,
) -> ResultTable:
    """Run one characterisation study with its config (or the published defaults)."""
    logger.debug("characterisation: %s", kind.value)
    if kind is Characterisation.DELAY_SWEEP:
        return _delay_sweep(cfg if isinstance(cfg, SweepConfig) else SweepConfig())
    if kind is Characterisation.GAIN_SWEEP:
        return _gain_sweep(cfg if isinstance(cfg, SweepConfig) else SweepConfig())
    if kind is Characterisation.CHAIN_COMPARISON:
        return _chain_comparison(cfg if isinstance(cfg, ChainConfig) else ChainConfig())
    integration = cfg if isinstance(cfg, IntegrationConfig) else IntegrationConfig()
    if kind is Characterisation.TEMPORAL_INTEGRATION:
        return _temporal_integration(integration)
    if kind is Characterisation.TRAIN_RESPONSE:
        return _train_response(integration)
    return _spatial_integration(integration)


# -- sound localisation --------------------------------------------------------


class Variant(str, Enum):
    A = "A"
    B = "B"
    C = "C"


# (N1 R_A, N1 R_L, N2 R_A, N2 R_L); all capacitors 1 uF, P1 is 13 ohm / 1 kohm.
LOCALISATION_VALUES: dict[Variant, tuple[float, float, float, float]] = {
    Variant.A: (1.42e3, 1.94e3, 205.0, 140.0),
    Variant.B: (2.18e3, 5.34e3, 196.0, 140.0),
    Variant.C: (2.7e3, 8.89e3, 197.0, 132.0),
}
DETECTOR_R_AXIAL = 13.0
DETECTOR_R_LEAK = 1e3
LOCALISATION_C = 1e-6

# N1's gate is fully driven by the 1.7 V input but resistive, so its output
# keeps the slow RC shape that sets each variant's delay. N2 switches hard.
BRANCH_GATES: dict[str, TransistorModel] = {
    "N1": TransistorModel(SwitchKind.SMOOTH, 0.8, r_on=480.0, transition_width=1.05),
    "N2": TransistorModel(SwitchKind.SMOOTH, 1.4, r_on=25.0, transition_width=0.2),
}

# P1 charges through 2.45 kOhm, slowly enough to remember how early each
# branch dipped as well as how deep.
DETECTOR_GATE = TransistorModel(
    SwitchKind.SMOOTH, 1.775, r_on=2.45e3, r_off=10e6, transition_width=0.18
)


@dataclass(frozen=True)
class CoincidenceDetector:
    """A two-input network whose ``inputs`` are (leading, lagging) stimulus names."""

    network: Network
    inputs: tuple[str, str] = ("in1", "in2")
    output: str = "P1.vm"

    def respond(self, lead: Stimulus, lag: Stimulus, sim: SimConfig) -> Trace:
        return simulate(self.network, {self.inputs[0]: lead, self.inputs[1]: lag}, sim)

    def rest(self, channel: str) -> float:
        return self.network.channel_rest(channel)


@dataclass(frozen=True)
class PassivePair:
    """Two passive RC ladders whose final stages are summed."""

    r_axial_lead: float
    r_axial_lag: float
    r_leak: float = 10e3
    c: float = 1e-6
    n_stages: int = 2
    output: str = "sum"

    def respond(self, lead: Stimulus, lag: Stimulus, sim: SimConfig) -> Trace:
        last = f"stage{self.n_stages}"
        n, rl, c = self.n_stages, self.r_leak, self.c
        one = simulate_passive_chain(n, self.r_axial_lead, rl, c, lead, sim)
        two = simulate_passive_chain(n, self.r_axial_lag, rl, c, lag, sim)
        return Trace(
            one.dt,
            one.t0,
            {
                "in1": one["in"],
                "in2": two["in"],
                "branch1": one[last],
                "branch2": two[last],
                "sum": one[last] + two[last],
            },
        )

    def rest(self, channel: str) -> float:
        return 0.0


@dataclass(frozen=True)
class LocalisationConfig:
    amplitude: float = 1.7
    width: float = 2e-3
    t_start: float = 1e-3
    separations: tuple[float, ...] = _grid(0.0, 10e-3, 0.25e-3)
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=1e-6, duration=20e-3))
    workers: int = 4


@dataclass(frozen=True)
class PassiveBaselineConfig(LocalisationConfig):
    r_axials: tuple[float, ...] = (250.0, 500.0, 750.0, 1000.0, 1250.0)
    reference_r_axial: float = 100.0
    r_leak: float = 10e3
    c: float = 1e-6
    n_stages: int = 2


def build_sound_localisation(
    variant: Variant, vdd: float = DEFAULT_VDD
) -> CoincidenceDetector:
    """Two n-type delay branches feeding parallel gates on one p-type integrator.

    ``in1`` drives N1 (the long, tunable delay) and ``in2`` drives N2.
    """
    n1_ra, n1_rl, n2_ra, n2_rl = LOCALISATION_VALUES[variant]
    c = LOCALISATION_C
    n1 = SegmentInstance(
        "N1",
        SegmentParams(Polarity.N, n1_ra, n1_rl, c, c),
        (GateInput(GateSource.stimulus("in1"), BRANCH_GATES["N1"]),),
    )
    n2 = SegmentInstance(
        "N2",
        SegmentParams(Polarity.N, n2_ra, n2_rl, c, c),
        (GateInput(GateSource.stimulus("in2"), BRANCH_GATES["N2"]),),
    )
    p1 = SegmentInstance(
        "P1",
        SegmentParams(Polarity.P, DETECTOR_R_AXIAL, DETECTOR_R_LEAK, c, c),
        (
            GateInput(GateSource.membrane("N1"), DETECTOR_GATE),
            GateInput(GateSource.membrane("N2"), DETECTOR_GATE),
        ),
    )
    return CoincidenceDetector(Network(vdd, (n1, n2, p1)))


def run_sound_localisation(
    variant: Variant, cfg: LocalisationConfig | None = None
) -> list[tuple[float, float]]:
    """Peak P1 deviation for each separation, N1's input leading."""
    cfg = cfg or LocalisationConfig()
    pulse = Stimulus.pulse(cfg.amplitude, cfg.width, cfg.t_start)
    logger.debug("sound localisation %s: %d separations", variant.value, len(cfg.separations))
    return response_curve(
        lambda: build_sound_localisation(variant, cfg.vdd),
        cfg.separations,
        "P1.vm",
        pulse=pulse,
        sim=cfg.sim,
        workers=cfg.workers,
    )


def run_passive_localisation_baseline(
    r_axials: Sequence[float] | None = None, cfg: PassiveBaselineConfig | None = None
) -> list[tuple[float, list[tuple[float, float]]]]:
    """Response curves of passive two-branch coincidence circuits, one per lead-branch R_A."""
    cfg = cfg or PassiveBaselineConfig()
    values = tuple(r_axials) if r_axials is not None else cfg.r_axials
    if not values:
        raise ValueError("r_axials must be non-empty")
    pulse = Stimulus.pulse(cfg.amplitude, cfg.width, cfg.t_start)
    family: list[tuple[float, list[tuple[float, float]]]] = []
    for r in values:
        pair = PassivePair(r, cfg.reference_r_axial, cfg.r_leak, cfg.c, cfg.n_stages)
        curve = response_curve(
            lambda pair=pair: pair,
            cfg.separations,
            "sum",
            pulse=pulse,
            sim=cfg.sim,
            workers=cfg.workers,
        )
        family.append((r, curve))
    return family


def curve_peak(curve: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """(separation, value) of a curve's maximum; earliest wins ties."""
    best = max(range(len(curve)), key=lambda i: (curve[i][1], -i))
    return curve[best]


# -- bursting neuron ---------------------------------------------------------

# (name, R_A, R_L, C) in ring order; P8's R_L is the tuning knob.
RING_VALUES: tuple[tuple[str, float, float, float], ...] = (
    ("N1", 220.0, 1000.0, 3.3e-9),
    ("P2", 220.0, 377.0, 22e-9),
    ("N3", 220.0, 220.0, 22e-9),
    ("P4", 220.0, 438.0, 22e-9),
    ("N5", 220.0, 187.0, 22e-9),
    ("P6", 220.0, 390.0, 22e-9),
    ("N7", 220.0, 220.0, 22e-9),
    ("P8", 220.0, 127.0, 22e-9),
)
TABLED_P8_LEAKS: tuple[float, ...] = (127.0, 231.0, 251.0)

# Each stage swings just past the next stage's threshold, so a travelling pulse
# narrows on every lap and P8's swing sets how many laps it survives.
RING_GATES: dict[Polarity, TransistorModel] = {
    Polarity.N: TransistorModel(SwitchKind.SMOOTH, 2.6),
    Polarity.P: TransistorModel(SwitchKind.SMOOTH, 1.7),
}


@dataclass(frozen=True)
class RingConfig:
    """External pulse, run length and spike detection for the bursting ring."""

    amplitude: float = 5.0
    width: float = 20e-6
    t_start: float = 5e-6
    vdd: float = DEFAULT_VDD
    sim: SimConfig = field(
        default_factory=lambda: SimConfig(dt=50e-9, duration=2e-3, record_stride=4)
    )
    threshold_fraction: float = 0.5
    refractory: float = 5e-6
    search_low: float = 127.0
    search_high: float = 1000.0
    search_tolerance: float = 0.25


def build_bursting_neuron(p8_r_leak: float, vdd: float = DEFAULT_VDD) -> Network:
    """Eight segments in a ring; P8's membrane feeds back onto N1 beside the external input."""
    segments: list[SegmentInstance] = []
    previous = "P8"
    for name, ra, rl, c in RING_VALUES:
        polarity = Polarity.N if name.startswith("N") else Polarity.P
        if name == "P8":
            rl = p8_r_leak
        model = RING_GATES[polarity]
        gates = [GateInput(GateSource.membrane(previous), model)]
        if name == "N1":
            gates.insert(0, GateInput(GateSource.stimulus(INPUT), model))
        segments.append(SegmentInstance(name, SegmentParams(polarity, ra, rl, c, c), tuple(gates)))
        previous = name
    return Network(vdd, tuple(segments))


def ring_stimuli(cfg: RingConfig | None = None) -> dict[str, Stimulus]:
    cfg = cfg or RingConfig()
    return {INPUT: Stimulus.pulse(cfg.amplitude, cfg.width, cfg.t_start)}


def count_bursts(p8_r_leak: float, cfg: RingConfig | None = None) -> int | None:
    """Spikes on N1 for one external pulse.

    None when the ring latches: N1 is still away from rest at the end of the run,
    or it was still firing in the second half.
    """
    cfg = cfg or RingConfig()
    net = build_bursting_neuron(p8_r_leak, cfg.vdd)
    trace = simulate(net, ring_stimuli(cfg), cfg.sim)
    channel = membrane_channel("N1")
    rest = net.channel_rest(channel)
    onsets = spike_onsets(
        trace, channel, rest, cfg.threshold_fraction, cfg.refractory, vdd=cfg.vdd
    )
    held = abs(float(trace[channel][-1]) - rest) > cfg.threshold_fraction * cfg.vdd
    late = bool(onsets.size) and trace.t0 + onsets[-1] * trace.dt > 0.5 * cfg.sim.duration
    if held or late:
        logger.debug("ring with P8 R_L=%g latched", p8_r_leak)
        return None
    return int(onsets.size)


@dataclass(frozen=True)
class BurstSetting:
    p8_r_leak: float
    spikes: int | None


def _at_least(count: int | None, target: int) -> bool:
    return count is None or count >= target


def find_burst_setting(target: int, cfg: RingConfig | None = None) -> BurstSetting:
    """Smallest P8 leak resistance (within tolerance) giving at least ``target`` spikes.

    Bisects on the assumption that the burst count does not decrease as the
    leak resistance grows; a ring still firing at the end of the run counts
    as unbounded.

    Raises:
        ValueError: even ``cfg.search_high`` gives fewer than ``target`` spikes.
    """
    cfg = cfg or RingConfig()
    lo, hi = cfg.search_low, cfg.search_high
    lo_count = count_bursts(lo, cfg)
    if _at_least(lo_count, target):
        return BurstSetting(lo, lo_count)
    hi_count = count_bursts(hi, cfg)
    if not _at_least(hi_count, target):
        raise ValueError(f"no P8 leak resistance up to {hi} ohm gives {target} spikes")
    while hi - lo > cfg.search_tolerance:
        mid = 0.5 * (lo + hi)
        mid_count = count_bursts(mid, cfg)
        if _at_least(mid_count, target):
            hi, hi_count = mid, mid_count
        else:
            lo = mid
    logger.debug("burst target %d: P8 R_L=%g -> %s spikes", target, hi, hi_count)
    return BurstSetting(hi, hi_count)


def run_burst_table(
    cfg: RingConfig | None = None, targets: Sequence[int] = (1, 2, 3)
) -> ResultTable:
    """Spike counts at the tabled P8 leak values and at searched settings for each target."""
    cfg = cfg or RingConfig()
    rows: list[tuple[object, ...]] = []
    for r in TABLED_P8_LEAKS:
        spikes = count_bursts(r, cfg)
        rows.append(("table", r, spikes, spikes is None))
    for target in targets:
        setting = find_burst_setting(target, cfg)
        latched = setting.spikes is None
        rows.append((f"search>={target}", setting.p8_r_leak, setting.spikes, latched))
    return ResultTable(("source", "p8_r_leak_ohm", "spikes", "latched"), tuple(rows))


# -- presets ---------------------------------------------------------------------


def builtin_presets() -> dict[str, Netlist]:
    """Every built-in circuit with the stimuli that drive it, as netlist values."""
    vdd = DEFAULT_VDD
    one_k = SegmentParams.uniform(Polarity.N, 1e3, 1e-6)
    presets: dict[str, Netlist] = {
        "single_n": Netlist(
            single_segment(one_k),
            {INPUT: Stimulus.pulse(5.0, 2e-3, 1e-3)},
            ("d1.vm",),
        ),
        "single_p": Netlist(
            single_segment(SegmentParams.uniform(Polarity.P, 1e3, 1e-6)),
            {INPUT: input_pulse(Polarity.P, 5.0, 2e-3, 1e-3, vdd)},
            ("d1.vm",),
        ),
        "np_pair": Netlist(
            build_np_pair(),
            {INPUT: spike_input(5.0, one_k, Polarity.N, 1e-3, vdd)},
            ("n1.vm", "p1.vm"),
        ),
        "spatial": Netlist(
            single_segment(one_k, gates=("a", "b")),
            {"a": Stimulus.pulse(5.0, 2e-3, 1e-3), "b": Stimulus.pulse(5.0, 2e-3, 1.5e-3)},
            ("d1.vm",),
        ),
        "active_chain": Netlist(
            build_active_chain(),
            {INPUT: Stimulus.pulse(5.0, 10e-6, 5e-6)},
            (),
            {"dt": 50e-9, "duration": 300e-6},
        ),
    }
    for variant in Variant:
        detector = build_sound_localisation(variant, vdd)
        pulse = Stimulus.pulse(1.7, 2e-3, 1e-3)
        presets[f"localisation_{variant.value}"] = Netlist(
            detector.network,
            {"in1": pulse, "in2": pulse.shifted(1e-3)},
            (detector.output,),
        )
    for r in TABLED_P8_LEAKS:
        presets[f"ring_{r:g}"] = Netlist(
            build_bursting_neuron(r, vdd),
            ring_stimuli(),
            ("N1.vm",),
            {"dt": 50e-9, "duration": 2e-3, "record_stride": 4},
        )
    return presets
