"""Domain types shared by every module: segments, transistors, stimuli, networks, traces.

All types are frozen dataclasses validated on construction, so a value that
exists is a valid value. Sample arrays inside a Trace are made read-only.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import numpy.typing as npt

from .utils import (
    DEFAULT_R_OFF,
    DEFAULT_R_ON,
    DEFAULT_TRANSITION_WIDTH,
    DEFAULT_VTH_N,
    DEFAULT_VTH_P,
    read_csv,
    write_csv,
)

FloatArray = npt.NDArray[np.float64]

# Pulse edges absorb this much float error so grid times hit intended edges.
EDGE_TOLERANCE = 1e-12


class ModelError(ValueError):
    """A domain value violates one of its invariants."""


class Polarity(str, Enum):
    """Segment variant: n-type output rests at VDD, p-type output rests at 0 V."""

    N = "n"
    P = "p"


class SwitchKind(str, Enum):
    HARD = "hard"
    SMOOTH = "smooth"


class StimulusKind(str, Enum):
    PULSE = "pulse"
    TRAIN = "train"
    SPIKE = "spike"
    SAMPLES = "samples"


class Direction(str, Enum):
    """Whether a stimulus waveform is added to or subtracted from its offset."""

    UP = "up"
    DOWN = "down"


class SourceKind(str, Enum):
    STIMULUS = "stimulus"
    MEMBRANE = "membrane"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ModelError(message)


def _positive_finite(name: str, value: float) -> None:
    _require(math.isfinite(value) and value > 0, f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class SegmentParams:
    """The passive components and polarity of one dendrite segment."""

    polarity: Polarity
    r_axial: float
    r_leak: float
    c_reservoir: float
    c_membrane: float

    def __post_init__(self) -> None:
        _positive_finite("r_axial", self.r_axial)
        _positive_finite("r_leak", self.r_leak)
        _positive_finite("c_reservoir", self.c_reservoir)
        _positive_finite("c_membrane", self.c_membrane)

    @classmethod
    def uniform(cls, polarity: Polarity, r: float, c: float) -> SegmentParams:
        """R_A = R_L = r and C_R = C_M = c."""
        return cls(polarity, r, r, c, c)


@dataclass(frozen=True)
class TransistorModel:
    """Switch-level input MOSFET.

    ``v_threshold`` is measured from ground for n-type gates and downward from
    VDD for p-type gates.
    """

    kind: SwitchKind = SwitchKind.SMOOTH
    v_threshold: float = DEFAULT_VTH_N
    r_on: float = DEFAULT_R_ON
    r_off: float = DEFAULT_R_OFF
    transition_width: float = DEFAULT_TRANSITION_WIDTH

    def __post_init__(self) -> None:
        _positive_finite("v_threshold", self.v_threshold)
        _positive_finite("r_on", self.r_on)
        _positive_finite("r_off", self.r_off)
        _require(self.r_on < self.r_off, f"r_on ({self.r_on}) must be below r_off ({self.r_off})")
        if self.kind is SwitchKind.SMOOTH:
            _positive_finite("transition_width", self.transition_width)

    @classmethod
    def default(cls, polarity: Polarity) -> TransistorModel:
        """Calibrated defaults used whenever a netlist omits transistor parameters."""
        vth = DEFAULT_VTH_N if polarity is Polarity.N else DEFAULT_VTH_P
        return cls(SwitchKind.SMOOTH, vth)

    @classmethod
    def discrete_pair(cls, polarity: Polarity) -> TransistorModel:
        """Discrete n/p pair used for the 22 nF active chain.

        That chain was built from a different transistor pair than the
        1 uF characterisation boards; the p-channel part switches at a
        smaller gate drive so that an n-stage output (about 2.2 V of swing
        with 220 ohm parts) can turn it on.
        """
        if polarity is Polarity.N:
            return cls(SwitchKind.SMOOTH, DEFAULT_VTH_N)
        return cls(SwitchKind.SMOOTH, 1.5)

    @property
    def g_on(self) -> float:
        return 1.0 / self.r_on

    @property
    def g_off(self) -> float:
        return 1.0 / self.r_off


@dataclass(frozen=True)
class Stimulus:
    """A deterministic gate-drive waveform.

    The value at time t is ``offset + w(t)`` (``offset - w(t)`` for
    ``Direction.DOWN``), where w is the kind-specific waveform and is zero
    outside its support. Use the ``pulse``/``train``/``spike``/``samples``
    constructors rather than building one field by field.
    """

    kind: StimulusKind
    amplitude: float = 0.0
    width: float = 0.0
    t_start: float = 0.0
    period: float = 0.0
    count: int = 1
    offset: float = 0.0
    direction: Direction = Direction.UP
    spike_params: SegmentParams | None = None
    v0: float = 0.0
    sample_dt: float = 0.0
    samples: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        _require(math.isfinite(self.amplitude) and self.amplitude >= 0, "amplitude must be >= 0")
        _require(math.isfinite(self.t_start), "t_start must be finite")
        _require(math.isfinite(self.offset), "offset must be finite")
        if self.kind in (StimulusKind.PULSE, StimulusKind.TRAIN):
            _positive_finite("width", self.width)
        if self.kind is StimulusKind.TRAIN:
            _require(self.period > self.width, "period must exceed width for a pulse train")
            _require(self.count >= 1, "count must be >= 1")
        if self.kind is StimulusKind.SPIKE:
            _require(self.spike_params is not None, "spike stimulus needs segment parameters")
            _require(math.isfinite(self.v0) and self.v0 >= 0, "v0 must be >= 0")
        if self.kind is StimulusKind.SAMPLES:
            _positive_finite("sample_dt", self.sample_dt)
            _require(len(self.samples) >= 1, "samples stimulus needs at least one value")
            _require(all(math.isfinite(v) for v in self.samples), "samples must be finite")

    @classmethod
    def pulse(
        cls,
        amplitude: float,
        width: float,
        t_start: float = 0.0,
        *,
        offset: float = 0.0,
        direction: Direction = Direction.UP,
    ) -> Stimulus:
        return cls(
            StimulusKind.PULSE,
            amplitude=amplitude,
            width=width,
            t_start=t_start,
            offset=offset,
            direction=direction,
        )

    @classmethod
    def train(
        cls,
        amplitude: float,
        width: float,
        period: float,
        count: int,
        t_start: float = 0.0,
        *,
        offset: float = 0.0,
        direction: Direction = Direction.UP,
    ) -> Stimulus:
        return cls(
            StimulusKind.TRAIN,
            amplitude=amplitude,
            width=width,
            period=period,
            count=count,
            t_start=t_start,
            offset=offset,
            direction=direction,
        )

    @classmethod
    def spike(
        cls,
        v0: float,
        params: SegmentParams,
        t_start: float = 0.0,
        *,
        offset: float = 0.0,
        direction: Direction = Direction.UP,
    ) -> Stimulus:
        """Waveform of a segment's analytic free response (used to mimic an upstream stage)."""
        return cls(
            StimulusKind.SPIKE,
            spike_params=params,
            v0=v0,
            t_start=t_start,
            offset=offset,
            direction=direction,
        )

    @classmethod
    def from_samples(
        cls,
        values: Sequence[float],
        sample_dt: float,
        t_start: float = 0.0,
        *,
        offset: float = 0.0,
        direction: Direction = Direction.UP,
    ) -> Stimulus:
        return cls(
            StimulusKind.SAMPLES,
            samples=tuple(float(v) for v in values),
            sample_dt=sample_dt,
            t_start=t_start,
            offset=offset,
            direction=direction,
        )

    @property
    def rest(self) -> float:
        """Value outside the waveform's support."""
        return self.offset

    def shifted(self, delta: float) -> Stimulus:
        """Copy with ``t_start`` moved later by ``delta`` seconds."""
        return replace(self, t_start=self.t_start + delta)


def stimulus_samples(s: Stimulus, times: npt.ArrayLike) -> FloatArray:
    """Evaluate a stimulus at every time in ``times`` (vectorised ``stimulus_value``)."""
    t = np.asarray(times, dtype=np.float64)
    rel = t - s.t_start
    wave: FloatArray
    if s.kind is StimulusKind.PULSE:
        on = (rel >= -EDGE_TOLERANCE) & (rel < s.width - EDGE_TOLERANCE)
        wave = np.where(on, s.amplitude, 0.0)
    elif s.kind is StimulusKind.TRAIN:
        k = np.floor((rel + EDGE_TOLERANCE) / s.period)
        phase = rel - k * s.period
        on = (rel >= -EDGE_TOLERANCE) & (k < s.count) & (phase < s.width - EDGE_TOLERANCE)
        wave = np.where(on, s.amplitude, 0.0)
    elif s.kind is StimulusKind.SPIKE:
        from .analytic import membrane_voltage, solve_segment

        assert s.spike_params is not None
        sol = solve_segment(s.spike_params, s.v0)
        clipped = np.maximum(rel, 0.0)
        wave = np.where(rel >= 0, membrane_voltage(sol, s.spike_params, clipped), 0.0)
    else:
        support = np.arange(len(s.samples), dtype=np.float64) * s.sample_dt
        wave = np.interp(rel, support, np.asarray(s.samples), left=0.0, right=0.0)
        # np.interp clamps exactly at the ends; anything past the last sample is outside.
        wave = np.where((rel < 0) | (rel > support[-1]), 0.0, wave)
    sign = 1.0 if s.direction is Direction.UP else -1.0
    return np.asarray(s.offset + sign * wave, dtype=np.float64)


def stimulus_value(s: Stimulus, t: float) -> float:
    """Value of a stimulus at time ``t`` (seconds)."""
    return float(stimulus_samples(s, np.array([t]))[0])


@dataclass(frozen=True)
class GateSource:
    """What drives a gate: a named stimulus or another segment's membrane node."""

    name: str
    kind: SourceKind

    @classmethod
    def stimulus(cls, name: str) -> GateSource:
        return cls(name, SourceKind.STIMULUS)

    @classmethod
    def membrane(cls, name: str) -> GateSource:
        return cls(name, SourceKind.MEMBRANE)


@dataclass(frozen=True)
class GateInput:
    source: GateSource
    model: TransistorModel


@dataclass(frozen=True)
class SegmentInstance:
    """A named segment with one or more gate transistors on its reservoir node."""

    name: str
    params: SegmentParams
    gates: tuple[GateInput, ...]

    def __post_init__(self) -> None:
        _require(bool(self.name), "segment name must be non-empty")
        _require("." not in self.name, f"segment name {self.name!r} must not contain '.'")
        _require(len(self.gates) >= 1, f"segment {self.name!r} needs at least one gate")

    @property
    def polarity(self) -> Polarity:
        return self.params.polarity


def membrane_channel(segment: str) -> str:
    return f"{segment}.vm"


def reservoir_channel(segment: str) -> str:
    return f"{segment}.vr"


@dataclass(frozen=True)
class Network:
    """A directed graph of segments; loops and forward references are allowed."""

    vdd: float
    segments: tuple[SegmentInstance, ...] = ()

    def __post_init__(self) -> None:
        _positive_finite("vdd", self.vdd)
        names = [seg.name for seg in self.segments]
        dupes = sorted({n for n in names if names.count(n) > 1})
        _require(not dupes, f"duplicate segment names: {', '.join(dupes)}")
        known = set(names)
        for seg in self.segments:
            for gate in seg.gates:
                if gate.source.kind is SourceKind.MEMBRANE:
                    _require(
                        gate.source.name in known,
                        f"segment {seg.name!r} gate refers to unknown segment "
                        f"{gate.source.name!r}",
                    )

    @property
    def names(self) -> list[str]:
        return [seg.name for seg in self.segments]

    def segment(self, name: str) -> SegmentInstance:
        for seg in self.segments:
            if seg.name == name:
                return seg
        raise KeyError(name)

    def stimulus_refs(self) -> list[str]:
        """Names of every stimulus some gate reads, in first-use order."""
        refs: list[str] = []
        for seg in self.segments:
            for gate in seg.gates:
                if gate.source.kind is SourceKind.STIMULUS and gate.source.name not in refs:
                    refs.append(gate.source.name)
        return refs

    def node_channels(self) -> list[str]:
        channels: list[str] = []
        for seg in self.segments:
            channels.append(reservoir_channel(seg.name))
            channels.append(membrane_channel(seg.name))
        return channels

    def channel_rest(self, channel: str, stimuli: Mapping[str, Stimulus] | None = None) -> float:
        """Quiescent voltage of a node or stimulus channel."""
        if stimuli and channel in stimuli:
            return stimuli[channel].rest
        seg_name, _, node = channel.rpartition(".")
        if node in ("vm", "vr") and seg_name in self.names:
            return rest_voltage(self.segment(seg_name).params, self.vdd)
        raise KeyError(channel)


def rest_voltage(segment: SegmentParams, vdd: float) -> float:
    """Quiescent membrane (and reservoir) voltage: VDD for n-type, 0 V for p-type."""
    _positive_finite("vdd", vdd)
    return vdd if segment.polarity is Polarity.N else 0.0


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled multi-channel voltage record."""

    dt: float
    t0: float
    channels: Mapping[str, FloatArray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _positive_finite("dt", self.dt)
        _require(math.isfinite(self.t0), "t0 must be finite")
        frozen: dict[str, FloatArray] = {}
        length: int | None = None
        for name, values in self.channels.items():
            arr = np.array(values, dtype=np.float64)
            _require(arr.ndim == 1, f"channel {name!r} must be one-dimensional")
            if length is None:
                length = arr.shape[0]
            _require(arr.shape[0] == length, f"channel {name!r} length differs from the others")
            _require(bool(np.all(np.isfinite(arr))), f"channel {name!r} has non-finite samples")
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "channels", frozen)

    @property
    def n_samples(self) -> int:
        return next((len(v) for v in self.channels.values()), 0)

    @property
    def times(self) -> FloatArray:
        return self.t0 + np.arange(self.n_samples, dtype=np.float64) * self.dt

    @property
    def duration(self) -> float:
        return max(self.n_samples - 1, 0) * self.dt

    def __getitem__(self, channel: str) -> FloatArray:
        return self.channels[channel]

    def __contains__(self, channel: object) -> bool:
        return channel in self.channels

    def select(self, names: Iterable[str]) -> Trace:
        """Copy restricted to ``names`` (in that order)."""
        return Trace(self.dt, self.t0, {n: self.channels[n] for n in names})

    def to_csv(self) -> str:
        """CSV with a ``time_s`` column followed by one column per channel."""
        names = list(self.channels)
        columns = [self.times, *(self.channels[n] for n in names)]
        rows = ([float(col[i]) for col in columns] for i in range(self.n_samples))
        return write_csv(["time_s", *names], rows)

    @classmethod
    def from_csv(cls, text: str) -> Trace:
        """Read a trace written by ``to_csv`` (or any CSV with a leading ``time_s`` column).

        Raises ValueError when the CSV is malformed or not uniformly sampled.
        """
        header, rows = read_csv(text)
        if not header or header[0].strip() != "time_s":
            raise ValueError("first CSV column must be 'time_s'")
        if len(rows) < 2:
            raise ValueError("trace CSV needs at least two samples")
        try:
            data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
        except ValueError as e:
            raise ValueError(f"non-numeric CSV field: {e}") from e
        times = data[:, 0]
        steps = np.diff(times)
        dt = float(np.mean(steps))
        if dt <= 0 or not np.allclose(steps, dt, rtol=1e-6, atol=1e-15):
            raise ValueError("time_s column is not uniformly increasing")
        names = [h.strip() for h in header[1:]]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate CSV column: {', '.join(duplicates)}")
        try:
            return cls(dt, float(times[0]), {n: data[:, i + 1] for i, n in enumerate(names)})
        except ModelError as e:
            raise ValueError(str(e)) from e
