"""Delay, gain, peak and spike-count measurements on simulated traces."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import numpy.typing as npt

from .model import FloatArray, Stimulus, Trace
from .transient import SimConfig
from .utils import DEFAULT_VDD

logger = logging.getLogger(__name__)


class MeasurementError(ValueError):
    """A measurement cannot be taken on the given trace."""


@dataclass(frozen=True)
class MeasureConfig:
    vdd: float = DEFAULT_VDD
    floor_fraction: float = 0.02
    threshold_fraction: float = 0.5
    refractory: float = 0.2e-3

    @property
    def floor(self) -> float:
        """Smallest output deviation for which a delay is reported."""
        return self.floor_fraction * self.vdd


@dataclass(frozen=True)
class PeakInfo:
    t_peak: float
    magnitude: float
    rest: float


def _channel(trace: Trace, channel: str) -> FloatArray:
    if channel not in trace:
        raise MeasurementError(f"Channel not found: {channel}")
    values = trace[channel]
    if values.size == 0:
        raise MeasurementError(f"Channel is empty: {channel}")
    return values


def peak(trace: Trace, channel: str, rest: float) -> PeakInfo:
    """Sample with the largest deviation from ``rest``; ties go to the earliest."""
    values = _channel(trace, channel)
    deviation = np.abs(values - rest)
    index = int(np.argmax(deviation))
    return PeakInfo(trace.t0 + index * trace.dt, float(deviation[index]), rest)


def delay(
    trace: Trace,
    in_channel: str,
    out_channel: str,
    rests: tuple[float, float],
    cfg: MeasureConfig | None = None,
) -> float | None:
    """Peak-to-peak delay from input to output, or None when the output is too small to time."""
    cfg = cfg or MeasureConfig()
    p_in = peak(trace, in_channel, rests[0])
    p_out = peak(trace, out_channel, rests[1])
    if p_out.magnitude < cfg.floor:
        logger.debug(
            "delay undefined: %s deviation %.4g V below floor %.4g V",
            out_channel,
            p_out.magnitude,
            cfg.floor,
        )
        return None
    return p_out.t_peak - p_in.t_peak


def gain(
    trace: Trace,
    in_channel: str,
    out_channel: str,
    rests: tuple[float, float],
) -> float:
    """Output peak deviation over input peak deviation (sign of the response ignored)."""
    p_in = peak(trace, in_channel, rests[0])
    if p_in.magnitude == 0:
        raise MeasurementError(f"Input channel {in_channel} never leaves its rest level")
    return peak(trace, out_channel, rests[1]).magnitude / p_in.magnitude


def spike_onsets(
    trace: Trace,
    channel: str,
    rest: float,
    threshold_fraction: float = 0.5,
    refractory: float = 0.2e-3,
    *,
    vdd: float = DEFAULT_VDD,
) -> npt.NDArray[np.int64]:
    """Sample indices where ``|v - rest|`` rises above ``threshold_fraction * vdd``.

    A crossing separated from the previous supra-threshold sample by no more
    than ``refractory`` seconds of sub-threshold signal is merged into the
    earlier spike.
    """
    if not 0 < threshold_fraction < 1:
        raise MeasurementError(f"threshold_fraction must be in (0, 1), got {threshold_fraction}")
    values = _channel(trace, channel)
    above = np.flatnonzero(np.abs(values - rest) > threshold_fraction * vdd)
    if above.size == 0:
        return np.empty(0, dtype=np.int64)
    gap = max(0, math.floor(refractory / trace.dt + 1e-9))
    starts = np.flatnonzero(np.diff(above) > gap + 1) + 1
    return np.asarray(np.concatenate(([above[0]], above[starts])), dtype=np.int64)


def count_spikes(
    trace: Trace,
    channel: str,
    rest: float,
    threshold_fraction: float = 0.5,
    refractory: float = 0.2e-3,
    *,
    vdd: float = DEFAULT_VDD,
) -> int:
    """Number of distinct supra-threshold excursions on ``channel``."""
    return int(
        spike_onsets(trace, channel, rest, threshold_fraction, refractory, vdd=vdd).size
    )


class Circuit(Protocol):
    """A two-input circuit for coincidence sweeps.

    ``respond`` drives the leading input with ``lead`` and the other with
    ``lag`` and returns the simulated trace.
    """

    def respond(self, lead: Stimulus, lag: Stimulus, sim: SimConfig) -> Trace: ...

    def rest(self, channel: str) -> float: ...


def response_curve(
    build: Callable[[], Circuit],
    separations: Sequence[float],
    probe_channel: str,
    *,
    pulse: Stimulus,
    sim: SimConfig,
    workers: int = 1,
) -> list[tuple[float, float]]:
    """Peak deviation of ``probe_channel`` for each lead-to-lag separation.

    The lagging input receives ``pulse`` delayed by the separation. Results
    follow the order of ``separations`` whatever ``workers`` is.
    """
    if not separations:
        raise MeasurementError("separations must be non-empty")
    circuit = build()
    rest = circuit.rest(probe_channel)

    def one(separation: float) -> tuple[float, float]:
        trace = circuit.respond(pulse, pulse.shifted(separation), sim)
        return separation, peak(trace, probe_channel, rest).magnitude

    if workers <= 1:
        return [one(s) for s in separations]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, separations))
