"""Nonlinear time-domain simulation of dendrite networks, plus a passive RC ladder."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy import linalg

from . import _kernels
from .model import (
    FloatArray,
    ModelError,
    Network,
    Polarity,
    SourceKind,
    Stimulus,
    SwitchKind,
    Trace,
    TransistorModel,
    membrane_channel,
    reservoir_channel,
    rest_voltage,
    stimulus_samples,
)
from .utils import DEFAULT_DT, DEFAULT_DURATION, GUARD_BAND

logger = logging.getLogger(__name__)

PASSIVE_INPUT = "in"


class Method(str, Enum):
    BACKWARD_EULER = "be"
    TRAPEZOIDAL = "trap"

    @property
    def theta(self) -> float:
        return 1.0 if self is Method.BACKWARD_EULER else 0.5


class SimulationDivergedError(RuntimeError):
    """A node left the rail guard band or became non-finite."""

    def __init__(self, time: float, node: str, value: float) -> None:
        self.time = time
        self.node = node
        self.value = value
        super().__init__(
            f"Simulation diverged at t={time:.9g} s: node {node} = {value:.6g} V "
            f"outside the rail guard band"
        )


@dataclass(frozen=True)
class SimConfig:
    dt: float = DEFAULT_DT
    duration: float = DEFAULT_DURATION
    method: Method = Method.BACKWARD_EULER
    record_stride: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ModelError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.duration) and self.duration >= self.dt):
            raise ModelError(f"duration ({self.duration}) must be at least dt ({self.dt})")
        if self.record_stride < 1:
            raise ModelError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.duration / self.dt))

    @classmethod
    def merged(cls, *layers: Mapping[str, Any] | None) -> SimConfig:
        """Build a config from override layers, highest precedence first.

        Keys are the field names; ``None`` values and missing keys fall
        through to the next layer and finally to the built-in defaults.
        """
        values: dict[str, Any] = {}
        for name in ("dt", "duration", "method", "record_stride"):
            for layer in layers:
                if layer is not None and layer.get(name) is not None:
                    values[name] = layer[name]
                    break
        if "method" in values:
            values["method"] = Method(values["method"])
        return cls(**values)


@dataclass(frozen=True)
class SimState:
    """Node voltages and branch currents of every segment at one instant.

    ``i_axial`` flows from reservoir to membrane; ``i_leak`` flows from the
    membrane into its leak rail.
    """

    time: float
    segments: tuple[str, ...]
    v_reservoir: FloatArray
    v_membrane: FloatArray
    i_axial: FloatArray
    i_leak: FloatArray


def _rails(polarity: Polarity, vdd: float) -> tuple[float, float]:
    """(drain rail, leak rail)."""
    return (0.0, vdd) if polarity is Polarity.N else (vdd, 0.0)


def _state_from(net: Network, time: float, v_r: FloatArray, v_m: FloatArray) -> SimState:
    r_a = np.array([s.params.r_axial for s in net.segments])
    r_l = np.array([s.params.r_leak for s in net.segments])
    rail_l = np.array([_rails(s.polarity, net.vdd)[1] for s in net.segments])
    return SimState(
        time=time,
        segments=tuple(net.names),
        v_reservoir=v_r,
        v_membrane=v_m,
        i_axial=(v_r - v_m) / r_a,
        i_leak=(v_m - rail_l) / r_l,
    )


def initial_state(net: Network) -> SimState:
    """Every segment at rest."""
    rest = np.array([rest_voltage(s.params, net.vdd) for s in net.segments], dtype=np.float64)
    return _state_from(net, 0.0, rest.copy(), rest.copy())


def snapshot(net: Network, trace: Trace, index: int) -> SimState:
    """Reconstruct the state at recorded sample ``index`` of a trace from ``simulate``."""
    v_r = np.array([trace[reservoir_channel(n)][index] for n in net.names], dtype=np.float64)
    v_m = np.array([trace[membrane_channel(n)][index] for n in net.names], dtype=np.float64)
    n = trace.n_samples
    position = index if index >= 0 else n + index
    return _state_from(net, trace.t0 + position * trace.dt, v_r, v_m)


def transistor_conductance(
    v_gate: float, model: TransistorModel, polarity: Polarity, vdd: float
) -> float:
    """Drain-source conductance (siemens) of a gate transistor at a given gate voltage."""
    return float(
        _kernels.gate_conductance(
            float(v_gate),
            _kernels.KIND_HARD if model.kind is SwitchKind.HARD else _kernels.KIND_SMOOTH,
            _kernels.POLARITY_N if polarity is Polarity.N else _kernels.POLARITY_P,
            model.v_threshold,
            model.g_on,
            model.g_off,
            model.transition_width,
            vdd,
        )
    )


def _sample_stimuli(
    names: list[str], stimuli: Mapping[str, Stimulus], cfg: SimConfig
) -> FloatArray:
    times = np.arange(cfg.n_steps + 1, dtype=np.float64) * cfg.dt
    matrix = np.zeros((len(names), times.shape[0]), dtype=np.float64)
    for row, name in enumerate(names):
        matrix[row] = stimulus_samples(stimuli[name], times)
    return matrix


def simulate(net: Network, stimuli: Mapping[str, Stimulus], cfg: SimConfig) -> Trace:
    """Integrate a network from rest under the given stimuli.

    The returned trace holds every stimulus channel, then ``<seg>.vr`` and
    ``<seg>.vm`` for each segment in declaration order, sampled every
    ``cfg.record_stride`` steps.

    Raises:
        ModelError: a gate names a stimulus that is not supplied.
        SimulationDivergedError: a node voltage left [-0.5 V, vdd + 0.5 V].
    """
    missing = [ref for ref in net.stimulus_refs() if ref not in stimuli]
    if missing:
        raise ModelError(f"unresolved stimulus reference(s): {', '.join(missing)}")

    stim_names = list(stimuli)
    stim_index = {name: i for i, name in enumerate(stim_names)}
    seg_index = {name: i for i, name in enumerate(net.names)}
    stim = _sample_stimuli(stim_names, stimuli, cfg)

    segs = net.segments
    rails = [_rails(s.polarity, net.vdd) for s in segs]
    gates = [(i, gate) for i, s in enumerate(segs) for gate in s.gates]
    start = initial_state(net)

    def source_index(kind: SourceKind, name: str) -> int:
        return stim_index[name] if kind is SourceKind.STIMULUS else seg_index[name]

    logger.debug(
        "simulate: %d segments, %d gates, %d steps (dt=%g, %s)",
        len(segs),
        len(gates),
        cfg.n_steps,
        cfg.dt,
        cfg.method.value,
    )
    rec_r, rec_m, status, step, node, value = _kernels.step_network(
        np.array([s.params.c_reservoir for s in segs], dtype=np.float64),
        np.array([s.params.c_membrane for s in segs], dtype=np.float64),
        np.array([1.0 / s.params.r_axial for s in segs], dtype=np.float64),
        np.array([1.0 / s.params.r_leak for s in segs], dtype=np.float64),
        np.array([r[0] for r in rails], dtype=np.float64),
        np.array([r[1] for r in rails], dtype=np.float64),
        np.array(
            [
                _kernels.POLARITY_N if s.polarity is Polarity.N else _kernels.POLARITY_P
                for s in segs
            ],
            dtype=np.int64,
        ),
        np.array([i for i, _ in gates], dtype=np.int64),
        np.array(
            [
                _kernels.GATE_FROM_STIMULUS
                if g.source.kind is SourceKind.STIMULUS
                else _kernels.GATE_FROM_MEMBRANE
                for _, g in gates
            ],
            dtype=np.int64,
        ),
        np.array([source_index(g.source.kind, g.source.name) for _, g in gates], dtype=np.int64),
        np.array(
            [
                _kernels.KIND_HARD if g.model.kind is SwitchKind.HARD else _kernels.KIND_SMOOTH
                for _, g in gates
            ],
            dtype=np.int64,
        ),
        np.array([g.model.v_threshold for _, g in gates], dtype=np.float64),
        np.array([g.model.g_on for _, g in gates], dtype=np.float64),
        np.array([g.model.g_off for _, g in gates], dtype=np.float64),
        np.array([g.model.transition_width for _, g in gates], dtype=np.float64),
        stim,
        start.v_reservoir,
        start.v_membrane,
        net.vdd,
        cfg.dt,
        cfg.method.theta,
        cfg.n_steps,
        cfg.record_stride,
        -GUARD_BAND,
        net.vdd + GUARD_BAND,
    )
    if status != _kernels.STATUS_OK:
        seg_name = net.names[node // 2]
        channel = reservoir_channel(seg_name) if node % 2 == 0 else membrane_channel(seg_name)
        raise SimulationDivergedError(step * cfg.dt, channel, float(value))

    stride = cfg.record_stride
    channels: dict[str, FloatArray] = {
        name: stim[i, ::stride] for i, name in enumerate(stim_names)
    }
    for i, name in enumerate(net.names):
        channels[reservoir_channel(name)] = rec_r[:, i]
        channels[membrane_channel(name)] = rec_m[:, i]
    return Trace(cfg.dt * stride, 0.0, channels)


def passive_stage(k: int) -> str:
    """Channel name of ladder stage ``k`` (1-based)."""
    return f"stage{k}"


def simulate_passive_chain(
    n_stages: int,
    r_axial: float,
    r_leak: float,
    c_membrane: float,
    stimulus: Stimulus | None,
    cfg: SimConfig,
) -> Trace:
    """Simulate a classic RC delay line driven at stage 1.

    Every stage is a capacitor to ground with a leak resistor to 0 V; stages
    are linked by ``r_axial`` and the source drives stage 1 through another
    ``r_axial``. The network is linear, so the theta-method step matrix is
    factored once.

    Returns:
        Trace with channel ``in`` and ``stage1`` .. ``stageN``.
    """
    if n_stages < 1:
        raise ModelError(f"n_stages must be >= 1, got {n_stages}")
    for name, value in (("r_axial", r_axial), ("r_leak", r_leak), ("c_membrane", c_membrane)):
        if not (math.isfinite(value) and value > 0):
            raise ModelError(f"{name} must be positive and finite, got {value}")

    n = n_stages
    g_a = 1.0 / r_axial
    g_l = 1.0 / r_leak
    # Nodal conductance matrix: dx/dt = C^-1 (M x + b u)
    m = np.zeros((n, n))
    for k in range(n):
        m[k, k] = -g_l - g_a  # source or previous stage
        if k + 1 < n:
            m[k, k] -= g_a
            m[k, k + 1] = g_a
            m[k + 1, k] = g_a
    b = np.zeros(n)
    b[0] = g_a

    theta = cfg.method.theta
    cap = np.eye(n) * (c_membrane / cfg.dt)
    lu = linalg.lu_factor(cap - theta * m)
    step_matrix = linalg.lu_solve(lu, cap + (1.0 - theta) * m)
    drive = linalg.lu_solve(lu, b)

    times = np.arange(cfg.n_steps + 1, dtype=np.float64) * cfg.dt
    u = (
        stimulus_samples(stimulus, times)
        if stimulus is not None
        else np.zeros(times.shape, dtype=np.float64)
    )
    lo = min(0.0, float(u.min())) - GUARD_BAND
    hi = max(0.0, float(u.max())) + GUARD_BAND
    logger.debug("simulate_passive_chain: %d stages, %d steps", n, cfg.n_steps)
    rec, status, step, node, value = _kernels.step_linear(
        np.ascontiguousarray(step_matrix),
        np.ascontiguousarray(drive),
        u,
        np.zeros(n),
        cfg.n_steps,
        cfg.record_stride,
        lo,
        hi,
    )
    if status != _kernels.STATUS_OK:
        raise SimulationDivergedError(step * cfg.dt, passive_stage(node + 1), float(value))

    stride = cfg.record_stride
    channels: dict[str, FloatArray] = {PASSIVE_INPUT: u[::stride]}
    for k in range(n):
        channels[passive_stage(k + 1)] = rec[:, k]
    return Trace(cfg.dt * stride, 0.0, channels)
