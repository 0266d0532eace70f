"""Shared test fixtures: small netlists and the segment values most tests use."""

from __future__ import annotations

from pathlib import Path

import pytest

from dendritesim.model import Polarity, SegmentParams
from dendritesim.transient import SimConfig

ONE_SEGMENT = """\
# n-type segment driven by one square pulse
vdd 5
sim dt=1u duration=10m
stim in pulse amp=5 width=2m t0=1m
seg d1 n ra=1k rl=1k cr=1u cm=1u gate=in
probe in
probe d1
"""

GAIN_SEGMENT = """\
vdd 5
sim dt=1u duration=12m
stim in pulse amp=2 width=2m t0=1m
seg d1 n ra=2k rl=8k cr=1u cm=1u gate=in
probe in
probe d1
"""

# Trapezoidal steps far longer than the switched-on reservoir time constant overshoot the rail.
DIVERGING = """\
vdd 5
sim dt=1m duration=5m method=trap
stim in pulse amp=5 width=2m t0=1m
seg d1 n ra=1k rl=1k cr=1u cm=1u gate=in
"""

UNRESOLVED_GATE = """\
vdd 5
stim in pulse amp=5 width=2m t0=1m
seg d1 n ra=1k rl=1k cr=1u cm=1u gate=nowhere
"""


@pytest.fixture
def one_segment_netlist(tmp_path: Path) -> Path:
    path = tmp_path / "one_segment.net"
    path.write_text(ONE_SEGMENT, encoding="utf-8")
    return path


@pytest.fixture
def gain_netlist(tmp_path: Path) -> Path:
    path = tmp_path / "gain.net"
    path.write_text(GAIN_SEGMENT, encoding="utf-8")
    return path


@pytest.fixture
def diverging_netlist(tmp_path: Path) -> Path:
    path = tmp_path / "diverging.net"
    path.write_text(DIVERGING, encoding="utf-8")
    return path


@pytest.fixture
def unresolved_netlist(tmp_path: Path) -> Path:
    path = tmp_path / "unresolved.net"
    path.write_text(UNRESOLVED_GATE, encoding="utf-8")
    return path


@pytest.fixture
def n_segment() -> SegmentParams:
    """The 1 kohm / 1 uF n-type segment."""
    return SegmentParams.uniform(Polarity.N, 1e3, 1e-6)


@pytest.fixture
def p_segment() -> SegmentParams:
    return SegmentParams.uniform(Polarity.P, 1e3, 1e-6)


@pytest.fixture
def fast_sim() -> SimConfig:
    return SimConfig(dt=1e-6, duration=10e-3)
