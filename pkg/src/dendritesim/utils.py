"""Shared exit codes, default constants, SI-number and CSV helpers."""

from __future__ import annotations

import csv
import io
import math
import re
from collections.abc import Iterable, Sequence
from decimal import Decimal, DecimalException
from enum import IntEnum

from . import __version__


class ExitCode(IntEnum):
    """CLI exit codes."""

    SUCCESS = 0
    INPUT_ERROR = 1
    SIMULATION_FAILED = 2


# Calibrated transistor defaults used when a netlist omits them.
DEFAULT_VTH_N = 1.7
DEFAULT_VTH_P = 2.2
DEFAULT_R_ON = 50.0
DEFAULT_R_OFF = 10e6
DEFAULT_TRANSITION_WIDTH = 0.05

DEFAULT_VDD = 5.0
DEFAULT_DT = 1e-6
DEFAULT_DURATION = 20e-3

# Rail guard band for the transient solver (volts beyond either rail).
GUARD_BAND = 0.5

# Suffix -> power of ten.
SI_SUFFIXES: dict[str, int] = {
    "meg": 6,
    "p": -12,
    "n": -9,
    "u": -6,
    "m": -3,
    "k": 3,
}

_NUMBER_RE = re.compile(
    r"^(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<suffix>meg|[pnumk])?$",
    re.IGNORECASE,
)


def parse_si(text: str) -> float:
    """Parse a number with an optional SI suffix (p, n, u, m, k, meg).

    Suffixes are case-insensitive; ``meg`` is mega and ``m`` is milli, as in
    circuit netlists. Scaling is done in decimal and rounded once, so ``1k``,
    ``1u`` and ``22n`` come out exactly equal to the literals ``1000``,
    ``1e-6`` and ``22e-9``.

    Raises ValueError for anything else.
    """
    match = _NUMBER_RE.match(text.strip())
    if match is None:
        raise ValueError(f"Not a number: {text!r}")
    suffix = (match.group("suffix") or "").lower()
    try:
        mantissa = Decimal(match.group("num"))
        if suffix:
            mantissa = mantissa.scaleb(SI_SUFFIXES[suffix])
    except DecimalException as e:
        raise ValueError(f"Number out of range: {text!r}") from e
    return float(mantissa)


def format_float(value: float) -> str:
    """Shortest round-trip decimal, with integral values printed without '.0'.

    ``parse_si(format_float(x)) == x`` for every finite float.
    """
    value = float(value)
    if math.isfinite(value) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def format_si(value: float) -> str:
    """Render a value with the SI suffix that puts the mantissa in [1, 1000).

    Exact: ``parse_si(format_si(x)) == x`` for every finite float, because
    the shift is done on the shortest decimal form of ``x``.
    """
    value = float(value)
    if not math.isfinite(value) or value == 0:
        return format_float(value)
    exact = Decimal(repr(value))
    for suffix, power in sorted(SI_SUFFIXES.items(), key=lambda item: -item[1]):
        mantissa = exact.scaleb(-power)
        if 1 <= abs(mantissa) < 1000:
            return f"{format(mantissa.normalize(), 'f')}{suffix}"
    return format_float(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Render rows as RFC-4180 CSV text with a header row.

    Floats use the shortest round-trip representation so repeated runs are
    bit-identical.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Split CSV text into its header and data rows.

    Raises ValueError if there is no header or a row has the wrong width.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise ValueError("CSV has no header row")
    header, data = rows[0], rows[1:]
    for i, row in enumerate(data, start=2):
        if len(row) != len(header):
            raise ValueError(f"CSV row {i} has {len(row)} fields, expected {len(header)}")
    return header, data


def banner() -> str:
    """One-line provenance string for manifests."""
    return f"dendritesim v{__version__}"
