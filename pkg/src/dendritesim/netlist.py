"""Line-oriented netlist format for dendrite networks, stimuli and probes.

Grammar (one directive per line, ``#`` starts a comment, keywords and enum
values are case-insensitive, names are case-sensitive)::

    vdd <volts>
    sim [dt=<s>] [duration=<s>] [method=be|trap] [stride=<n>]
    stim <name> pulse amp=<V> width=<s> t0=<s>
    stim <name> train amp=<V> width=<s> period=<s> count=<n> t0=<s>
    stim <name> spike v0=<V> ra=<ohm> rl=<ohm> cr=<F> cm=<F> t0=<s> [pol=n|p]
    stim <name> samples dt=<s> t0=<s> values=<V>,<V>,...
    seg <name> <n|p> ra=<ohm> rl=<ohm> cr=<F> cm=<F> gate=<src>[,<src>...]
        [vth=<V>] [ron=<ohm>] [roff=<ohm>] [model=hard|smooth] [tw=<V>]
    probe <name>

Every ``stim`` line also accepts ``offset=<V>`` and ``dir=up|down``. Numbers
take the suffixes p, n, u, m, k and meg. A gate source names a stimulus or a
segment (that segment's membrane node) and may refer forward. A probe names
a stimulus, a segment (its membrane channel) or ``<seg>.vr`` / ``<seg>.vm``.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from .model import (
    Direction,
    GateInput,
    GateSource,
    ModelError,
    Network,
    Polarity,
    SegmentInstance,
    SegmentParams,
    SourceKind,
    Stimulus,
    StimulusKind,
    SwitchKind,
    TransistorModel,
    membrane_channel,
    reservoir_channel,
)
from .utils import DEFAULT_VDD, format_float, format_si, parse_si

_TOKEN_RE = re.compile(r"\S+")

_STIM_KEYS: dict[str, tuple[set[str], set[str]]] = {
    # kind -> (required, optional)
    "pulse": ({"amp", "width", "t0"}, set()),
    "train": ({"amp", "width", "period", "count", "t0"}, set()),
    "spike": ({"v0", "ra", "rl", "cr", "cm", "t0"}, {"pol"}),
    "samples": ({"dt", "t0", "values"}, set()),
}
_STIM_COMMON = {"offset", "dir"}
_SEG_REQUIRED = {"ra", "rl", "cr", "cm", "gate"}
_SEG_OPTIONAL = {"vth", "ron", "roff", "model", "tw"}
_SIM_KEYS = {"dt", "duration", "method", "stride"}


class ParseError(ValueError):
    """A positioned netlist error. ``line`` and ``column`` are 1-based."""

    def __init__(self, line: int, column: int, message: str, token: str = "") -> None:
        self.line = line
        self.column = column
        self.message = message
        self.token = token
        super().__init__(self._render())

    def _render(self) -> str:
        suffix = f" ({self.token!r})" if self.token else ""
        return f"{self.line}:{self.column}: {self.message}{suffix}"


class ParseErrors(ParseError):
    """Several errors found in one document; positioned at the first."""

    def __init__(self, errors: Sequence[ParseError]) -> None:
        self.errors = list(errors)
        first = self.errors[0]
        super().__init__(first.line, first.column, first.message, first.token)

    def _render(self) -> str:
        return "\n".join(str(e) for e in self.errors)


@dataclass(frozen=True)
class Netlist:
    """Everything a netlist describes."""

    network: Network
    stimuli: Mapping[str, Stimulus] = field(default_factory=dict)
    probes: tuple[str, ...] = ()
    sim: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class _Token:
    text: str
    column: int


@dataclass
class _PendingSegment:
    name: str
    params: SegmentParams
    model: TransistorModel
    gates: list[_Token]
    line: int


class _Parser:
    def __init__(self) -> None:
        self.errors: list[ParseError] = []
        self.vdd: float | None = None
        self.sim: dict[str, Any] = {}
        self.seen_sim = False
        self.stimuli: dict[str, Stimulus] = {}
        self.segments: list[_PendingSegment] = []
        self.probes: list[tuple[int, _Token]] = []
        self.names: set[str] = set()

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def number(line: int, token: _Token, value: str, key: str) -> float:
        try:
            return parse_si(value)
        except ValueError:
            raise ParseError(line, token.column, f"bad number for {key}", token.text) from None

    @staticmethod
    def options(
        line: int, tokens: Sequence[_Token], required: set[str], optional: set[str], anchor: _Token
    ) -> dict[str, tuple[str, _Token]]:
        found: dict[str, tuple[str, _Token]] = {}
        for tok in tokens:
            key, sep, value = tok.text.partition("=")
            key = key.lower()
            if not sep or not value:
                raise ParseError(line, tok.column, "expected key=value", tok.text)
            if key not in required and key not in optional:
                raise ParseError(line, tok.column, f"unknown key {key!r}", tok.text)
            if key in found:
                raise ParseError(line, tok.column, f"duplicate key {key!r}", tok.text)
            found[key] = (value, tok)
        missing = sorted(required - set(found))
        if missing:
            raise ParseError(
                line, anchor.column, f"missing {', '.join(missing)}", anchor.text
            )
        return found

    def claim_name(self, line: int, token: _Token) -> str:
        name = token.text
        if "." in name or "=" in name or "," in name:
            raise ParseError(line, token.column, "names must not contain '.', '=' or ','", name)
        if name in self.names:
            raise ParseError(line, token.column, f"duplicate name {name!r}", name)
        self.names.add(name)
        return name

    # -- directives --------------------------------------------------------

    def parse_vdd(self, line: int, head: _Token, rest: list[_Token]) -> None:
        if len(rest) != 1:
            raise ParseError(line, head.column, "vdd takes exactly one value", head.text)
        if self.vdd is not None:
            raise ParseError(line, head.column, "duplicate vdd directive", head.text)
        vdd = self.number(line, rest[0], rest[0].text, "vdd")
        if not (math.isfinite(vdd) and vdd > 0):
            raise ParseError(line, rest[0].column, "vdd must be positive", rest[0].text)
        self.vdd = vdd

    def parse_sim(self, line: int, head: _Token, rest: list[_Token]) -> None:
        if self.seen_sim:
            raise ParseError(line, head.column, "duplicate sim directive", head.text)
        self.seen_sim = True
        opts = self.options(line, rest, set(), _SIM_KEYS, head)
        sim: dict[str, Any] = {}
        for key in ("dt", "duration"):
            if key in opts:
                value, tok = opts[key]
                number = self.number(line, tok, value, key)
                if not (math.isfinite(number) and number > 0):
                    raise ParseError(line, tok.column, f"{key} must be positive", tok.text)
                sim[key] = number
        if "method" in opts:
            value, tok = opts["method"]
            if value.lower() not in ("be", "trap"):
                raise ParseError(line, tok.column, "method must be be or trap", tok.text)
            sim["method"] = value.lower()
        if "stride" in opts:
            value, tok = opts["stride"]
            sim["record_stride"] = self.count(line, tok, value, "stride")
        self.sim = sim

    def count(self, line: int, tok: _Token, value: str, key: str) -> int:
        number = self.number(line, tok, value, key)
        if not (math.isfinite(number) and number.is_integer() and number >= 1):
            raise ParseError(line, tok.column, f"{key} must be a positive integer", tok.text)
        return int(number)

    def parse_stim(self, line: int, head: _Token, rest: list[_Token]) -> None:
        if len(rest) < 2:
            raise ParseError(line, head.column, "stim needs a name and a kind", head.text)
        name_tok, kind_tok = rest[0], rest[1]
        kind = kind_tok.text.lower()
        if kind not in _STIM_KEYS:
            raise ParseError(line, kind_tok.column, "unknown stimulus kind", kind_tok.text)
        required, optional = _STIM_KEYS[kind]
        opts = self.options(line, rest[2:], required, optional | _STIM_COMMON, kind_tok)

        def num(key: str, default: float = 0.0) -> float:
            if key not in opts:
                return default
            value, tok = opts[key]
            return self.number(line, tok, value, key)

        direction = Direction.UP
        if "dir" in opts:
            value, tok = opts["dir"]
            try:
                direction = Direction(value.lower())
            except ValueError:
                raise ParseError(line, tok.column, "dir must be up or down", tok.text) from None
        common: dict[str, Any] = {"offset": num("offset"), "direction": direction}

        try:
            if kind == "pulse":
                stim = Stimulus.pulse(num("amp"), num("width"), num("t0"), **common)
            elif kind == "train":
                value, tok = opts["count"]
                stim = Stimulus.train(
                    num("amp"),
                    num("width"),
                    num("period"),
                    self.count(line, tok, value, "count"),
                    num("t0"),
                    **common,
                )
            elif kind == "spike":
                polarity = Polarity.N
                if "pol" in opts:
                    polarity = self.polarity(line, opts["pol"][1], opts["pol"][0])
                params = SegmentParams(polarity, num("ra"), num("rl"), num("cr"), num("cm"))
                stim = Stimulus.spike(num("v0"), params, num("t0"), **common)
            else:
                value, tok = opts["values"]
                values = [
                    self.number(line, tok, part, "values") for part in value.split(",")
                ]
                stim = Stimulus.from_samples(values, num("dt"), num("t0"), **common)
        except ModelError as e:
            raise ParseError(line, kind_tok.column, str(e), kind_tok.text) from None
        self.stimuli[self.claim_name(line, name_tok)] = stim

    @staticmethod
    def polarity(line: int, tok: _Token, value: str) -> Polarity:
        try:
            return Polarity(value.lower())
        except ValueError:
            raise ParseError(line, tok.column, "polarity must be n or p", tok.text) from None

    def parse_seg(self, line: int, head: _Token, rest: list[_Token]) -> None:
        if len(rest) < 2:
            raise ParseError(line, head.column, "seg needs a name and a polarity", head.text)
        name_tok, pol_tok = rest[0], rest[1]
        polarity = self.polarity(line, pol_tok, pol_tok.text)
        opts = self.options(line, rest[2:], _SEG_REQUIRED, _SEG_OPTIONAL, pol_tok)

        def num(key: str) -> float:
            value, tok = opts[key]
            return self.number(line, tok, value, key)

        try:
            params = SegmentParams(polarity, num("ra"), num("rl"), num("cr"), num("cm"))
            base = TransistorModel.default(polarity)
            kind = base.kind
            if "model" in opts:
                value, tok = opts["model"]
                try:
                    kind = SwitchKind(value.lower())
                except ValueError:
                    raise ParseError(
                        line, tok.column, "model must be hard or smooth", tok.text
                    ) from None
            model = TransistorModel(
                kind,
                num("vth") if "vth" in opts else base.v_threshold,
                num("ron") if "ron" in opts else base.r_on,
                num("roff") if "roff" in opts else base.r_off,
                num("tw") if "tw" in opts else base.transition_width,
            )
        except ModelError as e:
            raise ParseError(line, pol_tok.column, str(e), pol_tok.text) from None

        gate_value, gate_tok = opts["gate"]
        gates: list[_Token] = []
        offset = gate_tok.column + len("gate=")
        for part in gate_value.split(","):
            if not part:
                raise ParseError(line, gate_tok.column, "empty gate source", gate_tok.text)
            gates.append(_Token(part, offset))
            offset += len(part) + 1
        name = self.claim_name(line, name_tok)
        self.segments.append(_PendingSegment(name, params, model, gates, line))

    def parse_probe(self, line: int, head: _Token, rest: list[_Token]) -> None:
        if len(rest) != 1:
            raise ParseError(line, head.column, "probe takes exactly one name", head.text)
        self.probes.append((line, rest[0]))

    # -- resolution --------------------------------------------------------

    def resolve(self) -> Netlist:
        seg_names = {seg.name for seg in self.segments}
        instances: list[SegmentInstance] = []
        for seg in self.segments:
            gates: list[GateInput] = []
            for tok in seg.gates:
                if tok.text in seg_names:
                    source = GateSource(tok.text, SourceKind.MEMBRANE)
                elif tok.text in self.stimuli:
                    source = GateSource(tok.text, SourceKind.STIMULUS)
                else:
                    self.errors.append(
                        ParseError(seg.line, tok.column, "unresolved gate source", tok.text)
                    )
                    continue
                gates.append(GateInput(source, seg.model))
            if gates:
                instances.append(SegmentInstance(seg.name, seg.params, tuple(gates)))

        probes: list[str] = []
        for line, tok in self.probes:
            channel = self.probe_channel(tok.text, seg_names)
            if channel is None:
                self.errors.append(ParseError(line, tok.column, "unresolved probe", tok.text))
            elif channel not in probes:
                probes.append(channel)

        if self.errors:
            raise self.errors[0] if len(self.errors) == 1 else ParseErrors(self.errors)
        network = Network(self.vdd if self.vdd is not None else DEFAULT_VDD, tuple(instances))
        return Netlist(network, dict(self.stimuli), tuple(probes), dict(self.sim))

    def probe_channel(self, text: str, seg_names: set[str]) -> str | None:
        if text in self.stimuli:
            return text
        if text in seg_names:
            return membrane_channel(text)
        seg, _, node = text.rpartition(".")
        if seg in seg_names and node.lower() in ("vr", "vm"):
            return f"{seg}.{node.lower()}"
        return None


def _tokens(content: str) -> list[_Token]:
    return [_Token(m.group(0), m.start() + 1) for m in _TOKEN_RE.finditer(content)]


def parse(source: str) -> Netlist:
    """Parse netlist text (LF or CRLF line endings).

    Raises:
        ParseError: a single problem, positioned at its line and column.
        ParseErrors: several problems; ``errors`` lists them in source order.
    """
    parser = _Parser()
    handlers: dict[str, Callable[[int, _Token, list[_Token]], None]] = {
        "vdd": parser.parse_vdd,
        "sim": parser.parse_sim,
        "stim": parser.parse_stim,
        "seg": parser.parse_seg,
        "probe": parser.parse_probe,
    }
    for number, raw in enumerate(source.split("\n"), start=1):
        content = raw.rstrip("\r").split("#", 1)[0]
        tokens = _tokens(content)
        if not tokens:
            continue
        head = tokens[0]
        handler = handlers.get(head.text.lower())
        if handler is None:
            parser.errors.append(ParseError(number, head.column, "unknown keyword", head.text))
            continue
        try:
            handler(number, head, tokens[1:])
        except ParseError as e:
            parser.errors.append(e)
    return parser.resolve()


def _stim_line(name: str, s: Stimulus) -> str:
    parts = ["stim", name, s.kind.value]
    if s.kind is StimulusKind.PULSE:
        parts += [f"amp={format_si(s.amplitude)}", f"width={format_si(s.width)}"]
    elif s.kind is StimulusKind.TRAIN:
        parts += [
            f"amp={format_si(s.amplitude)}",
            f"width={format_si(s.width)}",
            f"period={format_si(s.period)}",
            f"count={s.count}",
        ]
    elif s.kind is StimulusKind.SPIKE:
        assert s.spike_params is not None
        p = s.spike_params
        parts += [
            f"v0={format_si(s.v0)}",
            f"ra={format_si(p.r_axial)}",
            f"rl={format_si(p.r_leak)}",
            f"cr={format_si(p.c_reservoir)}",
            f"cm={format_si(p.c_membrane)}",
        ]
        if p.polarity is Polarity.P:
            parts.append("pol=p")
    else:
        parts += [
            f"dt={format_si(s.sample_dt)}",
            f"values={','.join(format_float(v) for v in s.samples)}",
        ]
    parts.append(f"t0={format_si(s.t_start)}")
    if s.offset != 0:
        parts.append(f"offset={format_si(s.offset)}")
    if s.direction is not Direction.UP:
        parts.append(f"dir={s.direction.value}")
    return " ".join(parts)


def _seg_line(seg: SegmentInstance) -> str:
    models = {gate.model for gate in seg.gates}
    if len(models) != 1:
        raise ValueError(f"segment {seg.name!r}: gates with different transistor models")
    model = models.pop()
    p = seg.params
    parts = [
        "seg",
        seg.name,
        p.polarity.value,
        f"ra={format_si(p.r_axial)}",
        f"rl={format_si(p.r_leak)}",
        f"cr={format_si(p.c_reservoir)}",
        f"cm={format_si(p.c_membrane)}",
        f"gate={','.join(gate.source.name for gate in seg.gates)}",
    ]
    base = TransistorModel.default(p.polarity)
    if model.v_threshold != base.v_threshold:
        parts.append(f"vth={format_si(model.v_threshold)}")
    if model.r_on != base.r_on:
        parts.append(f"ron={format_si(model.r_on)}")
    if model.r_off != base.r_off:
        parts.append(f"roff={format_si(model.r_off)}")
    if model.kind is not base.kind:
        parts.append(f"model={model.kind.value}")
    if model.transition_width != base.transition_width:
        parts.append(f"tw={format_si(model.transition_width)}")
    return " ".join(parts)


def serialize(
    network: Network,
    stimuli: Mapping[str, Stimulus],
    probes: Sequence[str] = (),
    sim: Mapping[str, Any] | None = None,
) -> str:
    """Canonical netlist text; ``parse(serialize(...))`` gives back equal values.

    Raises:
        ValueError: a segment's gates use different transistor models, which
            the one-model-per-line grammar cannot express.
    """
    lines = [f"vdd {format_si(network.vdd)}"]
    if sim:
        parts = ["sim"]
        if sim.get("dt") is not None:
            parts.append(f"dt={format_si(sim['dt'])}")
        if sim.get("duration") is not None:
            parts.append(f"duration={format_si(sim['duration'])}")
        if sim.get("method") is not None:
            method = sim["method"]
            parts.append(f"method={getattr(method, 'value', method)}")
        if sim.get("record_stride") is not None:
            parts.append(f"stride={sim['record_stride']}")
        if len(parts) > 1:
            lines.append(" ".join(parts))
    lines += [_stim_line(name, s) for name, s in stimuli.items()]
    lines += [_seg_line(seg) for seg in network.segments]
    for channel in probes:
        seg, _, node = channel.rpartition(".")
        if node == "vm" and seg in network.names:
            lines.append(f"probe {seg}")
        elif node == "vr" and seg in network.names:
            lines.append(f"probe {reservoir_channel(seg)}")
        else:
            lines.append(f"probe {channel}")
    return "\n".join(lines) + "\n"
