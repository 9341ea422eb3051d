"""Variant names such as ``2ndConv_Cyc_Inp_Ratio_12_SamplePad`` and their parsed form.

Grammar::

    name    := prefix "_" inputs ["_Ratio_" digits2] "_" padding
    prefix  := "Scratch" | <ordinal> ("BN" | "Conv")
    inputs  := segment ("_" segment)*     segment in Cyc | Ins | Inp | Exp
    padding := "SamplePad" | "ZeroPad"

``Inp`` is accepted as a spelling of ``Ins`` and kept so names round-trip.
The ratio part is required exactly when a phase segment is present.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..audio_core import PhaseRatio
from ..errors import ComboMismatch, InvalidRatio, ParseError
from ..pipeline import Padding, SegmentKind
from ..transfer import BranchCombo, FreezePolicy, StartKind

_SEGMENT_TOKENS = {"Cyc": SegmentKind.CYCLE, "Ins": SegmentKind.INSPIRATION,
                   "Inp": SegmentKind.INSPIRATION, "Exp": SegmentKind.EXPIRATION}
_PREFIX = re.compile(r"^(\d)(st|nd|rd|th)(BN|Conv)$")


def ordinal(n: int) -> str:
    suffix = {1: "st", 2: "nd", 3: "rd"}.get(n if n < 20 else n % 10, "th")
    return f"{n}{suffix}"


@dataclass(frozen=True)
class Variant:
    combo: BranchCombo
    padding: Padding
    ratio: PhaseRatio | None = None
    policy: FreezePolicy | None = None  # None = trained from scratch
    ins_token: str = "Ins"

    def __post_init__(self):
        has_phase = any(s is not SegmentKind.CYCLE for s in self.combo.segments)
        if has_phase and self.ratio is None:
            raise ParseError("phase inputs need a split ratio")
        if not has_phase and self.ratio is not None:
            raise ParseError("a split ratio needs a phase input")
        if self.ins_token not in ("Ins", "Inp"):
            raise ParseError(f"unknown inspiration token {self.ins_token!r}")

    @property
    def scratch(self) -> bool:
        return self.policy is None

    @property
    def segments(self) -> tuple:
        return self.combo.segments

    def format(self) -> str:
        if self.policy is None:
            parts = ["Scratch"]
        else:
            parts = [f"{ordinal(self.policy.start_block)}{self.policy.start_kind.value}"]
        names = {SegmentKind.CYCLE: "Cyc", SegmentKind.INSPIRATION: self.ins_token, SegmentKind.EXPIRATION: "Exp"}
        parts += [names[s] for s in self.combo.segments]
        if self.ratio is not None:
            parts += ["Ratio", self.ratio.token]
        parts.append(Padding(self.padding).value)
        return "_".join(parts)

    def __str__(self):
        return self.format()


def parse_variant_name(name: str) -> Variant:
    tokens = str(name).strip().split("_")
    if len(tokens) < 3:
        raise ParseError(f"variant name {name!r} is too short")
    prefix, body, pad_token = tokens[0], tokens[1:-1], tokens[-1]

    if prefix == "Scratch":
        policy = None
    else:
        m = _PREFIX.match(prefix)
        if not m or ordinal(int(m.group(1))) != m.group(1) + m.group(2):
            raise ParseError(f"unknown prefix {prefix!r}")
        try:
            policy = FreezePolicy(int(m.group(1)), StartKind(m.group(3)))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc

    try:
        padding = Padding(pad_token)
    except ValueError:
        raise ParseError(f"unknown padding {pad_token!r}") from None

    ratio = None
    if "Ratio" in body:
        at = body.index("Ratio")
        if at != len(body) - 2:
            raise ParseError(f"malformed ratio part in {name!r}")
        try:
            ratio = PhaseRatio.parse(body[at + 1])
        except InvalidRatio as exc:
            raise ParseError(str(exc)) from exc
        body = body[:at]

    if not body:
        raise ParseError(f"no input segments in {name!r}")
    unknown = [t for t in body if t not in _SEGMENT_TOKENS]
    if unknown:
        raise ParseError(f"unknown segment token(s) {unknown} in {name!r}")
    ins_tokens = {t for t in body if t in ("Ins", "Inp")}
    if len(ins_tokens) > 1:
        raise ParseError("mixed Ins/Inp spellings")
    try:
        combo = BranchCombo.from_segments([_SEGMENT_TOKENS[t] for t in body])
    except ComboMismatch as exc:
        raise ParseError(str(exc)) from exc
    return Variant(combo, padding, ratio, policy, ins_tokens.pop() if ins_tokens else "Ins")
