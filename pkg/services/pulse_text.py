"""
Pulse program text format.

Tokens, separated by optional whitespace, commas or dashes:

    X_1(pi)  Y_2(-pi/2)  Z_3(5pi/8)     RF rotation on spin label 1, 2, 3
    J_21(-pi/2)  J_{10,11}(pi)          coupling evolution (braces for labels > 9)
    Gz                                  gradient crusher
    delay(0.0143)  delay_12(0.0143)     free evolution in seconds, optional pair
    frame_1(pi/2)                       absorbed final z frame
    relabel(3,2,1)                      output relabeling, one label per logical spin

Angles are a float or a rational multiple of pi ("pi", "-5pi/8", "3*pi/4",
"π/2"). Spin labels start at first_label (1 by default; 0 for observer-spin
programs).
"""
import math
import re
from typing import List, Optional, Tuple

from core.exceptions import PulseSyntaxException
from services.pulse_compiler import PulseKind, PulseOp, PulseProgram
from services.utils import format_angle

_ANGLE = r"[^()]*"
_LABELS = r"(?:\{(?P<braced>[0-9,\s]+)\}|(?P<plain>[0-9]+))"
_TOKEN = re.compile(
    rf"(?P<head>[XYZJ]|delay|frame|relabel|Gz)(?:_{_LABELS})?(?:\((?P<arg>{_ANGLE})\))?"
)
_SEPARATORS = re.compile(r"[\s,\-]*")
_PI_TERM = re.compile(
    r"^(?P<sign>[+-]?)\s*(?P<num>[0-9]*\.?[0-9]*)\s*\*?\s*(?:pi|π)\s*(?:/\s*(?P<den>[0-9]*\.?[0-9]+))?$"
)


def parse_angle(text: str, position: int = 0) -> float:
    text = text.strip()
    match = _PI_TERM.match(text)
    if match:
        numerator = float(match.group("num")) if match.group("num") else 1.0
        denominator = float(match.group("den")) if match.group("den") else 1.0
        sign = -1.0 if match.group("sign") == "-" else 1.0
        return sign * numerator * math.pi / denominator
    try:
        return float(text)
    except ValueError:
        raise PulseSyntaxException("Invalid angle", position=position, angle=text)


def _split_labels(match: re.Match, head: str, position: int) -> List[int]:
    if match.group("braced") is not None:
        return [int(part) for part in match.group("braced").split(",") if part.strip()]
    plain = match.group("plain")
    if plain is None:
        return []
    if head in ("J", "delay") and len(plain) == 2:
        return [int(plain[0]), int(plain[1])]
    if head in ("J",):
        raise PulseSyntaxException("Coupling labels need braces when a label exceeds 9", position=position)
    return [int(plain)]


def parse_pulse_text(text: str, n_spins: Optional[int] = None, first_label: int = 1) -> PulseProgram:
    ops: List[PulseOp] = []
    frame: List[Tuple[int, float]] = []
    relabeling: Optional[List[int]] = None
    highest = -1

    def to_position(label: int, at: int) -> int:
        nonlocal highest
        position = label - first_label
        if position < 0:
            raise PulseSyntaxException("Spin label below first label", position=at, label=label)
        highest = max(highest, position)
        return position

    cursor = 0
    while True:
        cursor = _SEPARATORS.match(text, cursor).end()
        if cursor >= len(text):
            break
        match = _TOKEN.match(text, cursor)
        if not match:
            raise PulseSyntaxException("Unrecognized token", position=cursor, near=text[cursor:cursor + 12])
        head, arg = match.group("head"), match.group("arg")
        labels = _split_labels(match, head, cursor)
        positions = [to_position(label, cursor) for label in labels]

        if head == "Gz":
            if labels or arg is not None:
                raise PulseSyntaxException("Gz takes no arguments", position=cursor)
            ops.append(PulseOp.gradient())
        elif head == "relabel":
            if arg is None:
                raise PulseSyntaxException("relabel needs a label list", position=cursor)
            relabeling = [to_position(int(p), cursor) for p in arg.split(",") if p.strip()]
        elif arg is None:
            raise PulseSyntaxException(f"{head} needs an argument in parentheses", position=cursor)
        elif head == "delay":
            if len(positions) not in (0, 2):
                raise PulseSyntaxException("delay takes no pair or a pair of spins", position=cursor)
            ops.append(PulseOp.delay(parse_angle(arg, cursor), tuple(positions) or None))
        elif head == "J":
            if len(positions) != 2:
                raise PulseSyntaxException("Coupling needs two spin labels", position=cursor)
            ops.append(PulseOp.coupling(positions[0], positions[1], parse_angle(arg, cursor)))
        else:
            if len(positions) != 1:
                raise PulseSyntaxException(f"{head} needs one spin label", position=cursor)
            if head == "frame":
                frame.append((positions[0], parse_angle(arg, cursor)))
            else:
                ops.append(PulseOp.rf(positions[0], head.lower(), parse_angle(arg, cursor)))
        cursor = match.end()

    if n_spins is None:
        n_spins = max(highest + 1, len(relabeling) if relabeling else 0, 1)
    return PulseProgram(
        n_spins,
        tuple(ops),
        relabeling=tuple(relabeling) if relabeling is not None else None,
        final_frame=tuple(frame),
        first_label=first_label,
    )


def _labels(positions, first_label: int) -> str:
    labels = [p + first_label for p in positions]
    if all(label < 10 for label in labels):
        return "".join(str(label) for label in labels)
    return "{" + ",".join(str(label) for label in labels) + "}"


def format_pulse_op(op: PulseOp, first_label: int = 1) -> str:
    if op.kind is PulseKind.GRADIENT:
        return "Gz"
    if op.kind is PulseKind.DELAY:
        pair = f"_{_labels(op.spins, first_label)}" if op.spins else ""
        return f"delay{pair}({op.duration!r})"
    head = "J" if op.kind is PulseKind.COUPLING else op.axis.upper()
    return f"{head}_{_labels(op.spins, first_label)}({format_angle(op.angle)})"


def format_pulse_text(program: PulseProgram) -> str:
    tokens = [format_pulse_op(op, program.first_label) for op in program.ops]
    tokens.extend(
        f"frame_{_labels([spin], program.first_label)}({format_angle(angle)})"
        for spin, angle in program.final_frame
    )
    if program.relabeling is not None:
        tokens.append("relabel(" + ",".join(str(q + program.first_label) for q in program.relabeling) + ")")
    return " ".join(tokens)
