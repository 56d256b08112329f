import csv
import json
import math
from pathlib import Path
from typing import Iterable, Optional

from pydantic import ValidationError

from pulsegen.utils.errors import SequenceSchemaError

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Map an angle in radians onto [0, 2π)."""
    wrapped = float(angle) % TWO_PI
    # -1e-17 % 2π rounds up to 2π itself
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


def reflect_into(value: float, low: float, high: float) -> float:
    """Fold a value back into [low, high] by mirroring at the edges."""
    if high <= low:
        return low
    span = high - low
    shifted = (value - low) % (2.0 * span)
    if shifted > span:
        shifted = 2.0 * span - shifted
    return low + shifted


def format_location(loc: Iterable) -> str:
    return ".".join(str(part) for part in loc)


def first_error_field(err: ValidationError) -> str:
    errors = err.errors()
    if not errors:
        return "<unknown>"
    return format_location(errors[0].get("loc", ())) or "<root>"


def save_sequence(path: Path, seq) -> None:
    """Write a PulseSequence as the JSON sequence file."""
    payload = seq.model_dump(by_alias=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def load_sequence(path: Path):
    """Read a JSON sequence file, naming the offending field on failure."""
    from pulsegen.utils.objects import PulseSequence

    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SequenceSchemaError("sequence", f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise SequenceSchemaError("sequence", f"not valid JSON ({e.msg} at line {e.lineno})")

    if not isinstance(raw, dict):
        raise SequenceSchemaError("sequence", "top level must be an object")
    for key in ("n_channels", "genes"):
        if key not in raw:
            raise SequenceSchemaError(key, "missing")

    try:
        return PulseSequence.model_validate(raw)
    except ValidationError as e:
        field = first_error_field(e)
        raise SequenceSchemaError(field, e.errors()[0].get("msg", "invalid value"))


def write_history_csv(path: Path, history) -> None:
    with open(path, "w", newline="") as out_file:
        writer = csv.writer(out_file)
        writer.writerow(["generation", "best", "mean"])
        for stats in history:
            writer.writerow([stats.generation, repr(stats.best), repr(stats.mean)])


def write_sweep_csv(path: Path, rows, with_theta: bool) -> None:
    with open(path, "w", newline="") as out_file:
        writer = csv.writer(out_file)
        header = ["j_over_delta"]
        if with_theta:
            header.append("theta")
        header += ["fidelity", "converged"]
        writer.writerow(header)
        for row in rows:
            record = [repr(row.j_over_delta)]
            if with_theta:
                record.append(repr(row.theta))
            record += [repr(row.fidelity), str(row.converged).lower()]
            writer.writerow(record)


def parse_float_list(text: Optional[str]) -> Optional[list[float]]:
    """Parse "0,0.01,0.1" or "0:0.1:11" (start:stop:count) into floats."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range '{text}' must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            return []
        if count == 1:
            return [start]
        step = (stop - start) / (count - 1)
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_angle(token: str) -> float:
    """Parse radians, allowing multiples of pi such as "pi/2" or "3pi/4"."""
    text = token.strip().lower().replace("*", "").replace(" ", "")
    if "pi" not in text:
        return float(text)
    numerator, _, denominator = text.partition("/")
    factor = numerator.replace("pi", "")
    value = (float(factor) if factor not in ("", "+", "-") else float(factor + "1")) * math.pi
    if denominator:
        value /= float(denominator)
    return value


def parse_angle_list(text: Optional[str]) -> Optional[list[float]]:
    if text is None:
        return None
    return [parse_angle(x) for x in text.split(",") if x.strip()]
