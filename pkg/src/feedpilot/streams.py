"""Line-delimited detection streams and the ground-truth sidecar format.

One frame per line, UTF-8 JSON objects:

    {"frame": 0, "nutriments": [[cx,cy,w,h], ...], "ripples": [[cx,cy,w,h], ...]}

Ground-truth sidecars use the same framing with ``next`` (array of [x, y]
aligned to the frame's nutriments) and ``crossings`` (integer).
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Iterator

from .errors import ParseError, ValidationError
from .geometry import RipplePair, make_ripple_pair
from .records import BoundingBox, FrameRecord, TruthRecord


def _where(line_no: int | None) -> str:
    return f" (line {line_no})" if line_no is not None else ""


def _load_json(line: str, line_no: int | None) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON{_where(line_no)}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"record must be a JSON object{_where(line_no)}")
    return obj


def _frame_index(obj: dict, line_no: int | None) -> int:
    if "frame" not in obj:
        raise ParseError(f"record missing 'frame'{_where(line_no)}")
    frame = obj["frame"]
    if isinstance(frame, bool) or not isinstance(frame, int):
        raise ParseError(f"'frame' must be an integer{_where(line_no)}, got {frame!r}")
    return frame


def _boxes(obj: dict, key: str, line_no: int | None) -> tuple[BoundingBox, ...]:
    if key not in obj:
        raise ParseError(f"record missing '{key}'{_where(line_no)}")
    raw = obj[key]
    if not isinstance(raw, list):
        raise ParseError(f"'{key}' must be an array{_where(line_no)}")
    boxes = []
    for entry in raw:
        if not isinstance(entry, list) or len(entry) != 4:
            raise ParseError(f"each '{key}' entry must be [cx,cy,w,h]{_where(line_no)}")
        try:
            values = [float(v) for v in entry]
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric value in '{key}'{_where(line_no)}") from exc
        boxes.append(BoundingBox(*values))
    return tuple(boxes)


def parse_frame_record(line: str, line_no: int | None = None) -> FrameRecord:
    """Parse one detection-stream line into a validated FrameRecord."""
    obj = _load_json(line, line_no)
    return FrameRecord(
        frame=_frame_index(obj, line_no),
        nutriments=_boxes(obj, "nutriments", line_no),
        ripples=_boxes(obj, "ripples", line_no),
    )


def serialize_frame_record(record: FrameRecord) -> str:
    """Single-line JSON for a record; floats keep full round-trip precision."""
    return json.dumps(
        {
            "frame": record.frame,
            "nutriments": [b.as_list() for b in record.nutriments],
            "ripples": [b.as_list() for b in record.ripples],
        },
        separators=(",", ":"),
    )


def parse_truth_record(line: str, line_no: int | None = None) -> TruthRecord:
    """Parse one ground-truth sidecar line."""
    obj = _load_json(line, line_no)
    frame = _frame_index(obj, line_no)
    if "next" not in obj or "crossings" not in obj:
        raise ParseError(f"truth record missing 'next' or 'crossings'{_where(line_no)}")
    raw_next = obj["next"]
    if not isinstance(raw_next, list):
        raise ParseError(f"'next' must be an array{_where(line_no)}")
    positions = []
    for entry in raw_next:
        if not isinstance(entry, list) or len(entry) != 2:
            raise ParseError(f"each 'next' entry must be [x,y]{_where(line_no)}")
        positions.append((float(entry[0]), float(entry[1])))
    crossings = obj["crossings"]
    if isinstance(crossings, bool) or not isinstance(crossings, int):
        raise ParseError(f"'crossings' must be an integer{_where(line_no)}")
    return TruthRecord(frame=frame, next_positions=tuple(positions), crossings=crossings)


def serialize_truth_record(truth: TruthRecord) -> str:
    return json.dumps(
        {
            "frame": truth.frame,
            "next": [[x, y] for x, y in truth.next_positions],
            "crossings": truth.crossings,
        },
        separators=(",", ":"),
    )


def _lines(source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def read_stream(source) -> Iterator[FrameRecord]:
    """Iterate FrameRecords from a path or line iterable.

    Frame indices must strictly increase; blank lines are skipped.
    """
    last = None
    for line_no, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        record = parse_frame_record(line, line_no)
        if last is not None and record.frame <= last:
            raise ValidationError(
                f"frame indices must strictly increase (line {line_no}): "
                f"{record.frame} after {last}"
            )
        last = record.frame
        yield record


def read_truth(source) -> dict[int, TruthRecord]:
    """Load a ground-truth sidecar keyed by frame index."""
    out: dict[int, TruthRecord] = {}
    for line_no, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        truth = parse_truth_record(line, line_no)
        if truth.frame in out:
            raise ValidationError(f"duplicate truth frame {truth.frame} (line {line_no})")
        out[truth.frame] = truth
    return out


def write_stream(path, records: Iterable[FrameRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(serialize_frame_record(record) + "\n")


def write_truth(path, truths: Iterable[TruthRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for truth in truths:
            fh.write(serialize_truth_record(truth) + "\n")


def resolve_ripple_pair(
    record: FrameRecord, last_valid: RipplePair | None = None
) -> RipplePair | None:
    """Pick the frame's ripple pair, or carry the last valid one.

    With exactly two ripple boxes, R1 is the one with smaller cx (ties broken
    by smaller cy).  Any other count falls back to ``last_valid``; ``None``
    means the frame must be skipped for geometry.
    """
    if len(record.ripples) == 2:
        a, b = record.ripples
        if (b.cx, b.cy) < (a.cx, a.cy):
            a, b = b, a
        return make_ripple_pair(a, b)
    return last_valid
