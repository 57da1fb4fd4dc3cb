import io
import json

import numpy as np
import pytest

from feedpilot.errors import ParseError, ValidationError
from feedpilot.records import BoundingBox, FrameRecord, TruthRecord
from feedpilot.streams import (
    parse_frame_record,
    parse_truth_record,
    read_stream,
    read_truth,
    resolve_ripple_pair,
    serialize_frame_record,
    serialize_truth_record,
)


def test_parse_basic_record():
    line = '{"frame":0,"nutriments":[[10,10,4,6]],"ripples":[[100,100,20,20],[200,100,20,20]]}'
    rec = parse_frame_record(line)
    assert rec.frame == 0
    assert len(rec.nutriments) == 1
    assert rec.nutriments[0] == BoundingBox(10, 10, 4, 6)
    assert len(rec.ripples) == 2
    assert rec.geometry_ready


def test_parse_empty_lists():
    rec = parse_frame_record('{"frame":3,"nutriments":[],"ripples":[]}')
    assert rec.frame == 3
    assert rec.nutriments == ()
    assert rec.ripples == ()
    assert not rec.geometry_ready


def test_parse_negative_width_rejected():
    with pytest.raises(ValidationError):
        parse_frame_record('{"frame":1,"nutriments":[[1,1,-2,3]],"ripples":[]}')


def test_parse_non_finite_rejected():
    with pytest.raises(ValidationError):
        parse_frame_record('{"frame":1,"nutriments":[[1,NaN,2,3]],"ripples":[]}')


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        '{"frame":0,"nutriments":[[1,2,3]],"ripples":[]}',
        '{"frame":0,"ripples":[]}',
        '{"frame":"zero","nutriments":[],"ripples":[]}',
        "[1,2,3]",
    ],
)
def test_parse_malformed_raises_parse_error(line):
    with pytest.raises(ParseError) as err:
        parse_frame_record(line, line_no=7)
    assert "line 7" in str(err.value)


def test_serialize_round_trip_exact():
    rng = np.random.default_rng(5)
    for _ in range(50):
        boxes = tuple(
            BoundingBox(*rng.uniform(0, 2000, 2), *rng.uniform(0, 50, 2)) for _ in range(5)
        )
        rec = FrameRecord(frame=int(rng.integers(0, 10**6)), nutriments=boxes[:3], ripples=boxes[3:])
        again = parse_frame_record(serialize_frame_record(rec))
        assert again == rec
        # a second round trip is byte-stable
        assert serialize_frame_record(again) == serialize_frame_record(rec)


def test_read_stream_requires_increasing_frames():
    lines = [
        '{"frame":0,"nutriments":[],"ripples":[]}',
        '{"frame":2,"nutriments":[],"ripples":[]}',
        '{"frame":2,"nutriments":[],"ripples":[]}',
    ]
    with pytest.raises(ValidationError):
        list(read_stream(lines))


def test_read_stream_skips_blank_lines():
    lines = ['{"frame":0,"nutriments":[],"ripples":[]}', "", "   \n"]
    assert [r.frame for r in read_stream(lines)] == [0]


def test_resolve_orders_by_cx_then_cy():
    a = BoundingBox(200, 100, 20, 20)
    b = BoundingBox(100, 100, 20, 20)
    pair = resolve_ripple_pair(FrameRecord(frame=0, ripples=(a, b)))
    assert pair.r1.cx == 100 and pair.r2.cx == 200
    # same-cx tie broken by cy
    c = BoundingBox(100, 50, 10, 10)
    pair2 = resolve_ripple_pair(FrameRecord(frame=0, ripples=(b, c)))
    assert pair2.r1.cy == 50


def test_resolve_is_order_independent():
    rng = np.random.default_rng(11)
    for _ in range(30):
        boxes = [BoundingBox(*rng.uniform(0, 500, 2), *rng.uniform(1, 40, 2)) for _ in range(2)]
        p1 = resolve_ripple_pair(FrameRecord(frame=0, ripples=tuple(boxes)))
        p2 = resolve_ripple_pair(FrameRecord(frame=0, ripples=tuple(reversed(boxes))))
        assert p1 == p2


def test_resolve_carry_forward_and_skip():
    valid = resolve_ripple_pair(
        FrameRecord(frame=0, ripples=(BoundingBox(0, 0, 2, 2), BoundingBox(9, 0, 2, 2)))
    )
    empty = FrameRecord(frame=1, ripples=())
    assert resolve_ripple_pair(empty, valid) is valid
    assert resolve_ripple_pair(empty, None) is None
    three = FrameRecord(frame=2, ripples=(BoundingBox(0, 0, 1, 1),) * 3)
    assert resolve_ripple_pair(three, valid) is valid


def test_truth_round_trip_and_validation():
    truth = TruthRecord(frame=4, next_positions=((1.5, 2.25), (3.0, 4.0)), crossings=2)
    again = parse_truth_record(serialize_truth_record(truth))
    assert again == truth
    with pytest.raises(ParseError):
        parse_truth_record('{"frame":0,"next":[[1,2]]}')
    with pytest.raises(ValidationError):
        TruthRecord(frame=0, next_positions=(), crossings=-1)


def test_read_truth_rejects_duplicates():
    line = serialize_truth_record(TruthRecord(frame=0, next_positions=(), crossings=0))
    with pytest.raises(ValidationError):
        read_truth(io.StringIO(line + "\n" + line + "\n"))


def test_serialized_floats_survive_json():
    # full-precision floats written by the serializer parse back bit-identical
    value = 123.45678901234567
    rec = FrameRecord(frame=0, nutriments=(BoundingBox(value, 1, 1, 1),))
    parsed = json.loads(serialize_frame_record(rec))
    assert parsed["nutriments"][0][0] == value
