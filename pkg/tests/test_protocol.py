import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskfarm.protocol import (COLLECTOR, DISPATCHER, FARMER, SYSTEM, Address,
                               BlockAck, BlockCouple, MalformedMessage, NewRun,
                               OutputCouple, Request, Resume, Role, Sleep, SlotAck,
                               Stop, WorkCouple, decode_message, describe,
                               encode_message, pack_record_header, read_message,
                               unpack_record_header, worker)

ids = st.integers(min_value=1, max_value=2**32 - 1)
payloads = st.binary(max_size=64)
messages = st.one_of(
    st.builds(NewRun), st.builds(Stop), st.builds(Sleep), st.builds(Resume),
    st.builds(BlockCouple, ids, payloads), st.builds(WorkCouple, ids, payloads),
    st.builds(OutputCouple, ids, payloads), st.builds(BlockAck, ids),
    st.builds(Request, ids), st.builds(SlotAck, ids),
)


def test_payload_free_message_is_a_single_tag_byte():
    assert len(encode_message(NewRun())) == 1


def test_work_couple_layout():
    data = encode_message(WorkCouple(3, b"abcd"))
    tag, k, length = struct.unpack_from("<BII", data)
    assert (k, length) == (3, 4)
    assert data[9:] == b"abcd"
    assert len(data) == 13
    assert tag != encode_message(NewRun())[0]


def test_tags_are_distinct():
    samples = [NewRun(), Stop(), BlockCouple(1, b""), BlockAck(1), Sleep(), Resume(),
               WorkCouple(1, b""), Request(1), OutputCouple(1, b""), SlotAck(1)]
    assert len({encode_message(m)[0] for m in samples}) == len(samples)


@settings(max_examples=1000)
@given(messages)
def test_round_trip(msg):
    assert decode_message(encode_message(msg)) == msg


def test_slot_ack_decodes():
    assert decode_message(encode_message(SlotAck(5))) == SlotAck(5)


@pytest.mark.parametrize("data", [b"", b"\xff", b"\x00", b"\xff\x00\x00"])
def test_unknown_or_empty_rejected(data):
    with pytest.raises(MalformedMessage):
        decode_message(data)


@pytest.mark.parametrize("msg", [WorkCouple(2, b"0123456789"), OutputCouple(7, b"xy"),
                                 BlockAck(9), BlockCouple(1, b"\x00" * 5)])
def test_every_truncation_rejected(msg):
    data = encode_message(msg)
    for cut in range(len(data)):
        with pytest.raises(MalformedMessage):
            decode_message(data[:cut])


def test_trailing_bytes_rejected():
    with pytest.raises(MalformedMessage):
        decode_message(encode_message(Stop()) + b"\x00")


def test_read_message_returns_end_offset():
    buf = encode_message(Request(2)) + encode_message(Sleep())
    msg, end = read_message(buf, 0)
    assert msg == Request(2)
    assert read_message(buf, end) == (Sleep(), len(buf))


def test_zero_id_rejected():
    data = b"\x0a" + struct.pack("<I", 0)
    assert data[0] == encode_message(SlotAck(1))[0]
    with pytest.raises(MalformedMessage):
        decode_message(data)


@pytest.mark.parametrize("msg,m,n", [
    (SlotAck(5), 4, None),
    (WorkCouple(9, b""), 8, None),
    (Request(3), None, 2),
])
def test_ids_above_bound_rejected(msg, m, n):
    with pytest.raises(MalformedMessage):
        decode_message(encode_message(msg), m=m, n=n)


def test_constructing_bad_ids_is_refused():
    with pytest.raises(ValueError):
        encode_message(SlotAck(0))


@given(st.binary(max_size=24))
def test_arbitrary_bytes_never_escape_as_other_errors(data):
    try:
        msg = decode_message(data)
    except MalformedMessage:
        return
    assert encode_message(msg) == data


def test_describe_mentions_payload_size():
    text = describe(WorkCouple(3, b"abcd"))
    assert "WorkCouple" in text and "len=4" in text and "crc=" in text
    assert describe(Stop()) == "Stop"


@pytest.mark.parametrize("addr", [FARMER, DISPATCHER, COLLECTOR, SYSTEM, worker(1),
                                  worker(8191)])
def test_address_pack_round_trip(addr):
    assert Address.unpack(addr.pack()) == addr


def test_address_rendering():
    assert str(worker(3)) == "worker3"
    assert str(DISPATCHER) == "dispatcher"
    assert worker(2).role is Role.WORKER


def test_record_header():
    raw = pack_record_header(2**40 + 5, worker(4), COLLECTOR)
    assert len(raw) == 12
    assert unpack_record_header(raw, 0) == (2**40 + 5, worker(4), COLLECTOR, 12)
