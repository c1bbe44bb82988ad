"""Farm message vocabulary and its byte encoding.

Every message exchanged among the Farmer, Dispatcher, Workers and Collector
is one of the frozen dataclasses below. Block-ids and worker-ids are plain
1-based integers (blocks ``1..m``, workers ``1..n``).

Wire layout of an encoded message::

    tag:u8 [id:u32le] [length:u32le payload]

Only the fields a variant carries are present. Trace records prepend an
8-byte little-endian virtual timestamp and two 2-byte addresses.
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass
from typing import Optional, Union

from .errors import FarmError


class MalformedMessage(FarmError, ValueError):
    """Bytes that do not decode to a valid message."""


@dataclass(frozen=True)
class NewRun:
    pass


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class BlockCouple:
    k: int
    block: bytes


@dataclass(frozen=True)
class BlockAck:
    k: int


@dataclass(frozen=True)
class Sleep:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(frozen=True)
class WorkCouple:
    k: int
    block: bytes


@dataclass(frozen=True)
class Request:
    j: int


@dataclass(frozen=True)
class OutputCouple:
    k: int
    output: bytes


@dataclass(frozen=True)
class SlotAck:
    k: int


Message = Union[
    NewRun, Stop, BlockCouple, BlockAck, Sleep, Resume,
    WorkCouple, Request, OutputCouple, SlotAck,
]

TAGS = {
    NewRun: 0x01,
    Stop: 0x02,
    BlockCouple: 0x03,
    BlockAck: 0x04,
    Sleep: 0x05,
    Resume: 0x06,
    WorkCouple: 0x07,
    Request: 0x08,
    OutputCouple: 0x09,
    SlotAck: 0x0A,
}
_BY_TAG = {tag: cls for cls, tag in TAGS.items()}

# which id field each variant carries, and whether it bounds against m or n
_ID_FIELD = {
    BlockCouple: ("k", "m"),
    BlockAck: ("k", "m"),
    WorkCouple: ("k", "m"),
    OutputCouple: ("k", "m"),
    SlotAck: ("k", "m"),
    Request: ("j", "n"),
}
_PAYLOAD_FIELD = {BlockCouple: "block", WorkCouple: "block", OutputCouple: "output"}

_U32 = struct.Struct("<I")
MAX_ID = 0xFFFFFFFF


def encode_message(msg: Message) -> bytes:
    cls = type(msg)
    try:
        parts = [bytes([TAGS[cls]])]
    except KeyError:
        raise TypeError(f"not a farm message: {msg!r}") from None
    if cls in _ID_FIELD:
        value = getattr(msg, _ID_FIELD[cls][0])
        if not 1 <= value <= MAX_ID:
            raise ValueError(f"id {value} not encodable")
        parts.append(_U32.pack(value))
    if cls in _PAYLOAD_FIELD:
        payload = bytes(getattr(msg, _PAYLOAD_FIELD[cls]))
        parts.append(_U32.pack(len(payload)))
        parts.append(payload)
    return b"".join(parts)


def read_message(buf: bytes, offset: int = 0, m: Optional[int] = None,
                 n: Optional[int] = None) -> tuple[Message, int]:
    """Decode one message starting at ``offset``; return it and the end offset.

    ``m`` and ``n``, when given, bound block-ids and worker-ids.
    """
    if offset >= len(buf):
        raise MalformedMessage("empty message")
    tag = buf[offset]
    cls = _BY_TAG.get(tag)
    if cls is None:
        raise MalformedMessage(f"unknown tag 0x{tag:02x}")
    pos = offset + 1
    fields = {}
    if cls in _ID_FIELD:
        name, bound_name = _ID_FIELD[cls]
        if pos + 4 > len(buf):
            raise MalformedMessage(f"truncated id in {cls.__name__}")
        (value,) = _U32.unpack_from(buf, pos)
        pos += 4
        bound = m if bound_name == "m" else n
        if value < 1 or (bound is not None and value > bound):
            raise MalformedMessage(f"{name}={value} out of range in {cls.__name__}")
        fields[name] = value
    if cls in _PAYLOAD_FIELD:
        if pos + 4 > len(buf):
            raise MalformedMessage(f"truncated length in {cls.__name__}")
        (length,) = _U32.unpack_from(buf, pos)
        pos += 4
        if pos + length > len(buf):
            raise MalformedMessage(
                f"{cls.__name__} payload wants {length} bytes, {len(buf) - pos} left")
        fields[_PAYLOAD_FIELD[cls]] = bytes(buf[pos:pos + length])
        pos += length
    return cls(**fields), pos


def decode_message(data: bytes, m: Optional[int] = None, n: Optional[int] = None) -> Message:
    msg, end = read_message(data, 0, m, n)
    if end != len(data):
        raise MalformedMessage(f"{len(data) - end} trailing bytes")
    return msg


def describe(msg: Message) -> str:
    """One-token rendering used by the text trace."""
    name = type(msg).__name__
    if isinstance(msg, (BlockCouple, WorkCouple)):
        return f"{name}(k={msg.k}, {_payload_summary(msg.block)})"
    if isinstance(msg, OutputCouple):
        return f"{name}(k={msg.k}, {_payload_summary(msg.output)})"
    if isinstance(msg, (BlockAck, SlotAck)):
        return f"{name}(k={msg.k})"
    if isinstance(msg, Request):
        return f"{name}(j={msg.j})"
    return name


def _payload_summary(payload: bytes) -> str:
    return f"len={len(payload)} crc={zlib.crc32(payload):08x}"


# -- addresses --------------------------------------------------------------

class Role(enum.IntEnum):
    FARMER = 0
    DISPATCHER = 1
    WORKER = 2
    COLLECTOR = 3
    SYSTEM = 7


_INDEX_BITS = 13
_INDEX_MASK = (1 << _INDEX_BITS) - 1


@dataclass(frozen=True, order=True)
class Address:
    role: Role
    index: int = 0

    def pack(self) -> int:
        if not 0 <= self.index <= _INDEX_MASK:
            raise ValueError(f"address index {self.index} does not fit 13 bits")
        return (int(self.role) << _INDEX_BITS) | self.index

    @classmethod
    def unpack(cls, raw: int) -> "Address":
        try:
            role = Role(raw >> _INDEX_BITS)
        except ValueError:
            raise MalformedMessage(f"unknown role in address 0x{raw:04x}") from None
        return cls(role, raw & _INDEX_MASK)

    def __str__(self):
        if self.role is Role.WORKER:
            return f"worker{self.index}"
        return self.role.name.lower()


FARMER = Address(Role.FARMER)
DISPATCHER = Address(Role.DISPATCHER)
COLLECTOR = Address(Role.COLLECTOR)
SYSTEM = Address(Role.SYSTEM)


def worker(j: int) -> Address:
    return Address(Role.WORKER, j)


RECORD_HEADER = struct.Struct("<QHH")


def pack_record_header(time: int, sender: Address, receiver: Address) -> bytes:
    return RECORD_HEADER.pack(time, sender.pack(), receiver.pack())


def unpack_record_header(buf: bytes, offset: int) -> tuple[int, Address, Address, int]:
    if offset + RECORD_HEADER.size > len(buf):
        raise MalformedMessage("truncated record header")
    time, s, r = RECORD_HEADER.unpack_from(buf, offset)
    return time, Address.unpack(s), Address.unpack(r), offset + RECORD_HEADER.size
