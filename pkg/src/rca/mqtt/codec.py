"""MQTT 3.1.1 wire codec for the QoS0 subset.

Packet types: CONNECT/CONNACK, PUBLISH (QoS0), SUBSCRIBE/SUBACK,
UNSUBSCRIBE/UNSUBACK, PINGREQ/PINGRESP, DISCONNECT. Bit-exact with the
3.1.1 framing so third-party clients interoperate.

decode() returns None while a packet is incomplete, raises
ProtocolViolation for anything malformed, and never aborts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Union

MAX_PACKET_BYTES = 64 * 1024

CONNECT = 1
CONNACK = 2
PUBLISH = 3
SUBSCRIBE = 8
SUBACK = 9
UNSUBSCRIBE = 10
UNSUBACK = 11
PINGREQ = 12
PINGRESP = 13
DISCONNECT = 14


class ProtocolViolation(Exception):
    pass


@dataclass
class Connect:
    client_id: str
    keepalive: int = 0
    clean_session: bool = True
    protocol_level: int = 4
    will_topic: Optional[str] = None
    will_message: bytes = b""
    will_qos: int = 0
    will_retain: bool = False
    username: Optional[str] = None
    password: Optional[bytes] = None


@dataclass
class ConnAck:
    return_code: int
    session_present: bool = False


@dataclass
class Publish:
    topic: str
    payload: bytes
    dup: bool = False
    retain: bool = False


@dataclass
class Subscribe:
    packet_id: int
    filters: list[tuple[str, int]] = field(default_factory=list)


@dataclass
class SubAck:
    packet_id: int
    return_codes: list[int] = field(default_factory=list)


@dataclass
class Unsubscribe:
    packet_id: int
    filters: list[str] = field(default_factory=list)


@dataclass
class UnsubAck:
    packet_id: int


@dataclass
class PingReq:
    pass


@dataclass
class PingResp:
    pass


@dataclass
class Disconnect:
    pass


Packet = Union[Connect, ConnAck, Publish, Subscribe, SubAck, Unsubscribe,
               UnsubAck, PingReq, PingResp, Disconnect]


def _encode_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolViolation("string too long")
    return struct.pack(">H", len(raw)) + raw


def _encode_bytes(b: bytes) -> bytes:
    if len(b) > 0xFFFF:
        raise ProtocolViolation("bytes too long")
    return struct.pack(">H", len(b)) + b


def _encode_varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n % 128
        n //= 128
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise ProtocolViolation("truncated packet body")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolViolation("invalid UTF-8 string") from exc

    def blob(self) -> bytes:
        return self.take(self.u16())


def encode(pkt: Packet) -> bytes:
    if isinstance(pkt, Connect):
        flags = 0
        if pkt.clean_session:
            flags |= 0x02
        payload = _encode_string(pkt.client_id)
        if pkt.will_topic is not None:
            flags |= 0x04 | (pkt.will_qos << 3)
            if pkt.will_retain:
                flags |= 0x20
            payload += _encode_string(pkt.will_topic) + _encode_bytes(pkt.will_message)
        if pkt.username is not None:
            flags |= 0x80
            payload += _encode_string(pkt.username)
        if pkt.password is not None:
            flags |= 0x40
            payload += _encode_bytes(pkt.password)
        body = (_encode_string("MQTT") + bytes([pkt.protocol_level, flags])
                + struct.pack(">H", pkt.keepalive) + payload)
        return _frame(CONNECT, 0, body)
    if isinstance(pkt, ConnAck):
        return _frame(CONNACK, 0, bytes([1 if pkt.session_present else 0, pkt.return_code]))
    if isinstance(pkt, Publish):
        flags = (0x08 if pkt.dup else 0) | (0x01 if pkt.retain else 0)
        return _frame(PUBLISH, flags, _encode_string(pkt.topic) + pkt.payload)
    if isinstance(pkt, Subscribe):
        body = struct.pack(">H", pkt.packet_id)
        for filt, qos in pkt.filters:
            body += _encode_string(filt) + bytes([qos])
        return _frame(SUBSCRIBE, 0x02, body)
    if isinstance(pkt, SubAck):
        return _frame(SUBACK, 0, struct.pack(">H", pkt.packet_id) + bytes(pkt.return_codes))
    if isinstance(pkt, Unsubscribe):
        body = struct.pack(">H", pkt.packet_id)
        for filt in pkt.filters:
            body += _encode_string(filt)
        return _frame(UNSUBSCRIBE, 0x02, body)
    if isinstance(pkt, UnsubAck):
        return _frame(UNSUBACK, 0, struct.pack(">H", pkt.packet_id))
    if isinstance(pkt, PingReq):
        return _frame(PINGREQ, 0, b"")
    if isinstance(pkt, PingResp):
        return _frame(PINGRESP, 0, b"")
    if isinstance(pkt, Disconnect):
        return _frame(DISCONNECT, 0, b"")
    raise TypeError("not a packet: %r" % (pkt,))


def _frame(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + _encode_varint(len(body)) + body


def decode(buf: bytes) -> Optional[tuple[Packet, int]]:
    """Decode one packet from the head of buf.

    Returns (packet, bytes_consumed), or None if more bytes are needed.
    """
    if len(buf) < 2:
        return None
    first = buf[0]
    ptype, flags = first >> 4, first & 0x0F

    # Remaining-length varint, at most 4 bytes.
    length = 0
    mult = 1
    pos = 1
    while True:
        if pos >= len(buf):
            return None
        byte = buf[pos]
        length += (byte & 0x7F) * mult
        pos += 1
        if not byte & 0x80:
            break
        mult *= 128
        if pos > 4:
            raise ProtocolViolation("remaining length too long")
    if length > MAX_PACKET_BYTES:
        raise ProtocolViolation("packet exceeds %d bytes" % MAX_PACKET_BYTES)
    if len(buf) - pos < length:
        return None
    body = _Reader(bytes(buf[pos:pos + length]))
    pkt = _decode_body(ptype, flags, body)
    if body.remaining():
        raise ProtocolViolation("trailing bytes in packet body")
    return pkt, pos + length


def _decode_body(ptype: int, flags: int, r: _Reader) -> Packet:
    if ptype == CONNECT:
        return _decode_connect(flags, r)
    if ptype == CONNACK:
        if flags != 0:
            raise ProtocolViolation("bad CONNACK flags")
        ack = r.u8()
        if ack not in (0, 1):
            raise ProtocolViolation("bad CONNACK ack flags")
        return ConnAck(session_present=bool(ack), return_code=r.u8())
    if ptype == PUBLISH:
        qos = (flags >> 1) & 0x03
        if qos:
            raise ProtocolViolation("QoS %d unsupported" % qos)
        topic = r.string()
        return Publish(topic=topic, payload=r.take(r.remaining()),
                       dup=bool(flags & 0x08), retain=bool(flags & 0x01))
    if ptype == SUBSCRIBE:
        if flags != 0x02:
            raise ProtocolViolation("bad SUBSCRIBE flags")
        packet_id = r.u16()
        filters = []
        while r.remaining():
            filters.append((r.string(), r.u8()))
        if not filters:
            raise ProtocolViolation("empty SUBSCRIBE")
        return Subscribe(packet_id=packet_id, filters=filters)
    if ptype == SUBACK:
        if flags != 0:
            raise ProtocolViolation("bad SUBACK flags")
        packet_id = r.u16()
        codes = list(r.take(r.remaining()))
        if not codes:
            raise ProtocolViolation("empty SUBACK")
        return SubAck(packet_id=packet_id, return_codes=codes)
    if ptype == UNSUBSCRIBE:
        if flags != 0x02:
            raise ProtocolViolation("bad UNSUBSCRIBE flags")
        packet_id = r.u16()
        filters = []
        while r.remaining():
            filters.append(r.string())
        if not filters:
            raise ProtocolViolation("empty UNSUBSCRIBE")
        return Unsubscribe(packet_id=packet_id, filters=filters)
    if ptype == UNSUBACK:
        if flags != 0:
            raise ProtocolViolation("bad UNSUBACK flags")
        return UnsubAck(packet_id=r.u16())
    if ptype in (PINGREQ, PINGRESP, DISCONNECT):
        if flags != 0:
            raise ProtocolViolation("bad flags for type %d" % ptype)
        return {PINGREQ: PingReq, PINGRESP: PingResp, DISCONNECT: Disconnect}[ptype]()
    raise ProtocolViolation("unknown packet type %d" % ptype)


def _decode_connect(flags: int, r: _Reader) -> Connect:
    if flags != 0:
        raise ProtocolViolation("bad CONNECT fixed-header flags")
    if r.string() != "MQTT":
        raise ProtocolViolation("bad protocol name")
    level = r.u8()
    cflags = r.u8()
    if cflags & 0x01:
        raise ProtocolViolation("reserved connect flag set")
    keepalive = r.u16()
    client_id = r.string()
    pkt = Connect(client_id=client_id, keepalive=keepalive,
                  clean_session=bool(cflags & 0x02), protocol_level=level)
    if cflags & 0x04:
        pkt.will_qos = (cflags >> 3) & 0x03
        pkt.will_retain = bool(cflags & 0x20)
        if pkt.will_qos > 2:
            raise ProtocolViolation("bad will qos")
        pkt.will_topic = r.string()
        pkt.will_message = r.blob()
    elif cflags & 0x38:
        raise ProtocolViolation("will qos/retain without will flag")
    if cflags & 0x80:
        pkt.username = r.string()
    if cflags & 0x40:
        pkt.password = r.blob()
    return pkt
