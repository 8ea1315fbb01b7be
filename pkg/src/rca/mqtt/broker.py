"""Asyncio QoS0 MQTT broker.

One reader and one writer task per connection; the subscription table lives
on the event loop so it needs no locks. A slow subscriber never blocks the
rest: each session has a bounded outbound queue and overflow closes only
that session.
"""

from __future__ import annotations

import asyncio
import logging
import threading
from typing import Optional

from . import codec
from .topics import BadTopic, parse_filter, parse_topic, topic_matches

log = logging.getLogger("rca.broker")

MAX_CLIENT_ID_BYTES = 64
OUTBOUND_QUEUE_LIMIT = 1024
CONNECT_TIMEOUT_S = 10.0


class _Session:
    def __init__(self, client_id: str, keepalive: int, writer: asyncio.StreamWriter):
        self.client_id = client_id
        self.keepalive = keepalive
        self.writer = writer
        self.filters: list[list[str]] = []
        self.exact_keys: set[str] = set()  # index keys for wildcard-free filters
        self.outbound: asyncio.Queue = asyncio.Queue(OUTBOUND_QUEUE_LIMIT)
        self.last_seen = 0.0
        self.closed = asyncio.Event()

    def close(self):
        self.closed.set()


class Broker:
    def __init__(self, host: str = "127.0.0.1", port: int = 1883):
        self.host = host
        self.port = port
        self.sessions: dict[str, _Session] = {}
        # Fan-out index: wildcard-free filters resolve by exact topic string;
        # only sessions holding wildcard filters need a per-message match.
        self._exact: dict[str, set[_Session]] = {}
        self._wildcard: set[_Session] = set()
        self._server: Optional[asyncio.AbstractServer] = None
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._expiry_task: Optional[asyncio.Task] = None
        self.delivered = 0
        self.received = 0

    @property
    def bound_port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def start(self):
        self._loop = asyncio.get_running_loop()
        self._server = await asyncio.start_server(self._handle_conn, self.host, self.port)
        self._expiry_task = asyncio.ensure_future(self._expiry_loop())
        log.info("broker listening on %s:%d", self.host, self.bound_port)

    async def stop(self):
        if self._expiry_task:
            self._expiry_task.cancel()
        if self._server:
            self._server.close()
            await self._server.wait_closed()
        for session in list(self.sessions.values()):
            session.close()

    async def _expiry_loop(self):
        while True:
            await asyncio.sleep(1.0)
            self.expire_idle_sessions(self._loop.time())

    def expire_idle_sessions(self, now: float) -> list[str]:
        """Close sessions silent for > 1.5x keep-alive. keepalive 0 disables."""
        expired = []
        for session in list(self.sessions.values()):
            if session.keepalive and now - session.last_seen > 1.5 * session.keepalive:
                expired.append(session.client_id)
                self._drop_session(session)
        return expired

    def _drop_session(self, session: _Session):
        if self.sessions.get(session.client_id) is session:
            del self.sessions[session.client_id]
        self._deindex(session)
        session.close()

    def _deindex(self, session: _Session):
        for key in session.exact_keys:
            bucket = self._exact.get(key)
            if bucket is not None:
                bucket.discard(session)
                if not bucket:
                    del self._exact[key]
        session.exact_keys.clear()
        self._wildcard.discard(session)

    def _reindex(self, session: _Session):
        self._deindex(session)
        for segments in session.filters:
            if any(seg in ("+", "#") for seg in segments):
                self._wildcard.add(session)
            else:
                key = "/".join(segments)
                self._exact.setdefault(key, set()).add(session)
                session.exact_keys.add(key)

    async def _handle_conn(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        session: Optional[_Session] = None
        writer_task: Optional[asyncio.Task] = None
        try:
            pkt = await asyncio.wait_for(self._read_packet(reader), CONNECT_TIMEOUT_S)
            if not isinstance(pkt, codec.Connect):
                return
            if (pkt.protocol_level != 4 or not pkt.client_id
                    or len(pkt.client_id.encode()) > MAX_CLIENT_ID_BYTES):
                writer.write(codec.encode(codec.ConnAck(return_code=1)))
                await writer.drain()
                return
            old = self.sessions.get(pkt.client_id)
            if old is not None:
                # Session takeover: newest connection wins.
                self._drop_session(old)
            session = _Session(pkt.client_id, pkt.keepalive, writer)
            session.last_seen = self._loop.time()
            self.sessions[pkt.client_id] = session
            writer.write(codec.encode(codec.ConnAck(return_code=0)))
            await writer.drain()
            writer_task = asyncio.ensure_future(self._writer_loop(session))
            await self._reader_loop(reader, session)
        except (codec.ProtocolViolation, asyncio.TimeoutError, asyncio.IncompleteReadError,
                ConnectionError, BadTopic):
            pass
        finally:
            if session is not None:
                self._drop_session(session)
            if writer_task is not None:
                writer_task.cancel()
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _read_packet(self, reader: asyncio.StreamReader) -> codec.Packet:
        buf = bytearray()
        while True:
            got = codec.decode(bytes(buf))
            if got is not None:
                pkt, used = got
                if used != len(buf):
                    raise codec.ProtocolViolation("pipelined read desync")
                return pkt
            chunk = await reader.read(4096)
            if not chunk:
                raise ConnectionError("peer closed")
            buf += chunk
            # Large packets arrive in several chunks; decode() enforces the
            # 64 KiB bound from the remaining-length header.

    async def _reader_loop(self, reader: asyncio.StreamReader, session: _Session):
        buf = bytearray()
        while not session.closed.is_set():
            got = codec.decode(bytes(buf))
            if got is None:
                read = asyncio.ensure_future(reader.read(65536))
                closed = asyncio.ensure_future(session.closed.wait())
                done, _ = await asyncio.wait({read, closed}, return_when=asyncio.FIRST_COMPLETED)
                closed.cancel()
                if read in done:
                    chunk = read.result()
                    if not chunk:
                        return
                    buf += chunk
                else:
                    read.cancel()
                    return
                continue
            pkt, used = got
            del buf[:used]
            session.last_seen = self._loop.time()
            if isinstance(pkt, codec.Publish):
                self._publish(session, pkt)
            elif isinstance(pkt, codec.Subscribe):
                self._subscribe(session, pkt)
            elif isinstance(pkt, codec.Unsubscribe):
                session.filters = [f for f in session.filters
                                   if "/".join(f) not in pkt.filters]
                self._reindex(session)
                self._send(session, codec.UnsubAck(packet_id=pkt.packet_id))
            elif isinstance(pkt, codec.PingReq):
                self._send(session, codec.PingResp())
            elif isinstance(pkt, codec.Disconnect):
                return
            elif isinstance(pkt, codec.Connect):
                raise codec.ProtocolViolation("second CONNECT")
            else:
                raise codec.ProtocolViolation("unexpected packet %r" % type(pkt).__name__)

    def _publish(self, publisher: _Session, pkt: codec.Publish):
        self.received += 1
        topic = parse_topic(pkt.topic)
        out = None
        targets = set(self._exact.get(pkt.topic, ()))
        for session in list(self._wildcard):
            if session not in targets and \
                    any(topic_matches(f, topic) for f in session.filters):
                targets.add(session)
        for session in targets:
            if session.closed.is_set():
                continue
            if out is None:
                out = codec.encode(codec.Publish(topic=pkt.topic, payload=pkt.payload))
            try:
                session.outbound.put_nowait(out)
                self.delivered += 1
            except asyncio.QueueFull:
                log.warning("queue overflow, dropping client %s", session.client_id)
                self._drop_session(session)

    def _subscribe(self, session: _Session, pkt: codec.Subscribe):
        codes = []
        for pattern, _qos in pkt.filters:
            try:
                session.filters.append(parse_filter(pattern))
                codes.append(0x00)
            except BadTopic:
                codes.append(0x80)
        self._reindex(session)
        self._send(session, codec.SubAck(packet_id=pkt.packet_id, return_codes=codes))

    def _send(self, session: _Session, pkt: codec.Packet):
        try:
            session.outbound.put_nowait(codec.encode(pkt))
        except asyncio.QueueFull:
            self._drop_session(session)

    async def _writer_loop(self, session: _Session):
        try:
            while not session.closed.is_set():
                get = asyncio.ensure_future(session.outbound.get())
                closed = asyncio.ensure_future(session.closed.wait())
                done, _ = await asyncio.wait({get, closed}, return_when=asyncio.FIRST_COMPLETED)
                closed.cancel()
                if get not in done:
                    get.cancel()
                    break
                session.writer.write(get.result())
                # Coalesce whatever else is queued before draining.
                while not session.outbound.empty():
                    session.writer.write(session.outbound.get_nowait())
                await session.writer.drain()
        except (ConnectionError, OSError):
            pass
        finally:
            session.close()


class BrokerThread:
    """Runs a Broker on its own event loop thread; for tests and embedding."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.broker = Broker(host, port)
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._run, daemon=True, name="mqtt-broker")
        self._started = threading.Event()

    def _run(self):
        asyncio.set_event_loop(self._loop)
        self._loop.run_until_complete(self.broker.start())
        self._started.set()
        self._loop.run_forever()

    def start(self) -> "BrokerThread":
        self._thread.start()
        if not self._started.wait(10):
            raise RuntimeError("broker failed to start")
        return self

    @property
    def port(self) -> int:
        return self.broker.bound_port

    def stop(self):
        async def _stop():
            await self.broker.stop()
            # Let connection tasks unwind so nothing is left pending when
            # the loop goes away.
            others = [t for t in asyncio.all_tasks()
                      if t is not asyncio.current_task()]
            for task in others:
                task.cancel()
            await asyncio.gather(*others, return_exceptions=True)
        fut = asyncio.run_coroutine_threadsafe(_stop(), self._loop)
        fut.result(5)
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(5)
        self._loop.close()
