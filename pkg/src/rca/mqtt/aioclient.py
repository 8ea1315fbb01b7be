"""Asyncio MQTT client for the QoS0 subset.

The simulator opens one session per simulated home, which can mean a
thousand concurrent connections; asyncio keeps that cheap.
"""

from __future__ import annotations

import asyncio
from typing import Awaitable, Callable, Optional

from . import codec

OnMessageAsync = Callable[[str, bytes], Optional[Awaitable[None]]]


class AsyncMqttClient:
    def __init__(self, client_id: str, host: str, port: int,
                 keepalive: int = 0, on_message: Optional[OnMessageAsync] = None):
        self.client_id = client_id
        self.host = host
        self.port = port
        self.keepalive = keepalive
        self.on_message = on_message
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None
        self._suback: Optional[asyncio.Future] = None
        self._task: Optional[asyncio.Task] = None
        self.closed = asyncio.Event()

    async def connect(self):
        self._reader, self._writer = await asyncio.open_connection(self.host, self.port)
        self._writer.write(codec.encode(codec.Connect(
            client_id=self.client_id, keepalive=self.keepalive)))
        await self._writer.drain()
        pkt = await self._read_one()
        if not isinstance(pkt, codec.ConnAck) or pkt.return_code != 0:
            raise ConnectionError("connect refused: %r" % (pkt,))
        self.closed.clear()
        self._task = asyncio.ensure_future(self._reader_loop())

    async def connect_with_retry(self, max_delay: float = 8.0):
        delay = 0.5
        while True:
            try:
                await self.connect()
                return
            except OSError:
                await asyncio.sleep(delay)
                delay = min(delay * 2, max_delay)

    async def publish(self, topic: str, payload: bytes):
        if self._writer is None or self.closed.is_set():
            raise ConnectionError("not connected")
        self._writer.write(codec.encode(codec.Publish(topic=topic, payload=payload)))
        await self._writer.drain()

    async def subscribe(self, filters: list[str]) -> list[int]:
        self._suback = asyncio.get_running_loop().create_future()
        pkt = codec.Subscribe(packet_id=1, filters=[(f, 0) for f in filters])
        self._writer.write(codec.encode(pkt))
        await self._writer.drain()
        ack = await asyncio.wait_for(self._suback, 5.0)
        return ack.return_codes

    async def close(self):
        self.closed.set()
        if self._task:
            self._task.cancel()
        if self._writer is not None:
            try:
                self._writer.write(codec.encode(codec.Disconnect()))
                await self._writer.drain()
            except (ConnectionError, OSError):
                pass
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _read_one(self) -> codec.Packet:
        buf = bytearray()
        while True:
            got = codec.decode(bytes(buf))
            if got is not None:
                return got[0]
            chunk = await self._reader.read(4096)
            if not chunk:
                raise ConnectionError("connection closed")
            buf += chunk

    async def _reader_loop(self):
        buf = bytearray()
        try:
            while True:
                got = codec.decode(bytes(buf))
                if got is None:
                    chunk = await self._reader.read(65536)
                    if not chunk:
                        break
                    buf += chunk
                    continue
                pkt, used = got
                del buf[:used]
                if isinstance(pkt, codec.Publish) and self.on_message is not None:
                    result = self.on_message(pkt.topic, pkt.payload)
                    if asyncio.iscoroutine(result):
                        await result
                elif isinstance(pkt, codec.SubAck) and self._suback is not None:
                    if not self._suback.done():
                        self._suback.set_result(pkt)
        except (ConnectionError, OSError, codec.ProtocolViolation):
            pass
        finally:
            self.closed.set()
