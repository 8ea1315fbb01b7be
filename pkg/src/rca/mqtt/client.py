"""Blocking MQTT client for the QoS0 subset.

Used by services that hold one or two connections (telemetry ingestion,
command publishing). A background thread reads inbound packets and invokes
the on_message callback.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from typing import Callable, Optional

from . import codec

log = logging.getLogger("rca.mqtt.client")

OnMessage = Callable[[str, bytes], None]


class MqttError(Exception):
    pass


class MqttClient:
    def __init__(self, client_id: str, host: str, port: int,
                 keepalive: int = 0, on_message: Optional[OnMessage] = None):
        self.client_id = client_id
        self.host = host
        self.port = port
        self.keepalive = keepalive
        self.on_message = on_message
        self._sock: Optional[socket.socket] = None
        self._write_lock = threading.Lock()
        self._acks: queue.Queue = queue.Queue()
        self._reader: Optional[threading.Thread] = None
        self._pinger: Optional[threading.Thread] = None
        self._closed = threading.Event()

    def connect(self, timeout: float = 5.0):
        self._sock = socket.create_connection((self.host, self.port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._sock.sendall(codec.encode(codec.Connect(
            client_id=self.client_id, keepalive=self.keepalive)))
        pkt = self._read_one()
        if not isinstance(pkt, codec.ConnAck) or pkt.return_code != 0:
            raise MqttError("connect refused: %r" % (pkt,))
        self._sock.settimeout(None)
        self._closed.clear()
        self._reader = threading.Thread(target=self._reader_loop, daemon=True,
                                        name="mqtt-reader-%s" % self.client_id)
        self._reader.start()
        if self.keepalive:
            self._pinger = threading.Thread(target=self._ping_loop, daemon=True,
                                            name="mqtt-ping-%s" % self.client_id)
            self._pinger.start()

    def connect_with_retry(self, give_up: Optional[Callable[[], bool]] = None):
        """Exponential backoff 0.5 -> 8 s until the broker is reachable."""
        delay = 0.5
        while True:
            try:
                self.connect()
                return
            except OSError:
                if give_up and give_up():
                    raise
                time.sleep(delay)
                delay = min(delay * 2, 8.0)

    def publish(self, topic: str, payload: bytes):
        data = codec.encode(codec.Publish(topic=topic, payload=payload))
        with self._write_lock:
            if self._sock is None:
                raise MqttError("not connected")
            self._sock.sendall(data)

    def subscribe(self, filters: list[str], timeout: float = 5.0) -> list[int]:
        pkt = codec.Subscribe(packet_id=1, filters=[(f, 0) for f in filters])
        with self._write_lock:
            self._sock.sendall(codec.encode(pkt))
        try:
            ack = self._acks.get(timeout=timeout)
        except queue.Empty:
            raise MqttError("SUBACK timeout")
        return ack.return_codes

    def disconnect(self):
        try:
            with self._write_lock:
                if self._sock is not None:
                    self._sock.sendall(codec.encode(codec.Disconnect()))
        except OSError:
            pass
        self.close()

    def close(self):
        self._closed.set()
        sock, self._sock = self._sock, None
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    @property
    def connected(self) -> bool:
        return self._sock is not None and not self._closed.is_set()

    def _read_one(self) -> codec.Packet:
        buf = bytearray()
        while True:
            got = codec.decode(bytes(buf))
            if got is not None:
                return got[0]
            chunk = self._sock.recv(4096)
            if not chunk:
                raise MqttError("connection closed")
            buf += chunk

    def _reader_loop(self):
        buf = bytearray()
        sock = self._sock
        try:
            while not self._closed.is_set():
                got = codec.decode(bytes(buf))
                if got is None:
                    chunk = sock.recv(65536)
                    if not chunk:
                        break
                    buf += chunk
                    continue
                pkt, used = got
                del buf[:used]
                if isinstance(pkt, codec.Publish):
                    if self.on_message is not None:
                        try:
                            self.on_message(pkt.topic, pkt.payload)
                        except Exception:
                            log.exception("on_message handler failed")
                elif isinstance(pkt, (codec.SubAck, codec.UnsubAck)):
                    self._acks.put(pkt)
                # PINGRESP needs no action.
        except (OSError, codec.ProtocolViolation):
            pass
        finally:
            self._closed.set()

    def _ping_loop(self):
        interval = max(self.keepalive / 2.0, 0.5)
        while not self._closed.wait(interval):
            try:
                with self._write_lock:
                    if self._sock is not None:
                        self._sock.sendall(codec.encode(codec.PingReq()))
            except OSError:
                return
