"""Live simulator: one broker session per home, wall-clock scheduling."""

from __future__ import annotations

import asyncio
import json
import logging
import time
from typing import Optional

from ..domain import Command
from ..mqtt.aioclient import AsyncMqttClient
from ..wire import command_filter, state_payload, state_topic
from .core import Emission, HomeSim, ScenarioSim
from .scenario import SimScenario

log = logging.getLogger("rca.sim")

CONNECT_CONCURRENCY = 100


def _now_ms() -> int:
    return int(time.time() * 1000)


class SimulatorRunner:
    def __init__(self, scenario: SimScenario, broker_host: str, broker_port: int):
        self.sim = ScenarioSim(scenario, start_ms=_now_ms())
        self.broker_host = broker_host
        self.broker_port = broker_port
        self.clients: dict[str, AsyncMqttClient] = {}
        self.published = 0
        self._tasks: list[asyncio.Task] = []
        self._stopping = asyncio.Event()

    async def start(self):
        semaphore = asyncio.Semaphore(CONNECT_CONCURRENCY)

        async def bring_up(home: HomeSim):
            async with semaphore:
                client = AsyncMqttClient(
                    "hc-%s" % home.home_id, self.broker_host, self.broker_port,
                    keepalive=60,
                    on_message=lambda topic, payload, h=home: self._on_command(h, payload))
                await client.connect_with_retry()
                await client.subscribe([command_filter(home.home_id)])
                self.clients[home.home_id] = client
                for emission in home.initial_emissions(_now_ms()):
                    await self._emit(client, home, emission)

        await asyncio.gather(*(bring_up(h) for h in self.sim.homes))
        for home in self.sim.homes:
            self._tasks.append(asyncio.ensure_future(self._home_loop(home)))

    async def stop(self):
        self._stopping.set()
        for task in self._tasks:
            task.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)
        await asyncio.gather(*(c.close() for c in self.clients.values()),
                             return_exceptions=True)

    def final_values(self) -> dict[tuple[str, str], str]:
        return {(h.home_id, item_id): value
                for h in self.sim.homes for item_id, value in h.values.items()}

    async def _emit(self, client: AsyncMqttClient, home: HomeSim, emission: Emission):
        kind = home.kinds[emission.itemId]
        try:
            await client.publish(state_topic(emission.homeId, emission.itemId),
                                 state_payload(emission.value, emission.timestamp,
                                               kind=kind.value))
            self.published += 1
        except (ConnectionError, OSError):
            if not self._stopping.is_set():
                log.warning("lost broker connection for %s, reconnecting", home.home_id)
                await client.connect_with_retry()
                await client.subscribe([command_filter(home.home_id)])

    async def _home_loop(self, home: HomeSim):
        client = self.clients[home.home_id]
        while not self._stopping.is_set():
            due = home.next_due_ms()
            if due is None:
                await self._stopping.wait()
                return
            delay = (due - _now_ms()) / 1000.0
            if delay > 0:
                await asyncio.sleep(delay)
            for emission in home.advance(_now_ms()):
                await self._emit(client, home, emission)

    def _on_command(self, home: HomeSim, payload: bytes):
        try:
            command = Command.from_json(json.loads(payload.decode("utf-8")))
        except (ValueError, KeyError, UnicodeDecodeError):
            log.warning("ignoring malformed command for %s", home.home_id)
            return
        asyncio.ensure_future(self._run_command(home, command))

    async def _run_command(self, home: HomeSim, command: Command):
        if home.spec.commandDelayMs:
            await asyncio.sleep(home.spec.commandDelayMs / 1000.0)
        emission = home.apply_command(command, _now_ms())
        if emission is None:
            log.info("ignoring invalid command %s for %s/%s",
                     command.commandId, command.homeId, command.itemId)
            return
        client = self.clients.get(home.home_id)
        if client is not None:
            await self._emit(client, home, emission)


async def run_until_interrupted(scenario: SimScenario, broker_host: str,
                                broker_port: int):
    runner = SimulatorRunner(scenario, broker_host, broker_port)
    await runner.start()
    log.info("simulator up: %d homes", len(runner.sim.homes))
    try:
        await asyncio.Event().wait()
    finally:
        await runner.stop()
