"""Client-side resilience: round-robin balancing and circuit breaking.

Every inter-service call goes through guarded_call: breaker check first
(fast fail, no I/O while open), then instance choice, then the transport.
Failures are connection errors, timeouts and HTTP 5xx; 4xx responses are
the caller's problem and do not trip the breaker.
"""

from __future__ import annotations

import logging
import threading
from typing import Callable, Optional

from .clock import Clock, SYSTEM_CLOCK
from .errors import RcaError

log = logging.getLogger("rca.resilience")

DEFAULT_FAILURE_THRESHOLD = 5
DEFAULT_RESET_TIMEOUT_MS = 10_000
DEFAULT_CALL_TIMEOUT_S = 2.0

CLOSED = "closed"
OPEN = "open"
HALF_OPEN = "half-open"


class NoInstancesError(RcaError):
    pass


class BreakerOpenError(RcaError):
    pass


class DownstreamError(RcaError):
    def __init__(self, message: str, status: Optional[int] = None):
        super().__init__(message)
        self.status = status


class RoundRobinBalancer:
    """Per-service-name rotating cursor over live instances."""

    def __init__(self):
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def choose(self, service_name: str, instances: list):
        if not instances:
            raise NoInstancesError("no live instances of %r" % service_name)
        with self._lock:
            cursor = self._cursors.get(service_name, 0)
            self._cursors[service_name] = cursor + 1
        return instances[cursor % len(instances)]


class CircuitBreaker:
    """Closed -> Open after N consecutive failures; Open -> HalfOpen after the
    reset timeout; HalfOpen admits exactly one trial call."""

    def __init__(self, name: str, threshold: int = DEFAULT_FAILURE_THRESHOLD,
                 reset_timeout_ms: int = DEFAULT_RESET_TIMEOUT_MS,
                 clock: Clock = SYSTEM_CLOCK):
        self.name = name
        self.threshold = threshold
        self.reset_timeout_ms = reset_timeout_ms
        self.clock = clock
        self._lock = threading.Lock()
        self._state = CLOSED
        self._failures = 0
        self._opened_at = 0
        self._trial_in_flight = False

    @property
    def state(self) -> str:
        with self._lock:
            return self._effective_state()

    def _effective_state(self) -> str:
        if self._state == OPEN and self.clock.now_ms() - self._opened_at >= self.reset_timeout_ms:
            return HALF_OPEN
        return self._state

    def _transition(self, to: str):
        if to != self._state:
            log.info("breaker transition", extra={"breaker": self.name,
                                                  "from": self._state, "to": to,
                                                  "at": self.clock.now_ms()})
            self._state = to

    def before_call(self):
        """Admit or reject a call. Raises BreakerOpenError without any I/O."""
        with self._lock:
            state = self._effective_state()
            if state == CLOSED:
                return
            if state == OPEN:
                raise BreakerOpenError("breaker %r open" % self.name)
            # half-open: one concurrent trial only
            if self._state == OPEN:
                self._transition(HALF_OPEN)
                self._trial_in_flight = False
            if self._trial_in_flight:
                raise BreakerOpenError("breaker %r half-open, trial in flight" % self.name)
            self._trial_in_flight = True

    def on_success(self):
        with self._lock:
            self._transition(CLOSED)
            self._failures = 0
            self._trial_in_flight = False

    def on_failure(self):
        with self._lock:
            if self._state == HALF_OPEN:
                self._trial_in_flight = False
                self._opened_at = self.clock.now_ms()
                self._transition(OPEN)
                return
            if self._state == OPEN:
                return
            self._failures += 1
            if self._failures >= self.threshold:
                self._opened_at = self.clock.now_ms()
                self._failures = 0
                self._transition(OPEN)


class BreakerRegistry:
    """One breaker per downstream service name, for one calling service."""

    def __init__(self, threshold: int = DEFAULT_FAILURE_THRESHOLD,
                 reset_timeout_ms: int = DEFAULT_RESET_TIMEOUT_MS,
                 clock: Clock = SYSTEM_CLOCK):
        self.threshold = threshold
        self.reset_timeout_ms = reset_timeout_ms
        self.clock = clock
        self._breakers: dict[str, CircuitBreaker] = {}
        self._lock = threading.Lock()

    def get(self, target: str) -> CircuitBreaker:
        with self._lock:
            breaker = self._breakers.get(target)
            if breaker is None:
                breaker = CircuitBreaker(target, self.threshold,
                                         self.reset_timeout_ms, self.clock)
                self._breakers[target] = breaker
            return breaker


def guarded_call(breaker: CircuitBreaker, call: Callable[[], object],
                 is_failure: Callable[[BaseException], bool] = lambda e: True):
    """Run call() under the breaker's state machine.

    call() must raise on transport failure; returned values are successes.
    Exceptions for which is_failure is False propagate without counting.
    """
    breaker.before_call()
    try:
        result = call()
    except BaseException as exc:
        if is_failure(exc):
            breaker.on_failure()
        else:
            breaker.on_success()
        raise
    breaker.on_success()
    return result
