"""Per-host request serialization and spacing."""
from __future__ import annotations

import threading
import time
from contextlib import contextmanager


class HostThrottle:
    """At most one connection per host, with starts at least ``delay`` apart.

    Hosts are keyed by whatever the caller passes, normally the resolved
    address so that domains sharing a server share its budget. Start times
    are kept in ``starts`` for auditing.
    """

    def __init__(self, delay: float, clock=time.monotonic, sleep=time.sleep):
        self.delay = delay
        self._clock = clock
        self._sleep = sleep
        self._guard = threading.Lock()
        self._locks: dict = {}
        self._last: dict = {}
        self.starts: dict = {}

    def _lock(self, key):
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    @contextmanager
    def slot(self, key):
        lock = self._lock(key)
        with lock:
            last = self._last.get(key)
            if last is not None:
                wait = last + self.delay - self._clock()
                while wait > 0:
                    self._sleep(wait)
                    wait = last + self.delay - self._clock()
            now = self._clock()
            self._last[key] = now
            self.starts.setdefault(key, []).append(now)
            yield
