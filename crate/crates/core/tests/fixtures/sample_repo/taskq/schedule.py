"""Delayed and periodic submission on top of a task queue."""

import heapq
import threading
import time


class Schedule:
    """Keeps future submissions ordered by due time.

    The schedule does not run tasks itself. Call `tick` from a loop or use
    `Ticker` to move due entries into the queue.
    """

    def __init__(self, queue, clock=time.monotonic):
        self.queue = queue
        self.clock = clock
        self._entries = []
        self._counter = 0
        self._lock = threading.Lock()

    def after(self, delay, func, *args, priority=10, every=None):
        """Submit `func` once `delay` seconds have passed.

        With `every`, the entry is submitted again at that interval.
        """
        if delay < 0:
            raise ValueError("delay must be non-negative")
        if every is not None and every <= 0:
            raise ValueError("interval must be positive")
        with self._lock:
            self._counter += 1
            due = self.clock() + delay
            heapq.heappush(self._entries, (due, self._counter, func, args, priority, every))
            return self._counter

    def cancel(self, entry_id):
        """Drop a scheduled entry. Returns True if it was pending."""
        with self._lock:
            before = len(self._entries)
            self._entries = [e for e in self._entries if e[1] != entry_id]
            heapq.heapify(self._entries)
            return len(self._entries) != before

    def tick(self):
        """Move every due entry into the queue. Returns how many moved."""
        now = self.clock()
        moved = 0
        with self._lock:
            while self._entries and self._entries[0][0] <= now:
                due, eid, func, args, priority, every = heapq.heappop(self._entries)
                self.queue.submit(func, *args, priority=priority)
                moved += 1
                if every is not None:
                    heapq.heappush(self._entries, (due + every, eid, func, args, priority, every))
        return moved

    def next_due(self):
        with self._lock:
            return self._entries[0][0] if self._entries else None

    def __len__(self):
        with self._lock:
            return len(self._entries)


class Ticker(threading.Thread):
    """Calls `Schedule.tick` at a fixed resolution."""

    def __init__(self, schedule, resolution=0.01):
        super().__init__(daemon=True)
        self.schedule = schedule
        self.resolution = resolution
        self._halt = threading.Event()

    def run(self):
        while not self._halt.wait(self.resolution):
            self.schedule.tick()

    def halt(self):
        self._halt.set()
