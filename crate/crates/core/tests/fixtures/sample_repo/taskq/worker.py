"""Worker threads that pull tasks from a queue."""

import logging
import threading
import time

from .task import TaskState

log = logging.getLogger(__name__)


class Worker(threading.Thread):
    """Runs tasks from a queue until the queue closes."""

    def __init__(self, queue, name=None, poll=0.1, backoff=0.05):
        super().__init__(name=name, daemon=True)
        self.queue = queue
        self.poll = poll
        self.backoff = backoff
        self.completed = []
        self.failed = []
        self._stop_event = threading.Event()

    def stop(self):
        """Ask the worker to finish after the current task."""
        self._stop_event.set()

    def stopped(self):
        return self._stop_event.is_set()

    def run(self):
        while not self.stopped():
            task = self.queue.get(timeout=self.poll)
            if task is None:
                if self.queue.closed:
                    break
                continue
            self.handle(task)

    def handle(self, task):
        """Run one task, retrying it through the queue when allowed."""
        ok = task.run()
        if ok:
            self.completed.append(task)
            log.debug("task %s done", task.name)
            return
        if task.can_retry() and not self.queue.closed:
            time.sleep(self.backoff * task.attempts)
            self.queue.requeue(task)
            log.info("task %s retry %d", task.name, task.attempts)
        else:
            self.failed.append(task)
            log.warning("task %s failed: %s", task.name, task.error)


class WorkerPool:
    """A fixed set of workers sharing one queue."""

    def __init__(self, queue, size=4):
        if size < 1:
            raise ValueError("size must be at least 1")
        self.queue = queue
        self.workers = [Worker(queue, name=f"worker-{i}") for i in range(size)]

    def start(self):
        for w in self.workers:
            w.start()
        return self

    def join(self, timeout=None):
        """Close the queue and wait for every worker."""
        self.queue.close()
        deadline = None if timeout is None else time.monotonic() + timeout
        for w in self.workers:
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            w.join(remaining)

    def results(self):
        done = [t for w in self.workers for t in w.completed]
        return sorted(done, key=lambda t: t.seq)

    def failures(self):
        return [t for w in self.workers for t in w.failed if t.state is TaskState.FAILED]

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.join()
        return False
