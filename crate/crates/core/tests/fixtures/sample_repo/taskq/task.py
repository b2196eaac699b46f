"""Task records and their life cycle."""

import enum
import itertools
import time
from dataclasses import dataclass, field


class TaskState(enum.Enum):
    """Where a task is in its life cycle."""

    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"
    CANCELLED = "cancelled"


_ids = itertools.count(1)


def next_id():
    """Return a fresh task id."""
    return next(_ids)


@dataclass(order=True)
class Task:
    """A unit of work with a priority and a retry budget.

    Lower priority numbers run first. Ties are broken by creation order.
    """

    priority: int
    seq: int = field(default_factory=next_id)
    name: str = field(default="", compare=False)
    func: object = field(default=None, compare=False, repr=False)
    args: tuple = field(default=(), compare=False)
    retries: int = field(default=0, compare=False)
    state: TaskState = field(default=TaskState.PENDING, compare=False)
    attempts: int = field(default=0, compare=False)
    result: object = field(default=None, compare=False)
    error: str = field(default="", compare=False)
    created: float = field(default_factory=time.monotonic, compare=False)

    def can_retry(self):
        """True when the task failed and still has attempts left."""
        return self.state is TaskState.FAILED and self.attempts <= self.retries

    def run(self):
        """Call the task function and record the outcome."""
        self.state = TaskState.RUNNING
        self.attempts += 1
        try:
            self.result = self.func(*self.args)
        except Exception as exc:  # noqa: BLE001
            self.state = TaskState.FAILED
            self.error = f"{type(exc).__name__}: {exc}"
            return False
        self.state = TaskState.DONE
        self.error = ""
        return True

    def cancel(self):
        """Cancel a task that has not started yet."""
        if self.state is TaskState.PENDING:
            self.state = TaskState.CANCELLED
            return True
        return False

    def age(self, now=None):
        """Seconds since the task was created."""
        now = time.monotonic() if now is None else now
        return max(0.0, now - self.created)

    def to_dict(self):
        """A JSON-friendly view of the task."""
        return {
            "id": self.seq,
            "name": self.name,
            "priority": self.priority,
            "state": self.state.value,
            "attempts": self.attempts,
            "error": self.error,
        }
