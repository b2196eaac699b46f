import heapq
import threading

from .task import Task, TaskState


class QueueClosed(Exception):
    pass


class TaskQueue:
    def __init__(self, maxsize=0):
        self._heap = []
        self._lock = threading.Lock()
        self._not_empty = threading.Condition(self._lock)
        self._maxsize = maxsize
        self._closed = False
        self._by_id = {}

    def __len__(self):
        with self._lock:
            return len(self._heap)

    def submit(self, func, *args, priority=10, name="", retries=0):
        task = Task(priority=priority, name=name or getattr(func, "__name__", ""), func=func, args=args, retries=retries)
        self.put(task)
        return task

    def put(self, task):
        with self._not_empty:
            if self._closed:
                raise QueueClosed("queue is closed")
            if self._maxsize and len(self._heap) >= self._maxsize:
                raise OverflowError("queue is full")
            heapq.heappush(self._heap, task)
            self._by_id[task.seq] = task
            self._not_empty.notify()

    def get(self, timeout=None):
        with self._not_empty:
            while not self._heap:
                if self._closed:
                    return None
                if not self._not_empty.wait(timeout):
                    return None
            task = heapq.heappop(self._heap)
            while task.state is TaskState.CANCELLED:
                if not self._heap:
                    return None
                task = heapq.heappop(self._heap)
            return task

    def requeue(self, task):
        if task.can_retry():
            task.state = TaskState.PENDING
            self.put(task)
            return True
        return False

    def cancel(self, task_id):
        with self._lock:
            task = self._by_id.get(task_id)
        return bool(task and task.cancel())

    def find(self, task_id):
        with self._lock:
            return self._by_id.get(task_id)

    def close(self):
        with self._not_empty:
            self._closed = True
            self._not_empty.notify_all()

    @property
    def closed(self):
        return self._closed

    def pending(self):
        with self._lock:
            return sorted(t for t in self._heap if t.state is TaskState.PENDING)

    def drain(self):
        out = []
        while True:
            task = self.get(timeout=0)
            if task is None:
                return out
            out.append(task)
