"""A small in-process task queue with retries and priorities."""

from .queue import TaskQueue
from .task import Task, TaskState
from .worker import Worker

__all__ = ["TaskQueue", "Task", "TaskState", "Worker"]
