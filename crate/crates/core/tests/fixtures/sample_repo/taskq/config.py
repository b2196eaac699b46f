"""Settings for queues and pools, read from the environment."""

import os
from dataclasses import dataclass, fields


@dataclass(frozen=True)
class Settings:
    """Tunable knobs with safe defaults."""

    pool_size: int = 4
    max_queue: int = 0
    poll: float = 0.1
    backoff: float = 0.05
    default_retries: int = 0

    @classmethod
    def from_env(cls, environ=None, prefix="TASKQ_"):
        """Build settings from variables such as TASKQ_POOL_SIZE."""
        environ = os.environ if environ is None else environ
        values = {}
        for f in fields(cls):
            raw = environ.get(prefix + f.name.upper())
            if raw is None:
                continue
            # Cast with the type of the default so "4" becomes 4.
            values[f.name] = type(f.default)(raw)
        return cls(**values).checked()

    def checked(self):
        """Raise ValueError when a value is out of range."""
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")
        if self.max_queue < 0:
            raise ValueError("max_queue must be non-negative")
        if self.poll <= 0 or self.backoff < 0:
            raise ValueError("poll must be positive and backoff non-negative")
        return self

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}
