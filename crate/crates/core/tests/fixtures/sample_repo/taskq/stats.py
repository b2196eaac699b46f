import statistics
from collections import Counter

from .task import TaskState


def summarize(tasks):
    states = Counter(t.state.value for t in tasks)
    attempts = [t.attempts for t in tasks]
    return {
        "total": len(tasks),
        "states": dict(sorted(states.items())),
        "mean_attempts": statistics.fmean(attempts) if attempts else 0.0,
        "max_attempts": max(attempts, default=0),
    }


def failure_rate(tasks):
    finished = [t for t in tasks if t.state in (TaskState.DONE, TaskState.FAILED)]
    if not finished:
        return 0.0
    return sum(t.state is TaskState.FAILED for t in finished) / len(finished)


def percentile(values, q):
    if not values:
        raise ValueError("no values")
    if not 0 <= q <= 100:
        raise ValueError("q must be in [0, 100]")
    ordered = sorted(values)
    k = (len(ordered) - 1) * q / 100
    lo = int(k)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (k - lo)


def ages(tasks, now):
    return [t.age(now) for t in tasks]


def slowest(tasks, n=5, now=None):
    return sorted(tasks, key=lambda t: t.age(now), reverse=True)[:n]


class Histogram:
    def __init__(self, edges):
        if sorted(edges) != list(edges):
            raise ValueError("edges must be sorted")
        self.edges = list(edges)
        self.counts = [0] * (len(edges) + 1)

    def add(self, value):
        for i, edge in enumerate(self.edges):
            if value < edge:
                self.counts[i] += 1
                return
        self.counts[-1] += 1

    def extend(self, values):
        for v in values:
            self.add(v)

    def render(self, width=40):
        peak = max(self.counts) or 1
        labels = [f"<{e}" for e in self.edges] + [f">={self.edges[-1]}" if self.edges else "all"]
        lines = []
        for label, count in zip(labels, self.counts):
            bar = "#" * round(width * count / peak)
            lines.append(f"{label:>8} {bar} {count}")
        return "\n".join(lines)
