"""Run a handful of tasks through a worker pool and print a summary."""

import random
import sys

from taskq import TaskQueue
from taskq.stats import Histogram, failure_rate, summarize
from taskq.worker import WorkerPool


def flaky(n, p=0.3):
    """Return n squared, failing at random with probability p."""
    if random.random() < p:
        raise RuntimeError(f"flaky failure on {n}")
    return n * n


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    count = int(argv[0]) if argv else 20
    random.seed(7)
    queue = TaskQueue()
    for i in range(count):
        queue.submit(flaky, i, priority=i % 3, retries=2)
    with WorkerPool(queue, size=3) as pool:
        pass
    done = pool.results()
    failed = pool.failures()
    print(summarize(done + failed))
    print(f"failure rate: {failure_rate(done + failed):.2f}")
    hist = Histogram([1, 2, 3])
    hist.extend(t.attempts for t in done + failed)
    print(hist.render())
    return 0 if not failed else 1


if __name__ == "__main__":
    raise SystemExit(main())
