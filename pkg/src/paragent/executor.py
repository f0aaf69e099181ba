"""Futures-based parallel task engine with timeline instrumentation.

Two backends behind one ResourceConfig: a local worker pool whose workers are
available immediately, and a simulated batch queue whose workers all arrive
together once an allocation delay has elapsed after the first submission
(single-allocation pilot-job model). Scheduling is FIFO with lowest-index
worker assignment, which makes schedules reproducible and checkable against
an independent list-scheduling simulation.
"""
from __future__ import annotations

import csv
import heapq
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .tools import FilesystemError


class ConfigInvalid(Exception):
    pass


class ExecutorShutdown(Exception):
    pass


@dataclass
class ResourceConfig:
    """Declarative description of the execution resources."""

    backend: str = "local"  # local | simulated_batch
    nodes: int = 1
    workers_per_node: int = 1
    queue_delay_ms: float = 0.0
    sample_interval_ms: float = 5000.0

    @property
    def total_workers(self) -> int:
        return self.nodes * self.workers_per_node

    def validate(self) -> None:
        if self.backend not in ("local", "simulated_batch"):
            raise ConfigInvalid(f"unknown backend {self.backend!r}")
        if self.nodes < 1 or self.workers_per_node < 1:
            raise ConfigInvalid("nodes and workers_per_node must be >= 1")
        if self.queue_delay_ms < 0:
            raise ConfigInvalid("queue_delay_ms must be >= 0")
        if self.backend == "local" and self.queue_delay_ms:
            raise ConfigInvalid("queue_delay_ms applies to the simulated_batch backend only")
        if self.sample_interval_ms <= 0:
            raise ConfigInvalid("sample_interval_ms must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ResourceConfig":
        cfg = cls(
            backend=data.get("backend", "local"),
            nodes=int(data.get("nodes", 1)),
            workers_per_node=int(data.get("workers_per_node", 1)),
            queue_delay_ms=float(data.get("queue_delay_ms", 0.0)),
            sample_interval_ms=float(data.get("sample_interval_ms", 5000.0)),
        )
        cfg.validate()
        return cfg


@dataclass
class TaskRecord:
    task_id: str
    submit_ms: float
    start_ms: Optional[float] = None
    end_ms: Optional[float] = None
    worker_id: Optional[int] = None
    status: str = "pending"  # pending | running | done | failed
    cost_s: Optional[float] = None


@dataclass
class TimelineSample:
    t_ms: float
    pending: int
    running: int
    completed: int
    workers_busy: int
    workers_total: int


TIMELINE_COLUMNS = ("t_ms", "pending", "running", "completed", "workers_busy", "workers_total")


class TaskHandle:
    """Wait-able completion cell for one submitted task; resolves exactly once."""

    def __init__(self, task_id: str):
        self.task_id = task_id
        self._event = threading.Event()
        self._value = None
        self._error: Optional[BaseException] = None

    def wait(self, timeout: Optional[float] = None) -> bool:
        return self._event.wait(timeout)

    def result(self, timeout: Optional[float] = None):
        if not self._event.wait(timeout):
            raise TimeoutError(f"task {self.task_id} not done")
        if self._error is not None:
            raise self._error
        return self._value

    def exception(self, timeout: Optional[float] = None) -> Optional[BaseException]:
        if not self._event.wait(timeout):
            raise TimeoutError(f"task {self.task_id} not done")
        return self._error

    def _resolve(self, value, error: Optional[BaseException]) -> None:
        assert not self._event.is_set(), "handle resolved twice"
        self._value = value
        self._error = error
        self._event.set()


def wait_all(handles: list[TaskHandle]) -> list:
    """Block until every handle resolves; failures come back positionally as
    exception values, never dropped. Result order matches handle order."""
    results = []
    for handle in handles:
        handle.wait()
        results.append(handle._error if handle._error is not None else handle._value)
    return results


class _Worker:
    def __init__(self, index: int, lock: threading.Lock):
        self.index = index
        self.cv = threading.Condition(lock)
        self.task_id: Optional[str] = None
        self.stop = False
        self.thread: Optional[threading.Thread] = None


@dataclass
class _Task:
    fn: Callable
    args: tuple
    kwargs: dict
    handle: TaskHandle


class Executor:
    """One allocation of workers executing submitted callables.

    All scheduling decisions happen under a single lock, and every state
    transition records a timeline sample, so exported timelines satisfy
    pending + running + completed = submitted on every row.
    """

    def __init__(self, config: ResourceConfig):
        config.validate()
        self.config = config
        self._t0 = time.monotonic()
        self._lock = threading.Lock()
        self._drain_cv = threading.Condition(self._lock)
        self._pending: deque[str] = deque()
        self._tasks: dict[str, _Task] = {}
        self._records: dict[str, TaskRecord] = {}
        self._free: list[int] = []
        self._samples: list[TimelineSample] = []
        self._submitted = 0
        self._running = 0
        self._completed = 0
        self._shutdown = False
        self._allocated = config.backend == "local"
        self._alloc_timer: Optional[threading.Timer] = None
        self._sampler_stop = threading.Event()

        self._workers = [_Worker(i, self._lock) for i in range(config.total_workers)]
        for worker in self._workers:
            worker.thread = threading.Thread(
                target=self._worker_loop, args=(worker,),
                name=f"executor-worker-{worker.index}", daemon=True,
            )
            worker.thread.start()
        if self._allocated:
            self._free = list(range(config.total_workers))
            heapq.heapify(self._free)
        self._sampler = threading.Thread(target=self._sampler_loop,
                                         name="executor-sampler", daemon=True)
        self._sampler.start()
        with self._lock:
            self._sample()

    @classmethod
    def start(cls, config: ResourceConfig) -> "Executor":
        return cls(config)

    def __enter__(self) -> "Executor":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # -- public API ---------------------------------------------------------

    def submit(self, fn: Callable, *args, cost_s: Optional[float] = None, **kwargs) -> TaskHandle:
        with self._lock:
            if self._shutdown:
                raise ExecutorShutdown("executor no longer accepts submissions")
            task_id = f"t{self._submitted:05d}"
            self._submitted += 1
            handle = TaskHandle(task_id)
            self._records[task_id] = TaskRecord(task_id, submit_ms=self._now_ms(), cost_s=cost_s)
            self._tasks[task_id] = _Task(fn, args, kwargs, handle)
            self._pending.append(task_id)
            if (self.config.backend == "simulated_batch" and not self._allocated
                    and self._alloc_timer is None):
                self._alloc_timer = threading.Timer(self.config.queue_delay_ms / 1000.0,
                                                    self._open_allocation)
                self._alloc_timer.daemon = True
                self._alloc_timer.start()
            self._sample()
            self._dispatch()
            return handle

    def task_records(self) -> list[TaskRecord]:
        with self._lock:
            return [TaskRecord(**vars(r)) for r in self._records.values()]

    def timeline(self) -> list[TimelineSample]:
        with self._lock:
            return list(self._samples)

    def export_timeline(self, dest) -> Path:
        """Write the recorded samples as CSV; rows are in nondecreasing t_ms."""
        dest = Path(dest)
        rows = self.timeline()
        try:
            dest.parent.mkdir(parents=True, exist_ok=True)
            with open(dest, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(TIMELINE_COLUMNS)
                for s in rows:
                    writer.writerow([int(round(s.t_ms)), s.pending, s.running,
                                     s.completed, s.workers_busy, s.workers_total])
        except OSError as exc:
            raise FilesystemError(f"cannot write timeline to {dest}: {exc}") from exc
        return dest

    def shutdown(self, wait: bool = True) -> None:
        """Reject new submissions, drain submitted work, join the workers."""
        with self._lock:
            if self._shutdown and not any(w.thread and w.thread.is_alive() for w in self._workers):
                return
            self._shutdown = True
            # Batch allocation must still open if work is queued, or the
            # drain below would never finish.
            if self._alloc_timer is not None and not self._pending and not self._running:
                self._alloc_timer.cancel()
            if wait:
                while self._pending or self._running:
                    self._drain_cv.wait()
            for worker in self._workers:
                worker.stop = True
                worker.cv.notify()
        for worker in self._workers:
            if worker.thread is not None:
                worker.thread.join()
        self._sampler_stop.set()
        self._sampler.join()
        if self._alloc_timer is not None:
            self._alloc_timer.cancel()
        with self._lock:
            self._sample()

    # -- internals ----------------------------------------------------------

    def _now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def _workers_total(self) -> int:
        return self.config.total_workers if self._allocated else 0

    def _sample(self) -> None:
        # caller holds the lock
        self._samples.append(TimelineSample(
            t_ms=self._now_ms(),
            pending=len(self._pending),
            running=self._running,
            completed=self._completed,
            workers_busy=self._running,
            workers_total=self._workers_total(),
        ))

    def _dispatch(self) -> None:
        # caller holds the lock; pair FIFO head with the lowest free worker
        while self._allocated and self._pending and self._free:
            task_id = self._pending.popleft()
            index = heapq.heappop(self._free)
            record = self._records[task_id]
            record.start_ms = self._now_ms()
            record.worker_id = index
            record.status = "running"
            self._running += 1
            worker = self._workers[index]
            worker.task_id = task_id
            worker.cv.notify()
            self._sample()

    def _open_allocation(self) -> None:
        with self._lock:
            if self._allocated:
                return
            self._allocated = True
            self._free = list(range(self.config.total_workers))
            heapq.heapify(self._free)
            self._sample()
            self._dispatch()

    def _worker_loop(self, worker: _Worker) -> None:
        while True:
            with self._lock:
                while worker.task_id is None and not worker.stop:
                    worker.cv.wait()
                if worker.task_id is None:
                    return
                task_id = worker.task_id
                worker.task_id = None
                task = self._tasks.pop(task_id)
            error: Optional[BaseException] = None
            value = None
            try:
                value = task.fn(*task.args, **task.kwargs)
            except Exception as exc:
                error = exc
            with self._lock:
                record = self._records[task_id]
                record.end_ms = self._now_ms()
                record.status = "failed" if error is not None else "done"
                self._running -= 1
                self._completed += 1
                heapq.heappush(self._free, worker.index)
                self._sample()
                self._dispatch()
                self._drain_cv.notify_all()
            task.handle._resolve(value, error)

    def _sampler_loop(self) -> None:
        interval = self.config.sample_interval_ms / 1000.0
        while not self._sampler_stop.wait(interval):
            with self._lock:
                self._sample()


def simulate_list_schedule(costs: list[float], workers: int,
                           release: float = 0.0) -> tuple[list[int], float]:
    """Independent oracle: FIFO list scheduling onto `workers` identical slots.

    Tasks are assigned in order to the earliest-free worker (lowest index on
    ties), none starting before `release`. Returns (assignment, makespan).
    """
    free = [release] * workers
    assignment = []
    makespan = release
    for cost in costs:
        index = min(range(workers), key=lambda i: (free[i], i))
        start = free[index]
        free[index] = start + cost
        assignment.append(index)
        makespan = max(makespan, free[index])
    return assignment, makespan
