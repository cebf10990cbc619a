"""A small streaming dataflow runtime.

Tasks expose named, typed sockets.  Binding output sockets to input sockets
and calling :func:`build_sequence` yields a :class:`Sequence` whose execution
order is fixed at construction.  A sequence processes a stream of items
either on the calling thread (:func:`run_sequential`) or as a three-stage
pipeline whose middle stage may be replicated over several threads
(:func:`run_pipeline`).  Stages exchange data through bounded queues and
block on them (passive waiting); results reach the sink in source order.
"""
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import (
    BindingError,
    ConfigError,
    GraphCycleError,
    ReplicationError,
    SocketTypeError,
    TaskFailedError,
)

ANY = "any"
_ENTRY = ("<entry>", "item")


class Socket:
    __slots__ = ("task", "name", "direction", "dtype", "source")

    def __init__(self, task, name, direction, dtype=ANY):
        self.task = task
        self.name = name
        self.direction = direction
        self.dtype = dtype
        self.source = None

    def bind(self, producer: "Socket"):
        """Connect this input socket to ``producer``'s output."""
        if self.direction != "in":
            raise BindingError(f"{self!r} is an output socket and cannot be bound")
        if producer.direction != "out":
            raise BindingError(f"{producer!r} is not an output socket")
        if ANY not in (self.dtype, producer.dtype) and self.dtype != producer.dtype:
            raise SocketTypeError(
                f"cannot bind {producer!r} ({producer.dtype}) to {self!r} ({self.dtype})"
            )
        self.source = producer
        return self

    def __repr__(self):
        return f"{self.task.name}[{self.name}]"


class Task:
    """A unit of work with named input and output sockets.

    ``fn`` is called with one keyword argument per input socket.  With a
    single output socket its return value is that output; with several it
    must return a tuple in socket order.  Only ``stateless`` tasks may be
    replicated.
    """

    def __init__(self, name, fn, inputs=(), outputs=(), stateless=True):
        self.name = name
        self.fn = fn
        self.stateless = stateless
        self.inputs = {n: Socket(self, n, "in", dt) for n, dt in _socket_specs(inputs)}
        self.outputs = {n: Socket(self, n, "out", dt) for n, dt in _socket_specs(outputs)}
        clash = set(self.inputs) & set(self.outputs)
        if clash:
            raise ValueError(f"task {name!r} reuses socket names {sorted(clash)}")

    def __getitem__(self, name):
        try:
            return self.inputs[name]
        except KeyError:
            pass
        try:
            return self.outputs[name]
        except KeyError:
            raise KeyError(f"task {self.name!r} has no socket {name!r}") from None

    def clone(self):
        spec_in = [(n, s.dtype) for n, s in self.inputs.items()]
        spec_out = [(n, s.dtype) for n, s in self.outputs.items()]
        return Task(self.name, self.fn, spec_in, spec_out, self.stateless)

    def __repr__(self):
        return f"Task({self.name!r})"


def _socket_specs(specs):
    if isinstance(specs, dict):
        return list(specs.items())
    out = []
    for s in specs:
        out.append((s, ANY) if isinstance(s, str) else tuple(s))
    return out


def _key(sock):
    return (sock.task.name, sock.name)


class Sequence:
    """Tasks in a fixed topological order, ready to execute item by item."""

    def __init__(self, tasks, entry, exits):
        self.tasks = list(tasks)
        self.entry = list(entry)
        self.exits = list(exits)
        self._plans = [self._plan(t) for t in self.tasks]
        self.by_name = {t.name: t for t in self.tasks}

    def _plan(self, task):
        args = []
        for name, sock in task.inputs.items():
            if sock.source is not None:
                args.append((name, _key(sock.source)))
            else:
                args.append((name, _ENTRY))
        outs = [(task.name, n) for n in task.outputs]
        return args, outs

    @property
    def names(self):
        return [t.name for t in self.tasks]

    def exit_keys(self):
        return [_key(s) for s in self.exits]


def build_sequence(tasks, bindings=(), entry=(), exits=()):
    """Validate a task graph and fix its execution order.

    ``bindings`` holds ``(producer_output, consumer_input)`` socket pairs,
    applied before validation.  ``entry`` lists the input sockets that
    receive each stream item; every other input must be bound.  ``exits``
    lists the output sockets whose values are handed to the sink.
    """
    tasks = list(tasks)
    names = [t.name for t in tasks]
    if len(set(names)) != len(names):
        raise ValueError(f"task names must be unique, got {names}")
    members = {id(t) for t in tasks}
    for producer, consumer in bindings:
        consumer.bind(producer)
    entry_ids = {id(s) for s in entry}
    for s in entry:
        if s.direction != "in" or id(s.task) not in members:
            raise BindingError(f"entry socket {s!r} is not an input of this graph")
    for s in exits:
        if s.direction != "out" or id(s.task) not in members:
            raise BindingError(f"exit socket {s!r} is not an output of this graph")

    preds = {t.name: set() for t in tasks}
    for t in tasks:
        for s in t.inputs.values():
            if s.source is None:
                if id(s) not in entry_ids:
                    raise BindingError(f"input socket {s!r} is not bound")
                continue
            if id(s.source.task) not in members:
                raise BindingError(f"{s!r} is bound to {s.source!r} outside the graph")
            preds[t.name].add(s.source.task.name)

    # Kahn's algorithm; ties resolved by declaration order
    order = []
    done = set()
    pending = list(tasks)
    while pending:
        for idx, t in enumerate(pending):
            if preds[t.name] <= done:
                order.append(t)
                done.add(t.name)
                del pending[idx]
                break
        else:
            raise GraphCycleError(f"cycle among tasks {[t.name for t in pending]}")
    return Sequence(order, entry, exits)


def _execute(tasks, plans, env):
    for task, (args, outs) in zip(tasks, plans):
        try:
            result = task.fn(**{name: env[key] for name, key in args})
        except Exception as exc:
            raise TaskFailedError(task.name, exc) from exc
        if len(outs) == 1:
            env[outs[0]] = result
        elif outs:
            for key, value in zip(outs, result):
                env[key] = value
    return env


def _emit(env, exit_keys):
    if len(exit_keys) == 1:
        return env[exit_keys[0]]
    return tuple(env[k] for k in exit_keys)


@dataclass
class StreamStats:
    """Throughput and latency of one run.

    Latency of a frame is measured from the moment the source yields it to
    the moment the sink returns.
    """

    frames: int = 0
    elapsed_s: float = 0.0
    latencies_ms: list = field(default_factory=list, repr=False)

    @property
    def throughput_fps(self):
        if self.frames == 0 or self.elapsed_s <= 0:
            return 0.0
        return self.frames / self.elapsed_s

    @property
    def latency_ms_mean(self):
        return float(np.mean(self.latencies_ms)) if self.latencies_ms else 0.0

    @property
    def latency_ms_p99(self):
        return float(np.percentile(self.latencies_ms, 99)) if self.latencies_ms else 0.0


def run_sequential(seq: Sequence, source: Iterable, sink: Optional[Callable] = None) -> StreamStats:
    """Run every task of ``seq`` for each item of ``source`` on this thread."""
    exit_keys = seq.exit_keys()
    stats = StreamStats()
    clock = time.perf_counter
    start = clock()
    end = start
    for item in source:
        emitted = clock()
        env = _execute(seq.tasks, seq._plans, {_ENTRY: item})
        if sink is not None:
            sink(_emit(env, exit_keys))
        end = clock()
        stats.latencies_ms.append((end - emitted) * 1e3)
        stats.frames += 1
    stats.elapsed_s = end - start
    return stats


@dataclass(frozen=True)
class PipelineConfig:
    """Three-stage cut of a sequence.

    ``stages`` gives the task names of E1, E2 and E3.  E2 runs on
    ``replicas`` threads; E1 and E3 on one thread each.  ``capacity`` bounds
    each inter-stage buffer.
    """

    stages: tuple
    replicas: int = 1
    capacity: int = 1
    wait: str = "passive"

    def __post_init__(self):
        if len(self.stages) != 3:
            raise ConfigError(f"a pipeline has exactly 3 stages, got {len(self.stages)}")
        if self.replicas < 1:
            raise ConfigError(f"replication count must be >= 1, got {self.replicas}")
        if self.capacity < 1:
            raise ConfigError(f"buffer capacity must be >= 1, got {self.capacity}")
        if self.wait != "passive":
            raise ConfigError(f"only passive waiting is supported, got {self.wait!r}")
        object.__setattr__(self, "stages", tuple(tuple(s) for s in self.stages))

    @property
    def threads(self):
        return 2 + self.replicas


def replicate_stage(tasks, n):
    """Return ``n`` independent copies of a stage's task list."""
    stateful = [t.name for t in tasks if not t.stateless]
    if stateful:
        raise ReplicationError(f"cannot replicate stage with stateful tasks {stateful}")
    if n < 1:
        raise ConfigError(f"replication count must be >= 1, got {n}")
    return [[t.clone() for t in tasks] for _ in range(n)]


class _Stage:
    def __init__(self, seq, names):
        self.tasks = [seq.by_name[n] for n in seq.names if n in names]
        self.plans = [seq._plans[seq.names.index(t.name)] for t in self.tasks]
        self.keep = None

    def run(self, env, tasks=None):
        _execute(tasks or self.tasks, self.plans, env)
        return {k: env[k] for k in self.keep}


def _split(seq, cfg):
    listed = [n for stage in cfg.stages for n in stage]
    if sorted(listed) != sorted(seq.names) or len(set(listed)) != len(listed):
        raise ConfigError(
            f"stages must partition the tasks {seq.names}, got {[list(s) for s in cfg.stages]}"
        )
    stage_of = {n: i for i, stage in enumerate(cfg.stages) for n in stage}
    for t in seq.tasks:
        for s in t.inputs.values():
            if s.source is not None and stage_of[s.source.task.name] > stage_of[t.name]:
                raise ConfigError(
                    f"{s!r} in stage E{stage_of[t.name] + 1} reads from a later stage"
                )
    stages = [_Stage(seq, set(names)) for names in cfg.stages]
    # values that must travel past each stage boundary
    needed = set(seq.exit_keys())
    for i in (2, 1, 0):
        stages[i].keep = set(needed)
        for args, outs in reversed(stages[i].plans):
            needed.difference_update(outs)
            needed.update(key for _, key in args)
    return stages


_DONE = object()


def run_pipeline(seq: Sequence, cfg: PipelineConfig, source: Iterable, sink: Optional[Callable] = None) -> StreamStats:
    """Run ``seq`` as a three-stage pipeline with a replicated middle stage.

    Produces the same sink output, in the same order, as
    :func:`run_sequential`.
    """
    s1, s2, s3 = _split(seq, cfg)
    n = cfg.replicas
    if n > 1:
        clones = replicate_stage(s2.tasks, n)
    else:
        clones = [s2.tasks]
    exit_keys = seq.exit_keys()

    q12 = queue.Queue(maxsize=cfg.capacity)
    q23 = queue.Queue(maxsize=cfg.capacity)
    stop = threading.Event()
    errors = []
    clock = time.perf_counter

    def put(q, item):
        while not stop.is_set():
            try:
                q.put(item, timeout=0.05)
                return True
            except queue.Full:
                continue
        return False

    def get(q):
        while not stop.is_set():
            try:
                return q.get(timeout=0.05)
            except queue.Empty:
                continue
        return _DONE

    def fail(exc):
        errors.append(exc)
        stop.set()

    def stage1():
        try:
            for seqno, item in enumerate(source):
                emitted = clock()
                env = s1.run({_ENTRY: item})
                if not put(q12, (seqno, emitted, env)):
                    return
        except BaseException as exc:
            fail(exc)
            return
        for _ in range(n):
            if not put(q12, _DONE):
                return

    def stage2(tasks):
        try:
            while True:
                msg = get(q12)
                if msg is _DONE:
                    put(q23, _DONE)
                    return
                seqno, emitted, env = msg
                if not put(q23, (seqno, emitted, s2.run(env, tasks))):
                    return
        except BaseException as exc:
            fail(exc)

    threads = [threading.Thread(target=stage1, name="E1", daemon=True)]
    threads += [
        threading.Thread(target=stage2, args=(clones[k],), name=f"E2-{k}", daemon=True)
        for k in range(n)
    ]
    stats = StreamStats()
    start = clock()
    end = start
    for th in threads:
        th.start()

    pending = {}
    next_seq = 0
    finished = 0
    try:
        while finished < n:
            msg = get(q23)
            if msg is _DONE:
                if stop.is_set():
                    break
                finished += 1
                continue
            seqno, emitted, env = msg
            pending[seqno] = (emitted, env)
            while next_seq in pending:
                emitted, env = pending.pop(next_seq)
                env = s3.run(env)
                if sink is not None:
                    sink(_emit(env, exit_keys))
                end = clock()
                stats.latencies_ms.append((end - emitted) * 1e3)
                stats.frames += 1
                next_seq += 1
    except BaseException as exc:
        fail(exc)
    finally:
        if errors:
            stop.set()
        for th in threads:
            th.join()
    if errors:
        raise errors[0]
    stats.elapsed_s = end - start
    return stats
