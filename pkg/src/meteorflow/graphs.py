"""The detection chain expressed as task graphs.

Version 1 labels both I(t-1) and I(t) at every step.  Version 2 labels each
frame once and carries its components to the next step through a delayer
(a load/save task pair sharing one slot).  Both graphs are cut into three
pipeline stages: acquisition, stateless pixel work, and the stateful
association/tracking tail.
"""
import threading
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import assoc, ccl, imgproc, motion, tracking
from .errors import DegenerateGeometryError, InsufficientDataError, ReplicationError
from .runtime import PipelineConfig, Task, build_sequence, run_pipeline, run_sequential


@dataclass(frozen=True)
class ChainParams:
    threshold: imgproc.ThresholdParams = field(default_factory=imgproc.ThresholdParams)
    surface: ccl.SurfaceParams = field(default_factory=ccl.SurfaceParams)
    knn: assoc.KnnParams = field(default_factory=assoc.KnnParams)
    sigma: float = motion.DEFAULT_SIGMA
    r_min: float = motion.DEFAULT_R_MIN
    track_min: int = tracking.DEFAULT_TRACK_MIN


class FrameResult(NamedTuple):
    """Per-frame output of the chain."""

    t: int
    n_ccs: int
    n_assocs: int
    motion: Optional[motion.RigidMotion]
    moving: tuple


class DelayerSlot:
    """Holds the component list of the previous frame."""

    def __init__(self):
        self.ccs = None
        self.t = None

    def load(self):
        return self.ccs

    def save(self, ccs, t):
        self.ccs = ccs
        self.t = t


class _Counter:
    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def incr(self):
        with self._lock:
            self._n += 1

    @property
    def value(self):
        return self._n


@dataclass
class DetectionGraph:
    version: int
    params: ChainParams
    sequence: object
    tracker: tracking.Tracker
    stages: tuple
    counter: _Counter

    @property
    def label_calls(self):
        return self.counter.value

    def tracks(self, confirmed_only=True):
        return self.tracker.finalize(confirmed_only=confirmed_only)


def _pixel_tasks(suffix, params, counter):
    """Threshold, label and filter tasks for one frame socket."""
    th = params.threshold

    def binarize(frame):
        if frame is None:
            return None
        return imgproc.binarize(frame, th.light_min)

    def label(mask, frame):
        if frame is None:
            return None
        counter.incr()
        return ccl.label_and_analyze(mask, frame)[1]

    def hysteresis(ccs):
        return None if ccs is None else ccl.filter_hysteresis(ccs, th.light_max)

    def surface(ccs):
        return None if ccs is None else ccl.filter_surface(ccs, params.surface)

    return [
        Task(f"binarize{suffix}", binarize, [("frame", "frame")], [("mask", "mask")]),
        Task(f"label{suffix}", label, [("mask", "mask"), ("frame", "frame")], [("ccs", "ccs")]),
        Task(f"hysteresis{suffix}", hysteresis, [("ccs", "ccs")], [("ccs_out", "ccs")]),
        Task(f"surface{suffix}", surface, [("ccs", "ccs")], [("ccs_out", "ccs")]),
    ]


def _wire_pixel(tasks, frame_sock):
    b, lab, hy, su = tasks
    return [
        (frame_sock, b["frame"]),
        (b["mask"], lab["mask"]),
        (frame_sock, lab["frame"]),
        (lab["ccs"], hy["ccs"]),
        (hy["ccs_out"], su["ccs"]),
    ]


def _tail_tasks(params, tracker):
    def knn(prev, cur):
        if prev is None or cur is None:
            return []
        return assoc.match_knn(prev, cur, params.knn)

    def estimate(assocs, prev, cur):
        try:
            m, out, _ = motion.estimate_two_pass(assocs, prev, cur, params.sigma)
        except (InsufficientDataError, DegenerateGeometryError):
            return None, []
        return m, out

    def classify(assocs):
        flags = motion.classify_motion(assocs, params.r_min)
        return [a for a, f in zip(assocs, flags) if f]

    def track(t, cur, prev, assocs, rigid, moving):
        cur = cur if cur is not None else []
        tracker.update(t, moving, cur, prev)
        return FrameResult(t, len(cur), len(assocs), rigid, tuple(moving))

    return [
        Task("knn", knn, [("prev", "ccs"), ("cur", "ccs")], [("assocs", "assocs")]),
        Task("motion", estimate, [("assocs", "assocs"), ("prev", "ccs"), ("cur", "ccs")],
             [("rigid", "motion"), ("assocs_out", "assocs")]),
        Task("classify", classify, [("assocs", "assocs")], [("moving", "assocs")]),
        Task("track", track,
             [("t", "int"), ("cur", "ccs"), ("prev", "ccs"), ("assocs", "assocs"),
              ("rigid", "motion"), ("moving", "assocs")],
             [("result", "result")], stateless=False),
    ]


def _wire_tail(tail, t_sock, prev_sock, cur_sock):
    knn, mot, cls, trk = tail
    return [
        (prev_sock, knn["prev"]),
        (cur_sock, knn["cur"]),
        (knn["assocs"], mot["assocs"]),
        (prev_sock, mot["prev"]),
        (cur_sock, mot["cur"]),
        (mot["assocs_out"], cls["assocs"]),
        (t_sock, trk["t"]),
        (cur_sock, trk["cur"]),
        (prev_sock, trk["prev"]),
        (mot["assocs_out"], trk["assocs"]),
        (mot["rigid"], trk["rigid"]),
        (cls["moving"], trk["moving"]),
    ]


def _acquire():
    def acquire(frame):
        return frame, frame.t

    return Task("acquire", acquire, [("frame", "frame")], [("frame_out", "frame"), ("t", "int")])


def build_v1(params: ChainParams = ChainParams()) -> DetectionGraph:
    """Chain that recomputes the components of both frames of each pair."""
    counter = _Counter()
    tracker = tracking.Tracker(params.track_min)
    acq = _acquire()
    state = {"frame": None}

    def delay(frame):
        prev = state["frame"]
        state["frame"] = frame
        return prev, (frame if prev is not None else None)

    delay_task = Task("frame_delay", delay, [("frame", "frame")],
                      [("prev_frame", "frame"), ("cur_frame", "frame")], stateless=False)
    prev_px = _pixel_tasks("_prev", params, counter)
    cur_px = _pixel_tasks("_cur", params, counter)
    tail = _tail_tasks(params, tracker)

    tasks = [acq, delay_task, *prev_px, *cur_px, *tail]
    bindings = [(acq["frame_out"], delay_task["frame"])]
    bindings += _wire_pixel(prev_px, delay_task["prev_frame"])
    bindings += _wire_pixel(cur_px, delay_task["cur_frame"])
    bindings += _wire_tail(tail, acq["t"], prev_px[3]["ccs_out"], cur_px[3]["ccs_out"])
    seq = build_sequence(tasks, bindings, entry=[acq["frame"]], exits=[tail[3]["result"]])
    stages = (
        ("acquire", "frame_delay"),
        tuple(t.name for t in prev_px + cur_px),
        tuple(t.name for t in tail),
    )
    return DetectionGraph(1, params, seq, tracker, stages, counter)


def build_v2(params: ChainParams = ChainParams()) -> DetectionGraph:
    """Chain that labels each frame once and delays its components."""
    counter = _Counter()
    tracker = tracking.Tracker(params.track_min)
    slot = DelayerSlot()
    acq = _acquire()
    px = _pixel_tasks("", params, counter)

    def load(cur):
        return slot.load()

    def save(cur, t, prev):
        slot.save(cur, t)

    load_task = Task("delayer_load", load, [("cur", "ccs")], [("prev", "ccs")], stateless=False)
    save_task = Task("delayer_save", save, [("cur", "ccs"), ("t", "int"), ("prev", "ccs")], [],
                     stateless=False)
    tail = _tail_tasks(params, tracker)

    tasks = [acq, *px, load_task, save_task, *tail]
    cur_sock = px[3]["ccs_out"]
    bindings = _wire_pixel(px, acq["frame_out"])
    bindings += [
        (cur_sock, load_task["cur"]),
        (cur_sock, save_task["cur"]),
        (acq["t"], save_task["t"]),
        (load_task["prev"], save_task["prev"]),
    ]
    bindings += _wire_tail(tail, acq["t"], load_task["prev"], cur_sock)
    seq = build_sequence(tasks, bindings, entry=[acq["frame"]], exits=[tail[3]["result"]])
    stages = (
        ("acquire",),
        tuple(t.name for t in px),
        ("delayer_load", "delayer_save", *(t.name for t in tail)),
    )
    return DetectionGraph(2, params, seq, tracker, stages, counter)


def build(version, params: ChainParams = ChainParams()) -> DetectionGraph:
    if version == 1:
        return build_v1(params)
    if version == 2:
        return build_v2(params)
    raise ValueError(f"graph version must be 1 or 2, got {version}")


def stage_cut(graph: DetectionGraph, replicas=1, capacity=1, stages=None) -> PipelineConfig:
    """Pipeline configuration for ``graph`` with ``replicas`` E2 threads.

    ``stages`` overrides the graph's default three-way cut.
    """
    stages = tuple(tuple(s) for s in (stages or graph.stages))
    if replicas > 1:
        by_name = graph.sequence.by_name
        stateful = [n for n in stages[1] if not by_name[n].stateless]
        if stateful:
            raise ReplicationError(f"stage E2 holds stateful tasks {stateful}; cannot replicate")
    return PipelineConfig(stages, replicas, capacity)


def run(graph: DetectionGraph, frames, replicas=0, capacity=1, sink=None):
    """Run ``graph`` over ``frames``; ``replicas == 0`` means sequential."""
    if replicas == 0:
        return run_sequential(graph.sequence, frames, sink)
    return run_pipeline(graph.sequence, stage_cut(graph, replicas, capacity), frames, sink)


def detect(frames, params: ChainParams = ChainParams(), version=2, replicas=0, capacity=1):
    """Run a fresh chain over ``frames``.

    Returns ``(tracks, stats, results)`` where ``tracks`` holds every track
    (confirmed or not) and ``results`` the per-frame outputs.
    """
    graph = build(version, params)
    results = []
    stats = run(graph, frames, replicas, capacity, results.append)
    return graph.tracks(confirmed_only=False), stats, results
