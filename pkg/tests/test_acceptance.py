"""Acceptance criteria, one test per criterion (criterion 6 has two parts).

Each test prints a PASS/FAIL line with the measured value and the pinned
tolerance; the terminal summary collects one line per criterion.
"""
import math
import os
import statistics
import time

import numpy as np
import pytest

from meteorflow import _kernels, graphs
from meteorflow.assoc import Association
from meteorflow.ccl import CC, label_and_analyze
from meteorflow.cli import bench_one
from meteorflow.imgproc import BinaryMask, GrayFrame
from meteorflow.motion import RigidMotion, estimate_two_pass, fit_rigid
from meteorflow.runtime import PipelineConfig, Task, build_sequence, run_pipeline
from meteorflow.seqio import generate, random_scene, score, write_tracks_csv
from meteorflow.tracking import CONFIRMED

from oracles import component_features, flood_fill_components

pytestmark = pytest.mark.slow

N_SEQUENCES = 10
SUITE_SEEDS = range(100, 100 + N_SEQUENCES)
CORES = os.cpu_count() or 1


def report(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, detail


def csv_bytes(tracks, path):
    write_tracks_csv(tracks, path)
    return path.read_bytes()


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    scenes = [random_scene(seed) for seed in SUITE_SEEDS]
    data = [generate(s) for s in scenes]
    return scenes, data, time.perf_counter() - t0


def test_c1_chain_equivalence(suite, tmp_path):
    scenes, data, gen_s = suite
    assert all(s.width == 640 and s.height == 480 and s.n_frames == 100 and s.n_stars == 50
               and 1 <= len(s.meteors) <= 3 and s.jitter_shift <= 2 for s in scenes)
    t0 = time.perf_counter()
    mismatches = 0
    for k, (frames, _) in enumerate(data):
        t1, _, _ = graphs.detect(frames, version=1)
        t2, _, _ = graphs.detect(frames, version=2)
        p1, p2 = tmp_path / f"v1_{k}.csv", tmp_path / f"v2_{k}.csv"
        write_tracks_csv([tk for tk in t1 if tk.status == CONFIRMED], p1)
        write_tracks_csv([tk for tk in t2 if tk.status == CONFIRMED], p2)
        mismatches += p1.read_bytes() != p2.read_bytes()
    total = gen_s + time.perf_counter() - t0
    report("C1 chain equivalence", mismatches == 0 and total < 60,
           f"{N_SEQUENCES - mismatches}/{N_SEQUENCES} byte-identical, {total:.1f} s total (< 60 s)")


def test_c2_work_reduction(suite):
    _, data, _ = suite
    frames = data[0][0]
    n = len(frames)
    counts = {}
    for version in (1, 2):
        g = graphs.build(version)
        graphs.run(g, frames)
        counts[version] = g.label_calls
    counts_ok = counts[1] == 2 * (n - 1) and counts[2] == n

    # interleave the versions so drift in machine load hits both alike;
    # the first round warms caches and is discarded
    lat = {1: [], 2: []}
    for rnd in range(6):
        for frames_, _ in data[:3]:
            for version in (1, 2):
                stats = graphs.run(graphs.build(version), frames_)
                if rnd:
                    lat[version].append(stats.latency_ms_mean)
    l1, l2 = statistics.median(lat[1]), statistics.median(lat[2])
    ratio = l2 / l1
    report("C2 work reduction", counts_ok and ratio <= 0.65,
           f"label calls v1={counts[1]} (expect {2 * (n - 1)}), v2={counts[2]} (expect {n}); "
           f"latency v1={l1:.2f} ms v2={l2:.2f} ms ratio={ratio:.3f} (<= 0.65)")


def test_c3_detection_quality(suite):
    scenes, data, _ = suite
    params = graphs.ChainParams()
    for s in scenes:
        for m in s.meteors:
            assert m.speed >= 2 * params.r_min
    recalls, fps = [], 0
    for frames, truth in data:
        tracks, _, _ = graphs.detect(frames, params)
        recall, fp = score(tracks, truth, tol=1.5)
        recalls.append(recall)
        fps += fp
    report("C3 detection quality", min(recalls) == 1.0 and fps == 0,
           f"min recall={min(recalls):.3f} (= 1.0), false positives={fps} (= 0), tol=1.5 px")


def test_c4_pipeline_determinism(suite, tmp_path):
    _, data, _ = suite
    bad = []
    for k, (frames, _) in enumerate(data):
        ref_tracks, _, ref = graphs.detect(frames)
        ref_csv = csv_bytes(ref_tracks, tmp_path / "ref.csv")
        for i in (1, 2, 3, 4):
            for cap in (1, 2):
                tracks, _, out = graphs.detect(frames, replicas=i, capacity=cap)
                if out != ref or csv_bytes(tracks, tmp_path / "out.csv") != ref_csv:
                    bad.append((k, i, cap))
    runs = len(data) * 8
    report("C4 pipeline determinism", not bad,
           f"{runs - len(bad)}/{runs} (sequence, i, capacity) runs identical to sequential")


def _sleep_chain():
    def sleeper(ms):
        def fn(x):
            time.sleep(ms / 1e3)
            return x
        return fn

    a = Task("e1", sleeper(10), ["x"], ["v"])
    b = Task("e2", sleeper(30), ["x"], ["v"])
    c = Task("e3", sleeper(10), ["x"], ["v"])
    seq = build_sequence([a, b, c], [(a["v"], b["x"]), (b["v"], c["x"])],
                         entry=[a["x"]], exits=[c["v"]])
    return seq, (("e1",), ("e2",), ("e3",))


def _timed_source(seconds):
    deadline = time.perf_counter() + seconds
    t = 0
    while time.perf_counter() < deadline:
        yield t
        t += 1


def test_c5_throughput_law():
    # sleeping stages need no CPU, so the law is observable on any core count
    seq, stages = _sleep_chain()
    got = {}
    for i, target in ((1, 1000 / 30), (3, 100.0)):
        t0 = time.perf_counter()
        stats = run_pipeline(seq, PipelineConfig(stages, i, 1), _timed_source(4.0))
        elapsed = time.perf_counter() - t0
        got[i] = (stats.throughput_fps, target, elapsed)
    ok = all(abs(d - tgt) <= 0.15 * tgt and el <= 30 for d, tgt, el in got.values())
    report("C5 throughput law", ok,
           "; ".join(f"P{i} D={d:.1f} fps (target {tgt:.1f} +/-15%), {el:.1f} s"
                     for i, (d, tgt, el) in got.items()))


def _bench(frames, replicas, seconds, version=2):
    return bench_one(frames, version, replicas, seconds)


def test_c6_speedup(suite):
    if CORES < 4:
        pytest.skip(f"needs a >= 4-core host, this one has {CORES}; "
                    "P2 cannot outrun S without a second core")
    frames = suite[1][0][0]
    best = {}
    for replicas in (0, 2):
        best[replicas] = max(_bench(frames, replicas, 3.0).throughput_fps for _ in range(2))
    speedup = best[2] / best[0]
    report("C6 speedup", speedup >= 1.6,
           f"D(S)={best[0]:.1f} fps D(P2)={best[2]:.1f} fps speedup={speedup:.2f} (>= 1.6)")


def test_c6_latency_direction(suite):
    frames = suite[1][0][0]
    lat_s = statistics.median(_bench(frames, 0, 1.5).latency_ms_mean for _ in range(3))
    lat_p1 = statistics.median(_bench(frames, 1, 1.5).latency_ms_mean for _ in range(3))
    report("C6 P1 latency above S", lat_p1 > lat_s,
           f"L(S)={lat_s:.2f} ms L(P1)={lat_p1:.2f} ms (P1 > S)")


def _pairs_scene(p, q):
    prev = [CC(i + 1, 5, float(x), float(y), 0, 0, 0, 0, 200) for i, (x, y) in enumerate(p)]
    cur = [CC(i + 1, 5, float(x), float(y), 0, 0, 0, 0, 200) for i, (x, y) in enumerate(q)]
    assocs = [Association(i + 1, i + 1, float(q[i][0] - p[i][0]), float(q[i][1] - p[i][1]), 0.0)
              for i in range(len(p))]
    return assocs, prev, cur


def test_c7_motion_exactness():
    rng = np.random.default_rng(7007)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        truth = RigidMotion(*rng.uniform(-20, 20, 2), rng.uniform(-0.05, 0.05))
        p = rng.uniform([0, 0], [640, 480], (n, 2))
        q = truth.apply(p)
        m = fit_rigid(p, q)
        worst = max(worst, float(np.hypot(*(m.apply(p) - q).T).max()))

    # 10% outliers need at least 10 points for one outlier to exist
    rejected = 0
    for _ in range(1000):
        n = int(rng.integers(10, 201))
        truth = RigidMotion(*rng.uniform(-20, 20, 2), rng.uniform(-0.05, 0.05))
        p = rng.uniform([0, 0], [640, 480], (n, 2))
        q = truth.apply(p)
        n_out = math.ceil(0.1 * n)
        idx = rng.choice(n, n_out, replace=False)
        ang = rng.uniform(0, 2 * math.pi, n_out)
        mag = rng.uniform(10, 20, n_out)
        q[idx] += np.stack([mag * np.cos(ang), mag * np.sin(ang)], axis=1)
        m, out, _ = estimate_two_pass(*_pairs_scene(p, q), sigma=1.0)
        flagged = all(out[j].inlier is False for j in idx)
        clean = np.setdiff1d(np.arange(n), idx)
        exact = np.hypot(*(m.apply(p[clean]) - q[clean]).T).max() < 1e-6
        rejected += flagged and exact
    rate = rejected / 1000
    report("C7 motion exactness", worst < 1e-6 and rate >= 0.99,
           f"max residual={worst:.2e} px (< 1e-6); outliers rejected in {rate:.1%} (>= 99%)")


def test_c8_ccl_oracle():
    rng = np.random.default_rng(8008)
    backends = _kernels.available_backends()
    previous = _kernels.BACKEND
    failures = {name: 0 for name in backends}
    try:
        for _ in range(1000):
            img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
            bits = rng.random((64, 64)) < rng.uniform(0.05, 0.75)
            comps = flood_fill_components(bits)
            expect = [component_features(pix, img) for pix in comps]
            for name in backends:
                _kernels.use(name)
                lmap, ccs = label_and_analyze(BinaryMask(bits), GrayFrame(img))
                ok = len(ccs) == len(comps)
                for cc, pix, (area, cx, cy, x0, x1, y0, y1, vmax) in zip(ccs, comps, expect):
                    ys, xs = np.nonzero(lmap.labels == cc.label)
                    ok = ok and set(zip(ys.tolist(), xs.tolist())) == pix
                    ok = ok and (cc.area, cc.xmin, cc.xmax, cc.ymin, cc.ymax, cc.vmax) == (
                        area, x0, x1, y0, y1, vmax)
                    ok = ok and cc.cx == cx and cc.cy == cy
                failures[name] += not ok
    finally:
        _kernels.use(previous)
    report("C8 CCL oracle", not any(failures.values()),
           ", ".join(f"{name}: {1000 - f}/1000 masks identical" for name, f in failures.items()))


def test_c9_realtime_full_hd():
    frames, _ = generate(random_scene(9, width=1920, height=1080, n_frames=20, n_stars=200))
    probe = {r: _bench(frames, r, 2.0).throughput_fps for r in (0, 1, 2, 3, 4)}
    best_i = max((1, 2, 3, 4), key=probe.get)
    stats = _bench(frames, best_i, 30.0)
    d = stats.throughput_fps
    if d >= 25:
        report("C9 real-time Full HD", True,
               f"P{best_i} sustained D={d:.1f} fps over {stats.elapsed_s:.1f} s at 1920x1080 (>= 25)")
        return
    if CORES < 4:
        pytest.skip(f"P{best_i} reached {d:.1f} fps (< 25) and the 2x fallback needs >= 4 cores; "
                    f"host has {CORES}")
    ratio = d / probe[0]
    report("C9 real-time Full HD (fallback)", ratio >= 2,
           f"P{best_i} D={d:.1f} fps < 25; D(P_best)/D(S)={ratio:.2f} (>= 2)")
