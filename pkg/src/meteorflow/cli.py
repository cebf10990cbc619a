"""Command-line interface.

Subcommands::

    meteorflow detect --in seq/ --version 2 --mode P2
    meteorflow bench  --in seq/ --bench-secs 30 --sweep --max-i 4
    meteorflow gen    --out seq/ --seed 7
    meteorflow check  --tracks tracks.csv --truth seq/truth.csv

Exit status: 0 on success, 1 on I/O errors, 2 on invalid configuration.
"""
import argparse
import csv
import itertools
import logging
import os
import re
import sys
import time

from . import _kernels, assoc, ccl, graphs, imgproc, motion, seqio, tracking
from .errors import ConfigError, PGMFormatError, SceneError, TaskFailedError
from .imgproc import GrayFrame

STATS_FIELDS = ["mode", "version", "i", "frames", "elapsed_s", "throughput_fps",
                "latency_ms_mean", "latency_ms_p99"]


def parse_mode(text):
    """``"S"`` -> 0 (sequential); ``"P<i>"`` -> i replicated E2 threads."""
    m = re.fullmatch(r"([SsPp])(\d*)", text.strip())
    if not m or (m.group(1) in "Ss" and m.group(2)) or (m.group(1) in "Pp" and not m.group(2)):
        raise ConfigError(f"--mode: expected S or P<i>, got {text!r}")
    if m.group(1) in "Ss":
        return 0
    i = int(m.group(2))
    if i < 1:
        raise ConfigError("--mode: replication count must be ≥ 1")
    return i


def mode_label(replicas):
    return "S" if replicas == 0 else f"P{replicas}"


def chain_params(args):
    def check(ok, flag, msg):
        if not ok:
            raise ConfigError(f"{flag}: {msg}")

    check(0 <= args.light_min <= 255, "--light-min", "must be within [0, 255]")
    check(0 <= args.light_max <= 255, "--light-max", "must be within [0, 255]")
    check(args.light_min <= args.light_max, "--light-max", "must be ≥ --light-min")
    check(args.surface_min >= 1, "--surface-min", "must be ≥ 1")
    check(args.surface_max >= args.surface_min, "--surface-max", "must be ≥ --surface-min")
    check(args.knn_k >= 1, "--knn-k", "must be ≥ 1")
    check(args.knn_d > 0, "--knn-d", "must be > 0")
    check(args.sigma >= 0, "--sigma", "must be ≥ 0")
    check(args.r_min >= 0, "--r-min", "must be ≥ 0")
    check(args.track_min >= 1, "--track-min", "must be ≥ 1")
    check(args.buf_cap >= 1, "--buf-cap", "buffer capacity must be ≥ 1")
    return graphs.ChainParams(
        threshold=imgproc.ThresholdParams(args.light_min, args.light_max),
        surface=ccl.SurfaceParams(args.surface_min, args.surface_max),
        knn=assoc.KnnParams(args.knn_k, args.knn_d),
        sigma=args.sigma,
        r_min=args.r_min,
        track_min=args.track_min,
    )


def write_stats_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_FIELDS)
        for r in rows:
            w.writerow([r[k] for k in STATS_FIELDS])


def stats_row(replicas, version, stats):
    return {
        "mode": mode_label(replicas),
        "version": version,
        "i": replicas,
        "frames": stats.frames,
        "elapsed_s": f"{stats.elapsed_s:.4f}",
        "throughput_fps": f"{stats.throughput_fps:.3f}",
        "latency_ms_mean": f"{stats.latency_ms_mean:.4f}",
        "latency_ms_p99": f"{stats.latency_ms_p99:.4f}",
    }


def _summary(row):
    return (f"{row['mode']:>3} v{row['version']}  frames={row['frames']:<6} "
            f"D={float(row['throughput_fps']):8.2f} fps  L={float(row['latency_ms_mean']):8.3f} ms  "
            f"p99={float(row['latency_ms_p99']):8.3f} ms")


def cmd_detect(args):
    replicas = parse_mode(args.mode)
    params = chain_params(args)
    frames = seqio.read_sequence(args.input)
    graph = graphs.build(args.version, params)
    stats = graphs.run(graph, frames, replicas, args.buf_cap)
    tracks = graph.tracks(confirmed_only=not args.all_tracks)
    seqio.write_tracks_csv(tracks, args.out_tracks)
    row = stats_row(replicas, args.version, stats)
    write_stats_csv([row], args.out_stats)
    n_conf = sum(tr.status == tracking.CONFIRMED for tr in tracks)
    print(_summary(row))
    print(f"{n_conf} confirmed track(s) -> {args.out_tracks}; stats -> {args.out_stats}")
    return 0


def looped(frames, seconds):
    """Cycle ``frames`` with increasing indices until ``seconds`` elapse."""
    deadline = time.perf_counter() + seconds
    for t, f in enumerate(itertools.cycle(frames)):
        if time.perf_counter() >= deadline:
            return
        yield GrayFrame(f.data, t)


def bench_one(frames, version, replicas, seconds, params=graphs.ChainParams(), capacity=1):
    graph = graphs.build(version, params)
    return graphs.run(graph, looped(frames, seconds), replicas, capacity)


def cmd_bench(args):
    if not args.bench_secs > 0:
        raise ConfigError("--bench-secs: duration must be > 0")
    params = chain_params(args)
    if args.sweep:
        if args.max_i < 1:
            raise ConfigError("--max-i: replication count must be ≥ 1")
        modes = [0, *range(1, args.max_i + 1)]
    else:
        modes = [parse_mode(args.mode)]
    frames = seqio.read_sequence(args.input)
    print(f"kernel backend: {_kernels.BACKEND}; {len(frames)} frame(s) "
          f"{frames[0].width}x{frames[0].height}; {args.bench_secs:g} s per configuration")
    rows = []
    for replicas in modes:
        stats = bench_one(frames, args.version, replicas, args.bench_secs, params, args.buf_cap)
        row = stats_row(replicas, args.version, stats)
        rows.append(row)
        print(_summary(row))
    write_stats_csv(rows, args.out_stats)
    return 0


def cmd_gen(args):
    try:
        if args.meteors is not None:
            scene = seqio.random_scene(args.seed, args.width, args.height, args.frames, args.stars,
                                       n_meteors=args.meteors, jitter_shift=args.jitter,
                                       noise=args.noise)
        else:
            scene = seqio.random_scene(args.seed, args.width, args.height, args.frames, args.stars,
                                       jitter_shift=args.jitter, noise=args.noise)
    except (SceneError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    frames, truth = seqio.generate(scene)
    seqio.write_sequence(frames, args.out)
    truth_path = args.truth_out or os.path.join(args.out, "truth.csv")
    seqio.write_truth_csv(truth, truth_path)
    print(f"{len(frames)} frames -> {args.out}; {len(truth.meteors)} meteor(s) -> {truth_path}")
    return 0


def cmd_check(args):
    if not args.tol > 0:
        raise ConfigError("--tol: must be > 0")
    tracks = seqio.read_tracks_csv(args.tracks)
    truth = seqio.read_truth_csv(args.truth)
    recall, fp = seqio.score(tracks, truth, args.tol)
    print(f"recall={recall:.3f} false_positives={fp} meteors={len(truth.meteors)}")
    return 0 if (recall == 1.0 and fp == 0) or not args.strict else 3


def _chain_flags(p):
    g = p.add_argument_group("chain parameters")
    g.add_argument("--version", type=int, choices=(1, 2), default=2,
                   help="task graph: 1 = label both frames, 2 = delayer (default: 2)")
    g.add_argument("--mode", default="S", help="S (sequential) or P<i> (pipeline, i E2 threads)")
    g.add_argument("--buf-cap", type=int, default=1, help="inter-stage buffer capacity, frames (default: 1)")
    g.add_argument("--light-min", type=int, default=imgproc.DEFAULT_LIGHT_MIN,
                   help="low threshold, intensity 0-255 (default: %(default)s)")
    g.add_argument("--light-max", type=int, default=imgproc.DEFAULT_LIGHT_MAX,
                   help="high (hysteresis) threshold, intensity 0-255 (default: %(default)s)")
    g.add_argument("--surface-min", type=int, default=ccl.DEFAULT_SURFACE_MIN,
                   help="minimum component area, pixels (default: %(default)s)")
    g.add_argument("--surface-max", type=int, default=ccl.DEFAULT_SURFACE_MAX,
                   help="maximum component area, pixels (default: %(default)s)")
    g.add_argument("--knn-k", type=int, default=assoc.DEFAULT_KNN_K,
                   help="k of the mutual k-NN matching (default: %(default)s)")
    g.add_argument("--knn-d", type=float, default=assoc.DEFAULT_KNN_D,
                   help="maximum association distance, pixels (default: %(default)s)")
    g.add_argument("--sigma", type=float, default=motion.DEFAULT_SIGMA,
                   help="outlier rejection factor, std deviations (default: %(default)s)")
    g.add_argument("--r-min", type=float, default=motion.DEFAULT_R_MIN,
                   help="minimum residual of a moving object, pixels/frame (default: %(default)s)")
    g.add_argument("--track-min", type=int, default=tracking.DEFAULT_TRACK_MIN,
                   help="frames of motion needed to confirm a track (default: %(default)s)")


def build_parser():
    p = argparse.ArgumentParser(prog="meteorflow", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="run the detection chain over a PGM sequence")
    d.add_argument("--in", dest="input", required=True, help="directory of .pgm frames")
    _chain_flags(d)
    d.add_argument("--out-tracks", default="tracks.csv", help="track CSV path (default: %(default)s)")
    d.add_argument("--out-stats", default="stats.csv", help="stats CSV path (default: %(default)s)")
    d.add_argument("--all-tracks", action="store_true", help="also write unconfirmed tracks")
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bench", help="loop a sequence for a fixed time and report D and L")
    b.add_argument("--in", dest="input", required=True, help="directory of .pgm frames")
    _chain_flags(b)
    b.add_argument("--bench-secs", type=float, default=30.0,
                   help="duration per configuration, seconds (default: %(default)s)")
    b.add_argument("--sweep", action="store_true", help="run S and P1..P<max-i>")
    b.add_argument("--max-i", type=int, default=4, help="largest replication count of a sweep (default: 4)")
    b.add_argument("--out-stats", default="bench.csv", help="stats CSV path (default: %(default)s)")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="generate a synthetic sky sequence with ground truth")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    g.add_argument("--width", type=int, default=640, help="pixels (default: 640)")
    g.add_argument("--height", type=int, default=480, help="pixels (default: 480)")
    g.add_argument("--frames", type=int, default=100, help="sequence length (default: 100)")
    g.add_argument("--stars", type=int, default=50, help="number of stars (default: 50)")
    g.add_argument("--meteors", type=int, default=None, help="number of meteors (default: random 1-3)")
    g.add_argument("--jitter", type=float, default=2.0, help="max camera shift per frame, pixels (default: 2)")
    g.add_argument("--noise", type=float, default=2.0, help="Gaussian noise std, intensity (default: 2)")
    g.add_argument("--truth-out", default=None, help="ground-truth CSV (default: <out>/truth.csv)")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="score a track CSV against ground truth")
    c.add_argument("--tracks", required=True)
    c.add_argument("--truth", required=True)
    c.add_argument("--tol", type=float, default=1.5, help="match tolerance, pixels (default: 1.5)")
    c.add_argument("--strict", action="store_true", help="exit 3 unless recall is 1 and there are no false positives")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"meteorflow: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, PGMFormatError) as exc:
        print(f"meteorflow: I/O error: {exc}", file=sys.stderr)
        return 1
    except TaskFailedError as exc:
        print(f"meteorflow: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
