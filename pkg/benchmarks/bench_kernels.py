"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--chain-secs 3]

Prints per-call times of each kernel on a synthetic sky frame at 640x480 and
1920x1080, then the sequential throughput of the whole chain per backend.
"""
import argparse
import timeit

import numpy as np

from meteorflow import _kernels, graphs, seqio
from meteorflow.cli import bench_one

SIZES = [(640, 480), (1920, 1080)]


def kernel_inputs(width, height):
    frames, _ = seqio.generate(seqio.random_scene(1, width=width, height=height, n_frames=2,
                                                  n_stars=int(50 * width * height / (640 * 480))))
    img = frames[0].data
    mask = (img >= 55).astype(np.uint8)
    rng = np.random.default_rng(0)
    p = rng.uniform(0, width, (200, 2))
    q = p + rng.normal(0, 1, p.shape)
    return img, mask, p, q


def time_call(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--chain-secs", type=float, default=3.0)
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    names = sorted(backends)
    print(f"{'kernel':<22}{'size':>11}" + "".join(f"{n + ' ms':>14}" for n in names) + f"{'speedup':>9}")
    for w, h in SIZES:
        img, mask, p, q = kernel_inputs(w, h)
        calls = {
            "binarize": lambda k: (lambda: k.binarize(img, 55)),
            "label": lambda k: (lambda: k.label(mask, img)),
            "mutual_knn (200 pts)": lambda k: (lambda: k.mutual_knn(p[:, 0].copy(), p[:, 1].copy(),
                                                                    q[:, 0].copy(), q[:, 1].copy(),
                                                                    3, 100.0)),
            "rigid_fit (200 pts)": lambda k: (lambda: k.rigid_fit(p, q)),
        }
        for kname, make in calls.items():
            ms = [time_call(make(backends[n]), args.repeat) for n in names]
            # names are sorted, so ms is [cython, python] when both exist
            ratio = f"{ms[1] / ms[0]:8.1f}x" if len(ms) == 2 else ""
            print(f"{kname:<22}{f'{w}x{h}':>11}" + "".join(f"{m:14.3f}" for m in ms) + ratio)

    print()
    previous = _kernels.BACKEND
    try:
        for w, h in SIZES:
            frames, _ = seqio.generate(seqio.random_scene(2, width=w, height=h, n_frames=20))
            for n in names:
                _kernels.use(n)
                stats = bench_one(frames, 2, 0, args.chain_secs, graphs.ChainParams())
                print(f"chain v2 sequential {w}x{h} [{n}]: {stats.throughput_fps:8.1f} fps, "
                      f"{stats.latency_ms_mean:7.2f} ms/frame")
    finally:
        _kernels.use(previous)


if __name__ == "__main__":
    main()
