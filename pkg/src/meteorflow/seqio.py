"""Frame I/O, synthetic sky sequences with ground truth, and track files."""
import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PGMFormatError, SceneError
from .imgproc import GrayFrame
from .tracking import CONFIRMED, Track, TrackState

# ---------------------------------------------------------------------------
# PGM


def _skip_space(buf, pos):
    n = len(buf)
    while pos < n:
        c = buf[pos]
        if c == 0x23:  # '#': comment until end of line
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
        elif c in b" \t\r\n\x0b\x0c":
            pos += 1
        else:
            break
    return pos


def _read_int(buf, pos, what):
    pos = _skip_space(buf, pos)
    start = pos
    while pos < len(buf) and 0x30 <= buf[pos] <= 0x39:
        pos += 1
    if pos == start:
        raise PGMFormatError(f"expected {what}", start)
    return int(buf[start:pos]), pos


def decode_pgm(buf, t=0):
    """Parse the bytes of a binary ("P5") 8-bit PGM image."""
    if buf[:2] != b"P5":
        raise PGMFormatError(f"bad magic {bytes(buf[:2])!r}, expected b'P5'", 0)
    pos = 2
    width, pos = _read_int(buf, pos, "width")
    height, pos = _read_int(buf, pos, "height")
    maxval_at = _skip_space(buf, pos)
    maxval, pos = _read_int(buf, pos, "maxval")
    if not 0 < maxval <= 255:
        raise PGMFormatError(f"unsupported maxval {maxval} (8-bit only)", maxval_at)
    if pos >= len(buf) or buf[pos] not in b" \t\r\n\x0b\x0c":
        raise PGMFormatError("missing whitespace after header", pos)
    pos += 1
    need = width * height
    if len(buf) - pos < need:
        raise PGMFormatError(f"truncated raster: need {need} bytes, have {len(buf) - pos}", len(buf))
    data = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos).reshape(height, width)
    return GrayFrame(data.copy(), t)


def encode_pgm(frame: GrayFrame):
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + frame.data.tobytes()


def read_pgm(path, t=0):
    with open(path, "rb") as fh:
        return decode_pgm(fh.read(), t)


def write_pgm(frame: GrayFrame, path):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(frame))


def frame_name(t):
    return f"frame_{t:06d}.pgm"


def list_sequence(directory):
    paths = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".pgm")
    if not paths:
        raise FileNotFoundError(f"no .pgm frames in {directory}")
    return paths


def read_sequence(directory):
    """Frames of ``directory`` in filename order, numbered from 0."""
    return [read_pgm(p, t) for t, p in enumerate(list_sequence(directory))]


def write_sequence(frames, directory):
    os.makedirs(directory, exist_ok=True)
    for f in frames:
        write_pgm(f, Path(directory) / frame_name(f.t))


# ---------------------------------------------------------------------------
# Synthetic scenes


@dataclass(frozen=True)
class MeteorSpec:
    """A meteor in sky coordinates.

    Its streak centre is at ``start + k * velocity`` on the k-th frame of its
    life; the streak spans one frame of motion centred there.
    """

    t_start: int
    duration: int
    start: tuple
    velocity: tuple
    intensity: float = 230.0
    thickness: float = 2.0

    def center(self, k):
        return (self.start[0] + k * self.velocity[0], self.start[1] + k * self.velocity[1])

    @property
    def speed(self):
        return math.hypot(*self.velocity)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a synthetic sequence.

    Camera jitter is a bounded random walk: each frame the camera shifts by
    at most ``jitter_shift`` pixels and turns by at most ``jitter_angle``
    radians about the image centre; the accumulated pose is clamped to
    ``drift_max`` pixels and ``10 * jitter_angle`` radians.  Stars keep
    ``star_clearance`` pixels away from every meteor path.
    """

    width: int = 640
    height: int = 480
    n_frames: int = 100
    n_stars: int = 50
    star_peak: tuple = (140.0, 255.0)
    star_sigma: tuple = (1.2, 1.8)
    meteors: tuple = ()
    jitter_shift: float = 0.0
    jitter_angle: float = 0.0
    drift_max: float = 10.0
    background: float = 20.0
    noise: float = 0.0
    star_clearance: float = 25.0
    star_separation: float = 12.0
    seed: int = 0

    @property
    def margin(self):
        # worst-case excursion of a sky point under the clamped camera pose
        r = math.hypot(self.width, self.height) / 2
        return self.drift_max + r * 10 * self.jitter_angle + 8.0


@dataclass
class GroundTruth:
    """True per-frame streak centres of each meteor, in image coordinates."""

    meteors: dict = field(default_factory=dict)

    def positions(self, meteor_id):
        return self.meteors[meteor_id]


def camera_poses(scene: SceneSpec, rng):
    """Per-frame ``(dx, dy, dtheta)`` of the camera relative to frame 0."""
    poses = [(0.0, 0.0, 0.0)]
    amax = 10 * scene.jitter_angle
    for _ in range(1, scene.n_frames):
        x, y, a = poses[-1]
        if scene.jitter_shift > 0:
            ang = rng.uniform(0, 2 * math.pi)
            rad = scene.jitter_shift * math.sqrt(rng.uniform(0, 1))
            x = float(np.clip(x + rad * math.cos(ang), -scene.drift_max, scene.drift_max))
            y = float(np.clip(y + rad * math.sin(ang), -scene.drift_max, scene.drift_max))
        if scene.jitter_angle > 0:
            a = float(np.clip(a + rng.uniform(-scene.jitter_angle, scene.jitter_angle), -amax, amax))
        poses.append((x, y, a))
    return poses


def _to_image(pose, pts, scene):
    dx, dy, a = pose
    cx, cy = (scene.width - 1) / 2, (scene.height - 1) / 2
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    c, s = math.cos(a), math.sin(a)
    x = pts[:, 0] - cx
    y = pts[:, 1] - cy
    return np.stack([c * x - s * y + cx + dx, s * x + c * y + cy + dy], axis=1)


def _seg_dist(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    ll = vx * vx + vy * vy
    if ll == 0:
        return np.hypot(px - ax, py - ay)
    u = np.clip(((px - ax) * vx + (py - ay) * vy) / ll, 0.0, 1.0)
    return np.hypot(px - (ax + u * vx), py - (ay + u * vy))


def _check_scene(scene: SceneSpec):
    if scene.width < 2 or scene.height < 2 or scene.n_frames < 1:
        raise SceneError("scene needs width, height >= 2 and at least one frame")
    m = scene.margin
    if 2 * m >= min(scene.width, scene.height):
        raise SceneError(f"frame {scene.width}x{scene.height} too small for jitter margin {m:.1f}")
    for i, met in enumerate(scene.meteors):
        if met.t_start < 0 or met.duration < 1 or met.t_start + met.duration > scene.n_frames:
            raise SceneError(f"meteor {i} lifetime outside the sequence")
        half = 0.5 * met.speed + 2 * met.thickness
        for k in (0, met.duration - 1):
            x, y = met.center(k)
            if not (m + half <= x <= scene.width - 1 - m - half
                    and m + half <= y <= scene.height - 1 - m - half):
                raise SceneError(f"meteor {i} leaves the frame at life step {k}")


def _meteor_path(met):
    a = met.center(-0.5)
    b = met.center(met.duration - 0.5)
    return a, b


def _place_stars(scene: SceneSpec, rng):
    m = scene.margin
    paths = [_meteor_path(met) for met in scene.meteors]
    stars = []
    attempts = 0
    while len(stars) < scene.n_stars:
        attempts += 1
        if attempts > 200 * max(scene.n_stars, 1):
            raise SceneError("cannot place stars with the requested clearance")
        x = rng.uniform(m, scene.width - 1 - m)
        y = rng.uniform(m, scene.height - 1 - m)
        if any(_seg_dist(x, y, *a, *b) < scene.star_clearance for a, b in paths):
            continue
        if any(math.hypot(x - sx, y - sy) < scene.star_separation for sx, sy, _, _ in stars):
            continue
        peak = rng.uniform(*scene.star_peak)
        sigma = rng.uniform(*scene.star_sigma)
        stars.append((x, y, peak, sigma))
    return stars


def _splat_star(img, x, y, peak, sigma):
    r = int(math.ceil(4 * sigma))
    h, w = img.shape
    x0, x1 = max(int(x) - r, 0), min(int(x) + r + 2, w)
    y0, y1 = max(int(y) - r, 0), min(int(y) + r + 2, h)
    gx = np.arange(x0, x1) - x
    gy = np.arange(y0, y1) - y
    img[y0:y1, x0:x1] += peak * np.exp(-(gy[:, None] ** 2 + gx[None, :] ** 2) / (2 * sigma * sigma))


def _splat_streak(img, a, b, intensity, thickness):
    sigma = thickness / 2
    r = int(math.ceil(3 * thickness)) + 1
    h, w = img.shape
    x0 = max(int(min(a[0], b[0])) - r, 0)
    x1 = min(int(max(a[0], b[0])) + r + 2, w)
    y0 = max(int(min(a[1], b[1])) - r, 0)
    y1 = min(int(max(a[1], b[1])) + r + 2, h)
    gx, gy = np.meshgrid(np.arange(x0, x1, dtype=float), np.arange(y0, y1, dtype=float))
    d = _seg_dist(gx, gy, a[0], a[1], b[0], b[1])
    img[y0:y1, x0:x1] += intensity * np.exp(-(d * d) / (2 * sigma * sigma))


def generate(scene: SceneSpec):
    """Render ``scene``; returns ``(frames, ground_truth)``.

    Randomness comes from numpy's PCG64 generator seeded with ``scene.seed``.
    """
    _check_scene(scene)
    rng = np.random.default_rng(scene.seed)
    poses = camera_poses(scene, rng)
    stars = _place_stars(scene, rng)
    star_xy = np.array([(s[0], s[1]) for s in stars], dtype=float).reshape(-1, 2)
    truth = GroundTruth({i: [] for i in range(len(scene.meteors))})
    frames = []
    for t in range(scene.n_frames):
        img = np.full((scene.height, scene.width), scene.background, dtype=np.float64)
        pose = poses[t]
        for (x, y), (_, _, peak, sigma) in zip(_to_image(pose, star_xy, scene), stars):
            _splat_star(img, x, y, peak, sigma)
        for i, met in enumerate(scene.meteors):
            k = t - met.t_start
            if not 0 <= k < met.duration:
                continue
            c = met.center(k)
            ends = _to_image(pose, [met.center(k - 0.5), met.center(k + 0.5)], scene)
            _splat_streak(img, ends[0], ends[1], met.intensity, met.thickness)
            (cx, cy), = _to_image(pose, [c], scene)
            truth.meteors[i].append((t, float(cx), float(cy)))
        if scene.noise > 0:
            img += rng.normal(0.0, scene.noise, img.shape)
        frames.append(GrayFrame(np.clip(np.rint(img), 0, 255).astype(np.uint8), t))
    return frames, truth


def random_scene(seed, width=640, height=480, n_frames=100, n_stars=50, n_meteors=(1, 3),
                 speed=(3.0, 8.0), duration=(5, 15), jitter_shift=2.0, jitter_angle=0.001,
                 noise=2.0, **kw):
    """A :class:`SceneSpec` with randomly placed, non-overlapping meteors."""
    rng = np.random.default_rng([seed, 0x6D65])
    probe = SceneSpec(width, height, n_frames, jitter_shift=jitter_shift, jitter_angle=jitter_angle, **kw)
    m = probe.margin
    lo, hi = n_meteors if isinstance(n_meteors, tuple) else (n_meteors, n_meteors)
    count = int(rng.integers(lo, hi + 1))
    meteors = []
    tries = 0
    while len(meteors) < count:
        tries += 1
        if tries > 1000:
            raise SceneError("cannot place meteors")
        dur = int(rng.integers(duration[0], duration[1] + 1))
        dur = min(dur, n_frames)
        t0 = int(rng.integers(0, n_frames - dur + 1))
        sp = rng.uniform(*speed)
        ang = rng.uniform(0, 2 * math.pi)
        v = (sp * math.cos(ang), sp * math.sin(ang))
        pad = m + 0.5 * sp + 10
        length = sp * (dur - 1)
        xs = (pad - min(0, v[0] * (dur - 1)), width - 1 - pad - max(0, v[0] * (dur - 1)))
        ys = (pad - min(0, v[1] * (dur - 1)), height - 1 - pad - max(0, v[1] * (dur - 1)))
        if xs[0] >= xs[1] or ys[0] >= ys[1] or length > min(width, height):
            continue
        start = (rng.uniform(*xs), rng.uniform(*ys))
        cand = MeteorSpec(t0, dur, start, v, float(rng.uniform(200, 255)))
        if any(_paths_close(cand, other) for other in meteors):
            continue
        meteors.append(cand)
    return SceneSpec(width, height, n_frames, n_stars, meteors=tuple(meteors),
                     jitter_shift=jitter_shift, jitter_angle=jitter_angle, noise=noise,
                     seed=int(rng.integers(0, 2**31)), **kw)


def _paths_close(a, b, clearance=40.0):
    # meteors sharing frames must stay apart for their whole overlap
    t0 = max(a.t_start, b.t_start)
    t1 = min(a.t_start + a.duration, b.t_start + b.duration)
    for t in range(t0 - 1, t1 + 1):
        pa = a.center(min(max(t - a.t_start, 0), a.duration - 1))
        pb = b.center(min(max(t - b.t_start, 0), b.duration - 1))
        if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) < clearance:
            return True
    return False


def write_truth_csv(truth: GroundTruth, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["meteor_id", "t", "x", "y"])
        for mid in sorted(truth.meteors):
            for t, x, y in truth.meteors[mid]:
                w.writerow([mid, t, f"{x:.4f}", f"{y:.4f}"])


def read_truth_csv(path):
    truth = GroundTruth()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            truth.meteors.setdefault(int(row["meteor_id"]), []).append(
                (int(row["t"]), float(row["x"]), float(row["y"]))
            )
    return truth


# ---------------------------------------------------------------------------
# Tracks

TRACK_FIELDS = ["track_id", "t_begin", "t_end", "status", "t", "x", "y", "residual"]


def write_tracks_csv(tracks, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACK_FIELDS)
        for tr in tracks:
            for st in tr.states:
                w.writerow([tr.id, tr.t_begin, tr.t_end, tr.status, st.t,
                            f"{st.x:.4f}", f"{st.y:.4f}", f"{st.residual:.4f}"])


def read_tracks_csv(path):
    tracks = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tid = int(row["track_id"])
            tr = tracks.setdefault(tid, Track(tid, status=row["status"], closed=True))
            tr.states.append(TrackState(int(row["t"]), float(row["x"]), float(row["y"]),
                                        float(row["residual"])))
    return [tracks[k] for k in sorted(tracks, key=lambda k: (tracks[k].t_begin, k))]


def _hits(track, positions, tol):
    at = {t: (x, y) for t, x, y in positions}
    n = 0
    for st in track.states:
        p = at.get(st.t)
        if p is not None and math.hypot(st.x - p[0], st.y - p[1]) <= tol:
            n += 1
    return n


def score(tracks, truth: GroundTruth, tol=1.5, min_hits=3):
    """Return ``(recall, false_positives)`` of confirmed ``tracks``.

    A meteor counts as detected when one confirmed track is within ``tol``
    of its true position on at least ``min_hits`` frames; a confirmed track
    that achieves this for no meteor is a false positive.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    confirmed = [tr for tr in tracks if tr.status == CONFIRMED]
    detected = set()
    false_pos = 0
    for tr in confirmed:
        matched = [mid for mid, pos in truth.meteors.items() if _hits(tr, pos, tol) >= min_hits]
        detected.update(matched)
        if not matched:
            false_pos += 1
    total = len(truth.meteors)
    recall = len(detected) / total if total else 1.0
    return recall, false_pos
