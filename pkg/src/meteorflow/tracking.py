"""Temporal tracking of moving components."""
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ContractViolationError

DEFAULT_TRACK_MIN = 3

POTENTIAL = "potential"
CONFIRMED = "confirmed"


class TrackState(NamedTuple):
    t: int
    x: float
    y: float
    residual: float


@dataclass
class Track:
    """A chain of per-frame positions of one moving object.

    ``status`` is ``"confirmed"`` once the object has been seen moving on
    ``track_min`` frames, ``"potential"`` before that.  ``closed`` is set
    when the track stops being extended.
    """

    id: int
    states: list = field(default_factory=list)
    status: str = POTENTIAL
    closed: bool = False

    @property
    def t_begin(self):
        return self.states[0].t

    @property
    def t_end(self):
        return self.states[-1].t

    def __len__(self):
        return len(self.states)


class Tracker:
    """Frame-ordered state machine turning moving associations into tracks.

    Not thread-safe: one thread at a time must drive :meth:`update`.
    """

    def __init__(self, track_min=DEFAULT_TRACK_MIN):
        if track_min < 1:
            raise ValueError(f"track_min must be >= 1, got {track_min}")
        self.track_min = track_min
        self.active = {}
        self.finished = []
        self.next_id = 1
        self.last_t = None

    def _promote(self, track):
        if len(track.states) >= self.track_min:
            track.status = CONFIRMED

    def update(self, t, moving, cur, prev=None):
        """Advance to frame ``t`` with its moving associations.

        ``cur`` (and optionally ``prev``) are the component lists the
        associations refer to.  Without ``prev`` the starting position of a
        new track is recovered from the association's displacement.
        """
        if self.last_t is not None and t <= self.last_t:
            raise ContractViolationError(f"frame {t} is not after last frame {self.last_t}")
        self.last_t = t
        cur_by = {c.label: c for c in cur}
        prev_by = {c.label: c for c in prev} if prev is not None else None
        new_active = {}
        for a in moving:
            c = cur_by[a.cur_label]
            state = TrackState(t, c.cx, c.cy, a.residual)
            track = self.active.pop(a.prev_label, None)
            if track is None:
                track = Track(self.next_id)
                self.next_id += 1
                if prev_by is not None:
                    p = prev_by[a.prev_label]
                    px, py = p.cx, p.cy
                else:
                    px, py = c.cx - a.dx, c.cy - a.dy
                track.states.append(TrackState(t - 1, px, py, a.residual))
            track.states.append(state)
            self._promote(track)
            new_active[a.cur_label] = track
        for track in self.active.values():
            track.closed = True
            self.finished.append(track)
        self.active = new_active
        return self

    def finalize(self, confirmed_only=False):
        """Close every active track and return all tracks by ``(t_begin, id)``."""
        for track in self.active.values():
            track.closed = True
            self.finished.append(track)
        self.active = {}
        tracks = sorted(self.finished, key=lambda tr: (tr.t_begin, tr.id))
        if confirmed_only:
            tracks = [tr for tr in tracks if tr.status == CONFIRMED]
        return tracks
