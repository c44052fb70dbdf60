"""Online detectors for the two validation experiments:

* threshold/refractory artifact events (blink, chew) on the filtered stream
* alpha eyes-open / eyes-closed state from 8-12 Hz band power

Both are plain streaming state machines; feed them chunks in order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp.power import band_power_array

DEFAULT_THRESHOLD_UV = 75.0
DEFAULT_REFRACTORY_S = 0.5
# one chew event spans ~1 s of bursts; a longer refractory keeps it one event
CHEW_REFRACTORY_S = 1.2


@dataclass
class ArtifactEvent:
    kind: str                 # "blink" | "chew" | "generic"
    channels: tuple[int, ...]
    onset: int                # sample index of the threshold crossing
    peak_uv: float            # largest |x| over the refractory span


class ArtifactDetector:
    """Single-channel threshold detector with refractory hold-off.

    Emits an event when |x| crosses the threshold upward; further crossings
    within refractory_s are folded into the event's peak instead of starting
    a new one.
    """

    def __init__(self, threshold_uv: float = DEFAULT_THRESHOLD_UV,
                 refractory_s: float = DEFAULT_REFRACTORY_S,
                 fs: float = 250.0, kind: str = "generic", channel: int = 1):
        if threshold_uv <= 0:
            raise ValueError("threshold must be positive")
        self.threshold_uv = threshold_uv
        self.refractory = int(round(refractory_s * fs))
        self.fs = fs
        self.kind = kind
        self.channel = channel
        self._index = 0
        self._prev_above = False
        self._open_event: ArtifactEvent | None = None
        self.events: list[ArtifactEvent] = []

    def _close_open_event(self):
        if self._open_event is not None:
            self.events.append(self._open_event)
            self._open_event = None

    def feed(self, x: np.ndarray) -> list[ArtifactEvent]:
        """Process one chunk; returns events finalized during this chunk."""
        start_len = len(self.events)
        for v in np.asarray(x, dtype=float).ravel():
            mag = abs(v)
            above = mag >= self.threshold_uv
            ev = self._open_event
            if ev is not None:
                if self._index - ev.onset >= self.refractory:
                    self._close_open_event()
                    ev = None
                else:
                    ev.peak_uv = max(ev.peak_uv, mag)
            if ev is None and above and not self._prev_above:
                self._open_event = ArtifactEvent(
                    self.kind, (self.channel,), self._index, mag)
            self._prev_above = above
            self._index += 1
        return self.events[start_len:]

    def finish(self) -> list[ArtifactEvent]:
        self._close_open_event()
        return self.events


def detect_artifacts(x: np.ndarray, threshold_uv: float = DEFAULT_THRESHOLD_UV,
                     refractory_s: float = DEFAULT_REFRACTORY_S,
                     fs: float = 250.0, kind: str = "generic",
                     channel: int = 1) -> list[ArtifactEvent]:
    """One-shot detection over an already-filtered single-channel stream."""
    det = ArtifactDetector(threshold_uv, refractory_s, fs, kind, channel)
    det.feed(x)
    return det.finish()


def group_bursts(events: list[ArtifactEvent], gap_s: float, fs: float = 250.0) -> list[int]:
    """Count events per burst group; a gap > gap_s between onsets splits groups."""
    if not events:
        return []
    gap = gap_s * fs
    counts = [1]
    for prev, cur in zip(events, events[1:]):
        if cur.onset < prev.onset:
            raise ValueError("events must be sorted by onset")
        if cur.onset - prev.onset <= gap:
            counts[-1] += 1
        else:
            counts.append(1)
    return counts


def label_chew(events_per_channel: dict[int, list[ArtifactEvent]],
               window_s: float = 1.5, min_events: int = 3,
               min_channels: int = 4, fs: float = 250.0) -> list[ArtifactEvent]:
    """Relabel events as chew where >= min_events crossings fall within
    window_s on >= min_channels channels; isolated frontal events stay blink.

    The hardware experiments distinguish the two only by protocol; this rule
    is the rig's own and is tunable.
    """
    all_events = sorted((e for evs in events_per_channel.values() for e in evs),
                       key=lambda e: e.onset)
    win = window_s * fs
    for e in all_events:
        near = [o for o in all_events if abs(o.onset - e.onset) <= win]
        chans = {o.channels[0] for o in near}
        if len(near) >= min_events and len(chans) >= min_channels:
            e.kind = "chew"
        elif e.kind == "generic":
            e.kind = "blink"
    return all_events


# ---------------------------------------------------------------------------
# Alpha state

@dataclass
class AlphaStateWindow:
    start: int                # sample index
    end: int
    power_uv2: float          # 8-12 Hz band power
    state: str                # "eyes-open" | "eyes-closed"


class CalibrationError(ValueError):
    pass


def alpha_band_powers(x: np.ndarray, fs: float, window_s: float = 1.0,
                      band=(8.0, 12.0), channel: int = 6) -> list[tuple[int, int, float]]:
    """Contiguous non-overlapping windows of band power for one channel.

    Each window is filtered with 1 s of leading context so the settle
    exclusion inside band_power does not eat the window itself.
    """
    x = np.asarray(x, dtype=float).ravel()
    win = int(round(window_s * fs))
    ctx = int(fs)  # leading second reused as filter settle
    out = []
    for start in range(0, len(x) - win + 1, win):
        lo = max(0, start - ctx)
        seg = x[lo:start + win]
        if len(seg) < fs:
            continue
        settle_s = (start - lo) / fs
        p = band_power_array(seg[np.newaxis, :], fs, band, settle_s=settle_s)[0]
        out.append((start, start + win, float(p)))
    return out


def classify_alpha(windows: list[tuple[int, int, float]], baseline_power_uv2: float,
                   ratio_threshold: float = 2.0) -> list[AlphaStateWindow]:
    """Label each power window against an eyes-open baseline."""
    if baseline_power_uv2 <= 0:
        raise CalibrationError("baseline band power must be positive")
    if ratio_threshold <= 1:
        raise ValueError("ratio_threshold must exceed 1")
    out = []
    for start, end, p in windows:
        state = "eyes-closed" if p > ratio_threshold * baseline_power_uv2 else "eyes-open"
        out.append(AlphaStateWindow(start, end, p, state))
    return out
