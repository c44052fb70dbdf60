"""Session persistence: .neurec recordings, markers, CSV export, replay.

.neurec layout (all little-endian):

    magic   4s   b"NREC"
    version u16  1
    mlen    u32  length of metadata JSON
    meta    mlen bytes of UTF-8 JSON
    mcrc    u32  CRC32 of the metadata bytes
    blocks:
        first   u64  sample index of the block's first frame
        n       u32  frames in block
        data    n * 8 * f32 microvolts, channel-interleaved per frame
        crc     u32  CRC32 over the block header + data

Markers live in a markers.json sidecar inside the session directory so a
crash mid-recording can cost at most the last unflushed second of samples
and markers.  Binary is canonical; CSV export exists for external tools.
"""

from __future__ import annotations

import json
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chunk import SignalChunk
from .protocol import DEFAULT_MONTAGE, DeviceConfig, NUM_CHANNELS, SampleFrame, microvolts_to_raw

MAGIC = b"NREC"
VERSION = 1
RECORDING_NAME = "recording.neurec"
MARKERS_NAME = "markers.json"
FLUSH_INTERVAL_S = 1.0

_HEAD = struct.Struct("<4sH")
_U32 = struct.Struct("<I")
_BLOCK_HEAD = struct.Struct("<QI")


class SessionError(Exception):
    pass


@dataclass
class SessionMetadata:
    session_id: str
    start_timestamp: float
    sample_rate: int = 250
    gain: int = 24
    vref: float = 4.5
    montage: tuple[str, ...] = DEFAULT_MONTAGE
    electrode_type: str = "dry Ag/AgCl"
    operator: str = ""

    def __post_init__(self):
        self.montage = tuple(self.montage)
        if len(self.montage) != NUM_CHANNELS:
            raise ValueError("montage needs 8 labels")
        if len(set(self.montage)) != NUM_CHANNELS:
            raise ValueError("montage labels must be unique")

    @classmethod
    def create(cls, session_id: str, config: DeviceConfig, operator: str = "") -> "SessionMetadata":
        return cls(session_id, time.time(), config.sample_rate, config.gain,
                   config.vref, operator=operator)


@dataclass(frozen=True)
class Marker:
    sample_index: int
    kind: str = "user"     # user | blink | chew | state-change | protocol
    text: str = ""


class SessionWriter:
    """One writer per session; append only from the acquisition consumer."""

    def __init__(self, directory, metadata: SessionMetadata):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.metadata = metadata
        self.markers: list[Marker] = []
        self._next_index = None
        self._pending: list[np.ndarray] = []
        self._pending_first = 0
        self._closed = False
        self._last_flush = time.monotonic()

        self._f = open(self.dir / RECORDING_NAME, "wb")
        meta_bytes = json.dumps(asdict(metadata)).encode()
        self._f.write(_HEAD.pack(MAGIC, VERSION))
        self._f.write(_U32.pack(len(meta_bytes)))
        self._f.write(meta_bytes)
        self._f.write(_U32.pack(zlib.crc32(meta_bytes)))

    def append(self, chunk: SignalChunk) -> None:
        if self._closed:
            raise SessionError("session already closed")
        if chunk.n_channels != NUM_CHANNELS:
            raise SessionError("chunk must carry 8 channels")
        if self._next_index is None:
            self._next_index = chunk.start_index
            self._pending_first = chunk.start_index
        elif chunk.start_index != self._next_index:
            raise SessionError(
                f"non-monotone append: expected index {self._next_index}, "
                f"got {chunk.start_index}")
        self._pending.append(chunk.data.T.astype("<f4"))
        self._next_index += chunk.n_samples
        if time.monotonic() - self._last_flush >= FLUSH_INTERVAL_S:
            self.flush()

    def add_marker(self, marker: Marker) -> None:
        if self._closed:
            raise SessionError("session already closed")
        self.markers.append(marker)

    def flush(self) -> None:
        if self._pending:
            data = np.concatenate(self._pending, axis=0)
            payload = _BLOCK_HEAD.pack(self._pending_first, data.shape[0]) + data.tobytes()
            try:
                self._f.write(payload)
                self._f.write(_U32.pack(zlib.crc32(payload)))
                self._f.flush()
            except OSError as e:
                raise SessionError(
                    f"write failed ({e}); partial file up to sample "
                    f"{self._pending_first} may be salvageable") from e
            self._pending = []
            self._pending_first = self._next_index
        self._write_markers()
        self._last_flush = time.monotonic()

    def _write_markers(self):
        payload = [asdict(m) for m in self.markers]
        (self.dir / MARKERS_NAME).write_text(json.dumps(payload, indent=1))

    def close(self) -> None:
        if self._closed:
            return
        self.flush()
        self._f.close()
        self._closed = True


def open_session(directory, metadata: SessionMetadata) -> SessionWriter:
    return SessionWriter(directory, metadata)


@dataclass
class SessionRecord:
    metadata: SessionMetadata
    data: np.ndarray            # (8, n) float32 µV
    markers: list[Marker]
    truncated: bool = False     # a trailing corrupt/incomplete block was dropped
    diagnostic: str = ""

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def _recording_path(path) -> Path:
    p = Path(path)
    return p / RECORDING_NAME if p.is_dir() else p


def read_session(path) -> SessionRecord:
    """Load a session directory or .neurec file.

    Raises SessionError on a bad magic/version/header checksum; a corrupt
    data block truncates the result and sets the diagnostic instead.
    """
    rec_path = _recording_path(path)
    blob = rec_path.read_bytes()
    if len(blob) < _HEAD.size + _U32.size:
        raise SessionError("file too short for header")
    magic, version = _HEAD.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SessionError("bad magic; not a .neurec file")
    if version != VERSION:
        raise SessionError(f"unsupported version {version}")
    off = _HEAD.size
    (mlen,) = _U32.unpack_from(blob, off)
    off += 4
    if off + mlen + 4 > len(blob):
        raise SessionError("truncated metadata")
    meta_bytes = blob[off:off + mlen]
    off += mlen
    (mcrc,) = _U32.unpack_from(blob, off)
    off += 4
    if zlib.crc32(meta_bytes) != mcrc:
        raise SessionError("metadata checksum mismatch")
    meta = SessionMetadata(**json.loads(meta_bytes))

    blocks = []
    expected = None
    truncated = False
    diagnostic = ""
    while off < len(blob):
        if off + _BLOCK_HEAD.size + 4 > len(blob):
            truncated, diagnostic = True, "incomplete trailing block header"
            break
        first, n = _BLOCK_HEAD.unpack_from(blob, off)
        body_len = _BLOCK_HEAD.size + n * NUM_CHANNELS * 4
        if off + body_len + 4 > len(blob):
            truncated, diagnostic = True, f"truncated block at sample {first}"
            break
        payload = blob[off:off + body_len]
        (crc,) = _U32.unpack_from(blob, off + body_len)
        if zlib.crc32(payload) != crc:
            truncated, diagnostic = True, f"block CRC mismatch at sample {first}"
            break
        if expected is not None and first != expected:
            truncated, diagnostic = True, f"block index gap at sample {first}"
            break
        data = np.frombuffer(payload, dtype="<f4", offset=_BLOCK_HEAD.size)
        blocks.append(data.reshape(n, NUM_CHANNELS))
        expected = first + n
        off += body_len + 4

    if blocks:
        data = np.concatenate(blocks, axis=0).T.copy()
    else:
        data = np.zeros((NUM_CHANNELS, 0), dtype=np.float32)

    markers = []
    mpath = rec_path.parent / MARKERS_NAME
    if mpath.exists():
        markers = [Marker(**m) for m in json.loads(mpath.read_text())]
        for m in markers:
            if m.sample_index > data.shape[1]:
                raise SessionError(f"marker at {m.sample_index} beyond recording")
    return SessionRecord(meta, data, markers, truncated, diagnostic)


def export_csv(record: SessionRecord, path) -> None:
    """Write the # metadata + index,t_s,<montage...>,marker CSV form."""
    meta = record.metadata
    fs = meta.sample_rate
    marker_at = {}
    for m in record.markers:
        marker_at.setdefault(m.sample_index, []).append(m.text or m.kind)
    with open(path, "w") as f:
        f.write(f"# session_id: {meta.session_id}\n")
        f.write(f"# start_timestamp: {meta.start_timestamp}\n")
        f.write(f"# sample_rate: {fs}\n")
        f.write(f"# electrode_type: {meta.electrode_type}\n")
        f.write("index,t_s," + ",".join(meta.montage) + ",marker\n")
        for i in range(record.n_samples):
            vals = ",".join(repr(float(v)) for v in record.data[:, i])
            mark = ";".join(marker_at.get(i, []))
            f.write(f"{i},{i / fs},{vals},{mark}\n")


class ReplayDevice:
    """Re-emits a recording through the live frame-stream interface.

    speed is a wall-clock multiplier; 0 means as-fast-as-possible.
    """

    def __init__(self, record: SessionRecord, speed: float = 0.0):
        self.record = record
        self.speed = speed
        self.config = DeviceConfig(sample_rate=record.metadata.sample_rate,
                                   gain=record.metadata.gain,
                                   vref=record.metadata.vref)
        self._index = 0
        self._t0 = time.monotonic()
        self.streaming = True

    def read_frame(self):
        from . import protocol
        if not self.streaming or self._index >= self.record.n_samples:
            if self.record.truncated and self._index >= self.record.n_samples:
                self.streaming = False
            return None
        if self.speed > 0:
            due = self._t0 + (self._index + 1) / (self.config.sample_rate * self.speed)
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        uv = self.record.data[:, self._index]
        raw = microvolts_to_raw(uv, self.config.gain, self.config.vref)
        frame = SampleFrame.make([int(r) for r in raw], seq=self._index)
        self._index += 1
        return protocol.encode_frame(frame)

    def read_frames(self, n: int) -> list[bytes]:
        out = []
        for _ in range(n):
            f = self.read_frame()
            if f is None:
                break
            out.append(f)
        return out

    def read_block(self, n: int) -> bytes:
        """Vectorized replay hot path; same frames as n read_frame calls."""
        from . import protocol
        if not self.streaming:
            return b""
        k0 = self._index
        n = min(n, self.record.n_samples - k0)
        if n <= 0:
            return b""
        uv = self.record.data[:, k0:k0 + n].T.astype(np.float64)
        raw = microvolts_to_raw(uv, self.config.gain, self.config.vref)
        wire = protocol.encode_frames_array(raw, 0xC00000)
        self._index += n
        if self.speed > 0:
            due = self._t0 + self._index / (self.config.sample_rate * self.speed)
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        return wire


def replay(path_or_record, speed: float = 0.0) -> ReplayDevice:
    record = path_or_record
    if not isinstance(record, SessionRecord):
        record = read_session(path_or_record)
    return ReplayDevice(record, speed)
