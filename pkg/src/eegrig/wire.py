"""Data-plane message format shared by the server and its clients.

Binary, little-endian:

    magic    u16  0x4E52 ("NR")
    version  u8   1
    kind     u8   1=samples 2=event 3=impedance 4=status
    seq      u32  message sequence number
    first    u64  sample index of the first sample (0 for JSON kinds)
    n_samp   u16  samples per channel (0 for JSON kinds)
    n_chan   u8   channels (0 for JSON kinds)
    payload  kind 1: n_samp * n_chan f32 µV, sample-major
             kinds 2-4: u32 JSON length + UTF-8 JSON

Control-plane messages are plain JSON text; see server.handle_control.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = 0x4E52
VERSION = 1

KIND_SAMPLES = 1
KIND_EVENT = 2
KIND_IMPEDANCE = 3
KIND_STATUS = 4

_HEADER = struct.Struct("<HBBIQHB")
_U32 = struct.Struct("<I")
HEADER_SIZE = _HEADER.size


class WireError(ValueError):
    pass


@dataclass
class DataMessage:
    kind: int
    seq: int
    first_index: int = 0
    samples: np.ndarray | None = None   # (n_samples, n_channels) f32
    payload: dict | None = None


def pack_samples(seq: int, first_index: int, samples: np.ndarray) -> bytes:
    """samples: (n_samples, n_channels) µV."""
    s = np.ascontiguousarray(samples, dtype="<f4")
    n_samp, n_chan = s.shape
    head = _HEADER.pack(MAGIC, VERSION, KIND_SAMPLES, seq & 0xFFFFFFFF,
                        first_index, n_samp, n_chan)
    return head + s.tobytes()


def pack_json(kind: int, seq: int, payload: dict) -> bytes:
    if kind not in (KIND_EVENT, KIND_IMPEDANCE, KIND_STATUS):
        raise WireError(f"kind {kind} does not carry JSON")
    body = json.dumps(payload).encode()
    head = _HEADER.pack(MAGIC, VERSION, kind, seq & 0xFFFFFFFF, 0, 0, 0)
    return head + _U32.pack(len(body)) + body


def unpack(buf: bytes) -> DataMessage:
    if len(buf) < HEADER_SIZE:
        raise WireError("message shorter than header")
    magic, version, kind, seq, first, n_samp, n_chan = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise WireError(f"bad magic 0x{magic:04X}")
    if version != VERSION:
        raise WireError(f"unsupported version {version}")
    body = buf[HEADER_SIZE:]
    if kind == KIND_SAMPLES:
        want = n_samp * n_chan * 4
        if len(body) != want:
            raise WireError(f"sample payload length {len(body)} != {want}")
        samples = np.frombuffer(body, dtype="<f4").reshape(n_samp, n_chan)
        return DataMessage(kind, seq, first, samples=samples)
    if kind in (KIND_EVENT, KIND_IMPEDANCE, KIND_STATUS):
        if len(body) < 4:
            raise WireError("missing JSON length prefix")
        (jlen,) = _U32.unpack_from(body, 0)
        if len(body) != 4 + jlen:
            raise WireError("JSON payload length mismatch")
        return DataMessage(kind, seq, first, payload=json.loads(body[4:]))
    raise WireError(f"unknown message kind {kind}")
