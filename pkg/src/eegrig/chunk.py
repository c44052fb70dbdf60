"""Calibrated sample chunks passed between pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SignalChunk:
    """Channel-major microvolt samples plus their position on the timeline.

    ``data`` has shape (n_channels, n_samples); ``start_index`` is the sample
    index of column 0.  The sample index, not wall-clock time, is the
    authoritative timeline everywhere in the rig.
    """

    data: np.ndarray
    start_index: int
    fs: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("chunk data must be 2-D (channels x samples)")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def end_index(self) -> int:
        return self.start_index + self.n_samples

    def times(self) -> np.ndarray:
        return (self.start_index + np.arange(self.n_samples)) / self.fs


def concat_chunks(chunks) -> SignalChunk:
    chunks = list(chunks)
    if not chunks:
        raise ValueError("no chunks to concatenate")
    for a, b in zip(chunks, chunks[1:]):
        if b.start_index != a.end_index:
            raise ValueError("chunks are not contiguous")
    data = np.concatenate([c.data for c in chunks], axis=1)
    return SignalChunk(data, chunks[0].start_index, chunks[0].fs)
