"""Sliding-window epoch extraction, the feature-export hook for ML consumers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Epoch:
    data: np.ndarray              # (n_channels, window_len) µV
    start_index: int
    markers: list = field(default_factory=list)   # (sample_index, text) inside window

    @property
    def label(self):
        return self.markers[0][1] if self.markers else None


def epoch_extract(data: np.ndarray, fs: float, window_s: float, hop_s: float,
                  markers=(), start_index: int = 0) -> list[Epoch]:
    """Cut (n_channels, n) data into windows of window_s advancing by hop_s.

    A marker attaches to every epoch whose span covers its sample index.
    """
    if not 0 < hop_s <= window_s:
        raise ValueError("need window_s >= hop_s > 0")
    data = np.atleast_2d(data)
    win = int(round(window_s * fs))
    hop = int(round(hop_s * fs))
    n = data.shape[1]
    epochs = []
    for off in range(0, n - win + 1, hop):
        abs_start = start_index + off
        inside = [(idx, text) for idx, text in markers
                  if abs_start <= idx < abs_start + win]
        epochs.append(Epoch(data[:, off:off + win].copy(), abs_start, inside))
    return epochs
