"""Regenerate the golden wire-format fixtures from the server-side codec.

Run from the repository root with the Python package installed:

    python frontend/fixtures/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from eegrig import wire

HERE = Path(__file__).parent


def main():
    rng = np.random.default_rng(42)
    samples = (rng.standard_normal((25, 8)) * 80.0).astype("<f4")
    event = {"type": "artifact", "kind": "blink", "sample_index": 1234,
             "channel": "Fz", "peak_uv": 151.25}
    impedance = {"readings": [
        {"channel": 0, "ohms": 5210.0, "quality": "good"},
        {"channel": 1, "ohms": 32000.0, "quality": "acceptable"},
        {"channel": 2, "ohms": 120000.0, "quality": "poor"},
        {"channel": 3, "ohms": 812000.0, "quality": "open"},
    ]}
    status = {"mode": "streaming", "sample_rate": 250, "samples_recorded": 5000,
              "subscribers": [{"name": "ws", "dropped": 3}]}

    blobs = {
        "samples.bin": wire.pack_samples(seq=7, first_index=123456, samples=samples),
        "event.bin": wire.pack_json(wire.KIND_EVENT, 8, event),
        "impedance.bin": wire.pack_json(wire.KIND_IMPEDANCE, 9, impedance),
        "status.bin": wire.pack_json(wire.KIND_STATUS, 10, status),
    }
    for name, blob in blobs.items():
        (HERE / name).write_bytes(blob)

    expected = {
        "samples.bin": {
            "kind": 1, "seq": 7, "first_index": 123456,
            "n_samples": 25, "n_channels": 8,
            "values": np.asarray(samples, dtype=float).ravel().tolist(),
        },
        "event.bin": {"kind": 2, "seq": 8, "payload": event},
        "impedance.bin": {"kind": 3, "seq": 9, "payload": impedance},
        "status.bin": {"kind": 4, "seq": 10, "payload": status},
    }
    (HERE / "expected.json").write_text(json.dumps(expected, indent=1))
    print(f"wrote {len(blobs)} fixtures to {HERE}")


if __name__ == "__main__":
    main()
