"""Compare the compiled biquad kernel against the scipy fallback.

Runs the streaming 1-40 Hz bandpass over synthetic 8-channel data in both
backends, chunked the same way the acquisition loop chunks it, and prints
throughput as a multiple of real time at 250 SPS.

Run both sides from one shell:

    python benchmarks/bench_filters.py
    EEGRIG_NO_EXT=1 python benchmarks/bench_filters.py
"""

import argparse
import time

import numpy as np

from eegrig.dsp import kernels
from eegrig.dsp.filters import FilterSpec, StreamingFilter

FS = 250.0


def bench(duration_s: float, chunk: int, repeats: int) -> float:
    rng = np.random.default_rng(1)
    n = int(duration_s * FS)
    x = rng.standard_normal((8, n)) * 30.0
    best = np.inf
    for _ in range(repeats):
        f = StreamingFilter(FilterSpec("bandpass", 1.0, 40.0, 4, FS))
        t0 = time.perf_counter()
        for off in range(0, n, chunk):
            f.process_array(x[:, off:off + chunk])
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=600.0,
                    help="seconds of simulated signal (default 600)")
    ap.add_argument("--chunk", type=int, default=25,
                    help="samples per chunk, matching the acquisition loop")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    elapsed = bench(args.duration, args.chunk, args.repeats)
    rate = args.duration / elapsed
    print(f"backend:    {kernels.BACKEND}")
    print(f"signal:     8 ch x {args.duration:.0f} s at {FS:.0f} SPS, "
          f"chunks of {args.chunk}")
    print(f"best run:   {elapsed * 1e3:.1f} ms  ({rate:.0f}x real time)")


if __name__ == "__main__":
    main()
