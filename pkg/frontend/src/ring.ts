// Rolling trace storage: a fixed ring per channel holding the last N seconds.
//
// Display decimation is min/max per pixel column so spikes survive
// downsampling; that is the only "signal processing" the console does.

export class TraceRing {
  readonly capacity: number;
  private buffers: Float32Array[];
  private head = 0;          // next write position
  private filled = 0;        // valid samples (<= capacity)
  private nextIndex: number | null = null;
  gapCount = 0;              // discontinuities seen in the sample index

  constructor(
    public readonly nChannels: number,
    public readonly sampleRate: number,
    windowSeconds = 10,
  ) {
    this.capacity = Math.round(sampleRate * windowSeconds);
    this.buffers = Array.from(
      { length: nChannels }, () => new Float32Array(this.capacity),
    );
  }

  /** Append one sample-major block (samples[i * nChannels + ch]). */
  append(firstIndex: number, samples: Float32Array): void {
    const n = samples.length / this.nChannels;
    if (this.nextIndex !== null && firstIndex !== this.nextIndex) {
      this.gapCount += 1;
    }
    this.nextIndex = firstIndex + n;
    for (let i = 0; i < n; i++) {
      for (let ch = 0; ch < this.nChannels; ch++) {
        this.buffers[ch][this.head] = samples[i * this.nChannels + ch];
      }
      this.head = (this.head + 1) % this.capacity;
    }
    this.filled = Math.min(this.filled + n, this.capacity);
  }

  get length(): number {
    return this.filled;
  }

  /** Oldest-to-newest copy of one channel's window. */
  channel(ch: number): Float32Array {
    const out = new Float32Array(this.filled);
    const start = (this.head - this.filled + this.capacity) % this.capacity;
    for (let i = 0; i < this.filled; i++) {
      out[i] = this.buffers[ch][(start + i) % this.capacity];
    }
    return out;
  }
}

export interface MinMaxColumn {
  min: number;
  max: number;
}

/** Collapse a trace into `columns` pixel columns preserving extremes. */
export function minMaxDecimate(data: Float32Array, columns: number): MinMaxColumn[] {
  if (columns <= 0) throw new RangeError('columns must be positive');
  const out: MinMaxColumn[] = [];
  if (data.length === 0) return out;
  for (let c = 0; c < columns; c++) {
    const lo = Math.floor((c * data.length) / columns);
    const hi = Math.max(lo + 1, Math.floor(((c + 1) * data.length) / columns));
    let mn = data[lo];
    let mx = data[lo];
    for (let i = lo + 1; i < hi && i < data.length; i++) {
      if (data[i] < mn) mn = data[i];
      if (data[i] > mx) mx = data[i];
    }
    out.push({ min: mn, max: mx });
  }
  return out;
}
