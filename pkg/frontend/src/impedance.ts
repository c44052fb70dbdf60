// Impedance traffic-light panel model: one cell per montage site.
//
// Tier limits mirror the server's quality table (dry electrodes); the view
// layer only maps the cell list onto the 10-20 head map.

export const MONTAGE = ['F7', 'Fz', 'F8', 'C3', 'C4', 'T5', 'Pz', 'T6'] as const;

export type Quality = 'good' | 'acceptable' | 'poor' | 'open';

export const TIER_LIMITS_OHMS: ReadonlyArray<[number, Quality]> = [
  [10_000, 'good'],
  [50_000, 'acceptable'],
  [200_000, 'poor'],
];

export const TIER_COLORS: Record<Quality, string> = {
  good: 'green',
  acceptable: 'yellow',
  poor: 'orange',
  open: 'red',
};

export function classifyOhms(ohms: number): Quality {
  if (ohms < 0 || !Number.isFinite(ohms)) {
    throw new RangeError(`impedance out of range: ${ohms}`);
  }
  for (const [limit, quality] of TIER_LIMITS_OHMS) {
    if (ohms <= limit) return quality;
  }
  return 'open';
}

export interface ImpedanceReading {
  channel: number;
  ohms: number;
  quality?: Quality;
}

export interface PanelCell {
  site: string;
  channel: number;
  ohms: number | null;
  quality: Quality | null;
  color: string;
}

export class ImpedancePanel {
  private readings = new Map<number, ImpedanceReading>();

  /** Merge one batch of readings (a partial sweep updates only its channels). */
  update(readings: ImpedanceReading[]): void {
    for (const r of readings) {
      if (r.channel < 0 || r.channel >= MONTAGE.length) continue;
      this.readings.set(r.channel, r);
    }
  }

  clear(): void {
    this.readings.clear();
  }

  cells(): PanelCell[] {
    return MONTAGE.map((site, channel) => {
      const r = this.readings.get(channel);
      if (r === undefined) {
        return { site, channel, ohms: null, quality: null, color: 'gray' };
      }
      const quality = r.quality ?? classifyOhms(r.ohms);
      return { site, channel, ohms: r.ohms, quality, color: TIER_COLORS[quality] };
    });
  }

  /** The operator may start recording once every measured site is green. */
  allGood(): boolean {
    const cells = this.cells();
    return cells.every((c) => c.quality === 'good');
  }
}
