// In-process stand-in for the acquisition server: same control grammar,
// same state machine, same wire messages, no sockets.

import { ConsoleSocket } from '../src/client';
import { encodeJson, encodeSamples, Kind } from '../src/wire';

type ServerMode = 'idle' | 'streaming' | 'impedance';

export interface MockReading {
  channel: number;
  ohms: number;
  quality: string;
}

export class MockServer {
  mode: ServerMode = 'idle';
  /** When set, new connections die before answering anything. */
  offline = false;
  seq = 0;
  samplesSent = 0;
  impedanceReadings: MockReading[] = [
    { channel: 0, ohms: 5_000, quality: 'good' },
    { channel: 1, ohms: 32_000, quality: 'acceptable' },
    { channel: 2, ohms: 120_000, quality: 'poor' },
    { channel: 3, ohms: 812_000, quality: 'open' },
  ];
  dropped = 0;
  receivedControl: Record<string, unknown>[] = [];
  markers: { sample_index: number; text: string }[] = [];

  private sockets: MockSocket[] = [];

  /** Factory to hand to ConsoleClient. */
  connect = (): ConsoleSocket => {
    const sock = new MockSocket(this);
    this.sockets.push(sock);
    return sock;
  };

  handleControl(msg: Record<string, unknown>): Record<string, unknown> {
    this.receivedControl.push(msg);
    const cmd = msg.cmd;
    switch (cmd) {
      case 'status':
        return { ok: true, status: this.statusDoc() };
      case 'start':
        if (this.mode !== 'idle') return this.stateError('start');
        this.mode = 'streaming';
        return { ok: true, mode: 'streaming' };
      case 'stop':
        if (this.mode !== 'streaming') return this.stateError('stop');
        this.mode = 'idle';
        return { ok: true, mode: 'idle' };
      case 'impedance': {
        if (this.mode !== 'idle') return this.stateError('impedance');
        const readings = this.impedanceReadings;
        this.broadcast(encodeJson(Kind.Impedance, ++this.seq, { readings }));
        return { ok: true, readings };
      }
      case 'mark': {
        if (this.mode !== 'streaming') return this.stateError('mark');
        const marker = {
          sample_index: this.samplesSent, text: String(msg.text ?? ''),
        };
        this.markers.push(marker);
        this.broadcast(encodeJson(Kind.Event, ++this.seq, {
          type: 'marker', ...marker,
        }));
        return { ok: true, sample_index: marker.sample_index };
      }
      case 'scenario_set':
        if (this.mode !== 'streaming') return this.stateError('scenario_set');
        return { ok: true, t_s: this.samplesSent / 250 };
      default:
        return { ok: false, error: 'parse', message: `unknown cmd ${cmd}` };
    }
  }

  statusDoc(): Record<string, unknown> {
    return {
      mode: this.mode,
      sample_rate: 250,
      samples_recorded: this.samplesSent,
      subscribers: [{ name: 'ws', dropped: this.dropped }],
      impedance: [],
    };
  }

  /** Emit one block of samples to every client. */
  emitSamples(nSamples: number, nChannels = 8, fill = 0): void {
    const block = new Float32Array(nSamples * nChannels).fill(fill);
    this.broadcast(
      encodeSamples(++this.seq, this.samplesSent, block, nChannels),
    );
    this.samplesSent += nSamples;
  }

  emitEvent(payload: Record<string, unknown>): void {
    this.broadcast(encodeJson(Kind.Event, ++this.seq, payload));
  }

  emitStatus(): void {
    this.broadcast(encodeJson(Kind.Status, ++this.seq, this.statusDoc()));
  }

  broadcast(data: Uint8Array): void {
    for (const sock of this.sockets) {
      if (sock.isOpen) sock.onBinary?.(data);
    }
  }

  /** Kill every open connection, as a network drop would. */
  dropConnections(): void {
    for (const sock of this.sockets) sock.serverClose();
    this.sockets = this.sockets.filter((s) => s.isOpen);
  }

  private stateError(what: string): Record<string, unknown> {
    return {
      ok: false, error: 'state',
      message: `${what} not allowed in mode '${this.mode}'`,
    };
  }
}

class MockSocket implements ConsoleSocket {
  onText: ((text: string) => void) | null = null;
  onBinary: ((data: Uint8Array) => void) | null = null;
  onClose: (() => void) | null = null;
  isOpen = true;

  constructor(private server: MockServer) {}

  sendText(text: string): void {
    if (!this.isOpen) throw new Error('socket closed');
    if (this.server.offline) {
      queueMicrotask(() => this.serverClose());
      return;
    }
    const resp = this.server.handleControl(JSON.parse(text));
    // deliver the reply asynchronously like a real socket would
    queueMicrotask(() => {
      if (this.isOpen) this.onText?.(JSON.stringify(resp));
    });
  }

  close(): void {
    this.isOpen = false;
  }

  serverClose(): void {
    if (!this.isOpen) return;
    this.isOpen = false;
    this.onClose?.();
  }
}
