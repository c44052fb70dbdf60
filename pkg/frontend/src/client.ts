// Console session client: control plane, data plane, reconnect.
//
// The socket is injected so tests drive the client against a mock server;
// in the browser the factory wraps a WebSocket (text frames for control,
// binary frames for the data plane).

import { Backoff } from './backoff';
import { ImpedancePanel, ImpedanceReading } from './impedance';
import { TraceRing } from './ring';
import { ControlCommand, StateMirror } from './state';
import { DataMessage, decodeMessage, Kind } from './wire';

export interface ConsoleSocket {
  sendText(text: string): void;
  close(): void;
  onText: ((text: string) => void) | null;
  onBinary: ((data: Uint8Array) => void) | null;
  onClose: (() => void) | null;
}

export type SocketFactory = () => ConsoleSocket;

export interface ControlResponse {
  ok: boolean;
  error?: string;
  message?: string;
  [key: string]: unknown;
}

export interface TimelineEvent {
  kind: string;
  sampleIndex: number;
  text: string;
}

export interface ClientOptions {
  sampleRate?: number;
  windowSeconds?: number;
  nChannels?: number;
  backoff?: Backoff;
}

export class ClientStateError extends Error {}

interface Pending {
  cmd: ControlCommand;
  resolve: (resp: ControlResponse) => void;
}

export class ConsoleClient {
  readonly state = new StateMirror();
  readonly panel = new ImpedancePanel();
  readonly ring: TraceRing;
  readonly events: TimelineEvent[] = [];
  readonly backoff: Backoff;

  lastStatus: Record<string, unknown> | null = null;
  serverDropCount = 0;
  decodeErrors = 0;

  private socket: ConsoleSocket | null = null;
  private pending: Pending[] = [];
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private factory: SocketFactory, opts: ClientOptions = {}) {
    this.ring = new TraceRing(
      opts.nChannels ?? 8, opts.sampleRate ?? 250, opts.windowSeconds ?? 10,
    );
    this.backoff = opts.backoff ?? new Backoff();
  }

  connect(): void {
    this.closedByUser = false;
    const sock = this.factory();
    this.socket = sock;
    sock.onText = (text) => this.handleControlReply(text);
    sock.onBinary = (data) => this.handleBinary(data);
    sock.onClose = () => this.handleDrop(sock);
    // first thing on every (re)connect: learn the server's mode
    sock.sendText(JSON.stringify({ cmd: 'status' }));
    this.pending.push({ cmd: 'status', resolve: () => undefined });
  }

  disconnect(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.state.disconnected();
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  // -- control plane --------------------------------------------------------

  sendControl(
    cmd: ControlCommand,
    fields: Record<string, unknown> = {},
  ): Promise<ControlResponse> {
    if (this.socket === null) {
      throw new ClientStateError('not connected');
    }
    if (!this.state.allows(cmd)) {
      throw new ClientStateError(
        `'${cmd}' is not legal in mode '${this.state.mode}'`,
      );
    }
    return new Promise((resolve) => {
      this.pending.push({ cmd, resolve });
      this.socket!.sendText(JSON.stringify({ cmd, ...fields }));
    });
  }

  canSend(cmd: ControlCommand): boolean {
    return this.socket !== null && this.state.allows(cmd);
  }

  start(): Promise<ControlResponse> {
    return this.sendControl('start');
  }

  stop(): Promise<ControlResponse> {
    return this.sendControl('stop');
  }

  mark(text: string): Promise<ControlResponse> {
    return this.sendControl('mark', { text });
  }

  runImpedanceCheck(channels?: number[]): Promise<ControlResponse> {
    return this.sendControl('impedance', channels ? { channels } : {});
  }

  setEyesClosed(closed: boolean, amplitudeUv = 50): Promise<ControlResponse> {
    return this.sendControl('scenario_set', {
      eyes_closed: closed, amplitude_uv: amplitudeUv,
    });
  }

  triggerArtifact(kind: 'blink' | 'chew'): Promise<ControlResponse> {
    return this.sendControl('scenario_set', { artifact: kind });
  }

  requestStatus(): Promise<ControlResponse> {
    return this.sendControl('status');
  }

  private handleControlReply(text: string): void {
    const resp = JSON.parse(text) as ControlResponse;
    const pending = this.pending.shift();
    if (pending === undefined) return;   // unsolicited reply; ignore
    if (resp.ok) {
      const mode = typeof resp.mode === 'string' ? resp.mode : undefined;
      this.backoff.reset();
      if (pending.cmd === 'status' || mode !== undefined) {
        const status = (resp.status ?? resp) as Record<string, unknown>;
        this.applyStatusDoc(status, mode);
      } else {
        this.state.applyAck(pending.cmd);
      }
      if (pending.cmd === 'impedance' && Array.isArray(resp.readings)) {
        this.panel.update(resp.readings as ImpedanceReading[]);
      }
    }
    pending.resolve(resp);
  }

  private applyStatusDoc(status: Record<string, unknown>, mode?: string): void {
    if (typeof status.mode === 'string') {
      this.state.applyStatus(status.mode);
    } else if (mode !== undefined) {
      this.state.applyStatus(mode);
    }
    this.lastStatus = status;
    const subs = status.subscribers;
    if (Array.isArray(subs)) {
      this.serverDropCount = subs.reduce(
        (total: number, s) => total + (Number(s?.dropped) || 0), 0,
      );
    }
    if (Array.isArray(status.impedance) && status.impedance.length > 0) {
      this.panel.update(status.impedance as ImpedanceReading[]);
    }
  }

  // -- data plane -----------------------------------------------------------

  private handleBinary(data: Uint8Array): void {
    let msg: DataMessage;
    try {
      msg = decodeMessage(data);
    } catch {
      this.decodeErrors += 1;
      return;
    }
    switch (msg.kind) {
      case Kind.Samples:
        this.ring.append(msg.firstIndex, msg.samples);
        break;
      case Kind.Event: {
        const p = msg.payload as Record<string, unknown>;
        this.events.push({
          kind: String(p.kind ?? p.type ?? 'event'),
          sampleIndex: Number(p.sample_index ?? 0),
          text: String(p.text ?? ''),
        });
        break;
      }
      case Kind.Impedance: {
        const readings = (msg.payload as { readings?: ImpedanceReading[] }).readings;
        if (readings) this.panel.update(readings);
        break;
      }
      case Kind.Status:
        this.applyStatusDoc(msg.payload as Record<string, unknown>);
        break;
    }
  }

  // -- reconnect ------------------------------------------------------------

  private handleDrop(sock: ConsoleSocket): void {
    if (sock !== this.socket) return;   // stale socket
    this.socket = null;
    this.pending = [];
    this.state.disconnected();
    if (this.closedByUser) return;
    const delay = this.backoff.next();
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (!this.closedByUser) this.connect();
    }, delay);
  }
}
