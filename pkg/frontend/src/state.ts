// Client-side mirror of the server's mode machine.
//
// The console must never send a control message the server would reject as
// a state error, so buttons are enabled/disabled from this table and
// sendControl refuses anything illegal in the currently displayed mode.

export type ServerMode = 'idle' | 'streaming' | 'replay' | 'impedance';
export type ConsoleMode = ServerMode | 'disconnected';

export type ControlCommand =
  | 'status'
  | 'configure'
  | 'start'
  | 'stop'
  | 'impedance'
  | 'mark'
  | 'scenario_set';

const ALLOWED: Record<ControlCommand, ServerMode[]> = {
  status: ['idle', 'streaming', 'replay', 'impedance'],
  configure: ['idle'],
  start: ['idle'],
  stop: ['streaming', 'replay'],
  impedance: ['idle'],
  mark: ['streaming', 'replay'],
  scenario_set: ['streaming'],
};

export class StateMirror {
  private current: ConsoleMode = 'disconnected';

  get mode(): ConsoleMode {
    return this.current;
  }

  /** Apply the mode reported by a server status document. */
  applyStatus(mode: string): void {
    if (mode === 'idle' || mode === 'streaming' || mode === 'replay'
        || mode === 'impedance') {
      this.current = mode;
    }
  }

  disconnected(): void {
    this.current = 'disconnected';
  }

  allows(cmd: ControlCommand): boolean {
    if (this.current === 'disconnected') return false;
    return ALLOWED[cmd].includes(this.current);
  }

  /** Optimistic local transition after the server acks a command. */
  applyAck(cmd: ControlCommand, reportedMode?: string): void {
    if (reportedMode !== undefined) {
      this.applyStatus(reportedMode);
      return;
    }
    if (cmd === 'start') this.current = 'streaming';
    if (cmd === 'stop' || cmd === 'impedance') this.current = 'idle';
  }
}
