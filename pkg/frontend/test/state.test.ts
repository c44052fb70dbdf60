import { describe, expect, it } from 'vitest';

import { StateMirror } from '../src/state';

describe('state mirror', () => {
  it('starts disconnected and forbids everything', () => {
    const s = new StateMirror();
    expect(s.mode).toBe('disconnected');
    expect(s.allows('status')).toBe(false);
    expect(s.allows('start')).toBe(false);
  });

  it('forbids impedance while streaming', () => {
    const s = new StateMirror();
    s.applyStatus('streaming');
    expect(s.allows('impedance')).toBe(false);
    expect(s.allows('stop')).toBe(true);
    expect(s.allows('mark')).toBe(true);
  });

  it('allows impedance only when idle', () => {
    const s = new StateMirror();
    for (const mode of ['idle', 'streaming', 'replay', 'impedance'] as const) {
      s.applyStatus(mode);
      expect(s.allows('impedance'), mode).toBe(mode === 'idle');
    }
  });

  it('forbids start and configure outside idle', () => {
    const s = new StateMirror();
    s.applyStatus('replay');
    expect(s.allows('start')).toBe(false);
    expect(s.allows('configure')).toBe(false);
    s.applyStatus('idle');
    expect(s.allows('start')).toBe(true);
    expect(s.allows('configure')).toBe(true);
  });

  it('limits scenario steering to live streaming', () => {
    const s = new StateMirror();
    s.applyStatus('replay');
    expect(s.allows('scenario_set')).toBe(false);
    s.applyStatus('streaming');
    expect(s.allows('scenario_set')).toBe(true);
  });

  it('tracks acked transitions', () => {
    const s = new StateMirror();
    s.applyStatus('idle');
    s.applyAck('start');
    expect(s.mode).toBe('streaming');
    s.applyAck('stop');
    expect(s.mode).toBe('idle');
  });

  it('prefers the mode reported with the ack', () => {
    const s = new StateMirror();
    s.applyStatus('idle');
    s.applyAck('start', 'replay');
    expect(s.mode).toBe('replay');
  });

  it('ignores unknown modes from the server', () => {
    const s = new StateMirror();
    s.applyStatus('idle');
    s.applyStatus('haywire');
    expect(s.mode).toBe('idle');
  });
});
