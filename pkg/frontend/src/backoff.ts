// Reconnect backoff: exponential with a cap, reset on a successful connect.

export class Backoff {
  private attempt = 0;

  constructor(
    public readonly baseMs = 250,
    public readonly capMs = 10_000,
    public readonly factor = 2,
  ) {}

  /** Delay to wait before the next attempt, in milliseconds. */
  next(): number {
    const delay = Math.min(this.baseMs * this.factor ** this.attempt, this.capMs);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }

  get attempts(): number {
    return this.attempt;
  }
}
