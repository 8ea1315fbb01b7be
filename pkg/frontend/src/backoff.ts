/**
 * Exponential reconnect backoff for the live event stream: 0.5 s doubling
 * to an 8 s ceiling, reset on a healthy connection.
 */

export const INITIAL_DELAY_MS = 500;
export const MAX_DELAY_MS = 8_000;

export class Backoff {
  private attempts = 0;

  constructor(
    private initialMs: number = INITIAL_DELAY_MS,
    private maxMs: number = MAX_DELAY_MS,
  ) {}

  /** Delay before the next attempt, advancing the schedule. */
  nextDelayMs(): number {
    const delay = Math.min(this.initialMs * 2 ** this.attempts, this.maxMs);
    this.attempts += 1;
    return delay;
  }

  reset(): void {
    this.attempts = 0;
  }
}
