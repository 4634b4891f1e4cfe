/**
 * NDJSON round-stream client.
 *
 * The service replays a run's full event log from the start of every
 * connection and keeps the socket open until the done event. This
 * client parses that stream incrementally, folds events into a single
 * state value, survives connection drops by reconnecting, and notices
 * sequence gaps (a round index jumping past the next expected one),
 * which trigger a resync on a fresh connection.
 */

import type { DoneEvent, RoundEvent, RunEvent, ServiceClient, WarningEvent } from "./api.js";

// ---------------------------------------------------------------------------
// line parsing
// ---------------------------------------------------------------------------

export class NdjsonParser {
  private buffer = "";

  /** Feed a chunk; returns the events completed by it. */
  push(chunk: string): RunEvent[] {
    this.buffer += chunk;
    const lines = this.buffer.split("\n");
    this.buffer = lines.pop() ?? "";
    return lines
      .map((line) => line.trim())
      .filter((line) => line.length > 0)
      .map((line) => JSON.parse(line) as RunEvent);
  }

  /** Drain whatever is left once the stream closes. */
  flush(): RunEvent[] {
    const rest = this.buffer.trim();
    this.buffer = "";
    return rest.length > 0 ? [JSON.parse(rest) as RunEvent] : [];
  }
}

// ---------------------------------------------------------------------------
// event folding
// ---------------------------------------------------------------------------

export interface FeedState {
  rounds: Map<number, RoundEvent>;
  warnings: WarningEvent[];
  done: DoneEvent | null;
  highestRound: number;
  gaps: number;
  reconnects: number;
  lastError: string | null;
}

export function emptyFeedState(): FeedState {
  return {
    rounds: new Map(),
    warnings: [],
    done: null,
    highestRound: 0,
    gaps: 0,
    reconnects: 0,
    lastError: null,
  };
}

/**
 * Fold one event into the state. Replayed events are absorbed without
 * effect, so applying the same recorded stream any number of times
 * leaves the state identical (the dashboard renders purely from it).
 */
export function applyEvent(state: FeedState, event: RunEvent): void {
  if (event.type === "round_complete") {
    if (state.rounds.has(event.round)) return;
    if (event.round > state.highestRound + 1) {
      state.gaps += 1;
    }
    state.rounds.set(event.round, event);
    if (event.round > state.highestRound) state.highestRound = event.round;
  } else if (event.type === "warning") {
    if (state.warnings.some((w) => w.kind === event.kind)) return;
    state.warnings.push(event);
  } else if (event.type === "done") {
    state.done = event;
  }
}

export function orderedRounds(state: FeedState): RoundEvent[] {
  return [...state.rounds.values()].sort((a, b) => a.round - b.round);
}

// ---------------------------------------------------------------------------
// the feed
// ---------------------------------------------------------------------------

export interface FeedOptions {
  /** Re-opens allowed after a drop or gap before giving up. */
  maxReconnects?: number;
  retryDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onChange?: (state: FeedState) => void;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class RoundFeed {
  readonly state: FeedState = emptyFeedState();
  private readonly client: ServiceClient;
  private readonly runId: string;
  private readonly maxReconnects: number;
  private readonly retryDelayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly onChange: (state: FeedState) => void;
  private controller: AbortController | null = null;
  private stopped = false;

  constructor(client: ServiceClient, runId: string, opts: FeedOptions = {}) {
    this.client = client;
    this.runId = runId;
    this.maxReconnects = opts.maxReconnects ?? 5;
    this.retryDelayMs = opts.retryDelayMs ?? 500;
    this.sleep = opts.sleep ?? defaultSleep;
    this.onChange = opts.onChange ?? (() => {});
  }

  /** Abort the open connection and stop retrying. */
  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  /**
   * Consume the stream until the done event arrives, the reconnect
   * budget runs out, or stop() is called. Resolves to the final state.
   */
  async run(): Promise<FeedState> {
    let attempt = 0;
    for (;;) {
      if (this.stopped) return this.state;
      try {
        await this.consumeOnce();
      } catch (err) {
        if (this.stopped) return this.state;
        this.state.lastError = err instanceof Error ? err.message : String(err);
        this.onChange(this.state);
      }
      if (this.state.done || this.stopped) return this.state;
      if (attempt >= this.maxReconnects) {
        this.state.lastError =
          this.state.lastError ?? "stream ended without a done event";
        this.onChange(this.state);
        return this.state;
      }
      attempt += 1;
      this.state.reconnects += 1;
      this.onChange(this.state);
      await this.sleep(this.retryDelayMs);
    }
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const response = await this.client.openRounds(
      this.runId,
      this.controller.signal
    );
    const body = response.body;
    if (!body) throw new Error("round stream came back with no body");
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parser = new NdjsonParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        const events = done
          ? parser.flush()
          : parser.push(decoder.decode(value, { stream: true }));
        for (const event of events) {
          const gapsBefore = this.state.gaps;
          applyEvent(this.state, event);
          this.onChange(this.state);
          if (this.state.gaps > gapsBefore) {
            // drop this connection; the reconnect replays the full log
            // from the start and the dedupe in applyEvent fills the hole
            await reader.cancel().catch(() => {});
            return;
          }
          if (this.state.done) {
            await reader.cancel().catch(() => {});
            return;
          }
        }
        if (done) return;
      }
    } finally {
      reader.releaseLock();
    }
  }
}
