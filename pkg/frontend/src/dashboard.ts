/**
 * Live view of one run.
 *
 * A dashboard owns exactly one round-stream subscription for as long
 * as it stays open. The body is re-rendered from the folded feed state
 * alone, so replaying a recorded stream rebuilds the identical view.
 * Control buttons call the pause/resume/abort endpoints and then poll
 * the run detail once, which is what flips the status chip.
 */

import type { RunDetail, RunStatus, ServiceClient } from "./api.js";
import { ServiceError } from "./api.js";
import { clear, el, serviceNumber } from "./dom.js";
import { fmtNum } from "./format.js";
import type { FeedOptions, FeedState } from "./stream.js";
import { RoundFeed, orderedRounds } from "./stream.js";
import { lineChart, sparkline } from "./svg.js";

export interface DashboardOptions {
  /** Poll the run detail every this many ms; 0 disables the timer. */
  pollMs?: number;
  feed?: FeedOptions;
}

export class RunDashboard {
  readonly root: HTMLElement;
  readonly runId: string;
  private readonly client: ServiceClient;
  private readonly feed: RoundFeed;
  private readonly header: HTMLElement;
  private readonly body: HTMLElement;
  private readonly pollMs: number;
  private status: RunStatus | null = null;
  private detail: RunDetail | null = null;
  private actionError: string | null = null;
  private timer: ReturnType<typeof setInterval> | null = null;
  private streaming: Promise<FeedState> | null = null;

  constructor(
    client: ServiceClient,
    runId: string,
    opts: DashboardOptions = {}
  ) {
    this.client = client;
    this.runId = runId;
    this.pollMs = opts.pollMs ?? 2000;
    this.feed = new RoundFeed(client, runId, {
      ...opts.feed,
      onChange: (state) => {
        opts.feed?.onChange?.(state);
        if (state.done) this.status = state.done.status;
        this.render();
      },
    });
    this.header = el("div", { class: "dash-header" });
    this.body = el("div", { class: "dash-body" });
    this.root = el(
      "section",
      { class: "dashboard view" },
      this.header,
      this.body
    );
    this.render();
  }

  get state(): FeedState {
    return this.feed.state;
  }

  /** Fetch the detail once, subscribe to the stream, start polling. */
  async open(): Promise<void> {
    await this.pollOnce();
    this.streaming = this.feed.run();
    void this.streaming.then(() => this.render());
    if (this.pollMs > 0) {
      this.timer = setInterval(() => void this.pollOnce(), this.pollMs);
    }
  }

  /** Resolves once the stream has delivered its done event or given up. */
  whenStreamSettled(): Promise<FeedState> {
    return this.streaming ?? Promise.resolve(this.feed.state);
  }

  close(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
    this.feed.stop();
  }

  async pollOnce(): Promise<void> {
    try {
      this.detail = await this.client.runDetail(this.runId);
      this.status = this.detail.status;
      this.actionError = null;
    } catch (err) {
      this.actionError =
        err instanceof ServiceError ? err.detail : String(err);
    }
    this.render();
  }

  private async act(
    call: (client: ServiceClient, id: string) => Promise<unknown>
  ): Promise<void> {
    let failure: string | null = null;
    try {
      await call(this.client, this.runId);
    } catch (err) {
      failure = err instanceof ServiceError ? err.detail : String(err);
    }
    await this.pollOnce();
    if (failure) {
      this.actionError = failure;
      this.render();
    }
  }

  pause(): Promise<void> {
    return this.act((c, id) => c.pause(id));
  }

  resume(): Promise<void> {
    return this.act((c, id) => c.resume(id));
  }

  abort(): Promise<void> {
    return this.act((c, id) => c.abort(id));
  }

  // -- rendering ----------------------------------------------------------

  render(): void {
    this.renderHeader();
    this.renderBody();
  }

  private renderHeader(): void {
    clear(this.header);
    const status = this.status ?? "pending";
    this.header.append(
      el("h2", {}, `run ${this.runId}`),
      el("span", { class: `chip status-${status}` }, status),
      el(
        "span",
        { class: "controls" },
        el("button", { type: "button", click: () => void this.pause() }, "pause"),
        el("button", { type: "button", click: () => void this.resume() }, "resume"),
        el("button", { type: "button", click: () => void this.abort() }, "abort")
      )
    );
    if (this.actionError) {
      this.header.append(
        el("div", { class: "error-banner", role: "alert" },
          `service error: ${this.actionError}`)
      );
    }
  }

  private renderBody(): void {
    clear(this.body);
    this.body.append(renderDashboardBody(this.state, this.detail));
  }
}

/**
 * Pure presentation of a feed state (plus the last polled detail).
 * Kept standalone so tests can replay a recorded stream and compare
 * the produced markup directly.
 */
export function renderDashboardBody(
  state: FeedState,
  detail: RunDetail | null = null
): HTMLElement {
  const body = el("div", { class: "dash-sections" });
  const rounds = orderedRounds(state);

  if (state.reconnects > 0 || state.gaps > 0) {
    body.append(
      el(
        "div",
        { class: "stream-note" },
        `stream: ${state.reconnects} reconnect(s), ` +
          `${state.gaps} gap(s) detected and resynced`
      )
    );
  }
  if (state.lastError) {
    body.append(
      el("div", { class: "error-banner", role: "alert" },
        `stream error: ${state.lastError}`)
    );
  }

  const snapshot = detail?.snapshot ?? null;
  if (snapshot && snapshot.max_accuracy !== null) {
    body.append(
      el(
        "div",
        { class: "snapshot-line" },
        "rounds recorded ",
        serviceNumber(fmtNum(snapshot.rounds_done), "rounds-done"),
        ", best accuracy ",
        serviceNumber(fmtNum(snapshot.max_accuracy), "max-accuracy")
      )
    );
  }

  // accuracy over rounds
  const accuracySlot = el("div", { class: "accuracy-slot" });
  if (rounds.length === 0) {
    accuracySlot.append(el("p", { class: "placeholder" }, "waiting for round events"));
  } else {
    const points = rounds.map((r) => ({ x: r.round, y: r.accuracy }));
    const ys = points.map((p) => p.y);
    const first = rounds[0];
    const last = rounds[rounds.length - 1];
    const ticks: number[] = [];
    if (first) ticks.push(first.round);
    if (last && last !== first) ticks.push(last.round);
    accuracySlot.append(
      el("h3", {}, "accuracy by round"),
      lineChart(
        [{ label: "accuracy", color: "#16a34a", points }],
        {
          xTicks: ticks,
          yTicks: [Math.min(...ys), Math.max(...ys)],
          ariaLabel: "test accuracy per round",
        }
      )
    );
  }
  body.append(accuracySlot);

  // per-client table from the latest round, with memory trend sparklines
  if (rounds.length > 0) {
    const latest = rounds[rounds.length - 1];
    if (latest) {
      const header = el(
        "tr",
        {},
        el("th", {}, "client"),
        el("th", {}, "epsilon spent"),
        el("th", {}, "delta"),
        el("th", {}, "memory peak"),
        el("th", {}, "memory trend"),
        el("th", {}, "batch min/mean/max"),
        el("th", {}, "shard accuracy")
      );
      const rows = latest.clients.map((c) => {
        const trend = rounds.map(
          (r) =>
            r.clients.find((x) => x.client === c.client)?.memory_peak_units ?? 0
        );
        return el(
          "tr",
          { "data-client": String(c.client) },
          el("td", {}, serviceNumber(fmtNum(c.client), "client")),
          el(
            "td",
            {},
            c.epsilon_spent === null
              ? "off"
              : serviceNumber(fmtNum(c.epsilon_spent), "epsilon-spent")
          ),
          el(
            "td",
            {},
            c.delta === null ? "off" : serviceNumber(fmtNum(c.delta), "delta")
          ),
          el("td", {}, serviceNumber(fmtNum(c.memory_peak_units), "memory-peak")),
          el("td", { class: "trend-cell" },
            sparkline(trend, { title: "memory peak per round" })),
          el(
            "td",
            {},
            serviceNumber(fmtNum(c.batch_min), "batch-min"),
            " / ",
            serviceNumber(fmtNum(c.batch_mean), "batch-mean"),
            " / ",
            serviceNumber(fmtNum(c.batch_max), "batch-max")
          ),
          el("td", {}, serviceNumber(fmtNum(c.shard_accuracy), "shard-accuracy"))
        );
      });
      body.append(
        el("h3", {}, "clients"),
        el("table", { class: "client-table" }, header, ...rows)
      );
    }
  }

  // adherence warnings with their remedies
  if (state.warnings.length > 0) {
    const list = el("div", { class: "warnings" }, el("h3", {}, "warnings"));
    for (const warning of state.warnings) {
      list.append(
        el(
          "div",
          { class: "warning", "data-kind": warning.kind },
          el("span", { class: "warning-kind" }, warning.kind),
          el("p", { class: "warning-message" }, warning.message),
          el(
            "ul",
            { class: "remedies" },
            ...warning.remedies.map((r) => el("li", {}, r))
          )
        )
      );
    }
    body.append(list);
  }

  if (state.done) {
    body.append(
      el(
        "div",
        { class: `done-line status-${state.done.status}` },
        `finished: ${state.done.status}`,
        state.done.diagnostic ? ` (${state.done.diagnostic})` : ""
      )
    );
  }

  return body;
}
