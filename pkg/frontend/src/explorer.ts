/**
 * Calibration explorer: what-if queries over the /calibrate endpoint.
 *
 * The practitioner edits a query shape (dataset size, batch size,
 * rounds, delta, an epsilon range) and the explorer asks the service
 * for the noise multiplier under both accountants at each epsilon in
 * the range, drawing the two curves on one axis. Every number on
 * screen comes from a response payload; the explorer itself never
 * computes a privacy quantity.
 */

import type { CalibrateResponse, SchemeName, ServiceClient } from "./api.js";
import { ServiceError } from "./api.js";
import { clear, el, serviceNumber } from "./dom.js";
import { fmtNum } from "./format.js";
import { lineChart } from "./svg.js";

const SCHEMES: { name: SchemeName; color: string }[] = [
  { name: "poisson", color: "#2563eb" },
  { name: "fixed-size", color: "#d97706" },
];

export interface ExplorerDefaults {
  dataset_size: number;
  batch_size: number;
  rounds: number;
  delta: number;
  eps_min: number;
  eps_max: number;
  eps_points: number;
}

// The largest published reference shape; a sensible starting query.
const DEFAULTS: ExplorerDefaults = {
  dataset_size: 363848,
  batch_size: 550,
  rounds: 5,
  delta: 1e-6,
  eps_min: 6,
  eps_max: 10,
  eps_points: 5,
};

interface QueryShape {
  dataset_size: number;
  batch_size: number;
  rounds: number;
  delta: number;
  grid: number[];
}

function field(
  name: string,
  label: string,
  value: string,
  step = "any"
): HTMLElement {
  return el(
    "div",
    { class: "field" },
    el("label", { for: `explorer-${name}` }, label),
    el("input", {
      id: `explorer-${name}`,
      name,
      type: "number",
      step,
      value,
    }),
    el("span", { class: "field-error", "data-field": name })
  );
}

export class CalibrationExplorer {
  readonly root: HTMLElement;
  private readonly client: ServiceClient;
  private readonly form: HTMLFormElement;
  private readonly banner: HTMLElement;
  private readonly chartSlot: HTMLElement;
  private readonly readout: HTMLElement;
  private readonly tableSlot: HTMLElement;
  private pending: Promise<void> | null = null;

  constructor(client: ServiceClient, defaults: Partial<ExplorerDefaults> = {}) {
    this.client = client;
    const init = { ...DEFAULTS, ...defaults };
    this.form = el(
      "form",
      { class: "what-if", submit: (event) => this.onSubmit(event) },
      field("dataset_size", "dataset size", String(init.dataset_size), "1"),
      field("batch_size", "batch size", String(init.batch_size), "1"),
      field("rounds", "rounds", String(init.rounds), "1"),
      field("delta", "delta", String(init.delta)),
      field("eps_min", "epsilon from", String(init.eps_min)),
      field("eps_max", "epsilon to", String(init.eps_max)),
      field("eps_points", "points", String(init.eps_points), "1"),
      el("button", { type: "submit" }, "recompute")
    );
    this.banner = el("div", { class: "error-banner", role: "alert", hidden: "" });
    this.chartSlot = el("div", { class: "chart-slot" });
    this.readout = el("div", { class: "hover-readout" }, "hover a marker for exact values");
    this.tableSlot = el("div", { class: "table-slot" });
    this.root = el(
      "section",
      { class: "explorer view" },
      el("h2", {}, "calibration explorer"),
      this.form,
      this.banner,
      this.chartSlot,
      this.readout,
      this.tableSlot
    );
  }

  private onSubmit(event: Event): void {
    event.preventDefault();
    this.pending = this.recompute();
  }

  /** Resolves when the in-flight recompute (if any) settles. */
  whenIdle(): Promise<void> {
    return this.pending ?? Promise.resolve();
  }

  private input(name: string): HTMLInputElement {
    const node = this.form.querySelector<HTMLInputElement>(
      `input[name="${name}"]`
    );
    if (!node) throw new Error(`no input named ${name}`);
    return node;
  }

  private setFieldError(name: string, message: string): void {
    const slot = this.form.querySelector(`.field-error[data-field="${name}"]`);
    if (slot) slot.textContent = message;
  }

  private readQuery(): QueryShape | null {
    for (const span of this.form.querySelectorAll(".field-error")) {
      span.textContent = "";
    }
    let bad = false;
    const readInt = (name: string, min = 1): number => {
      const raw = Number(this.input(name).value);
      if (!Number.isInteger(raw) || raw < min) {
        this.setFieldError(name, `must be an integer of at least ${min}`);
        bad = true;
        return min;
      }
      return raw;
    };
    const readFloat = (name: string): number => {
      const raw = Number(this.input(name).value);
      if (!Number.isFinite(raw)) {
        this.setFieldError(name, "must be a number");
        bad = true;
        return 0;
      }
      return raw;
    };

    const dataset = readInt("dataset_size");
    const batch = readInt("batch_size");
    const rounds = readInt("rounds");
    const delta = readFloat("delta");
    if (!(delta > 0 && delta < 1)) {
      this.setFieldError("delta", "must sit strictly between 0 and 1");
      bad = true;
    }
    const epsMin = readFloat("eps_min");
    const epsMax = readFloat("eps_max");
    if (epsMin <= 0) {
      this.setFieldError("eps_min", "epsilon must be positive");
      bad = true;
    }
    if (epsMax < epsMin) {
      this.setFieldError("eps_max", "range end sits below its start");
      bad = true;
    }
    const points = readInt("eps_points", 1);
    if (points > 25) {
      this.setFieldError("eps_points", "at most 25 query points");
      bad = true;
    }
    if (bad) return null;

    const grid: number[] = [];
    if (points === 1 || epsMin === epsMax) {
      grid.push(epsMin);
    } else {
      for (let i = 0; i < points; i++) {
        grid.push(epsMin + ((epsMax - epsMin) * i) / (points - 1));
      }
    }
    return { dataset_size: dataset, batch_size: batch, rounds, delta, grid };
  }

  async recompute(): Promise<void> {
    const query = this.readQuery();
    if (!query) return;
    try {
      const responses = await Promise.all(
        SCHEMES.flatMap(({ name }) =>
          query.grid.map((epsilon) =>
            this.client.calibrate({
              epsilon,
              delta: query.delta,
              scheme: name,
              batch_size: query.batch_size,
              dataset_size: query.dataset_size,
              rounds: query.rounds,
            })
          )
        )
      );
      const bySc = new Map<SchemeName, CalibrateResponse[]>();
      for (const resp of responses) {
        const bucket = bySc.get(resp.scheme) ?? [];
        bucket.push(resp);
        bySc.set(resp.scheme, bucket);
      }
      for (const bucket of bySc.values()) {
        bucket.sort((a, b) => a.epsilon - b.epsilon);
      }
      this.renderResults(bySc);
    } catch (err) {
      this.renderError(err);
    }
  }

  private renderError(err: unknown): void {
    // never leave stale curves next to an error report
    clear(this.chartSlot);
    clear(this.tableSlot);
    this.readout.textContent = "";
    const detail =
      err instanceof ServiceError
        ? err.detail
        : err instanceof Error
          ? err.message
          : String(err);
    this.banner.removeAttribute("hidden");
    this.banner.textContent = `service error: ${detail}`;
  }

  private renderResults(bySc: Map<SchemeName, CalibrateResponse[]>): void {
    this.banner.setAttribute("hidden", "");
    this.banner.textContent = "";
    clear(this.chartSlot);
    clear(this.tableSlot);

    const series = SCHEMES.filter(({ name }) => bySc.has(name)).map(
      ({ name, color }) => ({
        label: name,
        color,
        points: (bySc.get(name) ?? []).map((r) => ({
          x: r.epsilon,
          y: r.sigma,
        })),
      })
    );
    const sigmas = series.flatMap((s) => s.points.map((p) => p.y));
    const epsilons = (bySc.get("poisson") ?? bySc.get("fixed-size") ?? []).map(
      (r) => r.epsilon
    );
    const chart = lineChart(series, {
      xTicks: epsilons,
      yTicks: sigmas.length ? [Math.min(...sigmas), Math.max(...sigmas)] : [],
      ariaLabel: "noise multiplier against epsilon, one curve per accountant",
      onHover: (label, point) => {
        clear(this.readout);
        this.readout.append(
          `${label}: sigma `,
          serviceNumber(fmtNum(point.y), "sigma"),
          " at epsilon ",
          serviceNumber(fmtNum(point.x), "epsilon")
        );
      },
    });
    const legend = el(
      "div",
      { class: "legend" },
      ...SCHEMES.map(({ name, color }) =>
        el(
          "span",
          { class: "legend-item" },
          el("span", {
            class: "swatch",
            style: `background:${color}`,
          }),
          name
        )
      )
    );
    this.chartSlot.append(legend, chart);

    const poisson = bySc.get("poisson") ?? [];
    const fixed = bySc.get("fixed-size") ?? [];
    const header = el(
      "tr",
      {},
      el("th", {}, "epsilon"),
      el("th", {}, "steps"),
      el("th", {}, "sigma (poisson)"),
      el("th", {}, "order"),
      el("th", {}, "sigma (fixed-size)"),
      el("th", {}, "order")
    );
    const rows = poisson.map((p, i) => {
      const f = fixed[i];
      return el(
        "tr",
        {},
        el("td", {}, serviceNumber(fmtNum(p.epsilon), "epsilon")),
        el("td", {}, serviceNumber(fmtNum(p.steps), "steps")),
        el("td", {}, serviceNumber(fmtNum(p.sigma), "sigma-poisson")),
        el("td", {}, serviceNumber(fmtNum(p.best_order), "order-poisson")),
        el("td", {}, f ? serviceNumber(fmtNum(f.sigma), "sigma-fixed") : "?"),
        el("td", {}, f ? serviceNumber(fmtNum(f.best_order), "order-fixed") : "?")
      );
    });
    this.tableSlot.append(
      el("table", { class: "readout-table" }, header, ...rows)
    );
  }
}
