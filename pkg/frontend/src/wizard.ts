/**
 * Requirements wizard: plain-language needs in, a concrete plan out.
 *
 * The form mirrors the /recommend request schema. The resulting card
 * shows the epsilon target, per-client deltas and noise multipliers,
 * the accountant choice with the service's own memory rationale, and
 * the batch size. A launch section turns the recommendation into a run
 * config (a straight copy of service numbers, no local derivation) and
 * hands the new run id to the caller.
 */

import type {
  GoalKind,
  Recommendation,
  RecommendRequest,
  RunConfig,
  SchemeName,
  ServiceClient,
} from "./api.js";
import { ServiceError } from "./api.js";
import { clear, el, serviceNumber } from "./dom.js";
import { fmtNum } from "./format.js";

export interface WizardOptions {
  onLaunched?: (runId: string) => void;
}

function labeled(
  name: string,
  label: string,
  input: HTMLElement
): HTMLElement {
  input.setAttribute("id", `wizard-${name}`);
  input.setAttribute("name", name);
  return el(
    "div",
    { class: "field" },
    el("label", { for: `wizard-${name}` }, label),
    input,
    el("span", { class: "field-error", "data-field": name })
  );
}

function numInput(value: string, step = "any"): HTMLElement {
  return el("input", { type: "number", step, value });
}

export class RequirementsWizard {
  readonly root: HTMLElement;
  private readonly client: ServiceClient;
  private readonly form: HTMLFormElement;
  private readonly banner: HTMLElement;
  private readonly cardSlot: HTMLElement;
  private readonly onLaunched: (runId: string) => void;
  private recommendation: Recommendation | null = null;
  private lastRequest: RecommendRequest | null = null;
  private pending: Promise<void> | null = null;

  constructor(client: ServiceClient, opts: WizardOptions = {}) {
    this.client = client;
    this.onLaunched = opts.onLaunched ?? (() => {});
    const goal = el(
      "select",
      {},
      el("option", { value: "mitigate-reconstruction" }, "defend against reconstruction"),
      el("option", { value: "mitigate-mia" }, "defend against membership inference"),
      el("option", { value: "regulatory" }, "regulatory epsilon")
    );
    const policy = el(
      "select",
      {},
      ...["iid", "linear", "square", "exponential"].map((p) =>
        el("option", { value: p }, p)
      )
    );
    const accountant = el(
      "select",
      {},
      el("option", { value: "poisson" }, "poisson"),
      el("option", { value: "fixed-size" }, "fixed-size")
    );
    this.form = el(
      "form",
      { class: "requirements", submit: (event) => this.onSubmit(event) },
      labeled("goal", "privacy goal", goal),
      labeled("regulatory_epsilon", "regulatory epsilon", numInput("")),
      labeled("clients", "clients", numInput("4", "1")),
      labeled("dataset_size", "dataset size", numInput("50000", "1")),
      labeled("rounds", "rounds", numInput("5", "1")),
      labeled("model_units", "model units", numInput("66", "1")),
      labeled("memory_budget", "memory budget (blank: unlimited)", numInput("")),
      labeled("min_accuracy", "minimum accuracy (blank: none)", numInput("")),
      labeled("local_epochs", "local epochs", numInput("1", "1")),
      labeled("policy", "partition policy", policy),
      labeled("preferred_accountant", "preferred accountant", accountant),
      el("button", { type: "submit" }, "recommend")
    );
    this.banner = el("div", { class: "error-banner", role: "alert", hidden: "" });
    this.cardSlot = el("div", { class: "card-slot" });
    this.root = el(
      "section",
      { class: "wizard view" },
      el("h2", {}, "requirements wizard"),
      this.form,
      this.banner,
      this.cardSlot
    );
  }

  whenIdle(): Promise<void> {
    return this.pending ?? Promise.resolve();
  }

  private onSubmit(event: Event): void {
    event.preventDefault();
    this.pending = this.submit();
  }

  private control(name: string): HTMLInputElement | HTMLSelectElement {
    const node = this.form.querySelector<HTMLInputElement | HTMLSelectElement>(
      `[name="${name}"]`
    );
    if (!node) throw new Error(`no control named ${name}`);
    return node;
  }

  private setFieldError(name: string, message: string): void {
    const slot = this.form.querySelector(`.field-error[data-field="${name}"]`);
    if (slot) slot.textContent = message;
  }

  private readRequest(): RecommendRequest | null {
    for (const span of this.form.querySelectorAll(".field-error")) {
      span.textContent = "";
    }
    let bad = false;
    const readInt = (name: string): number => {
      const raw = Number(this.control(name).value);
      if (!Number.isInteger(raw) || raw < 1) {
        this.setFieldError(name, "must be an integer of at least 1");
        bad = true;
        return 1;
      }
      return raw;
    };
    const readOptional = (name: string): number | undefined => {
      const text = this.control(name).value.trim();
      if (text === "") return undefined;
      const raw = Number(text);
      if (!Number.isFinite(raw)) {
        this.setFieldError(name, "must be a number or left blank");
        bad = true;
        return undefined;
      }
      return raw;
    };

    const kind = this.control("goal").value as GoalKind;
    let epsilon: number | undefined;
    if (kind === "regulatory") {
      epsilon = readOptional("regulatory_epsilon");
      if (epsilon === undefined || !(epsilon > 0)) {
        this.setFieldError(
          "regulatory_epsilon",
          "a regulatory goal needs a positive epsilon"
        );
        bad = true;
      }
    }
    const clients = readInt("clients");
    const datasetSize = readInt("dataset_size");
    const rounds = readInt("rounds");
    const modelUnits = readInt("model_units");
    const localEpochs = readInt("local_epochs");
    const budget = readOptional("memory_budget");
    if (budget !== undefined && !(budget > 0)) {
      this.setFieldError("memory_budget", "must be positive when given");
      bad = true;
    }
    const minAccuracy = readOptional("min_accuracy");
    if (minAccuracy !== undefined && !(minAccuracy >= 0 && minAccuracy <= 1)) {
      this.setFieldError("min_accuracy", "must sit between 0 and 1");
      bad = true;
    }
    if (bad) return null;

    const request: RecommendRequest = {
      goal: epsilon === undefined ? { kind } : { kind, epsilon },
      clients,
      dataset_size: datasetSize,
      rounds: rounds,
      model_units: modelUnits,
      local_epochs: localEpochs,
      policy: this.control("policy").value,
      preferred_accountant: this.control("preferred_accountant")
        .value as SchemeName,
    };
    if (budget !== undefined) request.memory_budget = budget;
    if (minAccuracy !== undefined) request.min_accuracy = minAccuracy;
    return request;
  }

  private async submit(): Promise<void> {
    const request = this.readRequest();
    if (!request) return;
    try {
      const recommendation = await this.client.recommend(request);
      this.lastRequest = request;
      this.recommendation = recommendation;
      this.banner.setAttribute("hidden", "");
      this.banner.textContent = "";
      this.renderCard(recommendation);
    } catch (err) {
      this.recommendation = null;
      clear(this.cardSlot);
      const detail =
        err instanceof ServiceError
          ? err.detail
          : err instanceof Error
            ? err.message
            : String(err);
      this.banner.removeAttribute("hidden");
      this.banner.textContent = `service error: ${detail}`;
    }
  }

  private renderCard(rec: Recommendation): void {
    clear(this.cardSlot);
    const headline = el(
      "div",
      { class: "rec-headline" },
      "epsilon ",
      serviceNumber(fmtNum(rec.epsilon), "epsilon"),
      " with the ",
      el("strong", { class: "accountant-name" }, rec.accountant),
      " accountant, batch size ",
      serviceNumber(fmtNum(rec.batch_size), "batch-size")
    );

    const header = el(
      "tr",
      {},
      el("th", {}, "client"),
      el("th", {}, "shard size"),
      el("th", {}, "delta"),
      el("th", {}, "sigma"),
      el("th", {}, "steps")
    );
    const rows = rec.partition_sizes.map((size, i) =>
      el(
        "tr",
        {},
        el("td", {}, String(i)),
        el("td", {}, serviceNumber(fmtNum(size), "shard-size")),
        el("td", {}, serviceNumber(fmtNum(rec.deltas[i] ?? 0), "delta")),
        el("td", {}, serviceNumber(fmtNum(rec.sigmas[i] ?? 0), "sigma")),
        el("td", {}, serviceNumber(fmtNum(rec.steps_per_client[i] ?? 0), "steps"))
      )
    );

    const notes = el("div", { class: "rec-notes" });
    if (rec.memory_peak_estimate !== null) {
      notes.append(
        el(
          "p",
          { class: "memory-note" },
          "estimated per-client memory peak: ",
          serviceNumber(fmtNum(rec.memory_peak_estimate), "memory-peak")
        )
      );
    }
    if (rec.overrun_probability !== null) {
      notes.append(
        el(
          "p",
          { class: "overrun-note" },
          "chance a single Poisson batch overruns the budget: ",
          serviceNumber(fmtNum(rec.overrun_probability), "overrun-probability")
        )
      );
    }

    const rationale = el(
      "ul",
      { class: "rationale" },
      ...rec.rationale.map((line) => el("li", {}, line))
    );

    const launch = el(
      "div",
      { class: "launch" },
      labeled("learning_rate", "learning rate", numInput("0.5")),
      labeled("clip_norm", "clip norm", numInput("1.0")),
      labeled("seed", "seed", numInput("0", "1")),
      el(
        "button",
        { type: "button", class: "launch-button", click: () => void this.launch() },
        "launch run"
      ),
      el("span", { class: "field-error", "data-field": "launch" })
    );

    this.cardSlot.append(
      el(
        "div",
        { class: "rec-card", "data-accountant": rec.accountant },
        headline,
        el("table", { class: "per-client" }, header, ...rows),
        notes,
        el("h3", {}, "why"),
        rationale,
        launch
      )
    );
  }

  /** Turn the accepted recommendation into a run and hand it off. */
  private async launch(): Promise<void> {
    const rec = this.recommendation;
    const request = this.lastRequest;
    if (!rec || !request) return;
    const lr = Number(
      this.cardSlot.querySelector<HTMLInputElement>('[name="learning_rate"]')?.value
    );
    const clip = Number(
      this.cardSlot.querySelector<HTMLInputElement>('[name="clip_norm"]')?.value
    );
    const seed = Number(
      this.cardSlot.querySelector<HTMLInputElement>('[name="seed"]')?.value
    );
    const errorSlot = this.cardSlot.querySelector('.field-error[data-field="launch"]');
    if (errorSlot) errorSlot.textContent = "";
    if (!(lr > 0) || !(clip > 0) || !Number.isInteger(seed)) {
      if (errorSlot) {
        errorSlot.textContent =
          "learning rate and clip norm must be positive, seed an integer";
      }
      return;
    }

    const sampler = rec.accountant === "fixed-size" ? "fixed-size" : "poisson";
    const config: RunConfig = {
      dataset_size: request.dataset_size,
      clients: request.clients,
      rounds: request.rounds,
      policy: request.policy ?? "iid",
      batch_size: rec.batch_size,
      learning_rate: lr,
      local_epochs: request.local_epochs ?? 1,
      seed,
      privacy: rec.sigmas.map((sigma, i) => ({
        sigma,
        clip_norm: clip,
        sampler,
        delta: rec.deltas[i] ?? 0,
        target: { epsilon: rec.epsilon, delta: rec.deltas[i] ?? 0 },
      })),
    };
    if (request.memory_budget !== undefined) {
      config.memory_budget = request.memory_budget;
    }
    if (request.min_accuracy !== undefined) {
      config.min_accuracy = request.min_accuracy;
    }
    try {
      const handle = await this.client.createRun(config);
      this.onLaunched(handle.run_id);
    } catch (err) {
      if (errorSlot) {
        errorSlot.textContent =
          err instanceof ServiceError ? err.detail : String(err);
      }
    }
  }
}
