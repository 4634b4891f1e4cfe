/**
 * Application shell: a base-URL control, three tabs, and a view slot.
 *
 * One view is alive at a time; opening a run hands the previous
 * dashboard's stream subscription back before the new one starts, so
 * the app never holds more than one subscription.
 */

import { ServiceClient } from "./api.js";
import type { RunListEntry } from "./api.js";
import { RunDashboard } from "./dashboard.js";
import { clear, el } from "./dom.js";
import { CalibrationExplorer } from "./explorer.js";
import { RequirementsWizard } from "./wizard.js";

const DEFAULT_BASE = "http://127.0.0.1:8800";
const BASE_KEY = "flip-console-base-url";

type TabName = "explorer" | "wizard" | "runs";

export class ConsoleApp {
  readonly root: HTMLElement;
  private client: ServiceClient;
  private readonly viewSlot: HTMLElement;
  private readonly tabBar: HTMLElement;
  private dashboard: RunDashboard | null = null;

  constructor(root: HTMLElement, baseUrl?: string) {
    this.root = root;
    const stored =
      typeof localStorage === "undefined"
        ? null
        : localStorage.getItem(BASE_KEY);
    this.client = new ServiceClient(baseUrl ?? stored ?? DEFAULT_BASE);

    const baseInput = el("input", {
      type: "url",
      name: "base_url",
      value: this.client.baseUrl,
    });
    const applyBase = el(
      "button",
      {
        type: "button",
        click: () => {
          const url = (baseInput as HTMLInputElement).value.trim();
          if (!url) return;
          this.client = new ServiceClient(url);
          try {
            localStorage.setItem(BASE_KEY, this.client.baseUrl);
          } catch {
            // storage may be unavailable; the session still works
          }
          this.show("explorer");
        },
      },
      "apply"
    );
    this.tabBar = el(
      "nav",
      { class: "tabs" },
      this.tabButton("explorer", "calibration explorer"),
      this.tabButton("wizard", "requirements wizard"),
      this.tabButton("runs", "runs")
    );
    this.viewSlot = el("main", { class: "view-slot" });
    this.root.append(
      el(
        "header",
        { class: "app-header" },
        el("h1", {}, "federated privacy workbench"),
        el("div", { class: "base-url" }, el("label", {}, "service "), baseInput, applyBase)
      ),
      this.tabBar,
      this.viewSlot
    );
    this.show("explorer");
  }

  private tabButton(name: TabName, label: string): HTMLElement {
    return el(
      "button",
      { type: "button", class: "tab", "data-tab": name, click: () => this.show(name) },
      label
    );
  }

  private swapView(view: HTMLElement): void {
    if (this.dashboard) {
      this.dashboard.close();
      this.dashboard = null;
    }
    clear(this.viewSlot);
    this.viewSlot.append(view);
  }

  private markActive(name: TabName | null): void {
    for (const button of this.tabBar.querySelectorAll(".tab")) {
      button.classList.toggle(
        "active",
        button.getAttribute("data-tab") === name
      );
    }
  }

  show(name: TabName): void {
    this.markActive(name);
    if (name === "explorer") {
      this.swapView(new CalibrationExplorer(this.client).root);
    } else if (name === "wizard") {
      this.swapView(
        new RequirementsWizard(this.client, {
          onLaunched: (runId) => void this.openRun(runId),
        }).root
      );
    } else {
      const view = el("section", { class: "runs view" }, el("h2", {}, "runs"));
      this.swapView(view);
      void this.renderRunList(view);
    }
  }

  private async renderRunList(view: HTMLElement): Promise<void> {
    let entries: RunListEntry[];
    try {
      entries = await this.client.listRuns();
    } catch (err) {
      view.append(
        el("div", { class: "error-banner", role: "alert" }, String(err))
      );
      return;
    }
    if (entries.length === 0) {
      view.append(el("p", { class: "placeholder" }, "no runs recorded yet"));
      return;
    }
    const header = el(
      "tr",
      {},
      el("th", {}, "run"),
      el("th", {}, "status"),
      el("th", {}, "created"),
      el("th", {}, "")
    );
    const rows = entries.map((entry) =>
      el(
        "tr",
        {},
        el("td", {}, entry.run_id),
        el("td", {}, el("span", { class: `chip status-${entry.status}` }, entry.status)),
        el("td", {}, new Date(entry.created_at * 1000).toISOString()),
        el(
          "td",
          {},
          el(
            "button",
            { type: "button", click: () => void this.openRun(entry.run_id) },
            "open"
          )
        )
      )
    );
    view.append(el("table", { class: "run-list" }, header, ...rows));
  }

  async openRun(runId: string): Promise<void> {
    this.markActive(null);
    const dashboard = new RunDashboard(this.client, runId);
    this.swapView(dashboard.root);
    this.dashboard = dashboard;
    await dashboard.open();
  }
}

export function mountApp(root: HTMLElement, baseUrl?: string): ConsoleApp {
  return new ConsoleApp(root, baseUrl);
}

// boot when loaded as the page entry; tests import components directly
const slot = document.getElementById("app");
if (slot && slot.hasAttribute("data-automount")) {
  mountApp(slot);
}
