import { afterEach, describe, expect, it } from "vitest";
import type { Recommendation, RunPrivacy } from "../src/api.js";
import { ServiceClient } from "../src/api.js";
import { fmtNum } from "../src/format.js";
import { RequirementsWizard } from "../src/wizard.js";
import { FakeService, expectAllTraced, tracedTexts, until } from "./intercept.js";
import {
  ampleMemoryRecommendation,
  memoryConstrainedRecommendation,
  overrunNoteRecommendation,
} from "./fixtures.js";

function recommendService(recommendation: Recommendation): FakeService {
  const service = new FakeService();
  service.route("POST", /^\/recommend$/, () => service.json(recommendation));
  service.route("POST", /^\/runs$/, () =>
    service.json({ run_id: "fresh123", status: "pending" }, 201)
  );
  return service;
}

function setControl(root: Element, name: string, value: string): void {
  const control = root.querySelector<HTMLInputElement | HTMLSelectElement>(
    `[name="${name}"]`
  );
  if (!control) throw new Error(`missing control ${name}`);
  control.value = value;
}

function submit(wizard: RequirementsWizard): Promise<void> {
  const form = wizard.root.querySelector("form");
  form?.dispatchEvent(new Event("submit", { cancelable: true }));
  return wizard.whenIdle();
}

describe("RequirementsWizard", () => {
  let service: FakeService;

  afterEach(() => service?.uninstall());

  it("maps a reconstruction goal with ample memory to the poisson card", async () => {
    service = recommendService(ampleMemoryRecommendation());
    service.install();
    const wizard = new RequirementsWizard(new ServiceClient("http://svc:8800"));
    await submit(wizard); // defaults: reconstruction goal, no budget

    const [request] = service.ofPath("/recommend");
    expect(request?.body).toEqual({
      goal: { kind: "mitigate-reconstruction" },
      clients: 4,
      dataset_size: 50000,
      rounds: 5,
      model_units: 66,
      local_epochs: 1,
      policy: "iid",
      preferred_accountant: "poisson",
    });

    const card = wizard.root.querySelector(".rec-card");
    expect(card?.getAttribute("data-accountant")).toBe("poisson");
    expect(card?.querySelector(".accountant-name")?.textContent).toBe("poisson");
    expect(tracedTexts(wizard.root)).toContain(fmtNum(10));
    expectAllTraced(wizard.root, service);
  });

  it("shows the fixed-size card with the memory rationale under a tight budget", async () => {
    service = recommendService(memoryConstrainedRecommendation());
    service.install();
    const wizard = new RequirementsWizard(new ServiceClient("http://svc:8800"));
    setControl(wizard.root, "goal", "mitigate-mia");
    setControl(wizard.root, "dataset_size", "2000");
    setControl(wizard.root, "model_units", "18");
    setControl(wizard.root, "memory_budget", "218");
    await submit(wizard);

    const [request] = service.ofPath("/recommend");
    expect(
      (request?.body as { memory_budget?: number }).memory_budget
    ).toBe(218);

    const card = wizard.root.querySelector(".rec-card");
    expect(card?.getAttribute("data-accountant")).toBe("fixed-size");
    const rationale = [...(card?.querySelectorAll(".rationale li") ?? [])].map(
      (li) => li.textContent
    );
    expect(
      rationale.some((line) =>
        line?.includes("fixed-size batches keep memory constant")
      )
    ).toBe(true);
    expectAllTraced(wizard.root, service);
  });

  it("passes a regulatory epsilon through and shows the overrun note", async () => {
    service = recommendService(overrunNoteRecommendation());
    service.install();
    const wizard = new RequirementsWizard(new ServiceClient("http://svc:8800"));
    setControl(wizard.root, "goal", "regulatory");
    setControl(wizard.root, "regulatory_epsilon", "3.5");
    setControl(wizard.root, "clients", "2");
    setControl(wizard.root, "dataset_size", "2000");
    setControl(wizard.root, "memory_budget", "486");
    await submit(wizard);

    const [request] = service.ofPath("/recommend");
    expect(
      (request?.body as { goal: { epsilon?: number } }).goal.epsilon
    ).toBe(3.5);

    // the service echoed 3.5; the card shows it verbatim
    expect(tracedTexts(wizard.root)).toContain("3.5");
    const note = wizard.root.querySelector(".overrun-note");
    expect(note?.textContent).toContain(fmtNum(0.0123));
    expectAllTraced(wizard.root, service);
  });

  it("blocks invalid fields with per-field messages and sends nothing", async () => {
    service = recommendService(ampleMemoryRecommendation());
    service.install();
    const wizard = new RequirementsWizard(new ServiceClient("http://svc:8800"));
    setControl(wizard.root, "clients", "0");
    setControl(wizard.root, "goal", "regulatory"); // epsilon left blank
    setControl(wizard.root, "min_accuracy", "1.7");
    await submit(wizard);

    expect(service.requests.length).toBe(0);
    const errorFor = (name: string) =>
      wizard.root.querySelector(`.field-error[data-field="${name}"]`)
        ?.textContent;
    expect(errorFor("clients")).toContain("integer");
    expect(errorFor("regulatory_epsilon")).toContain("positive epsilon");
    expect(errorFor("min_accuracy")).toContain("between 0 and 1");
  });

  it("launches a run built from the recommendation and hands off the id", async () => {
    service = recommendService(ampleMemoryRecommendation());
    service.install();
    let launched: string | null = null;
    const wizard = new RequirementsWizard(new ServiceClient("http://svc:8800"), {
      onLaunched: (runId) => {
        launched = runId;
      },
    });
    await submit(wizard);

    const launchButton = wizard.root.querySelector<HTMLButtonElement>(
      ".launch-button"
    );
    expect(launchButton).not.toBeNull();
    launchButton?.click();
    await until(() => launched !== null);

    const [request] = service.ofPath("/runs");
    const body = request?.body as {
      batch_size: number;
      clients: number;
      privacy: RunPrivacy[];
    };
    expect(body.batch_size).toBe(12500);
    expect(body.clients).toBe(4);
    expect(body.privacy.length).toBe(4);
    for (const privacy of body.privacy) {
      expect(privacy.sigma).toBe(0.61);
      expect(privacy.sampler).toBe("poisson");
      expect(privacy.delta).toBe(0.00008);
      expect(privacy.target).toEqual({ epsilon: 10, delta: 0.00008 });
    }
    expect(launched).toBe("fresh123");
  });
});
