import { afterEach, describe, expect, it } from "vitest";
import type { RunEvent, RunStatus } from "../src/api.js";
import { ServiceClient } from "../src/api.js";
import { RunDashboard, renderDashboardBody } from "../src/dashboard.js";
import { applyEvent, emptyFeedState } from "../src/stream.js";
import {
  FakeService,
  expectAllTraced,
  until,
  type StreamScript,
} from "./intercept.js";
import {
  clientRound,
  doneLine,
  roundLine,
  runDetail,
  shortfallWarning,
} from "./fixtures.js";

interface Scenario {
  service: FakeService;
  client: ServiceClient;
  setStatus(status: RunStatus): void;
}

function runService(scripts: StreamScript[], initial: RunStatus): Scenario {
  const service = new FakeService();
  let status = initial;
  let connection = 0;
  service
    .route("GET", /^\/runs\/r7$/, () =>
      service.json(runDetail("r7", status, connection > 0 ? 4 : 0))
    )
    .route("GET", /^\/runs\/r7\/rounds$/, () => {
      const script = scripts[Math.min(connection, scripts.length - 1)];
      connection += 1;
      return service.stream(script!);
    })
    .route("POST", /^\/runs\/r7\/pause$/, () => {
      status = "paused";
      return service.json({ run_id: "r7", status });
    })
    .route("POST", /^\/runs\/r7\/resume$/, () => {
      status = "running";
      return service.json({ run_id: "r7", status });
    })
    .route("POST", /^\/runs\/r7\/abort$/, () => {
      status = "aborted";
      return service.json({ run_id: "r7", status });
    });
  service.install();
  return {
    service,
    client: new ServiceClient("http://svc:8800"),
    setStatus: (s) => {
      status = s;
    },
  };
}

const FIXED_RUN: RunEvent[] = [
  roundLine(1),
  roundLine(2),
  roundLine(3),
  roundLine(4),
  doneLine(4),
];

describe("RunDashboard", () => {
  let scenario: Scenario;

  afterEach(() => scenario?.service.uninstall());

  it("renders a flat memory sparkline for a fixed-size run", async () => {
    scenario = runService([{ lines: FIXED_RUN }], "running");
    const dash = new RunDashboard(scenario.client, "r7", { pollMs: 0 });
    await dash.open();
    await dash.whenStreamSettled();

    const sparks = dash.root.querySelectorAll("svg.sparkline");
    expect(sparks.length).toBe(2); // one per client
    for (const spark of sparks) {
      expect(spark.getAttribute("data-flat")).toBe("true");
      const points = spark.querySelector("polyline")?.getAttribute("points");
      const ys = new Set(
        (points ?? "").split(" ").map((pair) => pair.split(",")[1])
      );
      expect(ys.size).toBe(1);
    }
    expectAllTraced(dash.root, scenario.service);
    dash.close();
  });

  it("draws a jittery sparkline when batch peaks move", async () => {
    const lines: RunEvent[] = [1, 2, 3].map((round) =>
      roundLine(round, {
        clients: [
          clientRound(0, round, { memory_peak_units: 140 + round * 7 }),
        ],
      })
    );
    lines.push(doneLine(3));
    scenario = runService([{ lines }], "running");
    const dash = new RunDashboard(scenario.client, "r7", { pollMs: 0 });
    await dash.open();
    await dash.whenStreamSettled();

    const spark = dash.root.querySelector("svg.sparkline");
    expect(spark?.getAttribute("data-flat")).toBe("false");
    dash.close();
  });

  it("surfaces an accuracy shortfall with the service's remedies", async () => {
    const lines: RunEvent[] = [
      roundLine(1),
      roundLine(2),
      roundLine(3),
      shortfallWarning(3),
      roundLine(4),
      doneLine(4),
    ];
    scenario = runService([{ lines }], "running");
    const dash = new RunDashboard(scenario.client, "r7", { pollMs: 0 });
    await dash.open();
    await dash.whenStreamSettled();

    const warning = dash.root.querySelector(
      '.warning[data-kind="accuracy-shortfall"]'
    );
    expect(warning).not.toBeNull();
    expect(warning?.querySelector(".warning-message")?.textContent).toContain(
      "below the required"
    );
    const remedies = [...(warning?.querySelectorAll(".remedies li") ?? [])].map(
      (li) => li.textContent
    );
    expect(remedies).toEqual([
      "expand the client data partitions",
      "increase the memory budget and switch accountant",
      "relax the epsilon target",
    ]);
    dash.close();
  });

  it("flips the status chip after pause and accepts resume", async () => {
    scenario = runService([{ lines: FIXED_RUN }], "running");
    const dash = new RunDashboard(scenario.client, "r7", { pollMs: 0 });
    await dash.open();
    await dash.whenStreamSettled();

    const button = (label: string) =>
      [...dash.root.querySelectorAll("button")].find(
        (b) => b.textContent === label
      );
    button("pause")?.click();
    await until(() =>
      (dash.root.querySelector(".chip")?.textContent ?? "") === "paused"
    );
    expect(
      scenario.service.ofPath("/runs/r7/pause").length
    ).toBe(1);

    button("resume")?.click();
    await until(() =>
      (dash.root.querySelector(".chip")?.textContent ?? "") === "running"
    );
    dash.close();
  });

  it("keeps a failed action's diagnostic visible", async () => {
    const service = new FakeService();
    service
      .route("GET", /^\/runs\/r7$/, () => service.json(runDetail("r7", "done", 4)))
      .route("GET", /^\/runs\/r7\/rounds$/, () =>
        service.stream({ lines: FIXED_RUN })
      )
      .route("POST", /^\/runs\/r7\/pause$/, () =>
        service.error(409, "no transition from done to paused")
      );
    service.install();
    scenario = {
      service,
      client: new ServiceClient("http://svc:8800"),
      setStatus: () => {},
    };

    const dash = new RunDashboard(scenario.client, "r7", { pollMs: 0 });
    await dash.open();
    await dash.whenStreamSettled();
    await dash.pause();

    const banner = dash.root.querySelector(".dash-header .error-banner");
    expect(banner?.textContent).toContain("no transition from done to paused");
    expect(dash.root.querySelector(".chip")?.textContent).toBe("done");
    dash.close();
  });

  it("reconnects after a drop, resyncs gaps, and reports both", async () => {
    const full: RunEvent[] = [
      roundLine(1),
      roundLine(2),
      roundLine(3),
      roundLine(4),
      doneLine(4),
    ];
    scenario = runService(
      [
        { lines: [roundLine(1), roundLine(3)] }, // gap at 3, then close
        { lines: full },
      ],
      "running"
    );
    const dash = new RunDashboard(scenario.client, "r7", {
      pollMs: 0,
      feed: { retryDelayMs: 1, maxReconnects: 3 },
    });
    await dash.open();
    const state = await dash.whenStreamSettled();

    expect(state.gaps).toBeGreaterThanOrEqual(1);
    expect(state.reconnects).toBeGreaterThanOrEqual(1);
    expect([...state.rounds.keys()].sort()).toEqual([1, 2, 3, 4]);
    const note = dash.root.querySelector(".stream-note");
    expect(note?.textContent).toContain("reconnect");
    expect(note?.textContent).toContain("gap");
    dash.close();
  });

  it("rebuilds the identical view from a replayed event stream", () => {
    const recorded: RunEvent[] = [
      roundLine(1),
      roundLine(2),
      shortfallWarning(2),
      roundLine(3),
      doneLine(3),
    ];
    const once = emptyFeedState();
    for (const event of recorded) applyEvent(once, event);

    const twice = emptyFeedState();
    for (const event of recorded) applyEvent(twice, event);
    for (const event of recorded) applyEvent(twice, event); // full replay

    expect(renderDashboardBody(twice).outerHTML).toBe(
      renderDashboardBody(once).outerHTML
    );
  });
});
