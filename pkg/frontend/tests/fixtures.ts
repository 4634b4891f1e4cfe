/**
 * Canned service payloads. Values echo what the real service produces
 * for these shapes: the reference query is the published (dataset
 * 363848, batch 550, rounds 5, delta 1e-6) row pair, and run events
 * carry the exact field set the round stream emits.
 */

import type {
  CalibrateResponse,
  ClientRound,
  DoneEvent,
  Recommendation,
  RoundEvent,
  RunDetail,
  WarningEvent,
} from "../src/api.js";

// ---------------------------------------------------------------------------
// calibration
// ---------------------------------------------------------------------------

export const REFERENCE_STEPS = 3310; // 5 * ceil(363848 / 550)

/** sigma per (scheme, epsilon) for the reference shape. */
export const REFERENCE_SIGMAS: Record<string, Record<number, number>> = {
  poisson: { 2: 1.31, 4: 1.05, 6: 0.91, 8: 0.87, 10: 0.84 },
  "fixed-size": { 2: 2.62, 4: 2.08, 6: 1.79, 8: 1.72, 10: 1.66 },
};

export function calibrateResponse(
  scheme: "poisson" | "fixed-size",
  epsilon: number,
  delta = 1e-6
): CalibrateResponse {
  const sigma = REFERENCE_SIGMAS[scheme]?.[epsilon];
  if (sigma === undefined) {
    throw new Error(`no fixture sigma for ${scheme} at epsilon ${epsilon}`);
  }
  return {
    sigma,
    achieved_epsilon: epsilon * 0.9987,
    best_order: scheme === "poisson" ? 14 : 4,
    steps: REFERENCE_STEPS,
    epsilon,
    delta,
    scheme,
    adjacency: scheme === "poisson" ? "add-remove" : "replace-one",
  };
}

// ---------------------------------------------------------------------------
// recommendations
// ---------------------------------------------------------------------------

export function ampleMemoryRecommendation(): Recommendation {
  return {
    epsilon: 10,
    accountant: "poisson",
    batch_size: 12500,
    partition_sizes: [12500, 12500, 12500, 12500],
    deltas: [0.00008, 0.00008, 0.00008, 0.00008],
    sigmas: [0.61, 0.61, 0.61, 0.61],
    steps_per_client: [5, 5, 5, 5],
    memory_peak_estimate: null,
    overrun_probability: null,
    rationale: [
      "goal mitigate-reconstruction maps to epsilon 10",
      "batch size 12500 capped by the smallest shard",
      "expected Poisson peak ~12563 examples fits the budget; keeping the preferred poisson accountant",
    ],
  };
}

export function memoryConstrainedRecommendation(): Recommendation {
  return {
    epsilon: 6,
    accountant: "fixed-size",
    batch_size: 200,
    partition_sizes: [500, 500, 500, 500],
    deltas: [0.002, 0.002, 0.002, 0.002],
    sigmas: [3.12, 3.12, 3.12, 3.12],
    steps_per_client: [15, 15, 15, 15],
    memory_peak_estimate: 218,
    overrun_probability: null,
    rationale: [
      "goal mitigate-mia maps to epsilon 6",
      "batch size 200 fills the memory budget (218 units, model 18)",
      "Poisson batch spikes (expected peak ~231 examples) exceed the budget; fixed-size batches keep memory constant",
    ],
  };
}

export function overrunNoteRecommendation(): Recommendation {
  return {
    epsilon: 3.5,
    accountant: "poisson",
    batch_size: 420,
    partition_sizes: [1000, 1000],
    deltas: [0.001, 0.001],
    sigmas: [2.0785, 2.0785],
    steps_per_client: [9, 9],
    memory_peak_estimate: 466,
    overrun_probability: 0.0123,
    rationale: [
      "regulatory epsilon 3.5 passes through",
      "batch size 420 fills the memory budget (486 units, model 66)",
      "expected Poisson peak ~448 examples fits the budget; keeping the preferred poisson accountant",
      "single-step probability of a batch above the budget: 0.0123",
    ],
  };
}

// ---------------------------------------------------------------------------
// run events
// ---------------------------------------------------------------------------

export function clientRound(
  client: number,
  round: number,
  opts: Partial<ClientRound> = {}
): ClientRound {
  return {
    client,
    epsilon_spent: 0.6 * round,
    delta: 0.00025,
    memory_peak_units: 152,
    batch_min: 128,
    batch_mean: 128,
    batch_max: 128,
    skipped_steps: 0,
    shard_accuracy: 0.8 + round * 0.01,
    ...opts,
  };
}

export function roundLine(
  round: number,
  opts: { accuracy?: number; clients?: ClientRound[] } = {}
): RoundEvent {
  return {
    type: "round_complete",
    round,
    accuracy: opts.accuracy ?? 0.7 + round * 0.02,
    loss: 0.6 - round * 0.03,
    clients: opts.clients ?? [clientRound(0, round), clientRound(1, round)],
  };
}

export function shortfallWarning(round: number): WarningEvent {
  return {
    type: "warning",
    round,
    kind: "accuracy-shortfall",
    message:
      "best accuracy 0.760 after round 3 is below the required 0.950 " +
      "and the trend (0.12 points/round) has stalled",
    remedies: [
      "expand the client data partitions",
      "increase the memory budget and switch accountant",
      "relax the epsilon target",
    ],
  };
}

export function doneLine(
  rounds: number,
  status: "done" | "aborted" = "done",
  diagnostic: string | null = null
): DoneEvent {
  return { type: "done", status, diagnostic, rounds };
}

export function runDetail(
  runId: string,
  status: RunDetail["status"],
  roundsDone = 0
): RunDetail {
  return {
    run_id: runId,
    status,
    config: {
      dataset_size: 8000,
      clients: 2,
      rounds: 4,
      batch_size: 128,
      learning_rate: 0.5,
      privacy: { sigma: 1.1, clip_norm: 1.0, sampler: "fixed-size" },
    },
    snapshot:
      roundsDone === 0
        ? null
        : {
            status,
            rounds_done: roundsDone,
            accuracy: 0.7 + roundsDone * 0.02,
            loss: 0.6 - roundsDone * 0.03,
            max_accuracy: 0.7 + roundsDone * 0.02,
            diagnostic: null,
          },
  };
}
