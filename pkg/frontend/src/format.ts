/**
 * Number formatting shared by every view.
 *
 * Displayed values are service numbers passed through this one function,
 * which keeps the provenance of on-screen digits auditable: a UI test can
 * format the intercepted payloads the same way and demand set inclusion.
 */

export function fmtNum(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (Number.isInteger(value)) return String(value);
  const magnitude = Math.abs(value);
  if (magnitude >= 1e6 || magnitude < 1e-4) {
    return value.toExponential(4);
  }
  return String(Number(value.toPrecision(6)));
}

/** Collect every number reachable in a JSON payload, pre-formatted. */
export function formattedNumbers(payload: unknown, into?: Set<string>): Set<string> {
  const out = into ?? new Set<string>();
  if (typeof payload === "number") {
    out.add(fmtNum(payload));
  } else if (Array.isArray(payload)) {
    for (const item of payload) formattedNumbers(item, out);
  } else if (payload && typeof payload === "object") {
    for (const item of Object.values(payload)) formattedNumbers(item, out);
  }
  return out;
}
