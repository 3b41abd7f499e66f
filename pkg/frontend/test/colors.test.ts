import { describe, expect, it } from "vitest";

import { ALL_STATUSES, colorClass, statusColor } from "../dist/status.js";

describe("status colors", () => {
  it("assigns the exact green/red/neutral split across all eight statuses", () => {
    expect(ALL_STATUSES).toHaveLength(8);
    const expected = {
      SUBMITTED: "neutral",
      READY: "neutral",
      RUNNING: "neutral",
      DONE_OK: "green",
      DONE_FAILED: "red",
      ABORTED: "red",
      CANCELLED: "neutral",
      CLEARED: "neutral",
    } as const;
    expect(Object.keys(expected).sort()).toEqual([...ALL_STATUSES].sort());
    for (const status of ALL_STATUSES) {
      expect(statusColor(status)).toBe(expected[status]);
    }
  });

  it("maps colors onto css chip classes", () => {
    expect(colorClass("DONE_OK")).toBe("status-green");
    expect(colorClass("ABORTED")).toBe("status-red");
    expect(colorClass("DONE_FAILED")).toBe("status-red");
    expect(colorClass("RUNNING")).toBe("status-neutral");
  });
});
