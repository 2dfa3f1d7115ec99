import { describe, expect, it } from "vitest";

import {
  STAGE_ORDER,
  assertStrippedBundle,
  nextStage,
  validateExport,
  validateStageInput,
} from "../src/protocol.js";
import type { SessionExport, StageEntry } from "../src/types.js";
import { makeBundle, stageInput } from "./helpers.js";

describe("stage ordering", () => {
  it("runs d0 through final", () => {
    expect(STAGE_ORDER).toEqual(["d0", "d1", "d2", "d3", "d4", "final"]);
  });

  it("nextStage walks the protocol and stops", () => {
    expect(nextStage("d0")).toBe("d1");
    expect(nextStage("d4")).toBe("final");
    expect(nextStage("final")).toBeNull();
  });
});

describe("stage entry validation", () => {
  it("accepts a complete d0 entry", () => {
    expect(validateStageInput("d0", stageInput("d0"))).toEqual([]);
  });

  it("rejects reliability outside 1..100", () => {
    for (const bad of [0, 101, 55.5, null]) {
      const errors = validateStageInput("d0", stageInput("d0", { reliability: bad as number }));
      expect(errors.map((e) => e.field)).toContain("reliability");
    }
  });

  it("requires the leakage flag on d1..d4 only", () => {
    for (const stage of ["d1", "d2", "d3", "d4"] as const) {
      const errors = validateStageInput(stage, stageInput(stage, { leakage_flag: null }));
      expect(errors.map((e) => e.field)).toContain("leakage_flag");
    }
    expect(validateStageInput("d0", stageInput("d0"))).toEqual([]);
  });

  it("requires attribution and grid trade size on final", () => {
    const missing = validateStageInput("final", stageInput("final", { trade_size: null }));
    expect(missing.map((e) => e.field)).toContain("trade_size");
    const off = validateStageInput("final", stageInput("final", { trade_size: 33 }));
    expect(off.map((e) => e.field)).toContain("trade_size");
    const noAttr = validateStageInput("final", stageInput("final", { most_influential: "" }));
    expect(noAttr.map((e) => e.field)).toContain("most_influential");
    expect(validateStageInput("final", stageInput("final"))).toEqual([]);
  });

  it("requires an action and a rationale", () => {
    const errors = validateStageInput("d0", stageInput("d0", { action: null, rationale: "  " }));
    expect(errors.map((e) => e.field)).toEqual(
      expect.arrayContaining(["action", "rationale"]),
    );
  });
});

describe("decision-strip assertion", () => {
  it("accepts stripped bundles", () => {
    expect(() => assertStrippedBundle(makeBundle(1, 100))).not.toThrow();
  });

  it("refuses unstripped payloads", () => {
    expect(() => assertStrippedBundle(makeBundle(1, 100, false))).toThrow(/decision-strip/);
  });
});

function entry(stage: StageEntry["stage"], extra: Partial<StageEntry> = {}): StageEntry {
  const base: StageEntry = { stage, action: "HOLD", reliability: 50, rationale: "r" };
  if (["d1", "d2", "d3", "d4"].includes(stage)) base.leakage_flag = false;
  if (stage === "final") {
    base.most_influential = "temporal";
    base.most_reliable = "temporal";
    base.trade_size = 25;
  }
  return { ...base, ...extra };
}

function fullDay(index: number) {
  return {
    day_index: index,
    stages: STAGE_ORDER.map((s) => entry(s)),
  };
}

function exportWith(days: SessionExport["days"], currentDay: number): SessionExport {
  return {
    user_id: "u1",
    ticker: "TEST",
    demographics: { education_level: "x", finance_experience: "y" },
    current_day: currentDay,
    days,
    portfolio: { cash: 1000, shares: 0, last_mark: 100 },
  };
}

describe("export validation mirrors the server schema", () => {
  it("accepts a clean two-day session", () => {
    const session = exportWith(
      [fullDay(1), { day_index: 2, stages: [entry("d0")] }],
      2,
    );
    expect(validateExport(session)).toEqual([]);
  });

  it("flags stage-order gaps", () => {
    const session = exportWith(
      [{ day_index: 1, stages: [entry("d0"), entry("d2")] }],
      1,
    );
    expect(validateExport(session).join(" ")).toMatch(/stage order violation/);
  });

  it("flags incomplete locked days", () => {
    const session = exportWith(
      [{ day_index: 1, stages: [entry("d0")] }, fullDay(2)],
      2,
    );
    expect(validateExport(session).join(" ")).toMatch(/locked-day/);
  });

  it("flags current_day past an incomplete day", () => {
    const session = exportWith([{ day_index: 1, stages: [entry("d0")] }], 2);
    expect(validateExport(session).join(" ")).toMatch(/incomplete day/);
  });
});
