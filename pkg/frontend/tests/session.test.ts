import { describe, expect, it } from "vitest";

import { SessionClient } from "../src/client.js";
import { STAGE_ORDER, validateExport } from "../src/protocol.js";
import { SessionController, SessionLockedError } from "../src/session.js";
import { FakeService, bundleSource, stageInput } from "./helpers.js";

const DEMO = { education_level: "masters", finance_experience: "some" };

function makeController(
  service: FakeService,
  prices: number[],
  options: { user?: string; token?: string; cash?: number } = {},
) {
  let tick = 0;
  const client = new SessionClient("http://fake", options.user ?? "u1", "TEST", service.fetch);
  return new SessionController(client, bundleSource(prices), {
    totalDays: prices.length,
    initialCash: options.cash ?? 10_000,
    now: () => 1_700_000_000_000 + 15_000 * tick++,
    makeToken: () => options.token ?? "tab-1",
  });
}

async function walkDay(
  controller: SessionController,
  finalOverrides: Record<string, unknown> = {},
) {
  for (const stage of STAGE_ORDER) {
    const input = stageInput(stage, stage === "final" ? finalOverrides : {});
    const result = await controller.submitStage(input);
    expect(result.ok, `stage ${stage}`).toBe(true);
    if (stage === "final") return controller.finalizeDay();
  }
  throw new Error("unreachable");
}

describe("login and resume", () => {
  it("fresh user starts at day 1 stage d0", async () => {
    const controller = makeController(new FakeService(), [100, 101]);
    const result = await controller.login("u1", "TEST", DEMO);
    expect(result).toMatchObject({ resumed: false, dayIndex: 1, stage: "d0" });
  });

  it("returning user resumes at the exact day and stage", async () => {
    const service = new FakeService();
    const prices = [100, 102, 99];
    const first = makeController(service, prices);
    await first.login("u1", "TEST", DEMO);
    await walkDay(first); // day 1 done
    // into day 2: submit d0, d1, d2 then leave
    for (const stage of ["d0", "d1", "d2"] as const) {
      expect((await first.submitStage(stageInput(stage))).ok).toBe(true);
    }
    // persist progress through an explicit export put (mid-day autosave)
    const client = new SessionClient("http://fake", "u1", "TEST", service.fetch);
    await client.put("session-export", first.buildExport());

    const second = makeController(service, prices, { token: "tab-2" });
    const result = await second.login("u1", "TEST", DEMO);
    expect(result).toMatchObject({ resumed: true, dayIndex: 2, stage: "d3" });
  });

  it("requires a user id", async () => {
    const controller = makeController(new FakeService(), [100]);
    await expect(controller.login("  ", "TEST", DEMO)).rejects.toThrow(/user id/);
  });
});

describe("stage flow", () => {
  it("walks the protocol in order, forward only", async () => {
    const controller = makeController(new FakeService(), [100]);
    await controller.login("u1", "TEST", DEMO);
    const seen: string[] = [];
    for (const stage of STAGE_ORDER) {
      seen.push(controller.currentStage());
      const result = await controller.submitStage(stageInput(stage));
      expect(result.ok).toBe(true);
      if (stage !== "final") expect(controller.currentStage()).toBe(result.nextStage);
    }
    expect(seen).toEqual([...STAGE_ORDER]);
  });

  it("rejects invalid entries without advancing", async () => {
    const controller = makeController(new FakeService(), [100]);
    await controller.login("u1", "TEST", DEMO);
    const bad = await controller.submitStage(stageInput("d0", { reliability: 0 }));
    expect(bad.ok).toBe(false);
    expect(bad.errors.map((e) => e.field)).toContain("reliability");
    expect(controller.currentStage()).toBe("d0");
  });

  it("requires the leakage flag on d1", async () => {
    const controller = makeController(new FakeService(), [100]);
    await controller.login("u1", "TEST", DEMO);
    await controller.submitStage(stageInput("d0"));
    const bad = await controller.submitStage(stageInput("d1", { leakage_flag: null }));
    expect(bad.ok).toBe(false);
    expect(controller.currentStage()).toBe("d1");
  });

  it("requires trade size on the final stage", async () => {
    const controller = makeController(new FakeService(), [100]);
    await controller.login("u1", "TEST", DEMO);
    for (const stage of ["d0", "d1", "d2", "d3", "d4"] as const) {
      await controller.submitStage(stageInput(stage));
    }
    const bad = await controller.submitStage(stageInput("final", { trade_size: null }));
    expect(bad.ok).toBe(false);
  });

  it("records time on stage from the injected clock", async () => {
    const controller = makeController(new FakeService(), [100]);
    await controller.login("u1", "TEST", DEMO);
    await controller.submitStage(stageInput("d0"));
    const entry = controller.buildExport().days[0]!.stages[0]!;
    expect(entry.time_on_stage_sec).toBeGreaterThanOrEqual(0);
  });

  it("refuses unstripped day bundles", async () => {
    const service = new FakeService();
    const client = new SessionClient("http://fake", "u1", "TEST", service.fetch);
    const controller = new SessionController(
      client,
      bundleSource([100], false),
      { totalDays: 1 },
    );
    await expect(controller.login("u1", "TEST", DEMO)).rejects.toThrow(/decision-strip/);
  });
});

describe("finalize day", () => {
  it("executes the chosen trade with whole-share flooring", async () => {
    const controller = makeController(new FakeService(), [100, 50], { cash: 1000 });
    await controller.login("u1", "TEST", DEMO);
    const outcome = await walkDay(controller, { trade_size: 50 });
    // BUY 50% of 1000 at 100: 5 shares
    expect(outcome.executedAction).toBe("BUY");
    expect(outcome.sharesChanged).toBe(5);
    expect(outcome.portfolio).toEqual({ cash: 500, shares: 5, last_mark: 100 });
    expect(outcome.completed).toBe(false);
  });

  it("persists export, portfolio, and marker; export validates", async () => {
    const service = new FakeService();
    const controller = makeController(service, [100]);
    await controller.login("u1", "TEST", DEMO);
    const outcome = await walkDay(controller);
    expect(outcome.completed).toBe(true);
    expect(service.versionsOf("u1", "TEST", "session-export")).toBe(1);
    expect(service.versionsOf("u1", "TEST", "portfolio-state")).toBe(1);
    const stored = JSON.parse(
      service.store.get("/sessions/u1/TEST/session-export")![0]!,
    );
    expect(validateExport(stored)).toEqual([]);
    expect(stored.current_day).toBe(2);
  });

  it("a failed save keeps state and a retry stores exactly one version", async () => {
    const service = new FakeService();
    const controller = makeController(service, [100]);
    await controller.login("u1", "TEST", DEMO);
    for (const stage of ["d0", "d1", "d2", "d3", "d4"] as const) {
      await controller.submitStage(stageInput(stage));
    }
    await controller.submitStage(stageInput("final"));
    service.failPuts = 1; // the export put dies
    await expect(controller.finalizeDay()).rejects.toThrow(/failed|down/);
    expect(service.versionsOf("u1", "TEST", "session-export")).toBe(0);
    expect(controller.portfolioState.shares).toBe(0); // nothing committed

    const retry = await controller.finalizeDay();
    expect(retry.completed).toBe(true);
    expect(service.versionsOf("u1", "TEST", "session-export")).toBe(1);
  });

  it("multi-day run compounds the portfolio and completes", async () => {
    const service = new FakeService();
    const controller = makeController(service, [100, 50], { cash: 1000 });
    await controller.login("u1", "TEST", DEMO);
    await walkDay(controller, { trade_size: 50 }); // buy 5 @ 100
    const last = await walkDay(controller, {
      action: "SELL",
      trade_size: 100,
    } as Record<string, unknown>);
    // sell all 5 at 50
    expect(last.executedAction).toBe("SELL");
    expect(last.portfolio).toEqual({ cash: 750, shares: 0, last_mark: 50 });
    expect(last.completed).toBe(true);
    expect(service.versionsOf("u1", "TEST", "session-export")).toBe(2);
  });
});

describe("tab lock", () => {
  it("a second tab taking over invalidates the first", async () => {
    const service = new FakeService();
    const prices = [100];
    const tabA = makeController(service, prices, { token: "tab-A" });
    await tabA.login("u1", "TEST", DEMO);
    const tabB = makeController(service, prices, { token: "tab-B" });
    await tabB.login("u1", "TEST", DEMO);

    await expect(tabA.submitStage(stageInput("d0"))).rejects.toThrow(SessionLockedError);
    const fine = await tabB.submitStage(stageInput("d0"));
    expect(fine.ok).toBe(true);
  });
});
