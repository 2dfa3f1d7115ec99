/** In-memory stand-ins: a versioned session service and day-bundle factory. */

import type { FetchLike } from "../src/client.js";
import type { DayBundle, StageFormInput } from "../src/types.js";

export class FakeService {
  store = new Map<string, string[]>(); // path -> JSON bodies per version
  failPuts = 0; // fail the next N put requests with a network error
  putCount = 0;

  fetch: FetchLike = async (url, init) => {
    const parsed = new URL(url, "http://fake");
    const path = parsed.pathname;
    if (init?.method === "PUT") {
      this.putCount += 1;
      if (this.failPuts > 0) {
        this.failPuts -= 1;
        throw new TypeError("network down");
      }
      const versions = this.store.get(path) ?? [];
      versions.push(init.body as string);
      this.store.set(path, versions);
      return new Response(JSON.stringify({ version: versions.length }), { status: 200 });
    }
    const versions = this.store.get(path);
    if (!versions || versions.length === 0) {
      return new Response(JSON.stringify({ error: "not-found" }), { status: 404 });
    }
    const wanted = parsed.searchParams.get("version");
    const index = wanted ? Number(wanted) - 1 : versions.length - 1;
    const body = versions[index];
    if (body === undefined) {
      return new Response(JSON.stringify({ error: "not-found" }), { status: 404 });
    }
    return new Response(
      JSON.stringify({ version: index + 1, body: JSON.parse(body) }),
      { status: 200 },
    );
  };

  versionsOf(user: string, ticker: string, kind: string): number {
    return this.store.get(`/sessions/${user}/${ticker}/${kind}`)?.length ?? 0;
  }
}

export function makeBundle(dayIndex: number, price: number, stripped = true): DayBundle {
  const flag = stripped ? { decision_stripped: true } : {};
  return {
    ticker: "TEST",
    day_index: dayIndex,
    date: `2024-03-${String(dayIndex).padStart(2, "0")}`,
    stages: {
      d0: { stage: "d0", closes: [price - 1, price], ...flag },
      d1: { stage: "d1", market_cap: 1e9, pe_ratio: 20, eps: price / 20, ...flag },
      d2: { stage: "d2", last_close: price, ma_10d: price, ma_30d: price, ...flag },
      d3: { stage: "d3", items: [{ title: "t", source: "s", summary: "x" }], ...flag },
      d4: { stage: "d4", sentiment_score: 0.1, analyst_ratings: { buy: 3, hold: 2, sell: 1 }, ...flag },
    },
  };
}

export function bundleSource(prices: number[], stripped = true) {
  return async (dayIndex: number): Promise<DayBundle> => {
    const price = prices[dayIndex - 1];
    if (price === undefined) throw new Error(`no bundle for day ${dayIndex}`);
    return makeBundle(dayIndex, price, stripped);
  };
}

export function stageInput(
  stage: string,
  overrides: Partial<StageFormInput> = {},
): StageFormInput {
  const base: StageFormInput = {
    action: "BUY",
    reliability: 80,
    rationale: "looks strong",
  };
  if (["d1", "d2", "d3", "d4"].includes(stage)) base.leakage_flag = false;
  if (stage === "final") {
    base.most_influential = "temporal";
    base.most_reliable = "fundamentals";
    base.trade_size = 50;
  }
  return { ...base, ...overrides };
}
