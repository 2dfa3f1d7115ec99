/**
 * DOM glue for the stepwise trading simulation. All protocol/portfolio logic
 * lives in the pure modules; this file only renders state and forwards form
 * submissions. One ticker per deployment (set at build/config time below).
 */

import { SessionClient, ServiceUnavailableError } from "./client.js";
import { STAGE_ORDER, STAGE_TITLES } from "./protocol.js";
import { SessionController, SessionLockedError } from "./session.js";
import type { DayBundle, StageFormInput, StageId } from "./types.js";

declare global {
  interface Window {
    SIM_CONFIG?: { serviceUrl?: string; ticker?: string; dataUrl?: string; totalDays?: number };
  }
}

const config = {
  serviceUrl: window.SIM_CONFIG?.serviceUrl ?? "http://127.0.0.1:8787",
  ticker: window.SIM_CONFIG?.ticker ?? "ALFA",
  dataUrl: window.SIM_CONFIG?.dataUrl ?? "./data",
  totalDays: window.SIM_CONFIG?.totalDays ?? 10,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

async function fetchBundle(dayIndex: number): Promise<DayBundle> {
  const pad = String(dayIndex).padStart(3, "0");
  const resp = await fetch(`${config.dataUrl}/${config.ticker}/day_${pad}.json`);
  if (!resp.ok) throw new Error(`day bundle ${dayIndex}: HTTP ${resp.status}`);
  return (await resp.json()) as DayBundle;
}

let controller: SessionController | null = null;

function renderPayload(payload: Record<string, unknown>): HTMLElement {
  const box = el("div", { class: "payload" });
  for (const [key, value] of Object.entries(payload)) {
    if (key === "decision_stripped" || key === "stage") continue;
    if (Array.isArray(value)) {
      const list = el("ul", {});
      for (const item of value) {
        list.append(el("li", {}, [typeof item === "object" ? JSON.stringify(item) : String(item)]));
      }
      box.append(el("div", { class: "field" }, [el("strong", {}, [key]), list]));
    } else if (typeof value === "object" && value !== null) {
      box.append(el("div", { class: "field" }, [el("strong", {}, [key]), " ", JSON.stringify(value)]));
    } else {
      box.append(el("div", { class: "field" }, [el("strong", {}, [key]), " ", String(value)]));
    }
  }
  return box;
}

function readForm(stage: StageId): StageFormInput {
  const action = (document.querySelector('input[name="action"]:checked') as HTMLInputElement | null)
    ?.value as StageFormInput["action"];
  const reliabilityRaw = (byId("reliability") as HTMLInputElement).value;
  const input: StageFormInput = {
    action: action ?? null,
    reliability: reliabilityRaw === "" ? null : Number(reliabilityRaw),
    rationale: (byId("rationale") as HTMLTextAreaElement).value,
  };
  if (["d1", "d2", "d3", "d4"].includes(stage)) {
    const flag = document.querySelector('input[name="leakage"]:checked') as HTMLInputElement | null;
    input.leakage_flag = flag ? flag.value === "yes" : null;
  }
  if (stage === "final") {
    input.most_influential = (byId("most-influential") as HTMLSelectElement).value;
    input.most_reliable = (byId("most-reliable") as HTMLSelectElement).value;
    const size = (document.querySelector('input[name="trade-size"]:checked') as HTMLInputElement | null)
      ?.value;
    input.trade_size = size ? Number(size) : null;
  }
  return input;
}

function renderStageForm(stage: StageId): HTMLElement {
  const form = el("div", { class: "stage-form" });
  const actions = el("div", { class: "field" }, [el("strong", {}, ["Action "])]);
  for (const a of ["BUY", "SELL", "HOLD"]) {
    actions.append(
      el("label", {}, [
        Object.assign(el("input", { type: "radio", name: "action", value: a })),
        ` ${a} `,
      ]),
    );
  }
  form.append(actions);
  form.append(
    el("div", { class: "field" }, [
      el("label", { for: "reliability" }, ["Reliability (1-100) "]),
      el("input", { id: "reliability", type: "number", min: "1", max: "100" }),
    ]),
  );
  form.append(
    el("div", { class: "field" }, [
      el("label", { for: "rationale" }, ["Rationale "]),
      el("textarea", { id: "rationale", rows: "3" }),
    ]),
  );
  if (["d1", "d2", "d3", "d4"].includes(stage)) {
    form.append(
      el("div", { class: "field" }, [
        el("strong", {}, ["Were AI trading decisions inadvertently visible? "]),
        el("label", {}, [el("input", { type: "radio", name: "leakage", value: "yes" }), " yes "]),
        el("label", {}, [el("input", { type: "radio", name: "leakage", value: "no" }), " no "]),
      ]),
    );
  }
  if (stage === "final") {
    const sources = ["temporal", "fundamentals", "market", "news", "sentiment"];
    const pick = (id: string) =>
      el("select", { id }, sources.map((s) => el("option", { value: s }, [s])));
    form.append(
      el("div", { class: "field" }, [
        el("label", {}, ["Most influential source "]),
        pick("most-influential"),
      ]),
      el("div", { class: "field" }, [el("label", {}, ["Most reliable source "]), pick("most-reliable")]),
    );
    const sizes = el("div", { class: "field" }, [el("strong", {}, ["Trade size "])]);
    for (const s of [25, 50, 75, 100]) {
      sizes.append(
        el("label", {}, [
          el("input", { type: "radio", name: "trade-size", value: String(s) }),
          ` ${s}% `,
        ]),
      );
    }
    form.append(sizes);
  }
  return form;
}

function renderPortfolio(): void {
  if (!controller) return;
  const p = controller.portfolioState;
  byId("portfolio").textContent =
    `cash $${p.cash.toFixed(2)} | shares ${p.shares} | ` +
    `value $${(p.cash + p.shares * p.last_mark).toFixed(2)}`;
}

function showBanner(message: string): void {
  const banner = byId("banner");
  banner.textContent = message;
  banner.style.display = message ? "block" : "none";
}

async function renderCurrent(): Promise<void> {
  if (!controller) return;
  renderPortfolio();
  const main = byId("stage");
  main.replaceChildren();
  if (controller.completed) {
    main.append(el("h2", {}, ["Simulation complete"]), el("p", {}, ["Thank you; your session is saved."]));
    byId("submit").style.display = "none";
    return;
  }
  const stage = controller.currentStage();
  byId("progress").textContent =
    `Day ${controller.currentDayIndex} | stage ${STAGE_ORDER.indexOf(stage) + 1}/${STAGE_ORDER.length}`;
  main.append(el("h2", {}, [STAGE_TITLES[stage]]));
  main.append(renderPayload(controller.stagePayload()));
  main.append(renderStageForm(stage));
}

async function onSubmit(): Promise<void> {
  if (!controller || controller.completed) return;
  const stage = controller.currentStage();
  const input = readForm(stage);
  try {
    const result = await controller.submitStage(input);
    if (!result.ok) {
      showBanner(result.errors.map((e) => `${e.field}: ${e.message}`).join(" | "));
      return;
    }
    showBanner("");
    if (result.nextStage === null) {
      const outcome = await controller.finalizeDay();
      showBanner(
        `Day executed: ${outcome.executedAction} ${Math.abs(outcome.sharesChanged)} share(s). ` +
          (outcome.completed ? "All days complete." : "Next day loaded."),
      );
    }
    await renderCurrent();
  } catch (err) {
    if (err instanceof SessionLockedError) {
      showBanner("This session is open in another tab; this tab is read-only now.");
    } else if (err instanceof ServiceUnavailableError) {
      showBanner("Service unreachable; your entries are kept, retry in a moment.");
    } else {
      showBanner(String(err));
    }
  }
}

async function onLogin(): Promise<void> {
  const userId = (byId("user-id") as HTMLInputElement).value.trim();
  const education = (byId("education") as HTMLSelectElement).value;
  const experience = (byId("experience") as HTMLSelectElement).value;
  if (!userId) {
    showBanner("enter a user id");
    return;
  }
  const client = new SessionClient(config.serviceUrl, userId, config.ticker);
  controller = new SessionController(client, fetchBundle, { totalDays: config.totalDays });
  try {
    const result = await controller.login(userId, config.ticker, {
      education_level: education,
      finance_experience: experience,
    });
    byId("login").style.display = "none";
    byId("study").style.display = "block";
    showBanner(result.resumed ? `Welcome back: resumed day ${result.dayIndex}.` : "");
    await renderCurrent();
  } catch (err) {
    showBanner(
      err instanceof ServiceUnavailableError
        ? "Service unreachable; nothing was lost, retry."
        : String(err),
    );
  }
}

export function wireUp(): void {
  byId("login-button").addEventListener("click", () => void onLogin());
  byId("submit").addEventListener("click", () => void onSubmit());
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  wireUp();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wireUp);
}
