/**
 * Stage protocol rules: ordering, per-stage validation, strip-filter checks,
 * and the export-shape validator mirroring the server's schema. All pure.
 */

import type {
  DayBundle,
  DayRecord,
  SessionExport,
  StageEntry,
  StageFormInput,
  StageId,
} from "./types.js";

export const STAGE_ORDER: readonly StageId[] = ["d0", "d1", "d2", "d3", "d4", "final"];
export const LEAKAGE_STAGES: readonly StageId[] = ["d1", "d2", "d3", "d4"];
export const TRADE_SIZES = [25, 50, 75, 100] as const;
export const ACTIONS = ["BUY", "SELL", "HOLD"] as const;

export const STAGE_TITLES: Record<StageId, string> = {
  d0: "Temporal signals (30-day price history)",
  d1: "Fundamentals",
  d2: "Market / technical indicators",
  d3: "News",
  d4: "Social sentiment & analyst ratings",
  final: "Final decision & execution",
};

export function nextStage(stage: StageId): StageId | null {
  const i = STAGE_ORDER.indexOf(stage);
  return i >= 0 && i + 1 < STAGE_ORDER.length ? STAGE_ORDER[i + 1]! : null;
}

export interface FieldError {
  field: string;
  message: string;
}

/** Validate one stage form; returns [] when submittable. */
export function validateStageInput(stage: StageId, input: StageFormInput): FieldError[] {
  const errors: FieldError[] = [];
  if (!input.action || !ACTIONS.includes(input.action)) {
    errors.push({ field: "action", message: "select BUY, SELL, or HOLD" });
  }
  if (
    input.reliability === null ||
    !Number.isInteger(input.reliability) ||
    input.reliability < 1 ||
    input.reliability > 100
  ) {
    errors.push({ field: "reliability", message: "reliability must be an integer from 1 to 100" });
  }
  if (!input.rationale || !input.rationale.trim()) {
    errors.push({ field: "rationale", message: "a short rationale is required" });
  }
  if (LEAKAGE_STAGES.includes(stage) && typeof input.leakage_flag !== "boolean") {
    errors.push({
      field: "leakage_flag",
      message: "answer whether AI decisions were inadvertently visible",
    });
  }
  if (stage === "final") {
    if (!input.most_influential || !input.most_influential.trim()) {
      errors.push({ field: "most_influential", message: "pick the most influential source" });
    }
    if (!input.most_reliable || !input.most_reliable.trim()) {
      errors.push({ field: "most_reliable", message: "pick the most reliable source" });
    }
    if (
      input.trade_size === null ||
      input.trade_size === undefined ||
      !TRADE_SIZES.includes(input.trade_size as 25 | 50 | 75 | 100)
    ) {
      errors.push({ field: "trade_size", message: "trade size must be 25, 50, 75, or 100" });
    }
  }
  return errors;
}

export function entryFromInput(stage: StageId, input: StageFormInput, secondsOnStage?: number): StageEntry {
  const entry: StageEntry = {
    stage,
    action: input.action!,
    reliability: input.reliability!,
    rationale: input.rationale.trim(),
  };
  if (secondsOnStage !== undefined) entry.time_on_stage_sec = secondsOnStage;
  if (LEAKAGE_STAGES.includes(stage)) entry.leakage_flag = input.leakage_flag as boolean;
  if (stage === "final") {
    entry.most_influential = input.most_influential!.trim();
    entry.most_reliable = input.most_reliable!.trim();
    entry.trade_size = input.trade_size as 25 | 50 | 75 | 100;
  }
  return entry;
}

/**
 * Refuse to show any payload that has not passed the decision-strip filter.
 * Throws on the first offending stage.
 */
export function assertStrippedBundle(bundle: DayBundle): void {
  for (const [stage, payload] of Object.entries(bundle.stages)) {
    if (payload.decision_stripped !== true) {
      throw new Error(
        `refusing to display day ${bundle.day_index} stage ${stage}: ` +
          "payload did not pass the decision-strip filter",
      );
    }
  }
}

function isCompleteDay(day: DayRecord): boolean {
  return day.stages.length > 0 && day.stages[day.stages.length - 1]!.stage === "final";
}

/** Mirror of the server-side session-export validation (shape + ordering). */
export function validateExport(session: SessionExport): string[] {
  const problems: string[] = [];
  if (!session.user_id) problems.push("user_id missing");
  if (!session.ticker) problems.push("ticker missing");
  session.days.forEach((day, i) => {
    if (day.day_index !== i + 1) {
      problems.push(`days[${i}].day_index expected ${i + 1}, got ${day.day_index}`);
    }
    day.stages.forEach((entry, pos) => {
      if (STAGE_ORDER[pos] !== entry.stage) {
        problems.push(
          `days[${i}].stages[${pos}]: stage order violation, expected ${STAGE_ORDER[pos]}, got ${entry.stage}`,
        );
      }
      if (entry.reliability < 1 || entry.reliability > 100) {
        problems.push(`days[${i}].stages[${pos}]: reliability out of [1, 100]`);
      }
      if (LEAKAGE_STAGES.includes(entry.stage) && typeof entry.leakage_flag !== "boolean") {
        problems.push(`days[${i}].stages[${pos}]: leakage_flag missing`);
      }
      if (entry.stage === "final") {
        if (!entry.most_influential || !entry.most_reliable) {
          problems.push(`days[${i}].stages[${pos}]: attribution missing`);
        }
        if (!TRADE_SIZES.includes(entry.trade_size as 25 | 50 | 75 | 100)) {
          problems.push(`days[${i}].stages[${pos}]: trade_size off the grid`);
        }
      }
    });
    if (i < session.days.length - 1 && !isCompleteDay(day)) {
      problems.push(`days[${i}]: locked-day violation, only the last day may be incomplete`);
    }
  });
  if (session.days.length > 0) {
    const n = session.days.length;
    if (session.current_day < n || session.current_day > n + 1) {
      problems.push(`current_day ${session.current_day} inconsistent with ${n} day(s)`);
    }
    if (session.current_day === n + 1 && !isCompleteDay(session.days[n - 1]!)) {
      problems.push("current_day advanced past an incomplete day");
    }
  }
  return problems;
}
