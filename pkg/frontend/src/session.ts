/**
 * Session state machine: login/resume, stage-by-stage decision capture,
 * day finalization with portfolio execution, and persistence against the
 * session service.
 *
 * Navigation is strictly forward: submitted entries are immutable here and on
 * the server (every put is a new version, and the server re-validates stage
 * order). A per-tab lock token rides on the progress marker so a second tab
 * taking the session over invalidates this one.
 */

import { SessionClient } from "./client.js";
import {
  STAGE_ORDER,
  assertStrippedBundle,
  entryFromInput,
  nextStage,
  validateExport,
  validateStageInput,
  type FieldError,
} from "./protocol.js";
import { executeTrade, markedValue } from "./portfolio.js";
import type {
  Action,
  DayBundle,
  DayRecord,
  Demographics,
  PortfolioState,
  ProgressMarker,
  SessionExport,
  StageFormInput,
  StageId,
} from "./types.js";

export type BundleSource = (dayIndex: number) => Promise<DayBundle>;

export class SessionLockedError extends Error {}
export class ProtocolError extends Error {}

export interface ControllerOptions {
  totalDays: number;
  initialCash?: number;
  now?: () => number;
  makeToken?: () => string;
}

export interface LoginResult {
  resumed: boolean;
  dayIndex: number;
  stage: StageId;
  completed: boolean;
}

export interface SubmitResult {
  ok: boolean;
  errors: FieldError[];
  nextStage: StageId | null;
}

export interface FinalizeResult {
  portfolio: PortfolioState;
  sharesChanged: number;
  executedAction: Action;
  completed: boolean;
  exportVersion: number;
}

export class SessionController {
  private userId = "";
  private ticker = "";
  private demographics: Demographics = { education_level: "", finance_experience: "" };
  private days: DayRecord[] = [];
  private portfolio: PortfolioState = { cash: 0, shares: 0, last_mark: 0 };
  private dayIndex = 1;
  private lockToken = "";
  private stageShownAt = 0;
  private bundle: DayBundle | null = null;
  private readonly now: () => number;
  private readonly makeToken: () => string;

  constructor(
    private readonly client: SessionClient,
    private readonly bundles: BundleSource,
    private readonly options: ControllerOptions,
  ) {
    this.now = options.now ?? (() => Date.now());
    this.makeToken =
      options.makeToken ?? (() => `tab-${Math.random().toString(36).slice(2)}-${this.now()}`);
  }

  // -- access --------------------------------------------------------------

  get currentDayIndex(): number {
    return this.dayIndex;
  }

  get completed(): boolean {
    return this.dayIndex > this.options.totalDays;
  }

  get portfolioState(): PortfolioState {
    return { ...this.portfolio };
  }

  currentStage(): StageId {
    const day = this.days[this.dayIndex - 1];
    const done = day ? day.stages.length : 0;
    if (done >= STAGE_ORDER.length) {
      throw new ProtocolError("day already finalized; call finalizeDay/advance");
    }
    return STAGE_ORDER[done]!;
  }

  /** Payload for the current stage; refuses anything not decision-stripped. */
  stagePayload(): Record<string, unknown> {
    if (!this.bundle) throw new ProtocolError("no day bundle loaded");
    const stage = this.currentStage();
    if (stage === "final") {
      return { stage: "final", note: "aggregated view of all prior stages" };
    }
    return this.bundle.stages[stage] ?? {};
  }

  buildExport(): SessionExport {
    return {
      user_id: this.userId,
      ticker: this.ticker,
      demographics: this.demographics,
      current_day: this.dayIndex,
      days: this.days,
      portfolio: this.portfolio,
    };
  }

  // -- lifecycle -----------------------------------------------------------

  async login(userId: string, ticker: string, demographics: Demographics): Promise<LoginResult> {
    if (!userId.trim()) throw new ProtocolError("a user id is required");
    this.userId = userId;
    this.ticker = ticker;
    this.demographics = demographics;
    this.lockToken = this.makeToken();

    const existing = await this.client.get<SessionExport>("session-export");
    if (existing) {
      const body = existing.body;
      this.days = body.days;
      this.portfolio = body.portfolio;
      this.dayIndex = body.current_day;
    } else {
      this.days = [];
      this.portfolio = {
        cash: this.options.initialCash ?? 10_000,
        shares: 0,
        last_mark: 0,
      };
      this.dayIndex = 1;
    }
    await this.writeMarker(); // take the tab lock
    if (!this.completed) {
      await this.loadDay();
    }
    return {
      resumed: existing !== null,
      dayIndex: this.dayIndex,
      stage: this.markerStage(),
      completed: this.completed,
    };
  }

  private async loadDay(): Promise<void> {
    this.bundle = await this.bundles(this.dayIndex);
    assertStrippedBundle(this.bundle);
    if (!this.days[this.dayIndex - 1]) {
      this.days.push({ day_index: this.dayIndex, stages: [] });
    }
    this.stageShownAt = this.now();
  }

  private markerStage(): StageId {
    if (this.completed) return "final";
    const day = this.days[this.dayIndex - 1];
    const done = day ? day.stages.length : 0;
    return done >= STAGE_ORDER.length ? "final" : STAGE_ORDER[done]!;
  }

  private async writeMarker(): Promise<void> {
    const marker: ProgressMarker = {
      user_id: this.userId,
      ticker: this.ticker,
      day_index: this.dayIndex,
      stage: this.markerStage(),
      updated_at: new Date(this.now()).toISOString(),
      lock_token: this.lockToken,
    };
    await this.client.put("progress-marker", marker);
  }

  private async assertLockHeld(): Promise<void> {
    const marker = await this.client.get<ProgressMarker>("progress-marker");
    if (marker && marker.body.lock_token && marker.body.lock_token !== this.lockToken) {
      throw new SessionLockedError(
        "another tab has taken over this session; close this one",
      );
    }
  }

  /** Validate and append the current stage's entry. Forward-only. */
  async submitStage(input: StageFormInput): Promise<SubmitResult> {
    const stage = this.currentStage();
    const errors = validateStageInput(stage, input);
    if (errors.length) {
      return { ok: false, errors, nextStage: null };
    }
    await this.assertLockHeld();
    const seconds = Math.max(0, Math.round((this.now() - this.stageShownAt) / 1000));
    const entry = entryFromInput(stage, input, seconds);
    this.days[this.dayIndex - 1]!.stages.push(entry);
    this.stageShownAt = this.now();
    await this.writeMarker();
    return { ok: true, errors: [], nextStage: nextStage(stage) };
  }

  /**
   * Execute the final decision, persist everything, advance to the next day.
   *
   * Local state only commits after the export put succeeds, so a transport
   * failure leaves the controller exactly where it was and a retry stores
   * exactly one new version. The freshly stored portfolio is read back and
   * compared field by field; any divergence between the UI arithmetic and
   * what the server holds aborts instead of silently drifting.
   */
  async finalizeDay(): Promise<FinalizeResult> {
    const day = this.days[this.dayIndex - 1];
    if (!day || day.stages.length < STAGE_ORDER.length) {
      throw new ProtocolError("finalizeDay before the final stage was submitted");
    }
    if (!this.bundle) throw new ProtocolError("no day bundle loaded");
    await this.assertLockHeld();

    const finalEntry = day.stages[day.stages.length - 1]!;
    const price = Number(this.bundle.stages["d2"]?.["last_close"]);
    if (!Number.isFinite(price) || price <= 0) {
      throw new ProtocolError(`day bundle carries no usable close price (${price})`);
    }
    const outcome = executeTrade(
      finalEntry.action,
      finalEntry.trade_size ?? 0,
      this.portfolio,
      price,
    );
    // value conservation sanity before anything is persisted
    const drift = Math.abs(markedValue(outcome.portfolio, price) - outcome.preTradeValue);
    if (drift > 1e-6 * Math.max(1, outcome.preTradeValue)) {
      throw new ProtocolError(`execution arithmetic drifted by ${drift}`);
    }

    const exported: SessionExport = {
      ...this.buildExport(),
      current_day: this.dayIndex + 1,
      portfolio: outcome.portfolio,
    };
    const problems = validateExport(exported);
    if (problems.length) {
      throw new ProtocolError(`export failed validation: ${problems[0]}`);
    }
    const exportVersion = await this.client.put("session-export", exported);
    // committed: the durable record now reflects the executed day
    this.portfolio = outcome.portfolio;
    this.dayIndex += 1;
    await this.client.put("portfolio-state", this.portfolio);
    await this.writeMarker();

    const stored = await this.client.get<PortfolioState>("portfolio-state");
    if (
      !stored ||
      stored.body.cash !== this.portfolio.cash ||
      stored.body.shares !== this.portfolio.shares ||
      stored.body.last_mark !== this.portfolio.last_mark
    ) {
      throw new ProtocolError("stored portfolio does not match local recomputation");
    }

    if (!this.completed) {
      await this.loadDay();
    } else {
      this.bundle = null;
    }
    return {
      portfolio: this.portfolioState,
      sharesChanged: outcome.sharesChanged,
      executedAction: outcome.executedAction,
      completed: this.completed,
      exportVersion,
    };
  }
}
