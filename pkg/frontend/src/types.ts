/** Shared types mirroring the session-service schema one for one. */

export type StageId = "d0" | "d1" | "d2" | "d3" | "d4" | "final";
export type Action = "BUY" | "SELL" | "HOLD";
export type TradeSize = 25 | 50 | 75 | 100;

export interface StageEntry {
  stage: StageId;
  action: Action;
  reliability: number; // 1..100
  rationale: string;
  time_on_stage_sec?: number;
  /** required for d1..d4: "were AI decisions inadvertently visible?" */
  leakage_flag?: boolean;
  /** final stage only */
  most_influential?: string;
  most_reliable?: string;
  trade_size?: TradeSize;
}

export interface DayRecord {
  day_index: number;
  stages: StageEntry[];
}

export interface PortfolioState {
  cash: number;
  shares: number;
  last_mark: number;
}

export interface Demographics {
  education_level: string;
  finance_experience: string;
}

export interface SessionExport {
  user_id: string;
  ticker: string;
  demographics: Demographics;
  current_day: number;
  days: DayRecord[];
  portfolio: PortfolioState;
}

export interface ProgressMarker {
  user_id: string;
  ticker: string;
  day_index: number;
  stage: StageId;
  updated_at: string;
  lock_token?: string;
}

/** One stage's display payload from a decision-stripped data bundle. */
export interface StagePayload {
  stage?: string;
  decision_stripped?: boolean;
  [key: string]: unknown;
}

export interface DayBundle {
  ticker: string;
  day_index: number;
  date: string;
  stages: Record<string, StagePayload>;
}

export interface StageFormInput {
  action: Action | null;
  reliability: number | null;
  rationale: string;
  leakage_flag?: boolean | null;
  most_influential?: string;
  most_reliable?: string;
  trade_size?: number | null;
}
