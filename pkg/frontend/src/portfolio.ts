/**
 * Whole-share portfolio execution, kept rule-for-rule identical to the
 * backtest engine: BUY p% spends floor(p% of cash / price) shares, SELL p%
 * disposes floor(p% of shares), and an order that cannot move one whole share
 * degrades to HOLD. The engine-generated fixture file in tests/fixtures pins
 * this parity case by case.
 */

import type { Action, PortfolioState } from "./types.js";

export interface ExecutionOutcome {
  portfolio: PortfolioState;
  executedAction: Action;
  sharesChanged: number;
  preTradeValue: number;
  degraded: boolean;
}

export function markedValue(p: PortfolioState, price: number): number {
  return p.cash + p.shares * price;
}

export function executeTrade(
  action: Action,
  tradePct: number,
  portfolio: PortfolioState,
  price: number,
): ExecutionOutcome {
  if (price <= 0) throw new Error(`execution price must be positive, got ${price}`);
  const preTradeValue = markedValue(portfolio, price);
  let executedAction: Action = action;
  let q = 0;
  let degraded = false;

  if (action === "BUY") {
    q = Math.floor(((tradePct / 100) * portfolio.cash) / price);
    if (q < 1) {
      executedAction = "HOLD";
      q = 0;
      degraded = true;
    }
  } else if (action === "SELL") {
    q = Math.floor((tradePct / 100) * portfolio.shares);
    if (q < 1) {
      executedAction = "HOLD";
      q = 0;
      degraded = true;
    }
  }

  let next: PortfolioState;
  let sharesChanged = 0;
  if (executedAction === "BUY") {
    next = { cash: portfolio.cash - q * price, shares: portfolio.shares + q, last_mark: price };
    sharesChanged = q;
  } else if (executedAction === "SELL") {
    next = { cash: portfolio.cash + q * price, shares: portfolio.shares - q, last_mark: price };
    sharesChanged = -q;
  } else {
    next = { ...portfolio, last_mark: price };
  }
  return { portfolio: next, executedAction, sharesChanged, preTradeValue, degraded };
}
