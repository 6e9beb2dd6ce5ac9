/** View-model for the human-confirmation queue. Approve/reject go through
 * the decision endpoint; races with other operators or with expiry come
 * back as non-blocking notices, and the queue re-reads afterwards either
 * way. */

import { ApiError, ManagementApi } from "./api.js";
import type { PendingItem } from "./types.js";

export interface DecisionOutcome {
  ok: boolean;
  item?: PendingItem;
  notice?: string;
}

export class ConfirmationQueueModel {
  items: PendingItem[] = [];
  notices: string[] = [];

  constructor(
    private readonly api: ManagementApi,
    readonly operator: string,
  ) {}

  async refresh(): Promise<void> {
    this.items = await this.api.listPending();
  }

  /** Whole seconds until expiry; zero once the deadline passed. */
  countdownSeconds(item: PendingItem, now: Date = new Date()): number {
    const remaining = (new Date(item.expires_at).getTime() - now.getTime()) / 1000;
    return Math.max(0, Math.floor(remaining));
  }

  async approve(token: string): Promise<DecisionOutcome> {
    return this.decide(token, "approved");
  }

  async reject(token: string): Promise<DecisionOutcome> {
    return this.decide(token, "rejected");
  }

  private async decide(
    token: string,
    decision: "approved" | "rejected",
  ): Promise<DecisionOutcome> {
    try {
      const item = await this.api.decide(token, decision, this.operator);
      await this.refresh();
      return { ok: true, item };
    } catch (error) {
      if (error instanceof ApiError && (error.status === 409 || error.status === 410)) {
        const notice =
          error.status === 410
            ? `confirmation ${token} expired; the deny was already forwarded`
            : `confirmation ${token} was already decided`;
        this.notices.push(notice);
        await this.refresh();
        return { ok: false, notice };
      }
      throw error;
    }
  }
}
