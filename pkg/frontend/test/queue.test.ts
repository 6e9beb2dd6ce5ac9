import { afterEach, describe, expect, it, vi } from "vitest";

import { ManagementApi } from "../src/api.js";
import { ConfirmationQueueModel } from "../src/queue.js";
import type { PendingItem } from "../src/types.js";

const ITEM: PendingItem = {
  token: "tok-1",
  request: { IRS_ia: "PUT", IRS_s: "1.2.3.4", IRS_t: "/ops/flush" },
  rule_id: "WEB-FE-HOLD-1",
  created_at: "2026-01-01T00:00:00+00:00",
  expires_at: "2026-01-01T00:15:00+00:00",
  status: "pending",
  decided_by: null,
  decided_at: null,
};

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), { status });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ConfirmationQueueModel", () => {
  it("computes a clamped countdown", () => {
    const queue = new ConfirmationQueueModel(new ManagementApi("http://mgmt"), "op");
    expect(queue.countdownSeconds(ITEM, new Date("2026-01-01T00:10:00+00:00"))).toBe(300);
    expect(queue.countdownSeconds(ITEM, new Date("2026-01-01T00:14:59.400+00:00"))).toBe(0);
    expect(queue.countdownSeconds(ITEM, new Date("2026-01-01T01:00:00+00:00"))).toBe(0);
  });

  it("approves with the configured operator identity and refreshes", async () => {
    const bodies: unknown[] = [];
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
        if (init?.method === "POST") {
          bodies.push(JSON.parse(String(init.body)));
          return jsonResponse({ confirmation: { ...ITEM, status: "approved" } });
        }
        return jsonResponse({ pending: [] });
      }),
    );
    const queue = new ConfirmationQueueModel(new ManagementApi("http://mgmt"), "casey");
    const outcome = await queue.approve("tok-1");
    expect(outcome.ok).toBe(true);
    expect(bodies).toEqual([{ decision: "approved", operator: "casey" }]);
    expect(queue.items).toEqual([]);
  });

  it("treats expiry as a non-blocking notice", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
        if (init?.method === "POST") {
          return jsonResponse({ detail: "confirmation expired" }, 410);
        }
        return jsonResponse({ pending: [] });
      }),
    );
    const queue = new ConfirmationQueueModel(new ManagementApi("http://mgmt"), "casey");
    const outcome = await queue.reject("tok-1");
    expect(outcome.ok).toBe(false);
    expect(outcome.notice).toContain("expired");
    expect(queue.notices).toHaveLength(1);
  });

  it("treats a double decision as a non-blocking notice", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (_url: RequestInfo | URL, init?: RequestInit) => {
        if (init?.method === "POST") {
          return jsonResponse({ detail: "already approved" }, 409);
        }
        return jsonResponse({ pending: [] });
      }),
    );
    const queue = new ConfirmationQueueModel(new ManagementApi("http://mgmt"), "casey");
    const outcome = await queue.approve("tok-1");
    expect(outcome.ok).toBe(false);
    expect(outcome.notice).toContain("already decided");
  });

  it("propagates unexpected errors", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => jsonResponse({ detail: "boom" }, 500)),
    );
    const queue = new ConfirmationQueueModel(new ManagementApi("http://mgmt"), "casey");
    await expect(queue.approve("tok-1")).rejects.toThrow("500");
  });
});
