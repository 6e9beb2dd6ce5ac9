/** End-to-end: a real gateway service, rules authored through the editor
 * view-model, a harness replay of the network case study, and one
 * confirmation approved through the queue view-model. The sink payloads
 * must come out identical to the API-only path. */

import { spawn, type ChildProcess } from "node:child_process";
import { createServer, type Server } from "node:http";
import { AddressInfo, createServer as createTcpServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ManagementApi } from "../src/api.js";
import { RuleEditorModel } from "../src/editor.js";
import { ConfirmationQueueModel } from "../src/queue.js";
import type { RuleDocument, TemplateDocument } from "../src/types.js";

const WEB_TEMPLATE: TemplateDocument = {
  id: "web",
  verb_vocabulary: { create: ["POST"], read: ["GET"], update: ["PUT"], delete: ["DELETE"] },
  source_kinds: ["IP", "any"],
  scope_match_kind: "path-prefix",
  standard_deny_action: "return 404",
};

const NETWORK_TEMPLATE: TemplateDocument = {
  id: "network",
  verb_vocabulary: { create: ["SYN", "ADD"], delete: ["CLOSED", "FIN"] },
  source_kinds: ["IP", "any"],
  scope_match_kind: "ip-or-cidr",
  standard_deny_action: "return CLOSED",
};

const CASE_STUDY_RULES: RuleDocument[] = [
  { r_id: "WEB-FE-XSS-1", r_s: "any", r_v: "DELETE", r_scope: "/", r_c: "deny",
    r_a: "return 404", managed_system: "web" },
  { r_id: "WEB-FE-XSS-2", r_s: "any", r_v: "GET", r_scope: "/admin", r_c: "deny",
    r_a: "return 404", managed_system: "web" },
  { r_id: "NET-L3-DDOS", r_s: "any", r_v: "SYN", r_scope: "10.10.10.20", r_c: "deny",
    r_a: "return CLOSED", managed_system: "network" },
  { r_id: "NET-L3-FW", r_s: "any", r_v: "ADD", r_scope: "10.10.10.10", r_c: "deny",
    r_a: "return CLOSED", managed_system: "network" },
];

const HOLD_RULE: RuleDocument = {
  r_id: "WEB-FE-HOLD-1", r_s: "any", r_v: "PUT", r_scope: "/ops", r_c: "requireConfirmation",
  r_a: "", managed_system: "web",
};

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createTcpServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as AddressInfo).port;
      srv.close(() => resolve(port));
    });
  });
}

class CaptureSink {
  readonly payloads: Array<Record<string, unknown>> = [];
  private server: Server | null = null;

  constructor(readonly port: number) {}

  start(): Promise<void> {
    this.server = createServer((request, response) => {
      const chunks: Buffer[] = [];
      request.on("data", (chunk: Buffer) => chunks.push(chunk));
      request.on("end", () => {
        this.payloads.push(JSON.parse(Buffer.concat(chunks).toString("utf-8")));
        response.writeHead(204).end();
      });
    });
    return new Promise((resolve) =>
      this.server!.listen(this.port, "127.0.0.1", () => resolve()),
    );
  }

  stop(): Promise<void> {
    return new Promise((resolve) => {
      if (!this.server) return resolve();
      this.server.close(() => resolve());
      this.server = null;
    });
  }

  async waitFor(count: number, timeoutMs = 15000): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      if (this.payloads.length >= count) return;
      await new Promise((resolve) => setTimeout(resolve, 50));
    }
    throw new Error(`sink received ${this.payloads.length}/${count} payloads`);
  }
}

function runCli(args: string[]): Promise<{ code: number; output: string }> {
  return new Promise((resolve, reject) => {
    const child = spawn("python3", ["-m", "roe_gate.cli", ...args]);
    let output = "";
    child.stdout.on("data", (chunk: Buffer) => (output += chunk.toString()));
    child.stderr.on("data", (chunk: Buffer) => (output += chunk.toString()));
    child.on("error", reject);
    child.on("close", (code) => resolve({ code: code ?? -1, output }));
  });
}

describe("console end-to-end against a live service", () => {
  let service: ChildProcess;
  let managementUrl: string;
  let evaluationUrl: string;
  let sinkPort: number;

  beforeAll(async () => {
    const [evaluationPort, managementPort] = [await freePort(), await freePort()];
    sinkPort = await freePort();
    managementUrl = `http://127.0.0.1:${managementPort}`;
    service = spawn("python3", [
      "-m", "roe_gate.cli", "serve",
      "--evaluation-bind", `127.0.0.1:${evaluationPort}`,
      "--management-bind", `127.0.0.1:${managementPort}`,
      "--sink-url", `http://127.0.0.1:${sinkPort}/sink`,
    ]);
    const deadline = Date.now() + 30000;
    for (;;) {
      try {
        const health = await fetch(`${managementUrl}/health`);
        if (health.ok) {
          const body = (await health.json()) as { evaluation_url: string };
          evaluationUrl = body.evaluation_url;
          break;
        }
      } catch {
        // not up yet
      }
      if (Date.now() > deadline) throw new Error("service never became healthy");
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }, 60000);

  afterAll(() => {
    service?.kill("SIGTERM");
  });

  it("authors rules via the editor, replays the case study, approves a hold", async () => {
    const api = new ManagementApi(managementUrl);
    await api.putTemplate(WEB_TEMPLATE);
    await api.putTemplate(NETWORK_TEMPLATE);

    // 1. Create the four case-study rules through the editor view-model.
    const editor = new RuleEditorModel(api);
    await editor.refresh();
    for (const draft of CASE_STUDY_RULES) {
      expect(editor.validateDraft(draft)).toEqual([]);
      const saved = await editor.save(draft);
      expect(saved.ok).toBe(true);
      expect(saved.rule?.revision).toBe(1);
    }
    expect(editor.rules.map((rule) => rule.r_id).sort()).toEqual(
      ["NET-L3-DDOS", "NET-L3-FW", "WEB-FE-XSS-1", "WEB-FE-XSS-2"],
    );

    // 2. Replay case study 2 through the harness; it must match the goldens
    //    (the API-only outputs) against this very service.
    const replay = await runCli([
      "sim", "case-study", "2",
      "--service-url", managementUrl,
      "--sink-bind", `127.0.0.1:${sinkPort}`,
    ]);
    expect(replay.output).toContain("result: PASS");
    expect(replay.code).toBe(0);

    // 3. Two identical confirmation holds: one approved via the queue view,
    //    one via the raw API; the sink must receive identical outputs.
    const holdSaved = await editor.save(HOLD_RULE);
    expect(holdSaved.ok).toBe(true);
    const sink = new CaptureSink(sinkPort);
    await sink.start();
    try {
      for (const correlation of ["via-console", "via-api"]) {
        const response = await fetch(`${evaluationUrl}/evaluate`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({
            IRS_ia: "PUT", IRS_s: "1.2.3.4", IRS_t: "/ops/flush",
            managed_system: "web", correlation_id: correlation,
          }),
        });
        expect(response.status).toBe(202);
      }
      const queue = new ConfirmationQueueModel(api, "console-operator");
      const deadline = Date.now() + 10000;
      while (queue.items.length < 2 && Date.now() < deadline) {
        await queue.refresh();
        await new Promise((resolve) => setTimeout(resolve, 50));
      }
      expect(queue.items).toHaveLength(2);
      expect(sink.payloads).toHaveLength(0); // holds forward nothing

      const consoleItem = queue.items.find(
        (item) => item.request.correlation_id === "via-console",
      )!;
      const apiItem = queue.items.find(
        (item) => item.request.correlation_id === "via-api",
      )!;
      const outcome = await queue.approve(consoleItem.token);
      expect(outcome.ok).toBe(true);
      const apiDecision = await fetch(
        `${managementUrl}/pending/${apiItem.token}/decision`,
        {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ decision: "approved", operator: "console-operator" }),
        },
      );
      expect(apiDecision.status).toBe(200);
      await sink.waitFor(2);

      const normalize = (payload: Record<string, unknown>) => {
        const input = { ...(payload.input as Record<string, string>) };
        delete input.correlation_id;
        return { actions: payload.actions, input };
      };
      expect(normalize(sink.payloads[0])).toEqual(normalize(sink.payloads[1]));
      expect(sink.payloads[0].actions).toEqual(["PUT"]);

      // The queue no longer shows either item; the audit trail does.
      await queue.refresh();
      expect(queue.items).toHaveLength(0);
      const audit = await api.auditRecords({ event: "confirmation" });
      expect(audit).toHaveLength(2);
      expect(audit.every((record) => record.operator === "console-operator")).toBe(true);
    } finally {
      await sink.stop();
    }
  }, 120000);
});
