import { afterEach, describe, expect, it, vi } from "vitest";

import { ManagementApi } from "../src/api.js";
import { RuleEditorModel } from "../src/editor.js";
import type { RuleDocument } from "../src/types.js";

const WEB_TEMPLATE = {
  id: "web",
  verb_vocabulary: { create: ["POST"], read: ["GET"], update: ["PUT"], delete: ["DELETE"] },
  source_kinds: ["IP", "any"],
  scope_match_kind: "path-prefix",
  standard_deny_action: "return 404",
};

const DRAFT: RuleDocument = {
  r_id: "WEB-FE-XSS-1",
  r_s: "any",
  r_v: "DELETE",
  r_scope: "/",
  r_c: "deny",
  r_a: "return 404",
  managed_system: "web",
};

const STORED = { ...DRAFT, revision: 1, deleted: false, updated_at: "2026-01-01T00:00:00+00:00" };

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function stubFetch(handler: (url: string, init?: RequestInit) => Response): ReturnType<typeof vi.fn> {
  const mock = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) =>
    handler(String(url), init),
  );
  vi.stubGlobal("fetch", mock);
  return mock;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("RuleEditorModel", () => {
  it("refresh pulls rules and templates", async () => {
    stubFetch((url) => {
      if (url.endsWith("/templates")) return jsonResponse({ templates: [WEB_TEMPLATE] });
      return jsonResponse({ rules: [STORED] });
    });
    const editor = new RuleEditorModel(new ManagementApi("http://mgmt"));
    await editor.refresh();
    expect(editor.rules).toHaveLength(1);
    expect(editor.templates[0].id).toBe("web");
  });

  it("blocks invalid drafts before any network call", async () => {
    const mock = stubFetch(() => jsonResponse({}));
    const editor = new RuleEditorModel(new ManagementApi("http://mgmt"));
    editor.templates = [WEB_TEMPLATE];
    const result = await editor.save({ ...DRAFT, r_v: "SYN" });
    expect(result.ok).toBe(false);
    expect(result.violations[0].slot).toBe("verb");
    expect(mock).not.toHaveBeenCalled();
  });

  it("saves a valid draft with PUT and refreshes", async () => {
    const calls: Array<[string, string | undefined]> = [];
    stubFetch((url, init) => {
      calls.push([url, init?.method]);
      if (init?.method === "PUT") return jsonResponse({ rule: STORED });
      if (url.endsWith("/templates")) return jsonResponse({ templates: [WEB_TEMPLATE] });
      return jsonResponse({ rules: [STORED] });
    });
    const editor = new RuleEditorModel(new ManagementApi("http://mgmt"));
    editor.templates = [WEB_TEMPLATE];
    const result = await editor.save(DRAFT);
    expect(result.ok).toBe(true);
    expect(result.rule?.revision).toBe(1);
    expect(calls[0]).toEqual(["http://mgmt/rules/WEB-FE-XSS-1", "PUT"]);
    expect(editor.rules).toHaveLength(1);
  });

  it("surfaces server-side 422 violations inline", async () => {
    stubFetch((url, init) => {
      if (init?.method === "PUT") {
        return jsonResponse(
          {
            detail: {
              message: "validation failed",
              violations: [{ slot: "handler", message: "handler 'x' is not registered" }],
            },
          },
          422,
        );
      }
      return jsonResponse({ rules: [], templates: [WEB_TEMPLATE] });
    });
    const editor = new RuleEditorModel(new ManagementApi("http://mgmt"));
    editor.templates = [WEB_TEMPLATE];
    const result = await editor.save({ ...DRAFT, r_h: "x" });
    expect(result.ok).toBe(false);
    expect(result.violations[0].slot).toBe("handler");
  });

  it("passes the replace flag through on import", async () => {
    const urls: string[] = [];
    stubFetch((url, init) => {
      urls.push(url);
      if (init?.method === "POST") {
        return jsonResponse({
          report: {
            rules_imported: 4, tombstones_imported: 0, templates_imported: 2,
            registry_imported: 0, replaced: true, summary: "4 imported",
          },
        });
      }
      if (url.endsWith("/templates")) return jsonResponse({ templates: [] });
      return jsonResponse({ rules: [] });
    });
    const editor = new RuleEditorModel(new ManagementApi("http://mgmt"));
    const report = await editor.importBundle(
      { format_version: 1, exported_at: "", templates: [], registry: [], rules: [] },
      true,
    );
    expect(report.summary).toBe("4 imported");
    expect(urls[0]).toBe("http://mgmt/import?replace=true");
  });
});
