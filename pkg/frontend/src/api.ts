/** Typed client for the management listener. The console never talks to the
 * evaluation listener; everything it shows is reconstructable from these
 * reads. */

import type {
  AuditRecordDocument,
  ExportBundle,
  ImportReport,
  PendingItem,
  RegistryEntry,
  RuleDocument,
  StoredRuleDocument,
  TemplateDocument,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
    message?: string,
  ) {
    super(message ?? `API error ${status}: ${JSON.stringify(detail)}`);
  }
}

export interface AuditFilters {
  rule_id?: string;
  constraint?: string;
  since?: string;
  until?: string;
  event?: string;
}

async function parseBody(response: Response): Promise<unknown> {
  const text = await response.text();
  if (!text) return null;
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

export class ManagementApi {
  constructor(readonly baseUrl: string) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await parseBody(response);
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? (payload as { detail: unknown }).detail
          : payload;
      throw new ApiError(response.status, detail);
    }
    return payload;
  }

  async health(): Promise<{ status: string; store_version: number; evaluation_url: string | null }> {
    return (await this.request("GET", "/health")) as {
      status: string;
      store_version: number;
      evaluation_url: string | null;
    };
  }

  // -- rules ----------------------------------------------------------

  async listRules(includeDeleted = false): Promise<StoredRuleDocument[]> {
    const payload = (await this.request(
      "GET",
      `/rules?include_deleted=${includeDeleted}`,
    )) as { rules: StoredRuleDocument[] };
    return payload.rules;
  }

  async getRule(ruleId: string): Promise<StoredRuleDocument> {
    const payload = (await this.request("GET", `/rules/${ruleId}`)) as {
      rule: StoredRuleDocument;
    };
    return payload.rule;
  }

  async putRule(rule: RuleDocument): Promise<StoredRuleDocument> {
    const payload = (await this.request("PUT", `/rules/${rule.r_id}`, rule)) as {
      rule: StoredRuleDocument;
    };
    return payload.rule;
  }

  async deleteRule(ruleId: string): Promise<StoredRuleDocument> {
    const payload = (await this.request("DELETE", `/rules/${ruleId}`)) as {
      rule: StoredRuleDocument;
    };
    return payload.rule;
  }

  // -- templates ------------------------------------------------------

  async listTemplates(): Promise<TemplateDocument[]> {
    const payload = (await this.request("GET", "/templates")) as {
      templates: TemplateDocument[];
    };
    return payload.templates;
  }

  async putTemplate(template: TemplateDocument): Promise<TemplateDocument> {
    const payload = (await this.request(
      "PUT",
      `/templates/${template.id}`,
      template,
    )) as { template: TemplateDocument };
    return payload.template;
  }

  // -- registry ---------------------------------------------------------

  async listRegistry(): Promise<RegistryEntry[]> {
    const payload = (await this.request("GET", "/registry")) as {
      registry: RegistryEntry[];
    };
    return payload.registry;
  }

  // -- export / import --------------------------------------------------

  async exportBundle(): Promise<ExportBundle> {
    return (await this.request("GET", "/export")) as ExportBundle;
  }

  async importBundle(bundle: ExportBundle, replace: boolean): Promise<ImportReport> {
    const payload = (await this.request(
      "POST",
      `/import?replace=${replace}`,
      bundle,
    )) as { report: ImportReport };
    return payload.report;
  }

  // -- confirmation queue ------------------------------------------------

  async listPending(includeDecided = false): Promise<PendingItem[]> {
    const payload = (await this.request(
      "GET",
      `/pending?include_decided=${includeDecided}`,
    )) as { pending: PendingItem[] };
    return payload.pending;
  }

  async decide(
    token: string,
    decision: "approved" | "rejected",
    operator: string,
  ): Promise<PendingItem> {
    const payload = (await this.request("POST", `/pending/${token}/decision`, {
      decision,
      operator,
    })) as { confirmation: PendingItem };
    return payload.confirmation;
  }

  // -- audit --------------------------------------------------------------

  async auditRecords(filters: AuditFilters = {}): Promise<AuditRecordDocument[]> {
    const query = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value) query.set(key, value);
    }
    const suffix = query.toString() ? `?${query.toString()}` : "";
    const payload = (await this.request("GET", `/audit${suffix}`)) as {
      records: AuditRecordDocument[];
    };
    return payload.records;
  }
}
