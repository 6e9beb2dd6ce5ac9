/** View-model for the rule editor: list, author, validate-before-save,
 * delete, and bundle import/export. Holds no state the API cannot rebuild. */

import { ApiError, ManagementApi } from "./api.js";
import type {
  ExportBundle,
  ImportReport,
  RuleDocument,
  SlotViolation,
  StoredRuleDocument,
  TemplateDocument,
} from "./types.js";
import { validateRuleDocument } from "./validation.js";

export interface SaveResult {
  ok: boolean;
  rule?: StoredRuleDocument;
  violations: SlotViolation[];
  notice?: string;
}

export class RuleEditorModel {
  rules: StoredRuleDocument[] = [];
  templates: TemplateDocument[] = [];

  constructor(private readonly api: ManagementApi) {}

  async refresh(): Promise<void> {
    [this.rules, this.templates] = await Promise.all([
      this.api.listRules(),
      this.api.listTemplates(),
    ]);
  }

  templateFor(draft: RuleDocument): TemplateDocument | undefined {
    return this.templates.find((t) => t.id === (draft.managed_system ?? ""));
  }

  /** Inline validation; the save button stays disabled while this is non-empty. */
  validateDraft(draft: RuleDocument): SlotViolation[] {
    return validateRuleDocument(draft, this.templateFor(draft));
  }

  async save(draft: RuleDocument): Promise<SaveResult> {
    const violations = this.validateDraft(draft);
    if (violations.length > 0) {
      return { ok: false, violations };
    }
    try {
      const rule = await this.api.putRule(draft);
      await this.refresh();
      return { ok: true, rule, violations: [] };
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        return { ok: false, violations: serverViolations(error) };
      }
      throw error;
    }
  }

  async remove(ruleId: string): Promise<void> {
    await this.api.deleteRule(ruleId);
    await this.refresh();
  }

  async exportBundle(): Promise<ExportBundle> {
    return this.api.exportBundle();
  }

  async importBundle(bundle: ExportBundle, replace: boolean): Promise<ImportReport> {
    const report = await this.api.importBundle(bundle, replace);
    await this.refresh();
    return report;
  }
}

function serverViolations(error: ApiError): SlotViolation[] {
  const detail = error.detail;
  if (
    detail &&
    typeof detail === "object" &&
    "violations" in detail &&
    Array.isArray((detail as { violations: unknown }).violations)
  ) {
    return (detail as { violations: SlotViolation[] }).violations;
  }
  return [{ slot: "rule", message: String(detail ?? error.message) }];
}
