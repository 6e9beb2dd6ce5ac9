/** Wire documents exchanged with the management API. */

export type ConstraintToken = "allow" | "allowWithLog" | "requireConfirmation" | "deny";

export const CONSTRAINT_TOKENS: ConstraintToken[] = [
  "allow",
  "allowWithLog",
  "requireConfirmation",
  "deny",
];

/** The flat seven-key rule document (plus optional metadata keys). */
export interface RuleDocument {
  r_id: string;
  r_s: string;
  r_v: string;
  r_scope: string;
  r_c: string;
  r_a: string;
  r_h?: string;
  managed_system?: string;
  created?: string;
  author?: string;
}

/** A rule as the store returns it: document plus revision bookkeeping. */
export interface StoredRuleDocument extends RuleDocument {
  revision: number;
  deleted: boolean;
  updated_at: string;
}

export interface TemplateDocument {
  id: string;
  verb_vocabulary: Record<string, string[]>;
  source_kinds: string[];
  scope_match_kind: string;
  standard_deny_action: string;
}

export interface RegistryEntry {
  id: string;
  description: string;
}

export interface ExportBundle {
  format_version: number;
  exported_at: string;
  templates: TemplateDocument[];
  registry: RegistryEntry[];
  rules: StoredRuleDocument[];
}

export interface ImportReport {
  rules_imported: number;
  tombstones_imported: number;
  templates_imported: number;
  registry_imported: number;
  replaced: boolean;
  summary: string;
}

export type ConfirmationStatus = "pending" | "approved" | "rejected" | "expired";

export interface PendingItem {
  token: string;
  request: Record<string, string>;
  rule_id: string | null;
  created_at: string;
  expires_at: string;
  status: ConfirmationStatus;
  decided_by: string | null;
  decided_at: string | null;
}

export interface AuditRecordDocument {
  event: string;
  correlation_id: string;
  request: Record<string, string> | null;
  matched_rule: string | null;
  constraint: string | null;
  actions: string[];
  timestamp: string;
  operator: string | null;
  decision: string | null;
  log_message: string | null;
  error: string | null;
}

/** One inline validation finding, anchored to the slot it concerns. */
export interface SlotViolation {
  slot: string;
  message: string;
}
