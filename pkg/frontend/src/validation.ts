/** Client-side mirror of the server's rule validation, so the editor can
 * flag the offending slot before anything is sent. The server remains the
 * authority; anything it rejects is surfaced into the same shape. */

import type { RuleDocument, SlotViolation, TemplateDocument } from "./types.js";
import { CONSTRAINT_TOKENS } from "./types.js";

const ID_GRAMMAR = /^[A-Z0-9]+(-[A-Z0-9]+)+$/;

export function templateVerbs(template: TemplateDocument): string[] {
  const verbs: string[] = [];
  for (const tokens of Object.values(template.verb_vocabulary)) {
    verbs.push(...tokens);
  }
  return verbs;
}

export function validateRuleDocument(
  draft: RuleDocument,
  template: TemplateDocument | undefined,
): SlotViolation[] {
  const violations: SlotViolation[] = [];
  if (!ID_GRAMMAR.test(draft.r_id)) {
    violations.push({
      slot: "id",
      message: "ids are uppercase CATEGORY-SUBCATEGORY tokens, e.g. WEB-FE-XSS-1",
    });
  }
  if (!draft.r_s) {
    violations.push({ slot: "source", message: "source pattern is empty" });
  }
  if (!draft.r_v) {
    violations.push({ slot: "verb", message: "verb is empty" });
  } else if (template && !templateVerbs(template).includes(draft.r_v)) {
    violations.push({
      slot: "verb",
      message: `"${draft.r_v}" is not in the ${template.id} vocabulary (${templateVerbs(template).join(", ")})`,
    });
  }
  if (!draft.r_scope) {
    violations.push({ slot: "scope", message: "scope pattern is empty" });
  }
  const constraint = draft.r_c;
  if (!CONSTRAINT_TOKENS.some((token) => token.toLowerCase() === constraint.toLowerCase())) {
    violations.push({
      slot: "constraint",
      message: `constraint must be one of ${CONSTRAINT_TOKENS.join(", ")}`,
    });
  } else {
    if (constraint.toLowerCase() === "allow" && draft.r_a) {
      violations.push({
        slot: "final_action",
        message: "allow rules must leave the final action empty",
      });
    }
    if (constraint.toLowerCase() === "deny" && !draft.r_a) {
      violations.push({
        slot: "final_action",
        message: "deny rules must carry a final action",
      });
    }
  }
  if (!template) {
    violations.push({
      slot: "managed_system",
      message: draft.managed_system
        ? `no template named "${draft.managed_system}"`
        : "pick a managed system",
    });
  }
  return violations;
}
