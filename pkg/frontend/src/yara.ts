/** Render a rule document in the block text format, exactly the way the
 * gateway's own emitter lays it out, so authors see both representations. */

import type { RuleDocument } from "./types.js";

function quote(value: string): string {
  let out = '"';
  for (const ch of value) {
    if (ch === "\\") out += "\\\\";
    else if (ch === '"') out += '\\"';
    else if (ch === "\n") out += "\\n";
    else if (ch === "\r") out += "\\r";
    else if (ch === "\t") out += "\\t";
    else out += ch;
  }
  return out + '"';
}

export function renderRuleText(rule: RuleDocument): string {
  const meta: Array<[string, string]> = [];
  if (rule.created) meta.push(["created", rule.created]);
  if (rule.author) meta.push(["author", rule.author]);
  meta.push(["constraint", rule.r_c]);
  if (rule.r_a) meta.push(["alt_action", rule.r_a]);
  if (rule.r_h) meta.push(["handler", rule.r_h]);
  if (rule.managed_system) meta.push(["managed_system", rule.managed_system]);
  const source = rule.r_s === "*" ? "any" : rule.r_s;
  const lines = [
    `rule ${rule.r_id} {`,
    "    meta:",
    ...meta.map(([key, value]) => `        ${key} = ${quote(value)}`),
    "    strings:",
    `        $source = ${quote(source)}`,
    `        $int_action = ${quote(rule.r_v)}`,
    `        $scope = ${quote(rule.r_scope)}`,
    "    condition:",
    "        $source and $int_action and $scope",
    "}",
  ];
  return lines.join("\n");
}

export function renderRuleDocument(rule: RuleDocument): string {
  const ordered: Record<string, string> = {
    r_id: rule.r_id,
    r_s: rule.r_s,
    r_v: rule.r_v,
    r_scope: rule.r_scope,
    r_c: rule.r_c,
    r_a: rule.r_a,
  };
  if (rule.r_h) ordered.r_h = rule.r_h;
  if (rule.managed_system) ordered.managed_system = rule.managed_system;
  if (rule.created) ordered.created = rule.created;
  if (rule.author) ordered.author = rule.author;
  return JSON.stringify(ordered, null, 2);
}
