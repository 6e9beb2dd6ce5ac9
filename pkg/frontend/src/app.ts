/** Single-page console wiring: three views over the management API.
 * Everything on screen is rebuilt from API reads; a reload loses nothing. */

import { ManagementApi } from "./api.js";
import { AuditLogModel } from "./audit.js";
import { RuleEditorModel } from "./editor.js";
import { ConfirmationQueueModel } from "./queue.js";
import type { ExportBundle, RuleDocument, SlotViolation } from "./types.js";
import { CONSTRAINT_TOKENS } from "./types.js";
import { templateVerbs } from "./validation.js";
import { renderRuleDocument, renderRuleText } from "./yara.js";

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const el = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  el.append(...children);
  return el;
}

function apiBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return (fromQuery ?? window.location.origin).replace(/\/$/, "");
}

const EMPTY_DRAFT: RuleDocument = {
  r_id: "",
  r_s: "any",
  r_v: "",
  r_scope: "",
  r_c: "deny",
  r_a: "",
  managed_system: "",
};

class ConsoleApp {
  private readonly api = new ManagementApi(apiBaseUrl());
  private readonly editor = new RuleEditorModel(this.api);
  private readonly queue: ConfirmationQueueModel;
  private readonly audit = new AuditLogModel(this.api);
  private draft: RuleDocument = { ...EMPTY_DRAFT };
  private view: "rules" | "queue" | "audit" = "rules";
  private statusLine = "";

  constructor(private readonly root: HTMLElement) {
    const operator = new URLSearchParams(window.location.search).get("operator");
    this.queue = new ConfirmationQueueModel(this.api, operator ?? "console-operator");
  }

  async start(): Promise<void> {
    await this.refreshAll();
    window.setInterval(() => void this.pollQueue(), 3000);
    window.setInterval(() => this.renderCountdowns(), 1000);
  }

  private async refreshAll(): Promise<void> {
    try {
      await Promise.all([this.editor.refresh(), this.queue.refresh(), this.audit.refresh()]);
      this.statusLine = "";
    } catch (error) {
      this.statusLine = `management API unreachable: ${String(error)}`;
    }
    this.render();
  }

  private async pollQueue(): Promise<void> {
    if (this.view !== "queue") return;
    await this.queue.refresh().catch(() => undefined);
    this.render();
  }

  // ------------------------------------------------------------------
  // rendering

  private render(): void {
    this.root.replaceChildren(
      this.renderHeader(),
      this.statusLine ? h("p", { class: "status error" }, this.statusLine) : "",
      this.view === "rules"
        ? this.renderRulesView()
        : this.view === "queue"
          ? this.renderQueueView()
          : this.renderAuditView(),
    );
  }

  private renderHeader(): HTMLElement {
    const tab = (view: typeof this.view, label: string) => {
      const button = h(
        "button",
        { class: view === this.view ? "tab active" : "tab" },
        label,
      );
      button.onclick = () => {
        this.view = view;
        this.render();
      };
      return button;
    };
    return h(
      "header",
      {},
      h("h1", {}, "roe-gate console"),
      tab("rules", "Rules"),
      tab("queue", `Confirmations (${this.queue.items.length})`),
      tab("audit", "Audit"),
      h("span", { class: "operator" }, `operator: ${this.queue.operator}`),
    );
  }

  // -- rules view ------------------------------------------------------

  private renderRulesView(): HTMLElement {
    const violations = this.editor.validateDraft(this.draft);
    const table = h(
      "table",
      { class: "rules" },
      h(
        "tr",
        {},
        ...["id", "system", "source", "verb", "scope", "constraint", "final action", "rev", ""].map(
          (label) => h("th", {}, label),
        ),
      ),
    );
    for (const rule of this.editor.rules) {
      const edit = h("button", {}, "edit");
      edit.onclick = () => {
        this.draft = { ...rule };
        this.render();
      };
      const remove = h("button", {}, "delete");
      remove.onclick = () => {
        void this.editor.remove(rule.r_id).then(() => this.render());
      };
      table.append(
        h(
          "tr",
          {},
          h("td", {}, rule.r_id),
          h("td", {}, rule.managed_system ?? ""),
          h("td", {}, rule.r_s),
          h("td", {}, rule.r_v),
          h("td", {}, rule.r_scope),
          h("td", {}, rule.r_c),
          h("td", {}, rule.r_a),
          h("td", {}, String(rule.revision)),
          h("td", {}, edit, remove),
        ),
      );
    }
    return h(
      "section",
      {},
      table,
      h("h2", {}, "author"),
      this.renderDraftForm(violations),
      h("h2", {}, "renderings"),
      h(
        "div",
        { class: "renderings" },
        h("pre", {}, renderRuleDocument(this.draft)),
        h("pre", {}, renderRuleText(this.draft)),
      ),
      this.renderBundleControls(),
    );
  }

  private renderDraftForm(violations: SlotViolation[]): HTMLElement {
    const note = (slot: string) => {
      const hits = violations.filter((v) => v.slot === slot);
      return hits.length
        ? h("span", { class: "violation" }, hits.map((v) => v.message).join("; "))
        : "";
    };
    const input = (
      label: string,
      slot: string,
      key: keyof RuleDocument,
      placeholder = "",
    ) => {
      const field = h("input", {
        value: String(this.draft[key] ?? ""),
        placeholder,
      });
      field.oninput = () => {
        this.draft = { ...this.draft, [key]: field.value };
        this.render();
        field.focus();
      };
      return h("label", {}, label, field, note(slot));
    };
    const systemSelect = h("select", {});
    systemSelect.append(h("option", { value: "" }, "(pick a system)"));
    for (const template of this.editor.templates) {
      const option = h("option", { value: template.id }, template.id);
      if (template.id === this.draft.managed_system) option.selected = true;
      systemSelect.append(option);
    }
    systemSelect.onchange = () => {
      this.draft = { ...this.draft, managed_system: systemSelect.value };
      this.render();
    };
    const constraintSelect = h("select", {});
    for (const token of CONSTRAINT_TOKENS) {
      const option = h("option", { value: token }, token);
      if (token === this.draft.r_c) option.selected = true;
      constraintSelect.append(option);
    }
    constraintSelect.onchange = () => {
      this.draft = { ...this.draft, r_c: constraintSelect.value };
      this.render();
    };
    const template = this.editor.templateFor(this.draft);
    const verbHint = template ? `one of ${templateVerbs(template).join(", ")}` : "";
    const save = h("button", {}, "save") as HTMLButtonElement;
    save.disabled = violations.length > 0;
    save.onclick = () => {
      void this.editor.save(this.draft).then((result) => {
        if (result.ok) {
          this.statusLine = `saved ${result.rule?.r_id} (revision ${result.rule?.revision})`;
          this.draft = { ...EMPTY_DRAFT };
        } else {
          this.statusLine = result.violations
            .map((v) => `${v.slot}: ${v.message}`)
            .join("; ");
        }
        this.render();
      });
    };
    const clear = h("button", {}, "clear");
    clear.onclick = () => {
      this.draft = { ...EMPTY_DRAFT };
      this.render();
    };
    return h(
      "form",
      { class: "draft" },
      input("id", "id", "r_id", "WEB-FE-XSS-1"),
      h("label", {}, "managed system", systemSelect, note("managed_system")),
      input("source", "source", "r_s", "any"),
      input("verb", "verb", "r_v", verbHint),
      input("scope", "scope", "r_scope"),
      h("label", {}, "constraint", constraintSelect, note("constraint")),
      input("final action", "final_action", "r_a", 'e.g. "return 404"'),
      input("handler", "handler", "r_h"),
      save,
      clear,
    );
  }

  private renderBundleControls(): HTMLElement {
    const exportButton = h("button", {}, "export bundle");
    exportButton.onclick = () => {
      void this.editor.exportBundle().then((bundle) => {
        const blob = new Blob([JSON.stringify(bundle, null, 2)], {
          type: "application/json",
        });
        const link = h("a", {
          href: URL.createObjectURL(blob),
          download: "roe-gate-export.json",
        });
        link.click();
      });
    };
    const fileInput = h("input", { type: "file", accept: ".json" }) as HTMLInputElement;
    const replaceBox = h("input", { type: "checkbox" }) as HTMLInputElement;
    const importButton = h("button", {}, "import bundle");
    importButton.onclick = () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      void file.text().then(async (text) => {
        try {
          const report = await this.editor.importBundle(
            JSON.parse(text) as ExportBundle,
            replaceBox.checked,
          );
          this.statusLine = report.summary;
        } catch (error) {
          this.statusLine = `import failed: ${String(error)}`;
        }
        this.render();
      });
    };
    return h(
      "div",
      { class: "bundle" },
      exportButton,
      fileInput,
      h("label", {}, replaceBox, "replace existing"),
      importButton,
    );
  }

  // -- queue view --------------------------------------------------------

  private renderQueueView(): HTMLElement {
    const section = h("section", {});
    for (const notice of this.queue.notices.splice(0)) {
      section.append(h("p", { class: "status notice" }, notice));
    }
    if (this.queue.items.length === 0) {
      section.append(h("p", { class: "empty" }, "nothing awaiting confirmation"));
      return section;
    }
    for (const item of this.queue.items) {
      const approve = h("button", {}, "approve");
      approve.onclick = () => {
        void this.queue.approve(item.token).then((outcome) => {
          this.statusLine = outcome.ok
            ? `approved ${item.token}`
            : (outcome.notice ?? "");
          this.render();
        });
      };
      const reject = h("button", {}, "reject");
      reject.onclick = () => {
        void this.queue.reject(item.token).then((outcome) => {
          this.statusLine = outcome.ok
            ? `rejected ${item.token}`
            : (outcome.notice ?? "");
          this.render();
        });
      };
      section.append(
        h(
          "article",
          { class: "pending" },
          h("h3", {}, `rule ${item.rule_id ?? "(none)"}`),
          h("pre", {}, JSON.stringify(item.request, null, 2)),
          h(
            "p",
            {},
            h(
              "span",
              { class: "countdown", "data-expires": item.expires_at },
              `${this.queue.countdownSeconds(item)}s to expiry`,
            ),
          ),
          approve,
          reject,
        ),
      );
    }
    return section;
  }

  private renderCountdowns(): void {
    const now = new Date();
    for (const el of this.root.querySelectorAll<HTMLElement>(".countdown")) {
      const expiresAt = el.dataset.expires;
      if (!expiresAt) continue;
      const remaining = Math.max(
        0,
        Math.floor((new Date(expiresAt).getTime() - now.getTime()) / 1000),
      );
      el.textContent = remaining > 0 ? `${remaining}s to expiry` : "expired";
    }
  }

  // -- audit view ----------------------------------------------------------

  private renderAuditView(): HTMLElement {
    const ruleFilter = h("input", {
      placeholder: "rule id",
      value: this.audit.filters.rule_id ?? "",
    });
    const constraintSelect = h("select", {});
    constraintSelect.append(h("option", { value: "" }, "(any constraint)"));
    for (const token of CONSTRAINT_TOKENS) {
      const option = h("option", { value: token }, token);
      if (token === this.audit.filters.constraint) option.selected = true;
      constraintSelect.append(option);
    }
    const since = h("input", {
      type: "datetime-local",
      value: this.audit.filters.since ?? "",
    });
    const until = h("input", {
      type: "datetime-local",
      value: this.audit.filters.until ?? "",
    });
    const apply = h("button", {}, "apply filters");
    apply.onclick = () => {
      this.audit.setFilters({
        rule_id: ruleFilter.value || undefined,
        constraint: constraintSelect.value || undefined,
        since: since.value ? new Date(since.value).toISOString() : undefined,
        until: until.value ? new Date(until.value).toISOString() : undefined,
      });
      void this.audit.refresh().then(() => this.render());
    };
    const table = h(
      "table",
      { class: "audit" },
      h(
        "tr",
        {},
        ...["time", "event", "rule", "constraint", "actions", "operator", "detail"].map(
          (label) => h("th", {}, label),
        ),
      ),
    );
    for (const record of this.audit.records) {
      table.append(
        h(
          "tr",
          {},
          h("td", {}, record.timestamp),
          h("td", {}, record.event + (record.decision ? `/${record.decision}` : "")),
          h("td", {}, record.matched_rule ?? ""),
          h("td", {}, record.constraint ?? ""),
          h("td", {}, record.actions.join(", ")),
          h("td", {}, record.operator ?? ""),
          h("td", {}, record.error ?? record.log_message ?? ""),
        ),
      );
    }
    return h(
      "section",
      {},
      h("div", { class: "filters" }, ruleFilter, constraintSelect, since, until, apply),
      table,
    );
  }
}

const root = document.getElementById("app");
if (root) {
  void new ConsoleApp(root).start();
}
