/** Read-only view-model over the audit endpoint with the three filters the
 * console exposes: rule id, constraint, and a time range. */

import { ManagementApi, type AuditFilters } from "./api.js";
import type { AuditRecordDocument } from "./types.js";

export class AuditLogModel {
  records: AuditRecordDocument[] = [];
  filters: AuditFilters = {};

  constructor(private readonly api: ManagementApi) {}

  setFilters(filters: AuditFilters): void {
    this.filters = { ...filters };
  }

  async refresh(): Promise<void> {
    this.records = await this.api.auditRecords(this.filters);
  }
}
