import Papa from "papaparse";

/** Column layout of sweep result files (one row per swept value and protocol). */
export const SWEEP_COLUMNS = [
  "param", "value", "protocol", "seed_count", "avg_secrecy_rate", "stderr",
  "avg_coalition_size", "avg_max_coalition_size", "merges_per_min",
  "splits_per_min",
] as const;

/** Column layout of mobility time-series files (one row per step and protocol). */
export const TIMESERIES_COLUMNS = [
  "t_s", "protocol", "num_coalitions", "avg_secrecy_rate", "merges_cum",
  "splits_cum",
] as const;

export class SchemaMismatch extends Error {
  readonly columns: string[];

  constructor(message: string, columns: string[]) {
    super(`${message}: ${columns.join(", ")}`);
    this.name = "SchemaMismatch";
    this.columns = columns;
  }
}

export class EmptyData extends Error {
  constructor(message = "CSV contains no data rows") {
    super(message);
    this.name = "EmptyData";
  }
}

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  // single-column files defeat delimiter sniffing; the comma default is right
  const fatal = parsed.errors.filter((e) => e.code !== "UndetectableDelimiter");
  if (fatal.length > 0) {
    throw new SchemaMismatch(`unparsable CSV (${fatal[0].message})`, []);
  }
  const columns = parsed.meta.fields ?? [];
  return { columns, rows: parsed.data };
}

/** Require the exact documented column set (order included). */
export function requireColumns(table: Table, expected: readonly string[]): void {
  const missing = expected.filter((c) => !table.columns.includes(c));
  const extra = table.columns.filter((c) => !expected.includes(c));
  if (missing.length > 0 || extra.length > 0) {
    const offending = [...missing.map((c) => `missing:${c}`),
                       ...extra.map((c) => `unexpected:${c}`)];
    throw new SchemaMismatch("column set does not match", offending);
  }
  if (table.rows.length === 0) {
    throw new EmptyData();
  }
}

export function numeric(row: Record<string, string>, column: string): number {
  const x = Number(row[column]);
  if (!Number.isFinite(x)) {
    throw new SchemaMismatch(`non-numeric value ${JSON.stringify(row[column])}`,
                             [column]);
  }
  return x;
}
