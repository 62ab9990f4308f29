import {
  EmptyData, SWEEP_COLUMNS, SchemaMismatch, Table, TIMESERIES_COLUMNS, numeric,
  parseCsv, requireColumns,
} from "./csv.js";
import { ChartSpec, Series, renderChart } from "./svg.js";

export const FIGURE_KINDS = [
  "rate_vs_n", "rate_vs_k", "rate_vs_nu0", "sizes_vs_n", "ops_vs_speed",
  "coalitions_timeseries",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

interface SweepKind {
  param: string;
  title: string;
  xlabel: string;
}

const RATE_KINDS: Record<string, SweepKind> = {
  rate_vs_n: {
    param: "n",
    title: "Average secrecy rate per user vs network size",
    xlabel: "number of users N",
  },
  rate_vs_k: {
    param: "k",
    title: "Average secrecy rate per user vs eavesdropper count",
    xlabel: "number of eavesdroppers K",
  },
  rate_vs_nu0: {
    param: "nu0_db",
    title: "Average secrecy rate per user vs exchange SNR target",
    xlabel: "exchange SNR target (dB)",
  },
};

function protocolsOf(table: Table): string[] {
  const seen: string[] = [];
  for (const row of table.rows) {
    const p = row["protocol"];
    if (!seen.includes(p)) seen.push(p);
  }
  return seen;
}

function requireParam(table: Table, param: string): void {
  const values = [...new Set(table.rows.map((r) => r["param"]))];
  if (values.length !== 1 || values[0] !== param) {
    throw new SchemaMismatch(
      `figure needs a '${param}' sweep but the param column holds`, values);
  }
}

function sweepSeries(table: Table, yColumn: string, errColumn: string | null,
                     suffix = ""): Series[] {
  return protocolsOf(table).map((proto) => ({
    name: suffix ? `${proto} ${suffix}` : proto,
    style: "line" as const,
    points: table.rows.filter((r) => r["protocol"] === proto).map((r) => ({
      x: numeric(r, "value"),
      y: numeric(r, yColumn),
      ...(errColumn ? { err: numeric(r, errColumn) } : {}),
    })),
  }));
}

export function figureSpec(kind: FigureKind, table: Table): ChartSpec {
  if (kind === "coalitions_timeseries") {
    requireColumns(table, TIMESERIES_COLUMNS);
    const series: Series[] = protocolsOf(table).map((proto) => ({
      name: proto,
      style: "step" as const,
      points: table.rows.filter((r) => r["protocol"] === proto).map((r) => ({
        x: numeric(r, "t_s"),
        y: numeric(r, "num_coalitions"),
      })),
    }));
    return {
      title: "Coalition count over a mobile run",
      xlabel: "time (s)",
      ylabel: "number of coalitions",
      series,
    };
  }

  requireColumns(table, SWEEP_COLUMNS);
  if (kind in RATE_KINDS) {
    const meta = RATE_KINDS[kind];
    requireParam(table, meta.param);
    return {
      title: meta.title,
      xlabel: meta.xlabel,
      ylabel: "average secrecy rate (bit/s/Hz)",
      series: sweepSeries(table, "avg_secrecy_rate", "stderr"),
    };
  }
  if (kind === "sizes_vs_n") {
    requireParam(table, "n");
    return {
      title: "Coalition sizes vs network size",
      xlabel: "number of users N",
      ylabel: "coalition size",
      series: [
        ...sweepSeries(table, "avg_coalition_size", null, "avg"),
        ...sweepSeries(table, "avg_max_coalition_size", null, "avg max"),
      ],
    };
  }
  if (kind === "ops_vs_speed") {
    requireParam(table, "speed");
    return {
      title: "Topology adaptation rate vs node speed",
      xlabel: "speed (km/h)",
      ylabel: "events per minute",
      series: [
        ...sweepSeries(table, "merges_per_min", null, "merges"),
        ...sweepSeries(table, "splits_per_min", null, "splits"),
      ],
    };
  }
  throw new SchemaMismatch(`unknown figure kind '${kind}'`, []);
}

export function render(kind: FigureKind, csvText: string): string {
  const table = parseCsv(csvText);
  const spec = figureSpec(kind, table);
  if (spec.series.every((s) => s.points.length === 0)) {
    throw new EmptyData();
  }
  return renderChart(spec);
}
