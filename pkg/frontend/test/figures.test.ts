import { describe, expect, it } from "vitest";
import { EmptyData, SWEEP_COLUMNS, SchemaMismatch, parseCsv } from "../src/csv.js";
import { FIGURE_KINDS, figureSpec, render } from "../src/figures.js";

const SWEEP_HEADER = SWEEP_COLUMNS.join(",");

function sweepCsv(param: string, values: number[], protocols: string[]): string {
  const lines = [SWEEP_HEADER];
  for (const v of values) {
    for (const p of protocols) {
      const rate = p === "noncoop" ? 1.0 : 1.0 + 0.01 * v;
      lines.push(`${param},${v},${p},100,${rate},0.05,1.97,6.8,0.4,0.1`);
    }
  }
  return lines.join("\n") + "\n";
}

const TIMESERIES_CSV = [
  "t_s,protocol,num_coalitions,avg_secrecy_rate,merges_cum,splits_cum",
  "0,df,12,1.2,0,0",
  "30,df,10,1.3,2,0",
  "60,df,11,1.25,2,1",
  "0,af,12,1.0,0,0",
  "30,af,12,1.0,0,0",
  "60,af,11,1.05,1,0",
].join("\n") + "\n";

function countMatches(text: string, needle: RegExp): number {
  return (text.match(needle) ?? []).length;
}

describe("figureSpec", () => {
  it("builds one rate series per protocol with error bars", () => {
    const table = parseCsv(sweepCsv("n", [10, 20], ["df", "af", "noncoop"]));
    const spec = figureSpec("rate_vs_n", table);
    expect(spec.series.map((s) => s.name)).toEqual(["df", "af", "noncoop"]);
    expect(spec.series[0].points).toHaveLength(2);
    expect(spec.series[0].points[0].err).toBeCloseTo(0.05, 12);
  });

  it("preserves the protocol order of the file", () => {
    const table = parseCsv(sweepCsv("k", [2, 4], ["noncoop", "df"]));
    const spec = figureSpec("rate_vs_k", table);
    expect(spec.series.map((s) => s.name)).toEqual(["noncoop", "df"]);
  });

  it("splits sizes into avg and avg-max series", () => {
    const table = parseCsv(sweepCsv("n", [10, 20, 30], ["df", "af"]));
    const spec = figureSpec("sizes_vs_n", table);
    expect(spec.series.map((s) => s.name)).toEqual(
      ["df avg", "af avg", "df avg max", "af avg max"]);
    expect(spec.series[2].points.map((p) => p.y)).toEqual([6.8, 6.8, 6.8]);
  });

  it("splits speed sweeps into merge and split series", () => {
    const table = parseCsv(sweepCsv("speed", [18, 72], ["df"]));
    const spec = figureSpec("ops_vs_speed", table);
    expect(spec.series.map((s) => s.name)).toEqual(["df merges", "df splits"]);
  });

  it("rejects a sweep over the wrong parameter", () => {
    const table = parseCsv(sweepCsv("k", [2, 4], ["df"]));
    expect(() => figureSpec("rate_vs_n", table)).toThrow(SchemaMismatch);
    expect(() => figureSpec("rate_vs_nu0", table)).toThrow(SchemaMismatch);
  });

  it("uses step styling for the timeseries figure", () => {
    const spec = figureSpec("coalitions_timeseries", parseCsv(TIMESERIES_CSV));
    expect(spec.series.map((s) => s.name)).toEqual(["df", "af"]);
    expect(spec.series.every((s) => s.style === "step")).toBe(true);
  });
});

describe("render", () => {
  it("emits one marked path per series", () => {
    const svg = render("rate_vs_n", sweepCsv("n", [10, 20], ["df", "af", "noncoop"]));
    expect(countMatches(svg, /class="series"/g)).toBe(3);
    expect(countMatches(svg, /class="errorbar"/g)).toBe(6);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
  });

  it("draws step paths for the timeseries kind", () => {
    const svg = render("coalitions_timeseries", TIMESERIES_CSV);
    expect(countMatches(svg, /class="series"/g)).toBe(2);
    expect(svg).toMatch(/d="M [^"]*H [^"]*V /);
  });

  it("is byte-for-byte deterministic", () => {
    for (const kind of FIGURE_KINDS) {
      const csv = kind === "coalitions_timeseries"
        ? TIMESERIES_CSV
        : sweepCsv(
            { rate_vs_n: "n", rate_vs_k: "k", rate_vs_nu0: "nu0_db",
              sizes_vs_n: "n", ops_vs_speed: "speed" }[kind]!,
            [1, 2, 3], ["df", "noncoop"]);
      expect(render(kind, csv)).toBe(render(kind, csv));
    }
  });

  it("refuses data-free input", () => {
    const headerOnly = TIMESERIES_CSV.split("\n")[0] + "\n";
    expect(() => render("coalitions_timeseries", headerOnly)).toThrow(EmptyData);
  });

  it("refuses a sweep file for the timeseries figure", () => {
    expect(() => render("coalitions_timeseries", sweepCsv("n", [10], ["df"])))
      .toThrow(SchemaMismatch);
  });
});
