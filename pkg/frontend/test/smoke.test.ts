/**
 * End-to-end smoke test: drive the `secoal` CLI to produce real CSV output,
 * then render every figure kind and count the plotted series.
 */
import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { run } from "../src/cli.js";
import { FIGURE_KINDS, FigureKind, render } from "../src/figures.js";

// two protocols in the sweeps, one in the mobility run
const EXPECTED_SERIES: Record<FigureKind, number> = {
  rate_vs_n: 2,
  rate_vs_k: 2,
  rate_vs_nu0: 2,
  sizes_vs_n: 4,          // avg + avg-max per protocol
  ops_vs_speed: 2,        // merges + splits for the single protocol
  coalitions_timeseries: 1,
};

let work = "";
const csvFor = {} as Record<FigureKind, string>;

function secoal(args: string[]): void {
  execFileSync("secoal", args, { cwd: work, stdio: "pipe", timeout: 180_000 });
}

beforeAll(() => {
  work = mkdtempSync(join(tmpdir(), "secoal-smoke-"));
  const cfg = join(work, "config.json");
  writeFileSync(cfg, JSON.stringify({
    N: 6, M: 1, K: 1, seed: 3, num_deployments: 2,
    mobility: { duration_s: 60, decision_interval_s: 30 },
  }));
  secoal(["sweep", "--config", cfg, "--param", "n", "--values", "5,6",
          "--protocols", "df,noncoop", "--out", join(work, "n")]);
  secoal(["sweep", "--config", cfg, "--param", "k", "--values", "1,2",
          "--protocols", "df,noncoop", "--out", join(work, "k")]);
  secoal(["sweep", "--config", cfg, "--param", "nu0_db", "--values", "5,10",
          "--protocols", "df,noncoop", "--out", join(work, "nu0")]);
  secoal(["mobility", "--config", cfg, "--param", "speed", "--values", "18",
          "--protocols", "df", "--out", join(work, "speed")]);
  csvFor.rate_vs_n = join(work, "n", "results.csv");
  csvFor.sizes_vs_n = join(work, "n", "results.csv");
  csvFor.rate_vs_k = join(work, "k", "results.csv");
  csvFor.rate_vs_nu0 = join(work, "nu0", "results.csv");
  csvFor.ops_vs_speed = join(work, "speed", "results.csv");
  csvFor.coalitions_timeseries = join(work, "speed", "timeseries.csv");
}, 300_000);

afterAll(() => {
  if (work) rmSync(work, { recursive: true, force: true });
});

describe("generated CSVs", () => {
  it("render with the expected series count for every figure kind", () => {
    for (const kind of FIGURE_KINDS) {
      const svg = render(kind, readFileSync(csvFor[kind], "utf8"));
      const found = (svg.match(/class="series"/g) ?? []).length;
      expect(found, kind).toBe(EXPECTED_SERIES[kind]);
    }
  });

  it("carry uncertainty whiskers on the rate figures", () => {
    const svg = render("rate_vs_n", readFileSync(csvFor.rate_vs_n, "utf8"));
    expect(svg).toMatch(/class="errorbar"/);
  });
});

describe("plot CLI", () => {
  it("writes an SVG identical to a direct render", () => {
    const out = join(work, "fig.svg");
    const code = run(["--csv", csvFor.rate_vs_n, "--kind", "rate_vs_n", "--out", out]);
    expect(code).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf8"))
      .toBe(render("rate_vs_n", readFileSync(csvFor.rate_vs_n, "utf8")));
  });

  it("fails cleanly on an unknown kind", () => {
    expect(run(["--csv", csvFor.rate_vs_n, "--kind", "nope",
                "--out", join(work, "x.svg")])).toBe(1);
  });

  it("fails cleanly on a missing input file", () => {
    expect(run(["--csv", join(work, "does-not-exist.csv"),
                "--kind", "rate_vs_n", "--out", join(work, "x.svg")])).toBe(1);
  });

  it("fails cleanly on a kind/file mismatch", () => {
    expect(run(["--csv", csvFor.coalitions_timeseries, "--kind", "rate_vs_n",
                "--out", join(work, "x.svg")])).toBe(1);
  });
});
