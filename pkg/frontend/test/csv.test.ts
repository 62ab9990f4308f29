import { describe, expect, it } from "vitest";
import {
  EmptyData, SWEEP_COLUMNS, SchemaMismatch, TIMESERIES_COLUMNS, numeric,
  parseCsv, requireColumns,
} from "../src/csv.js";

const SWEEP_HEADER = SWEEP_COLUMNS.join(",");

describe("parseCsv", () => {
  it("parses header and rows", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n");
    expect(t.columns).toEqual(["a", "b"]);
    expect(t.rows).toEqual([{ a: "1", b: "2" }, { a: "3", b: "4" }]);
  });

  it("keeps full numeric precision as text", () => {
    const t = parseCsv("x\n0.123456789012\n");
    expect(numeric(t.rows[0], "x")).toBeCloseTo(0.123456789012, 12);
  });
});

describe("requireColumns", () => {
  it("accepts the documented sweep schema", () => {
    const t = parseCsv(`${SWEEP_HEADER}\nn,45,df,3,1.2,0.1,2,6,0,0\n`);
    expect(() => requireColumns(t, SWEEP_COLUMNS)).not.toThrow();
  });

  it("lists missing and unexpected columns", () => {
    const t = parseCsv("param,value,bogus\nn,1,2\n");
    try {
      requireColumns(t, SWEEP_COLUMNS);
      expect.unreachable();
    } catch (err) {
      const sm = err as SchemaMismatch;
      expect(sm.name).toBe("SchemaMismatch");
      expect(sm.columns).toContain("missing:protocol");
      expect(sm.columns).toContain("unexpected:bogus");
    }
  });

  it("raises EmptyData for a header-only file", () => {
    const t = parseCsv(`${SWEEP_HEADER}\n`);
    expect(() => requireColumns(t, SWEEP_COLUMNS)).toThrow(EmptyData);
  });

  it("accepts the timeseries schema", () => {
    const t = parseCsv(`${TIMESERIES_COLUMNS.join(",")}\n0,df,10,1.5,0,0\n`);
    expect(() => requireColumns(t, TIMESERIES_COLUMNS)).not.toThrow();
  });
});

describe("numeric", () => {
  it("rejects non-numeric cells with the offending column", () => {
    const t = parseCsv("x\nabc\n");
    try {
      numeric(t.rows[0], "x");
      expect.unreachable();
    } catch (err) {
      expect((err as SchemaMismatch).columns).toEqual(["x"]);
    }
  });
});
