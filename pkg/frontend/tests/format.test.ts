import { describe, expect, it } from "vitest";

import { formatPercent, formatProgress, formatScore } from "../src/format.js";

describe("formatScore", () => {
  it("keeps three significant digits", () => {
    expect(formatScore(4.2843904)).toBe("4.28");
    expect(formatScore(0.0123456)).toBe("0.0123");
    expect(formatScore(-12.345)).toBe("-12.3");
  });

  it("rounds instead of truncating", () => {
    expect(formatScore(1.2351)).toBe("1.24");
    expect(formatScore(-1.2351)).toBe("-1.24");
    expect(formatScore(0.9999)).toBe("1");
  });

  it("handles zero and non-finite values", () => {
    expect(formatScore(0)).toBe("0");
    expect(formatScore(Number.NaN)).toBe("NaN");
  });
});

describe("formatPercent", () => {
  it("rounds to one decimal", () => {
    expect(formatPercent(0.87654)).toBe("87.7%");
    expect(formatPercent(1)).toBe("100.0%");
  });
});

describe("formatProgress", () => {
  it("shows completed/total", () => {
    expect(formatProgress(3, 32)).toBe("3/32 ablations");
    expect(formatProgress(0, 0)).toBe("starting");
  });
});
