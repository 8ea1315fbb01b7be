import { describe, expect, it } from "vitest";

import {
  formatColor, formatValue, hsvToCss, parseColor, utf8Length, validateValue,
} from "../src/format.js";

describe("Switch values", () => {
  it("accepts exactly ON and OFF", () => {
    expect(validateValue("Switch", "ON")).toBe(true);
    expect(validateValue("Switch", "OFF")).toBe(true);
    for (const bad of ["on", "off", "On", "1", "true", "", " ON"]) {
      expect(validateValue("Switch", bad)).toBe(false);
    }
  });
});

describe("Dimmer values", () => {
  it("accepts integers 0..100 including zero-padded forms", () => {
    for (const ok of ["0", "1", "42", "100", "007", "050"]) {
      expect(validateValue("Dimmer", ok)).toBe(true);
    }
  });
  it("rejects out-of-range, signs, decimals and junk", () => {
    for (const bad of ["101", "1000", "-1", "+5", "3.5", "", "ON", "1e2", " 5"]) {
      expect(validateValue("Dimmer", bad)).toBe(false);
    }
  });
});

describe("Color values", () => {
  it("accepts (h,s,v) with 0 <= h < 360 and 0 <= s,v <= 1", () => {
    for (const ok of ["(0,0,0)", "(359.9,1,1)", "(210,0.25,1)", "(120,0.5,0.5)"]) {
      expect(validateValue("Color", ok)).toBe(true);
    }
  });
  it("rejects hue 360, components over 1, negatives and bad shapes", () => {
    for (const bad of [
      "(360,0,0)", "(-1,0,0)", "(0,1.1,0)", "(0,0,1.01)", "(0,0)",
      "(0,0,0,0)", "0,0,0", "(a,b,c)", "( 0,0,0)", "(0, 0, 0)", "",
    ]) {
      expect(validateValue("Color", bad)).toBe(false);
    }
  });
  it("round-trips parse/format", () => {
    const c = parseColor("(210,0.25,1)");
    expect(c).toEqual({ h: 210, s: 0.25, v: 1 });
    expect(formatColor(c!)).toBe("(210,0.25,1)");
  });
});

describe("Temperature values", () => {
  it("accepts numerics within [-50, 150]", () => {
    for (const ok of ["-50", "-50.0", "0", "21.5", "150", "150.0", "23"]) {
      expect(validateValue("Temperature", ok)).toBe(true);
    }
  });
  it("rejects out-of-range and non-numeric forms", () => {
    for (const bad of ["-50.1", "150.1", "1e2", "NaN", "", "21,5", "--3", "21."]) {
      expect(validateValue("Temperature", bad)).toBe(false);
    }
  });
});

describe("Text values", () => {
  it("bounds by UTF-8 bytes, not code points", () => {
    expect(validateValue("Text", "a".repeat(1024))).toBe(true);
    expect(validateValue("Text", "a".repeat(1025))).toBe(false);
    // 3 bytes per char in UTF-8: 342 chars = 1026 bytes.
    expect(utf8Length("€")).toBe(3);
    expect(validateValue("Text", "€".repeat(341))).toBe(true);
    expect(validateValue("Text", "€".repeat(342))).toBe(false);
    expect(validateValue("Text", "")).toBe(true);
  });
});

describe("rendering", () => {
  it("formats null state as a placeholder", () => {
    expect(formatValue("Switch", null)).toBe("—");
  });
  it("adds units for numeric kinds and passes invalid values through", () => {
    expect(formatValue("Dimmer", "042")).toBe("42 %");
    expect(formatValue("Temperature", "21.5")).toBe("21.5 °C");
    expect(formatValue("Switch", "ON")).toBe("ON");
    expect(formatValue("Dimmer", "oops")).toBe("oops");
  });
  it("maps HSV extremes to the expected RGB corners", () => {
    expect(hsvToCss({ h: 0, s: 0, v: 1 })).toBe("rgb(255, 255, 255)");
    expect(hsvToCss({ h: 0, s: 0, v: 0 })).toBe("rgb(0, 0, 0)");
    expect(hsvToCss({ h: 0, s: 1, v: 1 })).toBe("rgb(255, 0, 0)");
    expect(hsvToCss({ h: 120, s: 1, v: 1 })).toBe("rgb(0, 255, 0)");
    expect(hsvToCss({ h: 240, s: 1, v: 1 })).toBe("rgb(0, 0, 255)");
  });
});
