import { describe, expect, it } from "vitest";
import { PolicyError, gate, leaf, leaves, parse, render, satisfies } from "../src/policy.js";

describe("parse", () => {
  it("honours precedence: AND binds tighter than OR", () => {
    const node = parse("ns:a OR ns:b AND ns:c");
    expect(node).toEqual(gate(1, [leaf("ns:a"), gate(2, [leaf("ns:b"), leaf("ns:c")])]));
  });

  it("parses thresholds, including nested ones", () => {
    const node = parse("2of(ns:a, ns:b, 2of(ns:c, ns:d, ns:a))");
    expect(node.kind).toBe("gate");
    expect((node as any).k).toBe(2);
    expect(leaves(node).map((l) => l.attribute)).toEqual(["ns:a", "ns:b", "ns:c", "ns:d", "ns:a"]);
  });

  it("normalizes attribute case", () => {
    expect(parse("Role:Doctor")).toEqual(leaf("role:doctor"));
  });

  it("rejects malformed input", () => {
    for (const bad of ["", "ns:a AND", "ns:a ns:b", "0of(ns:a, ns:b)", "role doctor", "(ns:a"]) {
      expect(() => parse(bad)).toThrow(PolicyError);
    }
  });
});

describe("render", () => {
  it("round-trips canonical text", () => {
    const texts = [
      "ns:a",
      "ns:a AND ns:b",
      "ns:a OR ns:b AND ns:c",
      "(ns:a OR ns:b) AND (ns:c OR ns:d)",
      "2of(ns:a, ns:b, ns:c)",
      "2of(ns:a AND ns:b, ns:c, ns:d)",
    ];
    for (const text of texts) {
      const node = parse(text);
      expect(render(node)).toBe(text);
      expect(parse(render(node))).toEqual(node);
    }
  });

  it("re-renders non-canonical input to canonical form", () => {
    expect(render(parse("( ns:a )  AND ( ns:b )"))).toBe("ns:a AND ns:b");
    expect(render(parse("1of(ns:a, ns:b)"))).toBe("ns:a OR ns:b");
    expect(render(parse("2of(ns:a, ns:b)"))).toBe("ns:a AND ns:b");
  });
});

describe("satisfies", () => {
  const node = parse("role:doctor AND (dept:cardiology OR dept:dermatology)");

  it("accepts a satisfying set and rejects others", () => {
    expect(satisfies(node, ["role:doctor", "dept:cardiology"])).toBe(true);
    expect(satisfies(node, ["role:doctor", "dept:dermatology", "role:nurse"])).toBe(true);
    expect(satisfies(node, ["role:doctor"])).toBe(false);
    expect(satisfies(node, ["dept:cardiology"])).toBe(false);
    expect(satisfies(node, [])).toBe(false);
  });

  it("handles thresholds", () => {
    const t = parse("2of(ns:a, ns:b, ns:c)");
    expect(satisfies(t, ["ns:a", "ns:c"])).toBe(true);
    expect(satisfies(t, ["ns:b"])).toBe(false);
  });

  it("is monotone: adding attributes never revokes access", () => {
    const policies = ["ns:a AND ns:b", "2of(ns:a, ns:b, ns:c)", "ns:a OR ns:b AND ns:c"];
    const universe = ["ns:a", "ns:b", "ns:c", "ns:d"];
    for (const text of policies) {
      const p = parse(text);
      for (let mask = 0; mask < 16; mask++) {
        const subset = universe.filter((_, i) => mask & (1 << i));
        if (satisfies(p, subset)) {
          expect(satisfies(p, [...subset, "ns:d"])).toBe(true);
        }
      }
    }
  });
});
