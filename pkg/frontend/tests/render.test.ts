import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import { renderMolecule } from "../src/render.js";
import type { MoleculeView } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const benzene: MoleculeView = JSON.parse(
  readFileSync(join(here, "fixtures", "benzene.json"), "utf8"),
);

function count(haystack: string, needle: RegExp): number {
  return (haystack.match(needle) ?? []).length;
}

describe("renderMolecule", () => {
  it("renders benzene with 6 vertices, 3 double-stroke and 3 single bonds", () => {
    const svg = renderMolecule(benzene);
    expect(svg.startsWith("<svg")).toBe(true);
    expect(count(svg, /<circle class="atom/g)).toBe(6);
    expect(count(svg, /bond-double/g)).toBe(3);
    expect(count(svg, /bond-single/g)).toBe(3);
    // a double bond is two parallel segments, a single bond one
    expect(count(svg, /<line /g)).toBe(3 * 2 + 3 * 1);
    // carbons carry no text labels
    expect(count(svg, /<text/g)).toBe(0);
  });

  it("is a pure function of the payload", () => {
    expect(renderMolecule(benzene)).toBe(renderMolecule(benzene));
  });

  it("labels heteroatoms with their hydrogens", () => {
    const water: MoleculeView = {
      atoms: [{ symbol: "O", x: 0, y: 0, h_count: 2 }],
      bonds: [],
    };
    const svg = renderMolecule(water);
    expect(svg).toContain("OH2");
  });

  it("draws one segment for a single bond", () => {
    const pair: MoleculeView = {
      atoms: [
        { symbol: "C", x: 0, y: 0, h_count: 3 },
        { symbol: "C", x: 1, y: 0, h_count: 3 },
      ],
      bonds: [{ a: 0, b: 1, multiplicity: 1 }],
    };
    expect(count(renderMolecule(pair), /<line /g)).toBe(1);
  });

  it("renders an error card for non-finite coordinates", () => {
    const broken: MoleculeView = {
      atoms: [{ symbol: "C", x: Number.NaN, y: 0, h_count: 4 }],
      bonds: [],
    };
    const html = renderMolecule(broken);
    expect(html).toContain("error-card");
    expect(html).not.toContain("<svg");
  });

  it("renders an error card for out-of-range bond indices", () => {
    const broken = {
      atoms: [{ symbol: "C", x: 0, y: 0, h_count: 4 }],
      bonds: [{ a: 0, b: 5, multiplicity: 1 }],
    } as MoleculeView;
    expect(renderMolecule(broken)).toContain("error-card");
  });

  it("matches the benzene snapshot", () => {
    expect(renderMolecule(benzene)).toMatchSnapshot();
  });
});
