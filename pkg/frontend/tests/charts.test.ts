// Chart geometry tests: series values must be lifted verbatim from the
// records, and pixel geometry must stay inside the padded box.

import { describe, expect, it } from "vitest";
import { RoundRow } from "../src/api.js";
import {
  Box,
  apSeries,
  chartGeometry,
  poolFractionReadout,
  positivesSeries,
  ticks,
} from "../src/charts.js";

function row(labeled: number, ap: number | null, positives: number, poolFrac = 0.1): RoundRow {
  return {
    concept: "concept-01",
    rep: 0,
    round: labeled,
    labeled,
    positives,
    pool_size: 100,
    pool_frac: poolFrac,
    ap,
    t_select_s: 0,
    t_knn_s: 0,
    t_train_s: 0,
  };
}

const BOX: Box = { width: 360, height: 180, pad: 28 };

describe("series extraction", () => {
  it("copies the record columns without transformation", () => {
    const records = [row(100, 0.41, 12), row(200, 0.57, 31), row(300, null, 55)];
    expect(apSeries(records)).toEqual({ x: [100, 200, 300], y: [0.41, 0.57, null] });
    expect(positivesSeries(records)).toEqual({ x: [100, 200, 300], y: [12, 31, 55] });
  });

  it("reads the pool fraction from the last round only", () => {
    expect(poolFractionReadout([])).toBeNull();
    expect(poolFractionReadout([row(100, 0.4, 1, 0.25), row(200, 0.5, 2, 0.31)])).toBe(0.31);
  });
});

describe("ticks", () => {
  it("uses unit steps over [0, 1]", () => {
    expect(ticks(0, 1, 5)).toEqual([0, 0.2, 0.4, 0.6, 0.8, 1]);
  });

  it("collapses a degenerate domain to a single tick", () => {
    expect(ticks(5, 5)).toEqual([5]);
  });

  it("picks 1/2/5 steps scaled to the domain", () => {
    expect(ticks(0, 1000, 5)).toEqual([0, 200, 400, 600, 800, 1000]);
    expect(ticks(0.13, 0.94, 5)).toEqual([0.2, 0.4, 0.6, 0.8]);
  });
});

describe("chartGeometry", () => {
  it("is empty for no records or an all-null series", () => {
    const empty = { segments: [], markers: [], xTicks: [], yTicks: [] };
    expect(chartGeometry(apSeries([]), BOX)).toEqual(empty);
    expect(chartGeometry(apSeries([row(100, null, 1), row(200, null, 2)]), BOX)).toEqual(empty);
  });

  it("maps growing values to climbing pixels (SVG y is inverted)", () => {
    const records = [row(100, 0.1, 5), row(200, 0.2, 11), row(300, 0.3, 29)];
    const geo = chartGeometry(positivesSeries(records), BOX);
    expect(geo.markers).toHaveLength(3);
    const ys = geo.markers.map((m) => m.y);
    for (let i = 1; i < ys.length; i++) {
      expect(ys[i]!).toBeLessThan(ys[i - 1]!);
    }
    expect(geo.segments).toHaveLength(1);
    expect(geo.segments[0]).toBe(geo.markers.map((m) => `${m.x},${m.y}`).join(" "));
  });

  it("splits the line at null values but keeps their neighbors as markers", () => {
    const records = [
      row(100, 0.1, 1),
      row(200, 0.2, 2),
      row(300, null, 3),
      row(400, 0.3, 4),
      row(500, 0.4, 5),
    ];
    const geo = chartGeometry(apSeries(records), BOX);
    expect(geo.segments).toHaveLength(2);
    expect(geo.markers).toHaveLength(4);

    const isolated = chartGeometry(
      apSeries([row(100, null, 1), row(200, 0.5, 2), row(300, null, 3)]),
      BOX,
    );
    expect(isolated.segments).toHaveLength(0);
    expect(isolated.markers).toHaveLength(1);
  });

  it("keeps every drawn coordinate inside the padded box", () => {
    const records = [row(100, 0.03, 2), row(250, 0.81, 40), row(475, 0.64, 97)];
    for (const series of [apSeries(records), positivesSeries(records)]) {
      const geo = chartGeometry(series, BOX);
      for (const m of geo.markers) {
        expect(m.x).toBeGreaterThanOrEqual(BOX.pad);
        expect(m.x).toBeLessThanOrEqual(BOX.width - BOX.pad);
        expect(m.y).toBeGreaterThanOrEqual(BOX.pad);
        expect(m.y).toBeLessThanOrEqual(BOX.height - BOX.pad);
      }
      for (const t of geo.xTicks) {
        expect(t.px).toBeGreaterThanOrEqual(BOX.pad);
        expect(t.px).toBeLessThanOrEqual(BOX.width - BOX.pad);
      }
    }
  });

  it("anchors the y axis at zero for positive-valued series", () => {
    const geo = chartGeometry(apSeries([row(100, 0.5, 1), row(200, 0.75, 2)]), BOX);
    // 0.5 sits exactly halfway up a [0, 0.75] axis
    const bottom = BOX.height - BOX.pad;
    const top = BOX.pad;
    const mid = geo.markers[0]!.y;
    expect(mid).toBeCloseTo(bottom - (0.5 / 0.75) * (bottom - top), 1);
    expect(geo.markers[1]!.y).toBe(top);
  });

  it("centers a single point horizontally", () => {
    const geo = chartGeometry(apSeries([row(100, 0.4, 3)]), BOX);
    expect(geo.segments).toHaveLength(0);
    expect(geo.markers).toEqual([{ x: BOX.width / 2, y: BOX.pad }]);
  });
});
