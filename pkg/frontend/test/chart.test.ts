import { describe, expect, it } from "vitest";

import { toRenderModel } from "../src/chart.js";

// the seven-group application-form bar option emitted by the service's
// chart-generation example
const FIG17_OPTION = {
  xAxis: {
    type: "category",
    name: "Application form type",
    data: ["2", "5", "1", "4", "0", "7", "6"],
  },
  yAxis: {
    type: "value",
    name: "Application Form quantit",
  },
  series: [
    {
      data: ["1145", "406", "505", "596", "84", "33", "19"],
      name: "Application Form of X for May 23",
      type: "bar",
    },
  ],
};

const LINE_OPTION = {
  xAxis: { type: "category", name: "month", data: ["1", "2", "3", "4", "5", "6"] },
  yAxis: { type: "value", name: "sales_amount" },
  series: [
    { data: [110, 95, 130, 120, 150, 140], name: "sales_amount", type: "line" },
  ],
};

describe("toRenderModel", () => {
  it("renders the seven-bar application-form option as 7 bars", () => {
    const model = toRenderModel(FIG17_OPTION);
    expect(model.kind).toBe("bar");
    if (model.kind !== "bar") return;
    expect(model.categories).toHaveLength(7);
    expect(model.series).toHaveLength(1);
    expect(model.series[0]!.values).toEqual([1145, 406, 505, 596, 84, 33, 19]);
    expect(model.title).toBe("Application form type");
  });

  it("renders a six-point monthly line chart", () => {
    const model = toRenderModel(LINE_OPTION);
    expect(model.kind).toBe("line");
    if (model.kind !== "line") return;
    expect(model.categories).toEqual(["1", "2", "3", "4", "5", "6"]);
    expect(model.series[0]!.values).toEqual([110, 95, 130, 120, 150, 140]);
  });

  it("renders pie options as named slices", () => {
    const model = toRenderModel({
      series: [
        {
          type: "pie",
          name: "share",
          data: [
            { name: "a", value: 3 },
            { name: "b", value: "7" },
          ],
        },
      ],
    });
    expect(model).toEqual({
      kind: "pie",
      title: "share",
      slices: [
        { name: "a", value: 3 },
        { name: "b", value: 7 },
      ],
    });
  });

  it.each([
    ["not an object", "bar"],
    ["missing series", { xAxis: { data: ["1"] } }],
    ["empty series", { xAxis: { data: ["1"] }, series: [] }],
    ["unknown type", { xAxis: { data: ["1"] }, series: [{ type: "radar", data: [1] }] }],
    ["length mismatch", { xAxis: { data: ["1", "2"] }, series: [{ type: "bar", data: [1] }] }],
    ["non-numeric data", { xAxis: { data: ["1"] }, series: [{ type: "bar", data: ["n/a"] }] }],
    ["mixed series types", {
      xAxis: { data: ["1"] },
      series: [{ type: "bar", data: [1] }, { type: "line", data: [2] }],
    }],
    ["pie slice without name", { series: [{ type: "pie", data: [{ value: 1 }] }] }],
  ])("falls back to a raw-JSON panel on %s", (_label, option) => {
    const model = toRenderModel(option);
    expect(model.kind).toBe("fallback");
    if (model.kind !== "fallback") return;
    expect(() => JSON.parse(model.raw)).not.toThrow();
  });

  it("never fabricates data: every rendered number is in the payload", () => {
    const model = toRenderModel(FIG17_OPTION);
    if (model.kind !== "bar") throw new Error("expected bar");
    const payloadValues = FIG17_OPTION.series[0]!.data.map(Number);
    for (const value of model.series[0]!.values) {
      expect(payloadValues).toContain(value);
    }
    expect(model.categories).toEqual(FIG17_OPTION.xAxis.data);
  });
});
