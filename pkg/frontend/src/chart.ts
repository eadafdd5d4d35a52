/** Thin adapter from the service's ECharts-style option JSON to a render
 * model. The service already emits the option structure (xAxis/yAxis/series),
 * so the UI only validates and reshapes it; anything malformed falls back to
 * a raw-JSON panel instead of crashing. */

export interface AxisSeries {
  name: string;
  values: number[];
}

export interface PieSlice {
  name: string;
  value: number;
}

export type RenderModel =
  | { kind: "bar" | "line"; title: string; categories: string[]; series: AxisSeries[] }
  | { kind: "pie"; title: string; slices: PieSlice[] }
  | { kind: "fallback"; raw: string };

function fallback(option: unknown): RenderModel {
  return { kind: "fallback", raw: JSON.stringify(option, null, 2) };
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function asNumber(value: unknown): number {
  if (typeof value === "number") return value;
  if (typeof value === "string" && value.trim() !== "") {
    const parsed = Number(value);
    if (Number.isFinite(parsed)) return parsed;
  }
  return NaN;
}

export function toRenderModel(option: unknown): RenderModel {
  if (!isRecord(option) || !Array.isArray(option.series) || option.series.length === 0) {
    return fallback(option);
  }
  const series = option.series;
  const types = new Set(series.map((s) => (isRecord(s) ? s.type : undefined)));
  if (types.size !== 1) return fallback(option);
  const [type] = types;

  if (type === "pie") {
    const first = series[0];
    if (!isRecord(first) || !Array.isArray(first.data)) return fallback(option);
    const slices: PieSlice[] = [];
    for (const item of first.data) {
      if (!isRecord(item) || typeof item.name !== "string") return fallback(option);
      const value = asNumber(item.value);
      if (Number.isNaN(value)) return fallback(option);
      slices.push({ name: item.name, value });
    }
    const title = typeof first.name === "string" ? first.name : "";
    return { kind: "pie", title, slices };
  }

  if (type !== "bar" && type !== "line") return fallback(option);
  const xAxis = option.xAxis;
  if (!isRecord(xAxis) || !Array.isArray(xAxis.data)) return fallback(option);
  const categories = xAxis.data.map((c) => String(c));
  const out: AxisSeries[] = [];
  for (const s of series) {
    if (!isRecord(s) || !Array.isArray(s.data)) return fallback(option);
    if (s.data.length !== categories.length) return fallback(option);
    const values = s.data.map(asNumber);
    if (values.some(Number.isNaN)) return fallback(option);
    out.push({ name: typeof s.name === "string" ? s.name : "", values });
  }
  const title = typeof xAxis.name === "string" ? xAxis.name : "";
  return { kind: type, title, categories, series: out };
}
