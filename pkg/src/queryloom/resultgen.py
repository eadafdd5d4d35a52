"""Final-mile output: narrative text analysis, the two chart paths (full
LLM option building and rule-normalized axis-checker fill), the
knowledge-enhancement clarification, and the forecaster contract with its
built-in naive implementation."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AxisInvalid,
    ChartInvalid,
    LlmMalformedOutput,
    SeriesTooShort,
)
from .execution import ExecutionResult
from .gateway import extract_fenced

CHART_TYPES = ("line", "bar", "pie")


# --- chart spec ------------------------------------------------------------

@dataclass
class ChartSpec:
    option_json: dict
    chart_type: str

    def __post_init__(self):
        validate_chart_option(self.option_json, self.chart_type)


def validate_chart_option(option: dict, chart_type: str) -> None:
    if chart_type not in CHART_TYPES:
        raise ChartInvalid(f"chart type {chart_type!r} not in {CHART_TYPES}")
    if not isinstance(option, dict):
        raise ChartInvalid("option must be a JSON object")
    unknown = set(option) - {"xAxis", "yAxis", "series"}
    if unknown:
        raise ChartInvalid(f"unknown option keys: {sorted(unknown)}")
    series = option.get("series")
    if not isinstance(series, list) or not all(isinstance(s, dict) for s in series):
        raise ChartInvalid("series must be an array of objects")
    categories = None
    x_axis = option.get("xAxis")
    if isinstance(x_axis, dict) and isinstance(x_axis.get("data"), list):
        categories = x_axis["data"]
    for s in series:
        data = s.get("data")
        if not isinstance(data, list):
            raise ChartInvalid("each series needs a data array")
        if chart_type == "pie":
            for item in data:
                if not (isinstance(item, dict) and {"name", "value"} <= set(item)):
                    raise ChartInvalid("pie series data must be name/value pairs")
        elif categories is not None and len(data) != len(categories):
            raise ChartInvalid(
                f"series length {len(data)} does not match "
                f"{len(categories)} categories"
            )


# --- clarification ---------------------------------------------------------

@dataclass
class ClarificationRequest:
    """Machine-to-human question: either a formula for an uncomputable
    metric (kind=formula) or a parameter value outside its acceptable set
    (kind=parameter)."""

    parameter: str
    kind: str = "parameter"
    acceptable_values: list = field(default_factory=list)
    reason: str = ""
    trace: Optional[object] = None

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "kind": self.kind,
            "acceptable_values": list(self.acceptable_values),
            "reason": self.reason,
        }


def knowledge_gap(question: str, schema_links, metric_lexicon: Sequence[str],
                  known_formulas: Optional[dict] = None
                  ) -> Optional[ClarificationRequest]:
    """Fire a formula request when the question names a metric term that no
    linked field resolves and no user-supplied formula covers."""
    known = {k.lower() for k in (known_formulas or {})}
    lowered = question.lower()
    linked_terms = set()
    for table, fname in getattr(schema_links, "pairs", lambda: set())():
        linked_terms.add(fname.lower().replace("_", " "))
        linked_terms.add(table.lower().replace("_", " "))
    for term in metric_lexicon:
        t = term.lower()
        if t in lowered and t not in known and t not in linked_terms:
            return ClarificationRequest(
                parameter=term,
                kind="formula",
                reason=f"the metric {term!r} cannot be computed from the linked "
                       f"fields; please provide its precise formula",
            )
    return None


# --- text analysis ---------------------------------------------------------

def _format_result(result: ExecutionResult) -> str:
    return json.dumps(result.to_dict(), ensure_ascii=False, sort_keys=True)


def text_analysis(question: str, result: ExecutionResult, provider) -> str:
    from .planner import call_model

    bindings = {"query": question, "result": _format_result(result)}

    def parser(text: str) -> str:
        narrative = text.strip()
        if not narrative:
            raise LlmMalformedOutput("empty narrative")
        return narrative

    return call_model(provider, "text_analysis", bindings, parser,
                      reminder="Describe the results in plain language.")


# --- axis checker + normalized chart path ----------------------------------

@dataclass
class AxisChoice:
    x_axis: str
    y_axis: str
    chart_type: str

    def __post_init__(self):
        if self.chart_type not in CHART_TYPES:
            raise AxisInvalid(f"chart type {self.chart_type!r} not in {CHART_TYPES}")


def axis_check(columns: Sequence[str], column_desc: str, provider) -> AxisChoice:
    from .planner import call_model

    if len(columns) < 2:
        raise AxisInvalid("axis selection needs at least two columns")
    bindings = {
        "column_name": json.dumps(list(columns), ensure_ascii=False),
        "column_desc": column_desc,
    }

    def parser(text: str) -> AxisChoice:
        doc = json.loads(extract_fenced(text, "json"))
        choice = AxisChoice(
            x_axis=str(doc["xAxis"]), y_axis=str(doc["yAxis"]),
            chart_type=str(doc["type"]),
        )
        # "Keep the original information in column_name": names must be
        # verbatim members of the column set
        if choice.x_axis not in columns or choice.y_axis not in columns:
            raise AxisInvalid(
                f"axis names ({choice.x_axis!r}, {choice.y_axis!r}) "
                f"not in columns {list(columns)}"
            )
        return choice

    try:
        return call_model(provider, "axis_checker", bindings, parser)
    except LlmMalformedOutput as exc:
        cause = exc.__cause__
        if isinstance(cause, AxisInvalid):
            raise cause
        raise


def chart_normalized(result: ExecutionResult, axis: AxisChoice) -> ChartSpec:
    """Deterministic template fill: no LLM call, pure in (result, axis)."""
    if axis.x_axis not in result.columns or axis.y_axis not in result.columns:
        raise AxisInvalid(
            f"axis columns ({axis.x_axis!r}, {axis.y_axis!r}) "
            f"not in result columns {result.columns}"
        )
    xi = result.columns.index(axis.x_axis)
    yi = result.columns.index(axis.y_axis)
    categories = [row[xi] for row in result.rows]
    values = [row[yi] for row in result.rows]
    if axis.chart_type == "pie":
        option = {
            "series": [{
                "name": axis.y_axis,
                "type": "pie",
                "data": [{"name": c, "value": v} for c, v in zip(categories, values)],
            }],
        }
    else:
        option = {
            "xAxis": {"type": "category", "name": axis.x_axis, "data": categories},
            "yAxis": {"type": "value", "name": axis.y_axis},
            "series": [{
                "data": values, "name": axis.y_axis, "type": axis.chart_type,
            }],
        }
    return ChartSpec(option_json=option, chart_type=axis.chart_type)


def chart_full(question: str, chart_type: str, result: ExecutionResult,
               provider) -> ChartSpec:
    """Full eCharts-builder path: LLM emits the option JSON; one retry on an
    invalid option, then ChartInvalid."""
    from .planner import call_model

    bindings = {
        "query": question,
        "chart_type": chart_type,
        "sql_result": json.dumps(result.as_records(), ensure_ascii=False),
    }

    def parser(text: str) -> ChartSpec:
        option = json.loads(extract_fenced(text, "json"))
        return ChartSpec(option_json=option, chart_type=chart_type)

    try:
        return call_model(
            provider, "chart_generation", bindings, parser,
            reminder="Return a valid ECharts option as fenced ```json``` with "
                     "keys among xAxis, yAxis, series.",
        )
    except LlmMalformedOutput as exc:
        cause = exc.__cause__
        if isinstance(cause, ChartInvalid):
            raise cause
        raise ChartInvalid(str(exc)) from exc


# --- forecaster ------------------------------------------------------------

@dataclass
class ForecastRequest:
    series: list[tuple]  # ordered (timestamp, value) pairs
    horizon: int
    frequency: Optional[int] = None  # dominant seasonality hint (period)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


@dataclass
class ForecastResult:
    points: list[tuple]  # (timestamp, predicted value)
    components: Optional[dict] = None  # {"trend": [...], "seasonal": [...]}


class NaiveForecaster:
    """Additive seasonal means + ordinary-least-squares linear trend.

    Seasonal means are computed first from the raw values (centered so they
    sum to zero), the series is deseasonalized, and the trend is fit on the
    residual: a pure periodic signal therefore forecasts with zero slope and
    repeats exactly."""

    def forecast(self, request: ForecastRequest) -> ForecastResult:
        values = np.array([float(v) for _, v in request.series], dtype=np.float64)
        n = len(values)
        period = request.frequency
        if period is not None and period > 1:
            if n < 2 * period:
                raise SeriesTooShort(
                    f"need at least {2 * period} points for seasonality "
                    f"period {period}, got {n}"
                )
            phases = np.arange(n) % period
            seasonal_means = np.array(
                [values[phases == p].mean() for p in range(period)]
            )
            seasonal_means -= seasonal_means.mean()  # centered: sums to zero
            seasonal = seasonal_means[phases]
        else:
            if n < 8:
                raise SeriesTooShort(
                    f"need at least 8 points for a trend-only forecast, got {n}"
                )
            period = 0
            seasonal_means = np.zeros(1)
            seasonal = np.zeros(n)

        deseasonalized = values - seasonal
        t = np.arange(n, dtype=np.float64)
        slope, intercept = np.polyfit(t, deseasonalized, 1)

        future_t = np.arange(n, n + request.horizon, dtype=np.float64)
        trend = intercept + slope * future_t
        if period:
            future_seasonal = seasonal_means[(np.arange(n, n + request.horizon) % period)]
        else:
            future_seasonal = np.zeros(request.horizon)
        predictions = trend + future_seasonal

        timestamps = self._extend_timestamps(
            [ts for ts, _ in request.series], request.horizon
        )
        return ForecastResult(
            points=list(zip(timestamps, predictions.tolist())),
            components={
                "trend": trend.tolist(),
                "seasonal": future_seasonal.tolist(),
            },
        )

    @staticmethod
    def _extend_timestamps(timestamps: list, horizon: int) -> list:
        numeric = all(isinstance(ts, (int, float)) for ts in timestamps)
        if numeric and len(timestamps) >= 2:
            step = (timestamps[-1] - timestamps[0]) / (len(timestamps) - 1)
            if step <= 0:
                step = 1
            return [timestamps[-1] + step * (i + 1) for i in range(horizon)]
        n = len(timestamps)
        return [f"t+{n + i}" for i in range(horizon)]


class HttpForecaster:
    """External forecaster contract: POST {series, horizon} -> {points}."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def forecast(self, request: ForecastRequest) -> ForecastResult:
        import httpx

        payload = {
            "series": [[ts, v] for ts, v in request.series],
            "horizon": request.horizon,
        }
        if request.frequency:
            payload["frequency"] = request.frequency
        response = httpx.post(f"{self.base_url}/forecast", json=payload,
                              timeout=self.timeout)
        response.raise_for_status()
        doc = response.json()
        return ForecastResult(points=[tuple(p) for p in doc["points"]])


def forecast(request: ForecastRequest, forecaster=None) -> ForecastResult:
    result = (forecaster or NaiveForecaster()).forecast(request)
    if len(result.points) != request.horizon:
        raise ValueError(
            f"forecaster returned {len(result.points)} points, "
            f"expected {request.horizon}"
        )
    return result
