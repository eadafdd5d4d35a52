import json

import pytest

from queryloom.errors import AxisInvalid, ChartInvalid, SeriesTooShort
from queryloom.execution import ExecutionResult
from queryloom.gateway import ScriptedProvider
from queryloom.planner import SchemaLink
from queryloom.resultgen import (
    AxisChoice,
    ChartSpec,
    ForecastRequest,
    NaiveForecaster,
    axis_check,
    chart_full,
    chart_normalized,
    forecast,
    knowledge_gap,
    text_analysis,
)


def result_of(columns, rows):
    return ExecutionResult(columns=columns, rows=[tuple(r) for r in rows],
                           row_count=len(rows), elapsed=0.0)


FIG17_OPTION = {
    "xAxis": {"type": "category", "name": "Application form type",
              "data": ["2", "5", "1", "4", "0", "7", "6"]},
    "yAxis": {"type": "value", "name": "Application Form quantit"},
    "series": [{"data": ["1145", "406", "505", "596", "84", "33", "19"],
                "name": "Application Form of X for May 23", "type": "bar"}],
}


class TestChartSpec:
    def test_valid_bar_option(self):
        spec = ChartSpec(option_json=FIG17_OPTION, chart_type="bar")
        assert len(spec.option_json["xAxis"]["data"]) == 7

    def test_series_category_length_mismatch(self):
        bad = json.loads(json.dumps(FIG17_OPTION))
        bad["series"][0]["data"] = ["1"]
        with pytest.raises(ChartInvalid):
            ChartSpec(option_json=bad, chart_type="bar")

    def test_unknown_chart_type(self):
        with pytest.raises(ChartInvalid):
            ChartSpec(option_json=FIG17_OPTION, chart_type="scatter")


class TestTextAnalysis:
    def test_scripted_narrative_verbatim(self):
        provider = ScriptedProvider()
        provider.script("text_analysis", "Sales peaked in May.")
        out = text_analysis("q", result_of(["m"], [(5,)]), provider)
        assert out == "Sales peaked in May."

    def test_empty_result_no_fabricated_digits(self):
        provider = ScriptedProvider()
        scripted = "No matching data was found for the requested period."
        provider.script("text_analysis", scripted)
        out = text_analysis("q", result_of(["m"], []), provider)
        assert out == scripted
        assert not any(ch.isdigit() for ch in out)


class TestAxisCheck:
    def test_valid_choice(self):
        provider = ScriptedProvider()
        provider.script(
            "axis_checker",
            '```json\n{"xAxis": "month", "yAxis": "sales", "type": "line"}\n```',
        )
        choice = axis_check(["month", "sales"], "monthly sales trend", provider)
        assert (choice.x_axis, choice.y_axis, choice.chart_type) == \
            ("month", "sales", "line")

    def test_nonexistent_column_rejected(self):
        provider = ScriptedProvider()
        provider.script(
            "axis_checker",
            '```json\n{"xAxis": "ghost", "yAxis": "sales", "type": "bar"}\n```',
        )
        with pytest.raises(AxisInvalid):
            axis_check(["month", "sales"], "desc", provider)

    def test_needs_two_columns(self):
        with pytest.raises(AxisInvalid):
            axis_check(["only"], "desc", ScriptedProvider())


class TestChartNormalized:
    def test_line_six_points(self):
        rows = [(m, 100 + m) for m in range(1, 7)]
        spec = chart_normalized(result_of(["month", "sales"], rows),
                                AxisChoice("month", "sales", "line"))
        assert spec.option_json["xAxis"]["data"] == [1, 2, 3, 4, 5, 6]
        assert spec.option_json["series"][0]["data"] == [101, 102, 103, 104, 105, 106]

    def test_pie_name_value_pairs(self):
        rows = [("a", 1), ("b", 2), ("c", 3)]
        spec = chart_normalized(result_of(["label", "n"], rows),
                                AxisChoice("label", "n", "pie"))
        assert spec.option_json["series"][0]["data"] == [
            {"name": "a", "value": 1}, {"name": "b", "value": 2},
            {"name": "c", "value": 3},
        ]

    def test_empty_result_valid_empty_spec(self):
        spec = chart_normalized(result_of(["x", "y"], []),
                                AxisChoice("x", "y", "bar"))
        assert spec.option_json["series"][0]["data"] == []

    def test_pure_function(self):
        result = result_of(["x", "y"], [(1, 2)])
        axis = AxisChoice("x", "y", "bar")
        assert chart_normalized(result, axis) == chart_normalized(result, axis)


class TestChartFull:
    def test_fig17_seven_bars(self):
        provider = ScriptedProvider()
        provider.script(
            "chart_generation",
            "Output:\n```json\n" + json.dumps(FIG17_OPTION) + "\n```",
        )
        result = result_of(
            ["process_type", "num"],
            [("2", "1145"), ("5", "406"), ("1", "505"), ("4", "596"),
             ("0", "84"), ("7", "33"), ("6", "19")],
        )
        spec = chart_full("application single numbers", "bar", result, provider)
        assert spec.option_json["xAxis"]["data"] == ["2", "5", "1", "4", "0", "7", "6"]
        assert spec.option_json["series"][0]["data"][0] == "1145"

    def test_invalid_after_retry_raises(self):
        provider = ScriptedProvider()
        bad = json.loads(json.dumps(FIG17_OPTION))
        bad["series"][0]["data"] = ["1145"]
        provider.script("chart_generation",
                        "```json\n" + json.dumps(bad) + "\n```")
        with pytest.raises(ChartInvalid):
            chart_full("q", "bar", result_of(["a", "b"], [("x", "1")]), provider)

    def test_retry_can_recover(self):
        provider = ScriptedProvider()
        good = "```json\n" + json.dumps(FIG17_OPTION) + "\n```"
        provider.script("chart_generation", good, when={"_retry": "1"})
        provider.script("chart_generation", "no fence at all")
        spec = chart_full("q", "bar", result_of(["a"], []), provider)
        assert spec.chart_type == "bar"


class TestKnowledgeGap:
    LINK = SchemaLink([{"table": "workorder", "fields": ["status", "month"]}])

    def test_unresolvable_metric_fires(self):
        gap = knowledge_gap("what is the closure rate by month?", self.LINK,
                            ["closure rate"])
        assert gap is not None
        assert gap.parameter == "closure rate"
        assert gap.kind == "formula"

    def test_resolvable_terms_do_not_fire(self):
        assert knowledge_gap("status by month", self.LINK, ["closure rate"]) is None

    def test_known_formula_suppresses(self):
        gap = knowledge_gap(
            "closure rate by month", self.LINK, ["closure rate"],
            known_formulas={"closure rate": "closed/total"},
        )
        assert gap is None

    def test_field_named_like_metric_suppresses(self):
        link = SchemaLink([{"table": "kpi", "fields": ["closure_rate"]}])
        assert knowledge_gap("closure rate by month", link, ["closure rate"]) is None


class TestForecaster:
    def test_constant_series(self):
        res = forecast(ForecastRequest([(i, 7.0) for i in range(8)], horizon=5))
        assert all(abs(v - 7.0) < 1e-9 for _, v in res.points)

    def test_exact_linear_series(self):
        res = forecast(ForecastRequest([(i, 2.0 + 0.5 * i) for i in range(10)],
                                       horizon=3))
        expected = [2.0 + 0.5 * t for t in (10, 11, 12)]
        for (_, v), e in zip(res.points, expected):
            assert abs(v - e) < 1e-9

    def test_period4_sawtooth_repeats(self):
        vals = [1.0, 2.0, 3.0, 4.0] * 3
        res = forecast(ForecastRequest([(i, v) for i, v in enumerate(vals)],
                                       horizon=4, frequency=4))
        # oracle: hand-computed seasonal means (1,2,3,4), zero trend slope
        for (_, v), e in zip(res.points, [1.0, 2.0, 3.0, 4.0]):
            assert abs(v - e) < 1e-9

    def test_series_too_short_seasonal(self):
        with pytest.raises(SeriesTooShort):
            NaiveForecaster().forecast(
                ForecastRequest([(i, 1.0) for i in range(7)], horizon=1,
                                frequency=4))

    def test_series_too_short_trend_only(self):
        with pytest.raises(SeriesTooShort):
            NaiveForecaster().forecast(
                ForecastRequest([(i, 1.0) for i in range(7)], horizon=1))

    def test_horizon_points_increasing_timestamps(self):
        res = forecast(ForecastRequest([(10 * i, float(i)) for i in range(9)],
                                       horizon=6))
        assert len(res.points) == 6
        stamps = [ts for ts, _ in res.points]
        assert stamps == sorted(stamps) and len(set(stamps)) == 6
        assert stamps[0] > 80
