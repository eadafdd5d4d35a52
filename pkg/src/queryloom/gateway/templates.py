"""Prompt registry.

The schema-linking, SQL-generation, text-analysis, SQL2NL, axis-checker and
chart-generation bodies follow the published templates. The reflection,
intent-decision, slot-extraction, HA-judge and difficulty-rater bodies are
in-house reconstructions (no published text exists for them); they are
marked RECONSTRUCTED below.
"""
from __future__ import annotations

import string

from ..errors import MissingBinding

SCHEMA_LINKING_TEMPLATE = """According to the following [schema info] and [question], return the fields related to [question] in [schema info] in ```json``` format. The ```json``` format of the returned content is as follows. It is an array, and each item must contain TABLE and FIELD. Please replace the values of variables between $$ in the following example with reasonable content:
```json
[{{"TABLE": $table_1$, "FIELD": [$field_1$, $field_2$]}}, {{"TABLE": $table_2$, "FIELD": [$field_1$, $field_2$] }}, ...]```
[schema info]:{schema_info}
{examples}
[question]: {query}
Return relevant fields:"""

SQL_TEMPLATE = """Based on the following {dialect} table and examples, generate the corresponding SQL statement for the question. Return only one SQL statement after the question, and the format must be ```sql```.
[table info]: {table_info}
{examples}
[question]: {query}
SQL:"""

TEXT_ANALYSIS_TEMPLATE = """
Question: {query}
Database Query Result: {result}
Based on the provided question and the results from the database query, please describe the results line by line using appropriate language. The description should cover the full results and provide a concise conclusion, focusing solely on the core issue. There is no need to display any charts, but if the results are related to time, please infer the relevant time range retrospectively. If the query results are empty, return a suitable description without making any assumptions.
"""

SQL2NL_TEMPLATE = """You are now required to generate user questions based on table information and SQL statements: {table_info}
Generate 3 instances of user questions based on table information and SQL statements:
[SQL Statements]: {sql}
[Generated Questions]:"""

AXIS_CHECKER = """Based on the problem and chart description analysis, select the horizontal and vertical coordinates from {column_name}
Keep the original information in column_name
Chart types: line, bar, pie
Based on the table description analysis, select only any one type from the chart types.
Only returns a ```json``` format code
The structure only contains
{{
    "xAxis": "",
    "yAxis": "",
    "type": ""
}}
Table description: {column_desc}"""

CHART_GENERATION_TEMPLATE = """
Example:
Question: In May 23, what are the different types of application single numbers for X?
Chart_type: bar
Answer: [{{'process_type': '2', 'num': '1145'}}, {{'process_type': '5', 'num': '406'}}, {{'process_type': '1', 'num': '505'}}, {{'process_type': '4', 'num': '596'}}, {{'process_type': '0', 'num': '84'}}, {{'process_type': '7', 'num': '33'}}, {{'process_type': '6', 'num': '19'}}]
Output:
The answer has seven sets of data, the chart type is "bar", and a JSON needs to be output.
```json
{{
    "xAxis": {{
        "type": "category",
        "name": "Application form type",
        "data": ["2", "5", "1", "4", "0", "7", "6"]
      }},
      "yAxis": {{
        "type": "value",
        "name": "Application Form quantit"
      }},
      "series": [
        {{
            "data": ["1145", "406", "505", "596", "84", "33", "19"],
            "name": "Application Form of X for May 23",
            "type": "bar"
        }}
      ]
}}
```
Question: {query}
Chart_type: {chart_type}
Answer: {sql_result}
I want you to act like an eCharts builder, an expert in creating meaningful charts.
Completely refer to the above [Example], analyze the data in the answer, and return an ECharts configuration option to present the data results
Output:"""

# RECONSTRUCTED: repair prompt carrying the error typologies, the failing
# SQL, the explicit table schemas and the diagnostics.
SQL_REFLECTION_TEMPLATE = """The following {dialect} SQL statement failed verification. Error typologies checked: syntax integrity, table presence, column presence.
[table info]: {table_info}
[failing SQL]:
```sql
{sql}
```
[diagnostics]:
{diagnostics}
Correct the SQL so that every diagnostic is resolved. Keep the original intent of the query. Return only one corrected SQL statement, and the format must be ```sql```."""

# RECONSTRUCTED: single fenced JSON verdict covering the four decision
# components: intent completion, relevance, direct plotting, chart type.
INTENT_DECISION_TEMPLATE = """You decide how to handle a user question for a data analysis assistant working on the topic described below.
[topic]: {topic}
[conversation so far]:
{history}
[question]: {question}
{examples}
Decide the following and return one ```json``` object with exactly these keys:
- "completed_question": the question rewritten as a fully self-contained request, filling gaps from the conversation.
- "relevant": true if the question concerns the topic's data, false otherwise.
- "direct_plot": true if the question can be answered by charting the preceding result without a new query.
- "chart_type": one of "line", "bar", "pie" when a chart is requested, otherwise null.
- "bindings": an object of parameter name to value for any clarification parameters mentioned, otherwise {{}}.
```json"""

# RECONSTRUCTED: isolate the key terms and produce a shortened query for
# kernel-example retrieval.
SLOT_EXTRACTION_TEMPLATE = """Extract the key business terms from the question below and produce a shortened query containing only those terms.
[question]: {query}
Return one ```json``` object with exactly these keys:
- "key_terms": array of the key terms.
- "shortened_query": the shortened query built from the key terms.
```json"""

# RECONSTRUCTED: binary judgement of a generated answer against a reference.
HA_JUDGE_TEMPLATE = """Question: {question}
Reference answer: {reference_answer}
Candidate answer: {candidate_answer}
Considering the question and the reference answer, is the candidate answer correct? Reply with exactly one word: Yes or No."""

# RECONSTRUCTED: four-dimension difficulty rubric, each rated 1 to 3.
DIFFICULTY_RATER_TEMPLATE = """Rate the difficulty of answering the question with the given SQL on four dimensions, each from 1 (easy) to 3 (hard): comprehension of the question, the requirement for external knowledge, complexity of the data, and complexity of SQL.
[question]: {question}
[SQL]: {sql}
Return one ```json``` object with exactly these keys: "question_comprehension", "external_knowledge", "data_complexity", "sql_complexity".
```json"""

_TEMPLATES: dict[str, str] = {
    "schema_linking": SCHEMA_LINKING_TEMPLATE,
    "sql_generation": SQL_TEMPLATE,
    "sql_reflection": SQL_REFLECTION_TEMPLATE,
    "intent_decision": INTENT_DECISION_TEMPLATE,
    "text_analysis": TEXT_ANALYSIS_TEMPLATE,
    "sql2nl": SQL2NL_TEMPLATE,
    "axis_checker": AXIS_CHECKER,
    "chart_generation": CHART_GENERATION_TEMPLATE,
    "ha_judge": HA_JUDGE_TEMPLATE,
    "difficulty_rater": DIFFICULTY_RATER_TEMPLATE,
    "slot_extraction": SLOT_EXTRACTION_TEMPLATE,
}

TEMPLATE_IDS = tuple(_TEMPLATES)


def template_body(template_id: str) -> str:
    try:
        return _TEMPLATES[template_id]
    except KeyError:
        raise MissingBinding(f"unknown template {template_id!r}") from None


def required_bindings(template_id: str) -> frozenset[str]:
    body = template_body(template_id)
    names = set()
    for _, field_name, _, _ in string.Formatter().parse(body):
        if field_name:
            names.add(field_name)
    return frozenset(names)


def render(template_id: str, bindings: dict) -> str:
    """Byte-deterministic rendering; every placeholder must be bound."""
    body = template_body(template_id)
    needed = required_bindings(template_id)
    missing = needed - set(bindings)
    if missing:
        raise MissingBinding(
            f"template {template_id!r} missing bindings: {sorted(missing)}"
        )
    return body.format(**{k: bindings[k] for k in needed})
