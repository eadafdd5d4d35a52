import pytest

from queryloom.catalog import AccessGrant, Catalog, FieldSpec, TableSchema, ThematicDomain


def employee_schema(dialect="embedded"):
    return TableSchema(
        table_name="employee",
        dialect=dialect,
        description="Monthly sales records per employee",
        fields=(
            FieldSpec("name", "TEXT", "employee name"),
            FieldSpec("month", "INTEGER", "calendar month, 1-12"),
            FieldSpec("year", "INTEGER", "calendar year"),
            FieldSpec("sales_amount", "REAL", "sales amount for the month"),
        ),
    )


def highschooler_schema():
    return TableSchema(
        table_name="Highschooler",
        dialect="embedded",
        description="High school students",
        fields=(
            FieldSpec("ID", "INTEGER", "student id"),
            FieldSpec("name", "TEXT", "student name"),
            FieldSpec("grade", "INTEGER", "grade level"),
        ),
    )


@pytest.fixture
def catalog():
    cat = Catalog()
    cat.register_table(employee_schema())
    cat.register_table(highschooler_schema())
    cat.register_domain(ThematicDomain("sales", ("employee",)))
    cat.register_domain(ThematicDomain("school", ("Highschooler",)))
    cat.add_grant(AccessGrant("alice", "employee", "ALL"))
    cat.add_grant(AccessGrant("alice", "Highschooler", "ALL"))
    return cat


# --- scripted pipeline fixtures ---------------------------------------------

EMPLOYEE_DB_SCRIPT = """
CREATE TABLE employee (name TEXT, month INTEGER, year INTEGER, sales_amount REAL);
INSERT INTO employee VALUES
 ('Zhou Hui', 1, 2023, 110.0),
 ('Zhou Hui', 2, 2023, 95.0),
 ('Zhou Hui', 3, 2023, 130.0),
 ('Zhou Hui', 4, 2023, 120.0),
 ('Zhou Hui', 5, 2023, 150.0),
 ('Zhou Hui', 6, 2023, 140.0),
 ('Li Na', 1, 2023, 80.0),
 ('Li Na', 2, 2023, 85.0);
"""

ZHOU_HUI_SQL = (
    "SELECT month, sales_amount FROM employee "
    "WHERE name = 'Zhou Hui' AND year = 2023 ORDER BY month"
)


def scripted_sales_provider():
    """Scripted LLM covering the happy-path sales turn plus an irrelevant
    question and a reflection repair."""
    from queryloom.gateway import ScriptedProvider

    p = ScriptedProvider()
    p.script(
        "intent_decision",
        '```json\n{"completed_question": "Monthly sales of Zhou Hui in 2023",'
        ' "relevant": true, "direct_plot": false, "chart_type": "line",'
        ' "bindings": {}}\n```',
        when={"question": "Zhou Hui"},
    )
    p.script(
        "intent_decision",
        '```json\n{"completed_question": "", "relevant": false,'
        ' "direct_plot": false, "chart_type": null, "bindings": {}}\n```',
        when={"question": "weather"},
    )
    p.script(
        "schema_linking",
        '```json\n[{"TABLE": "employee",'
        ' "FIELD": ["name", "month", "year", "sales_amount"]}]\n```',
        when={"query": "Zhou Hui"},
    )
    p.script(
        "slot_extraction",
        '```json\n{"key_terms": ["monthly sales", "Zhou Hui"],'
        ' "shortened_query": "monthly sales Zhou Hui"}\n```',
        when={"query": "Zhou Hui"},
    )
    p.script("sql_generation", f"```sql\n{ZHOU_HUI_SQL}\n```",
             when={"query": "Zhou Hui"})
    p.script(
        "text_analysis",
        "Zhou Hui's sales from January to June 2023 rose from 110 to a peak "
        "of 150 in May, ending at 140 in June.",
        when={"query": "Zhou Hui"},
    )
    return p


def sales_memory():
    from queryloom.memory import MemoryStore

    store = MemoryStore()
    store.upsert_text(
        query="monthly sales of an employee in a year",
        sql="SELECT month, sales_amount FROM employee WHERE name = 'X' AND year = 2022",
        tables={"employee"},
        fields={("employee", "name"), ("employee", "month"),
                ("employee", "year"), ("employee", "sales_amount")},
        domain_id="sales",
        origin="seed",
    )
    return store


@pytest.fixture
def sales_pipeline(catalog):
    from queryloom.execution import EmbeddedConnection
    from queryloom.synthesizer import Pipeline, SessionState

    conn = EmbeddedConnection()
    conn.load_script(EMPLOYEE_DB_SCRIPT)
    pipeline = Pipeline(
        catalog=catalog,
        memory=sales_memory(),
        provider=scripted_sales_provider(),
        connection=conn,
    )
    yield pipeline, SessionState(domain_id="sales")
    conn.close()
