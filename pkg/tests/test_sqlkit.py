import pytest

from queryloom.errors import NotParsed
from queryloom.sqlkit import (
    canonical_equal,
    extract_lineage,
    parse,
    validate,
)

GOLD_GRADE = "SELECT grade FROM Highschooler GROUP BY grade ORDER BY count(*) DESC LIMIT 1;"
PRED_GRADE = (
    "SELECT grade, COUNT(*) AS num_highschoolers FROM Highschooler "
    "GROUP BY grade ORDER BY num_highschoolers DESC LIMIT 1;"
)
EMPLOYEE_TREND = """SELECT name,month, sales_amount
FROM employee
WHERE name = "Zhou Hui"
AND (month BETWEEN 7 AND 12)
AND employee.year = 2022
ORDER BY month ASC;"""


class TestParse:
    def test_gold_query_parses(self):
        assert parse(GOLD_GRADE).ok

    def test_typo_is_syntax_error(self):
        result = parse("SELEC 1")
        assert not result.ok
        assert result.diagnostic.kind == "SyntaxError"

    def test_empty_statement(self):
        result = parse("")
        assert not result.ok
        assert "empty" in result.diagnostic.detail

    def test_never_raises_on_garbage(self):
        for sql in ["SELECT FROM", "SELECT a FROM", "(((", "SELECT a b c d FROM t t2 t3"]:
            assert parse(sql).ok is False

    def test_dialect_double_quotes(self):
        # string literal in mysql-family dialects, identifier in postgresql
        lin_mysql = extract_lineage('SELECT a FROM t WHERE a = "x"', "mysql")
        assert lin_mysql.fields == {("t", "a")}
        lin_pg = extract_lineage('SELECT "a" FROM t', "postgresql")
        assert lin_pg.fields == {("t", "a")}


class TestLineage:
    def test_employee_trend_query(self):
        lin = extract_lineage(EMPLOYEE_TREND)
        assert lin.tables == {"employee"}
        assert lin.fields == {
            ("employee", "name"),
            ("employee", "month"),
            ("employee", "sales_amount"),
            ("employee", "year"),
        }

    def test_select_literal_has_no_lineage(self):
        lin = extract_lineage("SELECT 1")
        assert lin.tables == set() and lin.fields == set()

    def test_count_star_contributes_no_field(self):
        lin = extract_lineage(PRED_GRADE)
        assert lin.tables == {"Highschooler"}
        assert lin.fields == {("Highschooler", "grade")}

    def test_not_parsed_raises(self):
        with pytest.raises(NotParsed):
            extract_lineage("SELEC 1")

    def test_whitespace_and_comment_stability(self):
        noisy = (
            "SELECT  name , month,sales_amount  FROM employee -- trailing\n"
            ' WHERE name="Zhou Hui" AND (month BETWEEN 7 AND 12) '
            "AND employee.year=2022 /* block */ ORDER BY month ASC"
        )
        a, b = extract_lineage(EMPLOYEE_TREND), extract_lineage(noisy)
        assert (a.tables, a.fields, a.unresolved_columns) == (b.tables, b.fields, b.unresolved_columns)

    def test_ambiguous_column_unresolved_without_catalog(self):
        lin = extract_lineage("SELECT x FROM a, b")
        assert lin.unresolved_columns == {"x"}
        assert lin.fields == set()

    def test_ambiguity_resolved_by_catalog(self, catalog):
        lin = extract_lineage(
            "SELECT grade FROM employee, Highschooler", catalog=catalog
        )
        assert ("Highschooler", "grade") in lin.fields

    def test_subquery_and_join(self):
        sql = (
            "SELECT e.name, s.total FROM employee e "
            "JOIN (SELECT name, SUM(sales_amount) AS total FROM employee GROUP BY name) s "
            "ON e.name = s.name WHERE e.year = 2022"
        )
        lin = extract_lineage(sql)
        assert lin.tables == {"employee"}
        assert ("employee", "sales_amount") in lin.fields
        assert ("employee", "year") in lin.fields

    def test_cte_traced_to_base_tables(self):
        sql = (
            "WITH top AS (SELECT name, grade FROM Highschooler WHERE grade > 10) "
            "SELECT name FROM top"
        )
        lin = extract_lineage(sql)
        assert lin.tables == {"Highschooler"}
        assert ("Highschooler", "name") in lin.fields


class TestValidate:
    def test_clean_sql(self, catalog):
        assert validate(EMPLOYEE_TREND, "embedded", catalog) == []

    def test_unknown_table(self, catalog):
        diags = validate("SELECT x FROM ghost_table", "embedded", catalog)
        assert [d.kind for d in diags] == ["UnknownTable"]
        assert "ghost_table" in diags[0].detail

    def test_unknown_column(self, catalog):
        diags = validate("SELECT bogus_col FROM employee", "embedded", catalog)
        assert [d.kind for d in diags] == ["UnknownColumn"]
        assert "bogus_col" in diags[0].detail

    def test_syntax_error_diagnostic(self, catalog):
        diags = validate("SELEC x", "embedded", catalog)
        assert [d.kind for d in diags] == ["SyntaxError"]

    def test_permissive_dialect_skips_column_checks(self, catalog):
        diags = validate("SELECT bogus_col FROM employee", "hive", catalog)
        assert diags == []
        diags = validate("SELECT x FROM ghost", "hive", catalog)
        assert [d.kind for d in diags] == ["UnknownTable"]

    def test_clean_lineage_is_subset_of_catalog(self, catalog):
        sql = "SELECT name, grade FROM Highschooler WHERE grade > 9"
        assert validate(sql, "embedded", catalog) == []
        lin = extract_lineage(sql, catalog=catalog)
        for table, column in lin.fields:
            assert catalog.table(table).field(column) is not None


class TestCanonicalEqual:
    def test_byte_equal(self):
        assert canonical_equal(GOLD_GRADE, GOLD_GRADE)

    def test_fig7_pair_not_equal(self):
        assert not canonical_equal(PRED_GRADE, GOLD_GRADE)

    def test_whitespace_and_case_equal(self):
        other = "select GRADE from HIGHSCHOOLER group by grade\norder by COUNT( * ) desc limit 1"
        assert canonical_equal(GOLD_GRADE, other)

    def test_cosmetic_table_alias_equal(self):
        a = "SELECT e.name FROM employee e WHERE e.year = 2022"
        b = "SELECT employee.name FROM employee WHERE employee.year = 2022"
        assert canonical_equal(a, b)

    def test_order_by_alias_inlined(self):
        a = "SELECT count(*) AS n FROM t GROUP BY g ORDER BY n DESC"
        b = "SELECT count(*) FROM t GROUP BY g ORDER BY count(*) DESC"
        assert canonical_equal(a, b)

    def test_neq_spellings_equal(self):
        assert canonical_equal("SELECT a FROM t WHERE a != 1", "SELECT a FROM t WHERE a <> 1")

    def test_literal_spellings_equal(self):
        assert canonical_equal("SELECT a FROM t WHERE a = 1", "SELECT a FROM t WHERE a = 1.0")

    def test_different_predicates_not_equal(self):
        assert not canonical_equal("SELECT a FROM t WHERE a = 1", "SELECT a FROM t WHERE a = 2")

    def test_unparseable_not_equal(self):
        assert not canonical_equal("SELEC a", "SELECT a FROM t")
