"""Multi-dialect SQL analysis: parsing, lineage extraction and catalog
validation.

Full AST support targets the embedded and mysql-compatible dialects;
hive/spark/flink parse in a permissive mode where lineage is extracted but
validation reports only syntax and unknown-table problems.
"""
from .diagnostics import Lineage, ParseResult, SqlDiagnostic
from .parser import parse
from .lineage import extract_lineage
from .validate import validate
from .canon import canonicalize, canonical_equal

__all__ = [
    "Lineage",
    "ParseResult",
    "SqlDiagnostic",
    "parse",
    "extract_lineage",
    "validate",
    "canonicalize",
    "canonical_equal",
]
