"""Exception taxonomy shared across the engine."""


class QueryloomError(Exception):
    """Base class for all engine errors."""


# --- catalog ---------------------------------------------------------------

class CatalogError(QueryloomError):
    pass


class DuplicateField(CatalogError):
    pass


class EmptyDescription(CatalogError):
    pass


class UnknownDialect(CatalogError):
    pass


class UnknownDomain(CatalogError):
    pass


class UnknownTable(CatalogError):
    pass


# --- sqlkit ----------------------------------------------------------------

class NotParsed(QueryloomError):
    """Lineage requested for SQL that failed to parse."""


# --- memory ----------------------------------------------------------------

class DimensionMismatch(QueryloomError):
    pass


class ProviderUnavailable(QueryloomError):
    pass


# --- llm gateway -----------------------------------------------------------

class MissingBinding(QueryloomError):
    pass


class NoFence(QueryloomError):
    pass


class LlmMalformedOutput(QueryloomError):
    pass


class ProviderTimeout(QueryloomError):
    pass


# --- synthesizer -----------------------------------------------------------

class BudgetUnsatisfiable(QueryloomError):
    pass


class ReflectionFailed(QueryloomError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class ReflectionNotApplicable(QueryloomError):
    """Reflection invoked with empty diagnostics; the activation rule forbids it."""


class ExecutionError(QueryloomError):
    pass


class NotConfigured(QueryloomError):
    """Connection profile for a non-embedded dialect has no live driver."""


# --- resultgen -------------------------------------------------------------

# Also ValueError so the gateway's malformed-output retry covers a chart or
# axis choice that parses but fails validation.
class ChartInvalid(QueryloomError, ValueError):
    pass


class AxisInvalid(QueryloomError, ValueError):
    pass


class SeriesTooShort(QueryloomError):
    pass


# --- evalharness -----------------------------------------------------------

class GoldExecutionFailed(QueryloomError):
    """Gold SQL failed on its fixture; the sample is defective, not the prediction."""


# --- service ---------------------------------------------------------------

class SessionBusy(QueryloomError):
    pass


class NotFound(QueryloomError):
    pass
