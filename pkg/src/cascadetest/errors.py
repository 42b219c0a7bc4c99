"""Exception hierarchy shared by all pipeline stages."""


class CascadeTestError(Exception):
    """Base class for every error raised by this package."""


# corpus
class InvalidIdentifier(CascadeTestError, ValueError):
    pass


class ParseError(CascadeTestError, ValueError):
    pass


class NoOracleFound(CascadeTestError):
    pass


class ProjectLayoutError(CascadeTestError):
    pass


class PoolFormatError(CascadeTestError, ValueError):
    pass


# selection
class EmbeddingBackendError(CascadeTestError):
    pass


class DimensionError(CascadeTestError, ValueError):
    pass


class ZeroNormError(CascadeTestError, ValueError):
    pass


class EmptyPoolError(CascadeTestError):
    pass


# prompting
class IncompleteQuery(CascadeTestError, ValueError):
    pass


class CascadeOrderError(CascadeTestError):
    pass


class BudgetUnsatisfiable(CascadeTestError):
    pass


class EmptyReplyError(CascadeTestError):
    pass


# llm
class BackendUnavailable(CascadeTestError):
    pass


class ReplayMiss(CascadeTestError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class CassetteError(CascadeTestError):
    pass


# assembly
class AssemblyParseError(CascadeTestError, ValueError):
    pass


class PlaceholderCountError(CascadeTestError, ValueError):
    pass


# verification
class ToolchainUnavailable(CascadeTestError):
    pass


# metrics
class EmptyResultSet(CascadeTestError, ValueError):
    pass


# config / cli
class ConfigError(CascadeTestError, ValueError):
    pass
