"""Exception hierarchy.

Every domain failure derives from :class:`SpecsmithError`; the CLI maps that
family to exit code 1. :class:`ConfigError` and plain ``OSError`` map to 2.
"""


class SpecsmithError(Exception):
    """Base for all domain errors."""


class ConfigError(Exception):
    """Missing credentials, bad paths, or an inconsistent run configuration."""


# ingest
class EmptyDocument(SpecsmithError):
    pass


class InvalidId(SpecsmithError):
    pass


class BudgetTooSmall(SpecsmithError):
    pass


class EncodingError(SpecsmithError):
    pass


# catalog
class CatalogError(SpecsmithError):
    pass


class ParseError(CatalogError):
    pass


class DuplicateId(CatalogError):
    pass


class UnknownLevel(CatalogError):
    pass


class UnknownProductType(CatalogError):
    pass


class EmptyManifest(CatalogError):
    pass


# llm gateway
class GatewayError(SpecsmithError):
    pass


class ProviderError(GatewayError):
    pass


class ContextOverflow(GatewayError):
    pass


class CassetteMiss(GatewayError):
    pass


class CassetteWriteError(GatewayError):
    pass


class MockNoMatch(GatewayError):
    pass


class InvalidConversation(SpecsmithError):
    pass


# prompts
class PromptError(SpecsmithError):
    pass


class UnsupportedLevel(PromptError):
    pass


class EmptyBrief(PromptError):
    pass


class EmptyRtl(PromptError):
    pass


class EmptySection(PromptError):
    pass


class EmptyInput(PromptError):
    pass


class TemplateError(PromptError):
    pass


# rtl bridge
class RtlParseError(SpecsmithError):
    pass


class NoModuleFound(RtlParseError):
    pass


class UnbalancedDelimiters(RtlParseError):
    pass


class UndeclaredPort(RtlParseError):
    """A non-ANSI header names a port whose direction is never declared."""


class NoPortTable(SpecsmithError):
    pass


class MalformedTable(SpecsmithError):
    pass


# workflows
class StrategyRequiresSplit(SpecsmithError):
    pass


class LevelOrderViolation(SpecsmithError):
    pass


class ParseFailed(SpecsmithError):
    pass


class UnknownFindingId(SpecsmithError):
    pass


class InvalidFinding(SpecsmithError):
    pass


# fixtures
class CoverageGap(SpecsmithError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        names = ", ".join(kind.value for kind in self.missing)
        super().__init__(f"no planted defect for: {names}")
