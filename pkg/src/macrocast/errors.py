"""Exception hierarchy.

Every error carries a short ``kind`` tag; the CLI prints ``<kind>: <message>``
on a single line so diagnostics stay machine-parsable.
"""

from __future__ import annotations


class MacrocastError(Exception):
    kind = "error"

    def diagnostic(self) -> str:
        return f"{self.kind}: {self}".replace("\n", " ")


class ParseError(MacrocastError, ValueError):
    kind = "parse"


class GapError(MacrocastError, ValueError):
    kind = "gap"


class DuplicateError(MacrocastError, ValueError):
    kind = "duplicate"


class EmptyError(MacrocastError, ValueError):
    kind = "empty"


class LengthError(MacrocastError, ValueError):
    kind = "length"


class DomainError(MacrocastError, ValueError):
    kind = "domain"


class CoverageError(MacrocastError, ValueError):
    kind = "coverage"


class ShapeError(MacrocastError, ValueError):
    kind = "shape"


class FitError(MacrocastError, ValueError):
    kind = "fit"


class ParamError(MacrocastError, ValueError):
    kind = "parameter"


class RankError(MacrocastError, ValueError):
    kind = "rank"


class RangeError(MacrocastError, ValueError):
    kind = "range"


class ConfigError(MacrocastError, ValueError):
    kind = "config"
