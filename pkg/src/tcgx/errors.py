"""Exception hierarchy shared by all tcgx modules.

Every domain failure derives from :class:`TcgxError`; the command line maps
those to exit code 1 and everything else to a crash.
"""


class TcgxError(Exception):
    pass


# drawing model
class InvalidCoordinate(TcgxError, ValueError):
    pass


class InvalidScale(TcgxError, ValueError):
    pass


class InvalidStyle(TcgxError, ValueError):
    pass


class InvalidGeometry(TcgxError, ValueError):
    pass


class TooSmall(TcgxError, ValueError):
    pass


class EmptyExtent(TcgxError, ValueError):
    pass


class FormatError(TcgxError, ValueError):
    """Malformed serialized input; carries an optional file/line location."""

    def __init__(self, msg, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + msg)


class VersionError(FormatError):
    pass


# rasters
class DpiMismatch(TcgxError, ValueError):
    pass


class NoInk(TcgxError, ValueError):
    pass


# catalogs
class RuleSyntaxError(TcgxError, ValueError):
    def __init__(self, msg, pos, text=""):
        self.pos = pos
        self.text = text
        super().__init__(f"{msg} at position {pos}")


class UnknownColumn(TcgxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownMenu(TcgxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownVariable(TcgxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownUnit(TcgxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class QuantityMismatch(TcgxError, ValueError):
    pass


class InputExhausted(TcgxError):
    pass


class UnresolvedEmbeddedMenu(TcgxError, ValueError):
    pass


class ChoiceNotInMenu(TcgxError, ValueError):
    pass


class MissingChoice(TcgxError, ValueError):
    pass


class FilterError(TcgxError, ValueError):
    pass


# table documents / specification
class ChunkTooSmall(TcgxError, ValueError):
    pass


class UnknownTarget(TcgxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnitMismatch(TcgxError, ValueError):
    pass


class InvalidTkd(TcgxError, ValueError):
    pass


# modules
class IntegrityError(TcgxError, ValueError):
    pass


class StillReferenced(IntegrityError):
    pass


class GeneratorError(TcgxError):
    pass


class NotFound(TcgxError, FileNotFoundError):
    pass


class ProfileError(TcgxError, ValueError):
    pass
