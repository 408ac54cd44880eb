"""Exception types shared across the package."""


class PaqeError(Exception):
    pass


class MalformedInputError(PaqeError, ValueError):
    """Input bytes or text do not follow the expected layout."""


class SampleRangeError(PaqeError, ValueError):
    """A pixel sample lies outside the 10-bit range."""


class ContractError(PaqeError, ValueError):
    """A caller violated an operation precondition."""


class MetaParseError(MalformedInputError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class WeightFormatError(MalformedInputError):
    pass
