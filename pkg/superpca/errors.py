def error_factory(class_type: str) -> object:
    class GenericError(Exception):
        def __init__(self, message: str):
            super().__init__(message)
            self.type = class_type
            self.message = message

        def __str__(self) -> str:
            return f'{self.type}:{self.message}'

    return GenericError


class ParameterError(error_factory('ParameterError')):
    """A parameter lies outside its documented range."""
    pass


class ContractError(error_factory('ContractError')):
    """
    Inputs violate a structural contract.

    Raised on dimension mismatches between cubes, maps and bases, on non-symmetric
    matrices passed to the eigensolver and on label vectors of unequal length.
    """
    pass


class FormatError(error_factory('FormatError')):
    """An HSIF file is malformed, truncated or uses an unsupported layout."""
    pass


class ParseError(error_factory('ParseError')):
    """A label grid file could not be parsed."""
    pass


class PaletteError(error_factory('PaletteError')):
    pass


class ScaleTaskError(Exception):
    def __init__(self, exception, name):
        super().__init__()
        self.exception = exception
        self.name = name

    def __str__(self) -> str:
        return f"{self.name}: {str(self.exception)}"
