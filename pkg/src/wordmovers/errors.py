"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, NumericalError -> 4.
"""


class WordMoversError(Exception):
    """Base class for all package errors."""


class ConfigError(WordMoversError):
    """Invalid configuration: bad flag values, missing paths, bad ranges."""


class DataError(WordMoversError):
    """Invalid or unusable input data."""


class ParseError(DataError):
    """A file failed to parse.

    `location` is a byte offset for binary formats and a 1-based line
    number for text formats; it is embedded in the message.
    """

    def __init__(self, path, location, message):
        self.path = str(path)
        self.location = location
        super().__init__(f"{self.path}: {message} (at {location})")


class EmptyDocumentError(DataError):
    """No token of the document is present in the embedding table."""

    def __init__(self, tokens):
        self.tokens = list(tokens)
        super().__init__(
            f"no in-vocabulary token among {len(self.tokens)} tokens: "
            f"{self.tokens[:8]}{'...' if len(self.tokens) > 8 else ''}"
        )


class ConstantInputError(DataError):
    """Correlation is undefined because one input sequence is constant."""


class NumericalError(WordMoversError):
    """A numerical routine failed to reach its stated guarantees."""
