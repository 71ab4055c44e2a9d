"""Exception types shared across the toolkit."""


class AffectcapError(Exception):
    """Base class for all toolkit errors (maps to CLI exit code 2)."""


class DataFormatError(AffectcapError):
    """A file or record does not conform to one of the documented formats."""


class MissingDataError(AffectcapError):
    """An id, embedding, or required input referenced by the data is absent."""
