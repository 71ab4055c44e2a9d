class ExportError(Exception):
    """Base for everything this package raises on purpose."""


class InputError(ExportError):
    """Unreadable, malformed, or empty input (utterance file, image, list)."""


class EncoderUnavailableError(ExportError):
    """The requested encoder cannot run here (e.g. weights need a download)."""
