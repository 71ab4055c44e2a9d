"""embed-export: run encoders over utterances/images, emit packed tables."""

from .encoders import get_encoder, list_encoders
from .errors import EncoderUnavailableError, ExportError, InputError
from .export import export_image_embeddings, export_text_embeddings
from .packed import ExportManifest, write_packed_table

__all__ = [
    "EncoderUnavailableError",
    "ExportError",
    "ExportManifest",
    "InputError",
    "export_image_embeddings",
    "export_text_embeddings",
    "get_encoder",
    "list_encoders",
    "write_packed_table",
]
