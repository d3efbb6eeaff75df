"""Field and map serialization, CSV dumps and report files."""

from divsurgeon.storage.field_store import (
    decode_field,
    encode_field,
    export_csv,
    field_frame,
    format_report,
    read_field,
    write_field,
    write_report,
)

__all__ = [
    "decode_field",
    "encode_field",
    "export_csv",
    "field_frame",
    "format_report",
    "read_field",
    "write_field",
    "write_report",
]
