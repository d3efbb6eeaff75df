"""DVSF field containers, CSV dumps and flat key=value reports.

A DVSF file holds one scalar field, vector field or map:

    magic "DVSF" | u32 version | u32 kind tag | u32 domain kind | u32 n
    | n × f64 lower | n × f64 lengths | n × u32 resolution | u32 components
    | little-endian f64 samples in C order, shape (components, *domain.shape)
"""

import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np
import polars as pl

from divsurgeon.errors import FieldFormatError
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.logger import logger
from divsurgeon.validators import ValidationError
from divsurgeon.volmaps.diffeo import DiffeoGrid

MAGIC = b"DVSF"
VERSION = 1

KIND_TAGS = {"scalar": 0, "vector": 1, "diffeo": 2}
DOMAIN_TAGS = {"box": 0, "torus": 1}

Stored = Union[ScalarField, VectorField, DiffeoGrid]


def _kind_and_samples(item: Stored) -> tuple[str, np.ndarray]:
    if isinstance(item, ScalarField):
        return "scalar", item.values[np.newaxis]
    if isinstance(item, VectorField):
        return "vector", item.data
    if isinstance(item, DiffeoGrid):
        return "diffeo", item.images
    raise ValidationError(f"Cannot store {type(item).__name__}")


def encode_field(item: Stored) -> bytes:
    kind, samples = _kind_and_samples(item)
    domain = item.domain
    n = domain.n
    header = struct.pack(
        f"<4sIIII{n}d{n}d{n}II",
        MAGIC,
        VERSION,
        KIND_TAGS[kind],
        DOMAIN_TAGS[domain.kind],
        n,
        *domain.lower,
        *domain.lengths,
        *domain.resolution,
        samples.shape[0],
    )
    payload = np.ascontiguousarray(samples, dtype="<f8").tobytes(order="C")
    return header + payload


def _unpack(fmt: str, buffer: bytes, offset: int) -> tuple[tuple, int]:
    size = struct.calcsize(fmt)
    if offset + size > len(buffer):
        raise FieldFormatError(f"Truncated DVSF header at byte {offset}")
    return struct.unpack_from(fmt, buffer, offset), offset + size


def decode_field(buffer: bytes) -> Stored:
    """
    Decode a DVSF container.

    Raises:
        FieldFormatError: bad magic, version, tags or payload size
    """
    (magic, version, kind_tag, domain_tag, n), offset = _unpack("<4sIIII", buffer, 0)
    if magic != MAGIC:
        raise FieldFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FieldFormatError(f"Unsupported DVSF version {version}")
    kinds = {tag: name for name, tag in KIND_TAGS.items()}
    domains = {tag: name for name, tag in DOMAIN_TAGS.items()}
    if kind_tag not in kinds:
        raise FieldFormatError(f"Unknown kind tag {kind_tag}")
    if domain_tag not in domains:
        raise FieldFormatError(f"Unknown domain tag {domain_tag}")
    if not 1 <= n <= 3:
        raise FieldFormatError(f"Unsupported dimension {n}")

    values, offset = _unpack(f"<{n}d{n}d{n}II", buffer, offset)
    lower, lengths = values[:n], values[n:2 * n]
    resolution, components = values[2 * n:3 * n], values[3 * n]
    try:
        domain = Domain(domains[domain_tag], lower, lengths, resolution)
    except ValidationError as e:
        raise FieldFormatError(f"Invalid domain descriptor: {e}") from e

    kind = kinds[kind_tag]
    expected_components = 1 if kind == "scalar" else n
    if components != expected_components:
        raise FieldFormatError(
            f"{kind} container declares {components} components, expected {expected_components}"
        )
    shape = (components, *domain.shape)
    expected = int(np.prod(shape)) * 8
    if len(buffer) - offset != expected:
        raise FieldFormatError(
            f"Payload holds {len(buffer) - offset} bytes, expected {expected}"
        )
    samples = np.frombuffer(buffer, dtype="<f8", offset=offset).reshape(shape)

    if kind == "scalar":
        return ScalarField(domain, samples[0])
    if kind == "vector":
        return VectorField(domain, samples)
    return DiffeoGrid(domain, samples)


def write_field(path: Path, item: Stored) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_field(item))
    logger.debug(f"💾 Wrote {path}")
    return path


def read_field(path: Path) -> Stored:
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as e:
        raise FieldFormatError(f"Cannot read {path}: {e}") from e
    return decode_field(buffer)


def field_frame(item: Stored) -> pl.DataFrame:
    """One row per node: coordinates x0.. and value (scalar) or c0.. columns."""
    kind, samples = _kind_and_samples(item)
    domain = item.domain
    points = domain.points().reshape(-1, domain.n)
    columns = {f"x{axis}": points[:, axis] for axis in range(domain.n)}
    if kind == "scalar":
        columns["value"] = samples[0].reshape(-1)
    else:
        for i, component in enumerate(samples):
            columns[f"c{i}"] = component.reshape(-1)
    return pl.DataFrame(columns)


def export_csv(item: Stored, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    field_frame(item).write_csv(path)
    logger.debug(f"📄 Exported {path}")
    return path


def format_report(report: Mapping[str, float]) -> str:
    """key=value lines in insertion order, floats in round-trip repr."""
    lines = []
    for key, value in report.items():
        lines.append(f"{key}={float(value)!r}")
    return "\n".join(lines) + "\n"


def write_report(report: Mapping[str, float], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report), encoding="utf-8")
    return path
