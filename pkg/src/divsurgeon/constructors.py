"""Fields and maps built from scenario formula tags."""

from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from divsurgeon.calibration import rotation_generator
from divsurgeon.cutoffs import bump, smoothstep
from divsurgeon.divsolve.samples import random_solenoidal
from divsurgeon.errors import GeometryError, ScenarioError
from divsurgeon.grid.calculus import curl, rotated_gradient
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Ball
from divsurgeon.logger import logger
from divsurgeon.storage.field_store import read_field
from divsurgeon.validators import (
    raise_if_errors,
    validate_positive,
    validate_traceless,
    validate_unimodular,
)
from divsurgeon.volmaps.diffeo import DiffeoGrid
from divsurgeon.volmaps.moser import JacobianTarget, radial_bump_target

FIELD_TAGS = (
    "constant",
    "rotation",
    "vertical",
    "linear",
    "solenoidal-bump",
    "noise-perturbed",
    "radial-source",
    "file",
)
MAP_TAGS = ("rotation", "linear", "file")

# Inner taper of the radial source, as fractions of its radius
SOURCE_TAPER = (0.25, 0.5)


def _center(domain: Domain, center: Optional[Sequence[float]]) -> tuple[float, ...]:
    if center is None:
        return tuple(lo + length / 2 for lo, length in zip(domain.lower, domain.lengths))
    if len(center) != domain.n:
        raise GeometryError(f"Center needs {domain.n} coordinates, got {len(center)}")
    return tuple(float(c) for c in center)


def constant_field(domain: Domain, vector: Sequence[float]) -> VectorField:
    if len(vector) != domain.n:
        raise GeometryError(f"Constant vector needs {domain.n} components, got {len(vector)}")
    return VectorField.constant(domain, vector)


def vertical_field(domain: Domain, scale: float = 1.0) -> VectorField:
    """scale·∂/∂x_{n−1}, the last coordinate direction."""
    vector = np.zeros(domain.n)
    vector[-1] = scale
    return VectorField.constant(domain, vector)


def linear_field(
    domain: Domain, matrix: np.ndarray, center: Optional[Sequence[float]] = None
) -> VectorField:
    """y ↦ A(y − c) for a traceless A, so the field is divergence free."""
    raise_if_errors(validate_traceless(matrix, domain.n), "linear field")
    offset = domain.displacement(domain.points(), _center(domain, center))
    return VectorField(domain, np.einsum("ij,...j->i...", np.asarray(matrix, float), offset))


def rotation_field(
    domain: Domain, rate: float = 1.0, center: Optional[Sequence[float]] = None
) -> VectorField:
    """Rigid rotation in the plane of the first two axes around center."""
    if domain.periodic:
        raise GeometryError("Rotation fields live on box domains")
    return linear_field(domain, rate * rotation_generator(domain.n), center)


def _stream_bump(
    domain: Domain, center: tuple[float, ...], radius: float
) -> np.ndarray:
    offset = domain.displacement(domain.points(), center)
    return bump(np.linalg.norm(offset, axis=-1) / radius)


def solenoidal_bump(
    domain: Domain,
    amplitude: float,
    radius: float,
    center: Optional[Sequence[float]] = None,
) -> VectorField:
    """
    Discrete rotated gradient (or curl) of amplitude·b(|y − c| / radius).

    Supported in ball(c, radius) and divergence free up to roundoff.
    """
    raise_if_errors(validate_positive({"radius": radius}), "solenoidal bump")
    stream = amplitude * _stream_bump(domain, _center(domain, center), radius)
    if domain.n == 2:
        return rotated_gradient(ScalarField(domain, stream))
    if domain.n == 3:
        zeros = np.zeros(domain.shape)
        return curl(VectorField(domain, np.stack([zeros, zeros, stream])))
    raise GeometryError(f"Solenoidal bumps need dimension 2 or 3, got {domain.n}")


def noise_perturbed(
    domain: Domain,
    amplitude: float,
    radius: float,
    noise: float,
    rng: np.random.Generator,
    center: Optional[Sequence[float]] = None,
) -> VectorField:
    """A solenoidal bump plus noise·(random solenoidal field) in the same ball."""
    c = _center(domain, center)
    base = solenoidal_bump(domain, amplitude, radius, c)
    extra = random_solenoidal(domain, Ball(c, radius), rng)
    scale = extra.sup()
    if scale == 0.0:
        return base
    return base + extra * (noise / scale)


def radial_source(
    domain: Domain,
    eps: float,
    radius: float,
    center: Optional[Sequence[float]] = None,
) -> VectorField:
    """
    ε·(radius/|y − c|)^{n−1}·(y − c)/|y − c|, tapered to zero inside
    ball(c, radius/2).

    Divergence free outside the taper with flux ε·|∂B(c, radius)| through
    every sphere around c, e.g. ε·2π·radius in the plane.
    """
    raise_if_errors(validate_positive({"radius": radius}), "radial source")
    n = domain.n
    offset = domain.displacement(domain.points(), _center(domain, center))
    distance = np.linalg.norm(offset, axis=-1)
    inner, outer = (fraction * radius for fraction in SOURCE_TAPER)
    taper = smoothstep((distance - inner) / (outer - inner))
    safe = np.where(distance > 0, distance, 1.0)
    density = np.where(taper > 0, eps * taper * (radius / safe) ** (n - 1) / safe, 0.0)
    return VectorField(domain, np.moveaxis(offset * density[..., np.newaxis], -1, 0))


def field_from_file(domain: Domain, path: Path) -> VectorField:
    stored = read_field(path)
    if not isinstance(stored, VectorField):
        raise ScenarioError(f"{path} holds a {type(stored).__name__}, not a vector field")
    if stored.domain != domain:
        raise ScenarioError(
            f"{path} lives on {stored.domain.describe()}, expected {domain.describe()}"
        )
    return stored


def _get(params: Mapping[str, Any], key: str, tag: str) -> Any:
    if key not in params:
        raise ScenarioError(f"Field tag '{tag}' needs parameter '{key}'")
    return params[key]


def _matrix(values: Any, n: int) -> np.ndarray:
    """An n×n matrix from nested rows or a flat row-major list."""
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim == 1 and matrix.size == n * n:
        return matrix.reshape(n, n)
    return matrix


def build_field(
    domain: Domain,
    tag: str,
    params: Mapping[str, Any],
    rng: np.random.Generator,
    base_dir: Optional[Path] = None,
) -> VectorField:
    """
    Factory for scenario vector fields.

    Args:
        domain: Grid the field is sampled on
        tag: One of FIELD_TAGS
        params: Tag parameters (amplitude, radius, center, matrix, ...)
        rng: Generator for the noise tags
        base_dir: Directory relative file paths are resolved against

    Returns:
        The sampled VectorField; a "base" field named in params is added
        by the caller

    Examples:
        >>> build_field(domain, "vertical", {"scale": 1.05}, rng)
        >>> build_field(domain, "solenoidal-bump", {"amplitude": 0.01, "radius": 0.2}, rng)
    """
    center = params.get("center")
    if tag == "constant":
        field = constant_field(domain, _get(params, "vector", tag))
    elif tag == "rotation":
        field = rotation_field(domain, float(params.get("rate", 1.0)), center)
    elif tag == "vertical":
        field = vertical_field(domain, float(params.get("scale", 1.0)))
    elif tag == "linear":
        field = linear_field(domain, _matrix(_get(params, "matrix", tag), domain.n), center)
    elif tag == "solenoidal-bump":
        field = solenoidal_bump(
            domain,
            float(_get(params, "amplitude", tag)),
            float(_get(params, "radius", tag)),
            center,
        )
    elif tag == "noise-perturbed":
        field = noise_perturbed(
            domain,
            float(_get(params, "amplitude", tag)),
            float(_get(params, "radius", tag)),
            float(_get(params, "noise", tag)),
            rng,
            center,
        )
    elif tag == "radial-source":
        field = radial_source(
            domain, float(_get(params, "eps", tag)), float(_get(params, "radius", tag)), center
        )
    elif tag == "file":
        path = Path(_get(params, "path", tag))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        field = field_from_file(domain, path)
    else:
        raise ScenarioError(f"Unknown field tag '{tag}', expected one of {', '.join(FIELD_TAGS)}")
    logger.debug(f"🧩 Built {tag} field on {domain.describe()}")
    return field


def rotation_map(domain: Domain, angle: float) -> DiffeoGrid:
    """Rotation by angle in the plane of the first two axes."""
    matrix = np.eye(domain.n)
    c, s = np.cos(angle), np.sin(angle)
    matrix[:2, :2] = [[c, -s], [s, c]]
    return DiffeoGrid.linear(domain, matrix)


def linear_map(domain: Domain, matrix: np.ndarray) -> DiffeoGrid:
    raise_if_errors(validate_unimodular(matrix, domain.n), "linear map")
    return DiffeoGrid.linear(domain, np.asarray(matrix, dtype=float))


def build_map(
    domain: Domain,
    tag: str,
    params: Mapping[str, Any],
    base_dir: Optional[Path] = None,
) -> DiffeoGrid:
    """
    Factory for scenario maps.

    Examples:
        >>> build_map(domain, "rotation", {"angle": 0.3})
        >>> build_map(domain, "linear", {"matrix": [[1, 0.5], [0, 1]]})
    """
    if tag == "rotation":
        return rotation_map(domain, float(_get(params, "angle", tag)))
    if tag == "linear":
        return linear_map(domain, _matrix(_get(params, "matrix", tag), domain.n))
    if tag == "file":
        path = Path(_get(params, "path", tag))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        stored = read_field(path)
        if not isinstance(stored, DiffeoGrid):
            raise ScenarioError(f"{path} holds a {type(stored).__name__}, not a map")
        return stored
    raise ScenarioError(f"Unknown map tag '{tag}', expected one of {', '.join(MAP_TAGS)}")


def build_target(domain: Domain, params: Mapping[str, Any]) -> JacobianTarget:
    """Radial-bump Jacobian target; only the amplitude is configurable."""
    return radial_bump_target(domain, float(params.get("amplitude", 0.1)))
