"""Domains, grid fields, regions and discrete calculus."""

from divsurgeon.grid.calculus import (
    Integral,
    Interpolant,
    class_imbalance,
    class_totals,
    divergence,
    gradient,
    integrate,
    interpolate,
    mollify,
    mollify_field,
    parity_classes,
    rotated_gradient,
)
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import (
    Annulus,
    Ball,
    Band,
    Box,
    Complement,
    Region,
    UnionOf,
)

__all__ = [
    "Annulus",
    "Ball",
    "Band",
    "Box",
    "Complement",
    "Domain",
    "Integral",
    "Interpolant",
    "Region",
    "ScalarField",
    "UnionOf",
    "VectorField",
    "class_imbalance",
    "class_totals",
    "divergence",
    "gradient",
    "integrate",
    "interpolate",
    "mollify",
    "mollify_field",
    "parity_classes",
    "rotated_gradient",
]
