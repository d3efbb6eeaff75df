"""Random admissible divergence data and solenoidal fields."""

import numpy as np

from divsurgeon.cutoffs import smoothstep
from divsurgeon.errors import GeometryError
from divsurgeon.grid.calculus import curl, integrate_values, rotated_gradient
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Region


def interior_bump(domain: Domain, region: Region) -> np.ndarray:
    """Smooth weight rising from 0 on the boundary of region to 1 at its deepest nodes."""
    depth = region.node_depth(domain)
    deepest = float(np.max(depth))
    if deepest <= 0:
        raise GeometryError(f"{region.describe()} contains no grid nodes")
    return smoothstep(depth / deepest)


def random_admissible(
    domain: Domain, omega1: Region, rng: np.random.Generator, modes: int = 3
) -> ScalarField:
    """
    Random smooth mean-zero field supported in Ω₁.

    A random trigonometric polynomial with a few modes per axis is tapered by
    an interior bump of Ω₁; a multiple of the bump removes the mean.
    """
    weight = interior_bump(domain, omega1)
    mesh = domain.mesh()
    signal = np.zeros(domain.shape)
    for _ in range(modes):
        frequency = rng.integers(1, modes + 1, size=domain.n)
        phase = rng.uniform(0, 2 * np.pi)
        argument = sum(
            2 * np.pi * k * (x - lo) / length
            for k, x, lo, length in zip(frequency, mesh, domain.lower, domain.lengths)
        )
        signal = signal + rng.normal() * np.cos(argument + phase)
    values = weight * signal
    values = values - (
        integrate_values(values, domain).value / integrate_values(weight, domain).value
    ) * weight
    return ScalarField(domain, values)


def random_solenoidal(
    domain: Domain, region: Region, rng: np.random.Generator, modes: int = 3
) -> VectorField:
    """
    Random discretely divergence-free field supported in region.

    Built from a random stream function (planar) or vector potential (3D)
    tapered by an interior bump, so its centered-difference divergence
    vanishes up to roundoff.
    """
    weight = interior_bump(domain, region)
    mesh = domain.mesh()

    def potential() -> np.ndarray:
        signal = np.zeros(domain.shape)
        for _ in range(modes):
            frequency = rng.integers(1, modes + 1, size=domain.n)
            phase = rng.uniform(0, 2 * np.pi)
            argument = sum(
                np.pi * k * (x - lo) / length
                for k, x, lo, length in zip(frequency, mesh, domain.lower, domain.lengths)
            )
            signal = signal + rng.normal() * np.cos(argument + phase)
        return weight * signal

    if domain.n == 2:
        return rotated_gradient(ScalarField(domain, potential()))
    if domain.n == 3:
        return curl(VectorField(domain, np.stack([potential() for _ in range(3)])))
    raise GeometryError(f"Solenoidal samples need dimension 2 or 3, got {domain.n}")
