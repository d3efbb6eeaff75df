"""The admissibility constant χ_cfg shared by field and map linearization."""

from functools import lru_cache
from typing import Optional

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.divsolve.operator import DivergenceInverse
from divsurgeon.divsolve.samples import random_solenoidal
from divsurgeon.grid.domain import Domain, VectorField
from divsurgeon.grid.regions import Ball
from divsurgeon.logger import logger, logger_timer
from divsurgeon.pasting.paste import chain_for, paste
from divsurgeon.pasting.regions import PasteRegions, derive_regions

# Shell pair of the unit-scale paste: K = ⅓B, U = ⅔B
INNER_RADIUS = 1.0 / 3.0
OUTER_RADIUS = 2.0 / 3.0


def unit_domain(n: int, resolution: Optional[int] = None) -> Domain:
    """The box [−1, 1]^n at settings.unit_resolution cells per axis."""
    return Domain.box([-1.0] * n, [2.0] * n, resolution or get_settings().unit_resolution)


def unit_regions(domain: Domain) -> PasteRegions:
    """Concentric shells between ⅓B and ⅔B around the origin."""
    origin = tuple(0.0 for _ in range(domain.n))
    return derive_regions(Ball(origin, INNER_RADIUS), Ball(origin, OUTER_RADIUS), domain)


def rotation_generator(n: int) -> np.ndarray:
    """Infinitesimal rotation in the plane of the first two axes."""
    generator = np.zeros((n, n))
    generator[0, 1], generator[1, 0] = -1.0, 1.0
    return generator


def _traceless(n: int, rng: np.random.Generator) -> np.ndarray:
    matrix = rng.normal(size=(n, n))
    matrix -= np.trace(matrix) / n * np.eye(n)
    return matrix / np.linalg.norm(matrix, ord=2)


def _samples(domain: Domain, count: int, seed: int) -> list[VectorField]:
    """
    Rotation generator first, then alternating traceless linear fields and
    solenoidal bumps inside 0.9B.
    """
    rng = np.random.default_rng(seed)
    fields = [VectorField.linear(domain, rotation_generator(domain.n))]
    support = Ball(tuple(0.0 for _ in range(domain.n)), 0.9)
    for k in range(1, count):
        if k % 2:
            fields.append(VectorField.linear(domain, _traceless(domain.n, rng)))
        else:
            fields.append(random_solenoidal(domain, support, rng))
    return fields


@logger_timer("Calibrating paste constant")
def measure_paste_constant(
    resolution: Optional[int] = None,
    samples: Optional[int] = None,
    seed: int = 0,
    n: int = 2,
) -> float:
    """
    Measure C_meas = max |Z|₁ / |Y|_{1;U} for Y pasted into X ≡ 0.

    Args:
        resolution: Cells per axis of the unit box (settings.calibration_resolution)
        samples: Number of pasted fields (settings.calibration_samples)
        seed: RNG seed
        n: Dimension

    Returns:
        C_meas
    """
    settings = get_settings()
    domain = unit_domain(n, resolution or settings.calibration_resolution)
    regions = unit_regions(domain)
    operator = DivergenceInverse(chain_for(regions))
    zero = VectorField.zeros(domain)

    ratios = [
        paste(zero, Y, regions, r=1, operator=operator).ratio
        for Y in _samples(domain, samples or settings.calibration_samples, seed)
    ]
    constant = max(ratios)
    logger.info(
        f"📐 Paste constant C_meas = {constant:.4g} "
        f"(ratios {', '.join(f'{r:.3g}' for r in ratios)})"
    )
    return constant


@lru_cache(maxsize=8)
def _calibrated_chi(resolution: int, samples: int, n: int) -> float:
    return 1.0 / (2.0 * measure_paste_constant(resolution, samples, n=n))


def chi_cfg(n: int = 2) -> float:
    """χ_cfg = 1/(2·C_meas), measured once per process unless overridden."""
    settings = get_settings()
    if settings.chi_override is not None:
        return settings.chi_override
    return _calibrated_chi(
        settings.calibration_resolution, settings.calibration_samples, n
    )
