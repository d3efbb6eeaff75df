"""Splitting mean-zero data into mean-zero pieces, one per cube of a chain."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.cutoffs import chain_partition
from divsurgeon.divsolve.chain import CubeChain
from divsurgeon.divsolve.samples import interior_bump
from divsurgeon.errors import (
    GeometryError,
    InvalidFieldError,
    MeanViolationError,
    OverlapError,
)
from divsurgeon.grid.calculus import (
    class_imbalance,
    class_totals,
    integrate_values,
    parity_classes,
)
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Region
from divsurgeon.logger import logger


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    Pieces h_j (one per cube) and the transfer constants λ_1..λ_N.

    scale is sup |h| of the datum; the per-cube mean checks are relative to it.
    """

    pieces: tuple[ScalarField, ...]
    transfers: tuple[float, ...]
    scale: float = 0.0

    def total(self) -> ScalarField:
        values = np.zeros(self.pieces[0].domain.shape)
        for piece in self.pieces:
            values = values + piece.values
        return ScalarField(self.pieces[0].domain, values)


def admissible_datum(h: ScalarField, omega1: Region) -> ScalarField:
    """
    Check that h is admissible divergence data for Ω₁ and clean its support.

    Values outside closure(Ω₁) up to a roundoff tolerance are set to exactly 0.

    Raises:
        InvalidFieldError: h is nonzero outside closure(Ω₁) beyond roundoff
        MeanViolationError: ∫h is not 0 within tolerance
    """
    settings = get_settings()
    scale = h.sup()
    if scale == 0.0:
        return h

    inside = omega1.closure_mask(h.domain)
    leak = float(np.max(np.abs(h.values[~inside]), initial=0.0))
    if leak > settings.support_tolerance * scale:
        raise InvalidFieldError(
            f"Data reaches {leak:.3e} outside closure(Ω₁) (sup {scale:.3e})"
        )
    cleaned = ScalarField(h.domain, np.where(inside, h.values, 0.0))

    mean = integrate_values(cleaned.values, h.domain).value
    if abs(mean) > settings.mean_tolerance * scale * h.domain.volume:
        raise MeanViolationError(
            f"Data has mean {mean:.3e}, above tolerance "
            f"{settings.mean_tolerance * scale * h.domain.volume:.3e}",
            measured=mean,
        )
    return cleaned


def node_classes(domain: Domain) -> np.ndarray:
    return parity_classes(domain.shape, domain.periodic)


def class_balanced(h: ScalarField, omega1: Region) -> tuple[ScalarField, ScalarField]:
    """
    Split h into its part in the range of the centered divergence and the rest.

    The rest is carried by the interior bump of Ω₁, rescaled per node parity
    class. For smooth mean-zero data it is the aliasing error of the class
    sums and falls off quickly under refinement.

    Returns:
        (balanced, imbalance) with balanced + imbalance = h
    """
    if h.sup() == 0.0:
        return h, ScalarField.zeros(h.domain)
    imbalance = class_imbalance(
        h.values, node_classes(h.domain), interior_bump(h.domain, omega1)
    )
    return ScalarField(h.domain, h.values - imbalance), ScalarField(h.domain, imbalance)


def _transfer(
    piece: np.ndarray, window: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """window rescaled per parity class to carry every class sum of piece."""
    masses = class_totals(window, labels)
    totals = class_totals(piece, labels)
    if np.any((masses <= 0) & (totals != 0)):
        raise OverlapError("Transfer window misses a node parity class")
    return class_imbalance(piece, labels, window)


def decompose_chain(
    h: ScalarField,
    chain: CubeChain,
    partition: Optional[tuple[list[ScalarField], list[ScalarField]]] = None,
) -> Decomposition:
    """
    Split h into pieces h_j supported in the cores of the chain's cubes.

    Starts from h·ψ_j and walks the chain once, moving each piece's excess
    mass into the next cube through the window of their overlap. The move is
    made per node parity class, so every piece but the last sums to zero over
    each class; the last one inherits the class sums of h, which vanish for
    data in the range of the centered divergence.

    Args:
        h: Mean-zero data supported in closure(Ω₁)
        chain: Validated cube chain
        partition: Precomputed (psi, eta) of the chain

    Returns:
        Decomposition with Σ h_j = h and ∫h_j = 0 for every j
    """
    if h.domain != chain.domain:
        raise GeometryError("Data and chain live on different grids")
    h = admissible_datum(h, chain.omega1)
    psi, eta = partition if partition is not None else chain_partition(chain)
    labels = node_classes(chain.domain)

    pieces = [h.values * bump.values for bump in psi]
    transfers = []
    for j, window in enumerate(eta):
        excess = integrate_values(pieces[j], chain.domain).value
        shift = _transfer(pieces[j], window.values, labels)
        pieces[j] = pieces[j] - shift
        pieces[j + 1] = pieces[j + 1] + shift
        transfers.append(excess)

    logger.debug(
        f"🔀 Decomposed data into {len(pieces)} pieces "
        f"(max |λ| = {max((abs(t) for t in transfers), default=0.0):.3e})"
    )
    return Decomposition(
        tuple(ScalarField(chain.domain, piece) for piece in pieces),
        tuple(transfers),
        h.sup(),
    )
