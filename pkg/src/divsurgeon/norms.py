"""Finite-difference estimates of C^r norms and Hölder seminorms."""

from itertools import combinations_with_replacement
from math import factorial
from typing import NamedTuple, Optional, Union

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.errors import GeometryError, UnsupportedOrderError
from divsurgeon.grid.calculus import mixed_partials
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Region

MAX_ORDER = 3
WHITNEY_DIRECTIONS = 32

Field = Union[ScalarField, VectorField]


class HolderEstimate(NamedTuple):
    alpha: float
    value: float
    pairs: int
    exhaustive: bool


class NormReport(NamedTuple):
    """
    Sup-norm summary of a field and its mixed partials on a region.

    value is |F|_r, the max over per_order (and the Hölder seminorm when
    present). whitney estimates ‖F‖_{C^r} = max_k sup ‖D^k F‖ from below by
    evaluating D^k F on coordinate tuples and sampled unit directions.
    """

    r: int
    value: float
    per_order: tuple[float, ...]
    holder: Optional[HolderEstimate]
    whitney: float

    def as_mapping(self, prefix: str = "norm") -> dict[str, float]:
        entries = {f"{prefix}.r": float(self.r), f"{prefix}.value": self.value}
        for order, value in enumerate(self.per_order):
            entries[f"{prefix}.order{order}"] = value
        entries[f"{prefix}.whitney"] = self.whitney
        if self.holder is not None:
            entries[f"{prefix}.holder_alpha"] = self.holder.alpha
            entries[f"{prefix}.holder"] = self.holder.value
            entries[f"{prefix}.holder_exhaustive"] = float(self.holder.exhaustive)
        return entries


def _components(field: Field) -> np.ndarray:
    if isinstance(field, ScalarField):
        return field.values[np.newaxis]
    return field.data


def _region_mask(domain: Domain, region: Optional[Region]) -> np.ndarray:
    if region is None:
        return np.ones(domain.shape, dtype=bool)
    mask = region.closure_mask(domain)
    if not np.any(mask):
        raise GeometryError(f"{region.describe()} contains no grid nodes")
    return mask


def _check_order(r: int) -> None:
    if not 0 <= r <= MAX_ORDER:
        raise UnsupportedOrderError(
            f"Finite-difference norms support orders 0..{MAX_ORDER}, got {r}"
        )


def _partials_by_order(
    components: np.ndarray, domain: Domain, r: int
) -> list[list[dict[tuple[int, ...], np.ndarray]]]:
    """partials[i][k][σ] = ∂^σ F^i for |σ| = k."""
    result = []
    for values in components:
        per_component = [{(): values}]
        for order in range(1, r + 1):
            per_component.append(mixed_partials(values, domain, order))
        result.append(per_component)
    return result


def _multiplicity(sigma: tuple[int, ...], n: int) -> int:
    counts = [sigma.count(axis) for axis in range(n)]
    denominator = 1
    for c in counts:
        denominator *= factorial(c)
    return factorial(len(sigma)) // denominator


def _whitney(
    partials: list[list[dict[tuple[int, ...], np.ndarray]]],
    mask: np.ndarray,
    n: int,
    r: int,
    rng: np.random.Generator,
) -> float:
    best = 0.0
    directions = rng.normal(size=(WHITNEY_DIRECTIONS, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    for order in range(r + 1):
        sigmas = list(combinations_with_replacement(range(n), order))
        # Coordinate tuples: D^k F(e_σ) has components ∂^σ F^i
        for sigma in sigmas:
            squared = sum(p[order][sigma][mask] ** 2 for p in partials)
            best = max(best, float(np.sqrt(np.max(squared))))
        if order == 0:
            continue
        for u in directions:
            squared = np.zeros(int(np.count_nonzero(mask)))
            for p in partials:
                value = sum(
                    _multiplicity(sigma, n)
                    * np.prod([u[a] for a in sigma])
                    * p[order][sigma][mask]
                    for sigma in sigmas
                )
                squared = squared + value**2
            best = max(best, float(np.sqrt(np.max(squared))))
    return best


def cr_norm(
    field: Field,
    r: int,
    region: Optional[Region] = None,
    alpha: Optional[float] = None,
    seed: Optional[int] = None,
) -> NormReport:
    """
    Estimate |F|_r = max_{i, |σ| ≤ r} sup_R |∂^σ F^i| by finite differences.

    Args:
        field: Scalar or vector field
        r: Order, 0..3
        region: Restrict suprema to nodes of closure(R) (whole grid if None)
        alpha: Also estimate the α-Hölder seminorm of the order-r partials
        seed: Seed for sampled directions and Hölder pairs (settings.norm_seed)

    Returns:
        NormReport

    Raises:
        UnsupportedOrderError: r outside 0..3
        GeometryError: region contains no nodes
    """
    _check_order(r)
    domain = field.domain
    mask = _region_mask(domain, region)
    seed = get_settings().norm_seed if seed is None else seed
    partials = _partials_by_order(_components(field), domain, r)

    per_order = tuple(
        max(
            float(np.max(np.abs(values[mask])))
            for p in partials
            for values in p[order].values()
        )
        for order in range(r + 1)
    )
    whitney = _whitney(partials, mask, domain.n, r, np.random.default_rng(seed))

    holder = None
    value = max(per_order)
    if alpha is not None:
        holder = holder_seminorm(field, r, alpha, region, seed=seed)
        value = max(value, holder.value)
    return NormReport(r, value, per_order, holder, whitney)


def c1_distance(a: Field, b: Field, region: Optional[Region] = None) -> float:
    """|a − b|_1 on a region."""
    return cr_norm(a - b, 1, region).value


def _pair_offsets(domain: Domain) -> list[np.ndarray]:
    """Axis offsets at dyadic scales, one family per axis."""
    offsets = []
    for axis in range(domain.n):
        step = 1
        while step < domain.shape[axis]:
            offset = np.zeros(domain.n, dtype=int)
            offset[axis] = step
            offsets.append(offset)
            step *= 2
    return offsets


def _ratio_max(
    top: np.ndarray,
    points: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
    domain: Domain,
    alpha: float,
) -> float:
    """Max |T(y) − T(x)| / |y − x|^α over index pairs into flattened nodes."""
    if first.size == 0:
        return 0.0
    delta = domain.displacement(points[second], points[first])
    distance = np.linalg.norm(delta, axis=-1)
    keep = distance > 0
    change = np.max(np.abs(top[:, second] - top[:, first]), axis=0)
    return float(np.max(change[keep] / distance[keep] ** alpha, initial=0.0))


def holder_seminorm(
    field: Field,
    r: int,
    alpha: float,
    region: Optional[Region] = None,
    pair_budget: Optional[int] = None,
    seed: Optional[int] = None,
) -> HolderEstimate:
    """
    Sampled α-Hölder seminorm of the order-r partials on a region.

    Every pair is used when the count fits the budget. Otherwise the sample
    holds all pairs at dyadic axis offsets (nearest neighbours first) and
    fills the rest of the budget with random pairs.

    Args:
        field: Scalar or vector field
        r: Order of the partials, 0..3
        alpha: Exponent in (0, 1]
        region: Node set (whole grid if None)
        pair_budget: Max pairs (settings.holder_pair_budget)
        seed: RNG seed (settings.norm_seed)

    Returns:
        HolderEstimate (value is a lower bound of the discrete seminorm)
    """
    _check_order(r)
    if not 0 < alpha <= 1:
        raise GeometryError(f"Hölder exponent must be in (0, 1], got {alpha}")
    settings = get_settings()
    budget = pair_budget or settings.holder_pair_budget
    rng = np.random.default_rng(settings.norm_seed if seed is None else seed)

    domain = field.domain
    mask = _region_mask(domain, region)
    partials = _partials_by_order(_components(field), domain, r)
    flat_mask = mask.reshape(-1)
    top = np.stack([
        values.reshape(-1)[flat_mask] for p in partials for values in p[r].values()
    ])
    points = domain.points().reshape(-1, domain.n)[flat_mask]
    count = points.shape[0]
    total_pairs = count * (count - 1) // 2
    if count < 2:
        return HolderEstimate(alpha, 0.0, 0, True)

    best = 0.0
    if total_pairs <= budget:
        chunk = max(1, 4_000_000 // count)
        for start in range(0, count, chunk):
            first = np.repeat(np.arange(start, min(start + chunk, count)), count)
            second = np.tile(np.arange(count), min(start + chunk, count) - start)
            upper = second > first
            best = max(
                best,
                _ratio_max(top, points, first[upper], second[upper], domain, alpha),
            )
        return HolderEstimate(alpha, best, total_pairs, True)

    index = -np.ones(domain.shape, dtype=int)
    index[mask] = np.arange(count)
    used = 0
    for offset in _pair_offsets(domain):
        if used >= budget:
            break
        shifted = index
        for axis, step in enumerate(offset):
            if step:
                shifted = np.roll(shifted, -int(step), axis=axis)
                if not domain.periodic:
                    cut = [slice(None)] * domain.n
                    cut[axis] = slice(domain.shape[axis] - int(step), None)
                    shifted = shifted.copy()
                    shifted[tuple(cut)] = -1
        valid = (index >= 0) & (shifted >= 0)
        first, second = index[valid], shifted[valid]
        take = min(first.size, budget - used)
        best = max(
            best, _ratio_max(top, points, first[:take], second[:take], domain, alpha)
        )
        used += take

    remaining = budget - used
    if remaining > 0:
        first = rng.integers(0, count, size=remaining)
        second = rng.integers(0, count, size=remaining)
        best = max(best, _ratio_max(top, points, first, second, domain, alpha))
        used += remaining
    return HolderEstimate(alpha, best, used, False)


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value max_{|u|=1} |Au|."""
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise GeometryError("Operator norm needs finite matrix entries")
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, ord=2))
