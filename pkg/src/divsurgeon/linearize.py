"""Conservative local linearization of divergence-free fields.

The perturbation Y(y) = v(x) + A(y − x) − v(y) is rescaled to the unit box,
pasted against the zero field across the shells between ⅓B and ⅔B, and
contracted back to ball(x, λ). Z = v + (pulled-back paste) is affine with
matrix A near x, equals v outside ball(x, 2λ/3), and stays C¹-close to v.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import polars as pl

from divsurgeon.calibration import OUTER_RADIUS, chi_cfg, unit_domain, unit_regions
from divsurgeon.config import get_settings
from divsurgeon.cutoffs import cutoff_at
from divsurgeon.divsolve.operator import DivergenceInverse
from divsurgeon.errors import (
    AdmissibilityError,
    GeometryError,
    ResolutionError,
    UnderResolvedError,
)
from divsurgeon.grid.calculus import divergence, interpolate, jacobian
from divsurgeon.grid.domain import Domain, VectorField
from divsurgeon.grid.regions import Ball
from divsurgeon.logger import logger, logger_timer
from divsurgeon.norms import cr_norm, operator_norm
from divsurgeon.pasting.obstruction import blend, cutoff
from divsurgeon.pasting.paste import PasteReport, chain_for, paste
from divsurgeon.pasting.regions import PasteRegions
from divsurgeon.validators import (
    raise_if_errors,
    validate_positive,
    validate_support_ball,
    validate_traceless,
)

AFFINE_TOLERANCE = 1e-6
CONTRACTION_SLACK = 0.05  # FD sups on two grids of different spacing


@dataclass(frozen=True, eq=False)
class LinearizeRequest:
    """Field v, point x, traceless target A, closeness ε and support radius."""

    v: VectorField
    x: tuple[float, ...]
    A: np.ndarray
    eps: float
    U_radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(c) for c in self.x))
        matrix = np.array(self.A, dtype=float, copy=True)
        matrix.setflags(write=False)
        object.__setattr__(self, "A", matrix)
        raise_if_errors(self.validate(), "linearize request")

    def validate(self) -> list[str]:
        domain = self.v.domain
        errors = validate_traceless(self.A, domain.n)
        errors.extend(validate_positive({"eps": self.eps, "U_radius": self.U_radius}))
        if not errors:
            errors.extend(
                validate_support_ball(
                    self.x, self.U_radius, domain.lower, domain.lengths, domain.periodic
                )
            )
        return errors


@dataclass(frozen=True, eq=False)
class LinearizeReport:
    Z: VectorField
    x: tuple[float, ...]  # x snapped to its nearest node
    lam: float
    history: tuple[tuple[float, float], ...]  # (λ, ‖Y_λ‖_{C¹;B}) per trial
    admissibility: float  # ‖A − Dv(x)‖
    chi: float
    eps: float
    center_exact: bool
    affine_deviation: float  # max |Z − v(x) − A(y − x)| on ball(x, λ/3)
    affine_jacobian_deviation: float  # max |DZ − A| entrywise on ball(x, λ/3)
    exterior_exact: bool
    distance: float  # |Z − v|₁
    unit_distance: float  # |Z₁|₁ on the unit ball
    contracted: float  # |Z − v|₁ on ball(x, λ)
    divergence: float
    divergence_v: float
    paste: PasteReport
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def homothety_ratio(self) -> float:
        """Final ‖Y_λ‖_{C¹} over ‖A − Dv(x)‖."""
        if self.admissibility == 0:
            return 1.0
        return self.history[-1][1] / self.admissibility

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "center_exact": self.center_exact,
            "affine": max(self.affine_deviation, self.affine_jacobian_deviation)
            <= AFFINE_TOLERANCE,
            "exterior_exact": self.exterior_exact,
            "c1_small": self.distance < self.eps,
            "contraction": self.contracted
            <= self.unit_distance * (1 + CONTRACTION_SLACK) + 1e-12,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_mapping(self) -> dict[str, float]:
        entries = {
            "linearize.lambda": self.lam,
            "linearize.trials": float(len(self.history)),
            "linearize.admissibility": self.admissibility,
            "linearize.chi": self.chi,
            "linearize.eps": self.eps,
            "linearize.affine_deviation": self.affine_deviation,
            "linearize.affine_jacobian_deviation": self.affine_jacobian_deviation,
            "linearize.distance": self.distance,
            "linearize.distance_ratio": self.distance / self.eps,
            "linearize.unit_distance": self.unit_distance,
            "linearize.contracted": self.contracted,
            "linearize.homothety_ratio": self.homothety_ratio,
            "linearize.divergence": self.divergence,
            "linearize.divergence_v": self.divergence_v,
            "linearize.paste_residual": self.paste.residual,
            "linearize.paste_ratio": self.paste.ratio,
        }
        for axis, coordinate in enumerate(self.x):
            entries[f"linearize.x{axis}"] = coordinate
        for k, (lam, estimate) in enumerate(self.history):
            entries[f"linearize.history{k}.lambda"] = lam
            entries[f"linearize.history{k}.c1"] = estimate
        for name, ok in self.checks.items():
            entries[f"check.{name}"] = float(ok)
        entries.update(self.extras)
        return entries


@lru_cache(maxsize=4)
def _unit_operator(domain: Domain) -> tuple[PasteRegions, DivergenceInverse]:
    regions = unit_regions(domain)
    return regions, DivergenceInverse(chain_for(regions))


def rescale_field(
    Y: VectorField,
    lam: float,
    center: Sequence[float],
    unit: Optional[Domain] = None,
) -> VectorField:
    """
    Y_λ(z) = Y(center + λz) / λ resampled on the unit box.

    Derivatives are scale-invariant: DY_λ(z) = DY(center + λz). Unit nodes
    outside the unit ball whose preimage leaves a box domain read Y at the
    nearest face point.

    Args:
        Y: Field on the source grid
        lam: Scale λ in (0, 1]
        center: Preimage of the unit-box origin
        unit: Unit-box grid (settings.unit_resolution if None)

    Returns:
        Y_λ on the unit box

    Raises:
        UnderResolvedError: λB spans fewer than settings.rescale_min_cells
            source cells
        GeometryError: ball(center, λ) leaves a box domain
    """
    if not 0 < lam <= 1:
        raise GeometryError(f"Scale must lie in (0, 1], got {lam}")
    source = Y.domain
    unit = unit or unit_domain(source.n)
    cells = get_settings().rescale_min_cells
    h = source.max_spacing
    if 2 * lam < cells * h * (1 - 1e-9):
        raise UnderResolvedError(
            f"λ = {lam:.4g} spans fewer than {cells} source cells",
            required_resolution=int(np.ceil(cells * max(source.lengths) / (2 * lam))),
        )

    z = unit.points()
    points = np.asarray(center, dtype=float) + lam * z
    if not source.periodic:
        in_ball = np.linalg.norm(z, axis=-1) <= 1
        if not np.all(source.contains(points[in_ball], slack=1e-9 * lam)):
            raise GeometryError(
                f"ball({tuple(center)}, {lam:.4g}) leaves {source.describe()}"
            )
        points = np.clip(points, source.lower, source.upper)
    values = interpolate(Y, points) / lam
    return VectorField(unit, np.moveaxis(values, -1, 0))


def _perturbation(v: VectorField, node: tuple[int, ...], A: np.ndarray) -> VectorField:
    """Y(y) = v(x) + A(y − x) − v(y) on the source grid."""
    domain = v.domain
    x = domain.node(node)
    disp = domain.displacement(domain.points(), x)
    center_value = v.data[(slice(None), *node)]
    affine = center_value.reshape((-1,) + (1,) * domain.n) + np.einsum(
        "ij,...j->i...", A, disp
    )
    return VectorField(domain, affine - v.data)


def _unit_ball(unit: Domain) -> Ball:
    return Ball(tuple(0.0 for _ in range(unit.n)), 1.0)


def homothety_profile(
    v: VectorField,
    x: Sequence[float],
    A: np.ndarray,
    lambdas: Sequence[float],
    unit: Optional[Domain] = None,
) -> pl.DataFrame:
    """
    ‖Y_λ‖_{C¹;B} for each λ next to ‖A − Dv(x)‖, its limit as λ → 0.

    Returns:
        DataFrame with columns lambda, c1, fd_norm, limit
    """
    domain = v.domain
    unit = unit or unit_domain(domain.n)
    node = domain.nearest_node(x)
    A = np.asarray(A, dtype=float)
    limit = operator_norm(A - jacobian(v)[(slice(None), slice(None), *node)])
    Y = _perturbation(v, node, A)
    rows = []
    for lam in lambdas:
        report = cr_norm(rescale_field(Y, lam, domain.node(node), unit), 1, _unit_ball(unit))
        rows.append(
            {"lambda": float(lam), "c1": report.whitney, "fd_norm": report.value, "limit": limit}
        )
    return pl.DataFrame(rows)


@logger_timer("Field linearization")
def linearize_field(
    request: LinearizeRequest, unit: Optional[Domain] = None
) -> LinearizeReport:
    """
    Replace v near x by its prescribed affine part v(x) + A(y − x).

    Args:
        request: Field, point, traceless A, ε and support radius
        unit: Unit-box grid for the paste (settings.unit_resolution if None)

    Returns:
        LinearizeReport with Z

    Raises:
        AdmissibilityError: ‖A − Dv(x)‖ ≥ χ_cfg·ε
        ResolutionError: λ fell below the floor before ‖Y_λ‖_{C¹} < χ_cfg·ε
    """
    settings = get_settings()
    v = request.v
    domain = v.domain
    unit = unit or unit_domain(domain.n)
    node = domain.nearest_node(request.x)
    x = domain.node(node)
    A = request.A

    chi = chi_cfg(domain.n)
    target = chi * request.eps
    measured = operator_norm(A - jacobian(v)[(slice(None), slice(None), *node)])
    if measured >= target:
        raise AdmissibilityError(
            f"‖A − Dv(x)‖ must stay below χ·ε = {target:.3e}", measured=measured
        )

    # λ halving until the rescaled perturbation is C¹-small on the unit ball
    Y = _perturbation(v, node, A)
    ball = _unit_ball(unit)
    floor = 1.5 * settings.lambda_floor_cells * domain.max_spacing
    lam = min(1.0, request.U_radius)
    history: list[tuple[float, float]] = []
    while True:
        if lam < floor * (1 - 1e-9):
            reached = f" with ‖Y_λ‖ = {history[-1][1]:.3e}" if history else ""
            raise ResolutionError(
                f"λ reached {lam:.4g} below the floor {floor:.4g}{reached}; "
                f"need ‖Y_λ‖ < χ·ε = {target:.3e}"
            )
        Y_lam = rescale_field(Y, lam, x, unit)
        estimate = cr_norm(Y_lam, 1, ball).whitney
        history.append((lam, estimate))
        logger.debug(f"🔍 λ = {lam:.4g}: ‖Y_λ‖_C¹ = {estimate:.3e}")
        if estimate < target:
            break
        lam /= 2

    regions, operator = _unit_operator(unit)
    zero = VectorField.zeros(unit)
    pasted = paste(zero, Y_lam, regions, r=1, operator=operator)
    Z1 = pasted.Z
    correction = blend(cutoff(regions), zero, Y_lam) - Z1

    # Pull back: Z₀(y) = λZ₁((y − x)/λ) = ξ((y − x)/λ)·Y(y) − λΦ((y − x)/λ)
    disp = domain.displacement(domain.points(), x)
    radius = np.linalg.norm(disp, axis=-1)
    support = radius < OUTER_RADIUS * lam
    plateau = radius <= regions.w0.radius * lam
    z = disp[support] / lam
    xi = cutoff_at(unit, regions.xi_inner, regions.xi_outer, z)
    pulled = xi * Y.data[:, support] - lam * interpolate(correction, z).T

    data = np.array(v.data, copy=True)
    data[:, support] = v.data[:, support] + pulled
    center_value = v.data[(slice(None), *node)][:, np.newaxis]
    data[:, plateau] = center_value + A @ disp[plateau].T
    Z = VectorField(domain, data)

    inner = Ball(tuple(x), lam / 3)
    inner_mask = inner.closure_mask(domain)
    affine = center_value + A @ disp[inner_mask].T
    affine_deviation = float(np.max(np.abs(Z.data[:, inner_mask] - affine), initial=0.0))
    DZ = jacobian(Z)[:, :, inner_mask]
    jacobian_deviation = float(
        np.max(np.abs(DZ - A[:, :, np.newaxis]), initial=0.0)
    )

    report = LinearizeReport(
        Z=Z,
        x=tuple(float(c) for c in x),
        lam=lam,
        history=tuple(history),
        admissibility=measured,
        chi=chi,
        eps=request.eps,
        center_exact=bool(
            np.array_equal(Z.data[(slice(None), *node)], v.data[(slice(None), *node)])
        ),
        affine_deviation=affine_deviation,
        affine_jacobian_deviation=jacobian_deviation,
        exterior_exact=bool(np.array_equal(Z.data[:, ~support], v.data[:, ~support])),
        distance=cr_norm(Z - v, 1).value,
        unit_distance=cr_norm(Z1, 1, ball).value,
        contracted=cr_norm(Z - v, 1, Ball(tuple(x), lam)).value,
        divergence=divergence(Z).sup(),
        divergence_v=divergence(v).sup(),
        paste=pasted,
    )
    status = "✅" if report.passed else "⚠️"
    logger.info(
        f"{status} Linearized at {report.x} with λ = {lam:.4g}: "
        f"|Z − v|₁ = {report.distance:.3e} (ε = {request.eps:g})"
    )
    return report


def linearize_sweep(
    v: VectorField,
    x: Sequence[float],
    direction: np.ndarray,
    eps_values: Sequence[float],
    U_radius: float,
    unit: Optional[Domain] = None,
) -> pl.DataFrame:
    """
    Linearize with A = Dv(x) + δ·direction, δ = χ_cfg·ε/2, for each ε.

    direction is traceless and normalized here to operator norm 1.

    Returns:
        DataFrame with columns eps, delta, lambda, distance, ratio
    """
    domain = v.domain
    node = domain.nearest_node(x)
    base = jacobian(v)[(slice(None), slice(None), *node)]
    direction = np.asarray(direction, dtype=float)
    direction = direction / operator_norm(direction)
    chi = chi_cfg(domain.n)
    rows = []
    for eps in eps_values:
        delta = chi * eps / 2
        report = linearize_field(
            LinearizeRequest(v, tuple(x), base + delta * direction, eps, U_radius), unit
        )
        rows.append({
            "eps": float(eps),
            "delta": delta,
            "lambda": report.lam,
            "distance": report.distance,
            "ratio": report.distance / eps,
        })
    return pl.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class MultiPointLinearization:
    Z: VectorField
    reports: tuple[LinearizeReport, ...]
    order_independent: Optional[bool]  # None when the reversed order was not run


def _check_disjoint(domain: Domain, requests: Sequence[LinearizeRequest]) -> None:
    h = domain.max_spacing
    for i, first in enumerate(requests):
        for second in requests[i + 1:]:
            distance = float(np.linalg.norm(domain.displacement(second.x, first.x)))
            needed = 1.05 * (first.U_radius + second.U_radius) + 2 * h
            if distance < needed:
                raise GeometryError(
                    f"Support balls at {first.x} and {second.x} overlap "
                    f"(distance {distance:.4g}, need ≥ {needed:.4g})"
                )


def _apply(
    v: VectorField, requests: Sequence[LinearizeRequest], unit: Optional[Domain]
) -> tuple[VectorField, list[LinearizeReport]]:
    Z = v
    reports = []
    for request in requests:
        report = linearize_field(replace(request, v=Z), unit)
        Z = report.Z
        reports.append(report)
    return Z, reports


@logger_timer("Multi-point linearization")
def multi_point_linearize(
    v: VectorField,
    requests: Sequence[LinearizeRequest],
    check_order: bool = True,
    unit: Optional[Domain] = None,
) -> MultiPointLinearization:
    """
    Linearize v at every point of a finite set with disjoint support balls.

    Args:
        v: Field to modify
        requests: One request per point (their v is replaced by the running Z)
        check_order: Also apply the requests in reverse and compare bit for bit
        unit: Unit-box grid for the pastes

    Returns:
        MultiPointLinearization

    Raises:
        GeometryError: support balls overlap or live on another grid
    """
    if any(request.v.domain != v.domain for request in requests):
        raise GeometryError("Every request must live on the field's grid")
    _check_disjoint(v.domain, requests)
    Z, reports = _apply(v, requests, unit)

    order_independent: Optional[bool] = None
    if check_order and len(requests) > 1:
        reversed_Z, _ = _apply(v, list(reversed(requests)), unit)
        order_independent = bool(np.array_equal(Z.data, reversed_Z.data))
        if not order_independent:
            logger.warning("⚠️ Linearizations depend on the order of the points")
    logger.info(f"📍 Linearized {len(requests)} point(s)")
    return MultiPointLinearization(Z, tuple(reports), order_independent)
