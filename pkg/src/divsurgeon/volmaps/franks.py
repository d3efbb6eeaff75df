"""Conservative local linearization of volume-preserving maps.

Near a fixed point f(0) = 0 the map is rescaled to the unit ball, corrected
to A⁻¹f_λ, cut off to the identity inside a shell and then made volume
preserving again by a Moser map. The result f_A equals A on (λ/3)B, equals f
outside (2λ/3)B and preserves volume in between.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import polars as pl
from scipy.linalg import expm

from divsurgeon.calibration import chi_cfg, unit_domain
from divsurgeon.config import get_settings
from divsurgeon.cutoffs import band_cutoff
from divsurgeon.divsolve.samples import interior_bump
from divsurgeon.errors import AdmissibilityError, ResolutionError, VolumeBudgetError
from divsurgeon.grid.calculus import integrate_values, jacobian
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Annulus, Ball, Complement
from divsurgeon.logger import logger, logger_timer
from divsurgeon.norms import cr_norm, operator_norm
from divsurgeon.validators import (
    ValidationError,
    raise_if_errors,
    validate_positive,
    validate_unimodular,
)
from divsurgeon.volmaps.diffeo import (
    DiffeoGrid,
    InjectivityMargin,
    compose,
    injectivity_margin,
    invert,
    jacobian_det,
)
from divsurgeon.volmaps.moser import (
    DEFAULT_SHELL,
    JacobianTarget,
    MoserReport,
    prescribed_jacobian,
    unit_ball_volume,
)

PLATEAU_RADIUS = 1.0 / 3.0
GLUE_RADIUS = 2.0 / 3.0
CONTRACTION_BOUND = 0.25
PLATEAU_JACOBIAN_TOLERANCE = 1e-8
IDENTITY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class FranksReport:
    f_A: DiffeoGrid
    lam: float
    history: tuple[tuple[float, float], ...]  # (λ, |g − Id|₁ on B) per trial
    admissibility: float  # ‖A − Df(0)‖
    chi: float
    eps0: float
    trivial: bool  # g = Id, so f_A = f
    plateau_exact: bool
    plateau_jacobian_deviation: float  # max |Df_A − A| entrywise on (λ/3)B
    exterior_exact: bool
    det_deviation: float  # sup |det Df_A − 1|
    distance: float  # |f_A − f|₁
    injectivity: Optional[InjectivityMargin] = None
    clamp_defect: float = 0.0  # relative mass moved by the collar clamp
    moser: Optional[MoserReport] = None
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def checks(self) -> dict[str, bool]:
        checks = {
            "plateau_exact": self.plateau_exact,
            "plateau_jacobian": self.plateau_jacobian_deviation
            <= PLATEAU_JACOBIAN_TOLERANCE,
            "exterior_exact": self.exterior_exact,
            "volume": self.det_deviation <= get_settings().jacobian_tolerance,
            "c1_small": self.distance < self.eps0,
        }
        if self.injectivity is not None:
            checks["injective"] = self.injectivity.certified
            checks["separated"] = self.injectivity.separated
        return checks

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_mapping(self) -> dict[str, float]:
        entries = {
            "franks.lambda": self.lam,
            "franks.trials": float(len(self.history)),
            "franks.admissibility": self.admissibility,
            "franks.chi": self.chi,
            "franks.eps0": self.eps0,
            "franks.trivial": float(self.trivial),
            "franks.plateau_jacobian_deviation": self.plateau_jacobian_deviation,
            "franks.det_deviation": self.det_deviation,
            "franks.distance": self.distance,
            "franks.distance_ratio": self.distance / self.eps0,
            "franks.clamp_defect": self.clamp_defect,
        }
        for k, (lam, deviation) in enumerate(self.history):
            entries[f"franks.history{k}.lambda"] = lam
            entries[f"franks.history{k}.c1"] = deviation
        if self.injectivity is not None:
            entries["franks.injectivity_margin"] = self.injectivity.margin
            entries["franks.separation_ratio"] = self.injectivity.worst_ratio
        if self.moser is not None:
            entries.update(self.moser.as_mapping())
        for name, ok in self.checks.items():
            entries[f"check.{name}"] = float(ok)
        entries.update(self.extras)
        return entries


def _origin(n: int) -> tuple[float, ...]:
    return tuple(0.0 for _ in range(n))


def _validate_request(f: DiffeoGrid, A: np.ndarray, eps0: float) -> None:
    """Check the request before any work is done."""
    domain = f.domain
    errors = validate_unimodular(A, domain.n)
    errors.extend(validate_positive({"eps0": eps0}))
    if not errors and eps0 > 1:
        errors.append(f"eps0 must be at most 1, got {eps0}")
    node = domain.nearest_node(_origin(domain.n))
    if np.max(np.abs(domain.node(node))) > 1e-12:
        errors.append("The origin must be a grid node")
    elif np.max(np.abs(f.images[(slice(None), *node)])) > 1e-12:
        errors.append(f"f(0) must be 0, got {f.images[(slice(None), *node)].tolist()}")
    raise_if_errors(errors, "Franks request")

    tolerance = get_settings().jacobian_tolerance
    deviation = float(np.max(np.abs(jacobian_det(f).values - 1.0)))
    if deviation > tolerance:
        raise ValidationError(
            f"f is not volume preserving: sup |det Df − 1| = {deviation:.3e} "
            f"exceeds {tolerance:g}"
        )


def derivative_at_origin(f: DiffeoGrid) -> np.ndarray:
    """Finite-difference Df at the origin node."""
    node = f.domain.nearest_node(_origin(f.n))
    return jacobian(f.field)[(slice(None), slice(None), *node)]


def _half_width(domain: Domain) -> float:
    """Radius η of the largest origin-centered ball inside the box."""
    return min(
        min(-lo, lo + length) for lo, length in zip(domain.lower, domain.lengths)
    )


def rescale_map(f: DiffeoGrid, lam: float, unit: Domain) -> DiffeoGrid:
    """f_λ(z) = f(λz)/λ on the unit box."""
    return DiffeoGrid(unit, np.moveaxis(f(lam * unit.points()) / lam, -1, 0))


def transition_shell(unit: Domain) -> Annulus:
    """Support of θ − 1: the cutoff's transition shell grown by two cells."""
    pad = 2 * unit.max_spacing
    return Annulus(_origin(unit.n), DEFAULT_SHELL[0] - pad, DEFAULT_SHELL[1] + pad)


def clamp_target(theta: np.ndarray, unit: Domain, shell: Annulus) -> tuple[JacobianTarget, float]:
    """
    Set θ = 1 off the shell and move the resulting mass defect into it.

    Returns:
        (target, relative mass correction)

    Raises:
        VolumeBudgetError: the correction exceeds settings.clamp_mass_tolerance
    """
    clamped = np.where(shell.closure_mask(unit), theta, 1.0)
    defect = integrate_values(clamped - 1.0, unit).value
    relative = abs(defect) / unit_ball_volume(unit.n)
    tolerance = get_settings().clamp_mass_tolerance
    if relative > tolerance:
        raise VolumeBudgetError(
            f"Collar clamp moves {relative:.3e} of the ball's volume "
            f"(tolerance {tolerance:g})"
        )
    weight = interior_bump(unit, shell)
    clamped = clamped - defect / integrate_values(weight, unit).value * weight
    return JacobianTarget(ScalarField(unit, clamped), shell), relative


def _cutoff(unit: Domain) -> np.ndarray:
    """ξ = 0 inside the shell's inner radius and 1 outside its outer radius."""
    origin = _origin(unit.n)
    return band_cutoff(
        unit,
        Complement(Ball(origin, DEFAULT_SHELL[1])),
        Complement(Ball(origin, DEFAULT_SHELL[0])),
    ).values


@logger_timer("Franks linearization")
def franks_linearize(
    f: DiffeoGrid,
    A: np.ndarray,
    eps0: float,
    unit: Optional[Domain] = None,
) -> FranksReport:
    """
    Replace Df(0) by A near the fixed point 0 of a volume-preserving map.

    Args:
        f: Map on a box around the origin with f(0) = 0 and det Df ≡ 1
        A: Target matrix with det A = 1
        eps0: C¹ budget in (0, 1]
        unit: Unit-scale grid (settings.unit_resolution if None)

    Returns:
        FranksReport with f_A

    Raises:
        ValidationError: malformed request or f not volume preserving
        AdmissibilityError: ‖A − Df(0)‖ ≥ χ_cfg·ε₀
        ResolutionError: no λ above the floor certifies |g − Id|₁ ≤ ¼
        VolumeBudgetError: the collar clamp moves too much mass
    """
    settings = get_settings()
    A = np.asarray(A, dtype=float)
    _validate_request(f, A, eps0)
    domain = f.domain
    n = domain.n
    unit = unit or unit_domain(n)

    chi = chi_cfg(n)
    target = chi * eps0
    measured = operator_norm(A - derivative_at_origin(f))
    if measured >= target:
        raise AdmissibilityError(
            f"‖A − Df(0)‖ must stay below χ·ε₀ = {target:.3e}", measured=measured
        )

    A_inv = np.linalg.inv(A)
    identity = np.moveaxis(unit.points(), -1, 0)
    xi = _cutoff(unit)
    ball = Ball(_origin(n), 1.0)
    floor = 1.5 * settings.lambda_floor_cells * domain.max_spacing
    lam = min(1.0, _half_width(domain))
    history: list[tuple[float, float]] = []
    while True:
        if lam < floor * (1 - 1e-9):
            reached = f" with |g − Id|₁ = {history[-1][1]:.3e}" if history else ""
            raise ResolutionError(
                f"λ reached {lam:.4g} below the floor {floor:.4g}{reached}; "
                f"need |g − Id|₁ ≤ {CONTRACTION_BOUND}"
            )
        h_images = np.einsum("ij,j...->i...", A_inv, rescale_map(f, lam, unit).images)
        g = DiffeoGrid(unit, identity + xi * (h_images - identity))
        deviation = cr_norm(g.displacement(), 1, ball).value
        certificate = injectivity_margin(g, ball)
        history.append((lam, deviation))
        logger.debug(
            f"🔍 λ = {lam:.4g}: |g − Id|₁ = {deviation:.3e}, "
            f"margin {certificate.margin:.3e}"
        )
        if deviation <= CONTRACTION_BOUND and certificate.certified:
            break
        lam /= 2

    points = domain.points()
    radius = np.linalg.norm(points, axis=-1)
    plateau = radius <= PLATEAU_RADIUS * lam
    exterior = radius >= lam

    scale = max(1.0, float(np.max(np.abs(identity))))
    if np.max(np.abs(h_images - identity)) <= IDENTITY_TOLERANCE * scale:
        logger.info("🟰 A⁻¹f is the identity at this scale, f_A = f")
        return FranksReport(
            f_A=f,
            lam=lam,
            history=tuple(history),
            admissibility=measured,
            chi=chi,
            eps0=eps0,
            trivial=True,
            plateau_exact=True,
            plateau_jacobian_deviation=_plateau_jacobian(f, A, lam),
            exterior_exact=True,
            det_deviation=float(np.max(np.abs(jacobian_det(f).values - 1.0))),
            distance=0.0,
            injectivity=certificate,
        )

    theta = jacobian_det(g).values
    jacobian_target, clamp_defect = clamp_target(theta, unit, transition_shell(unit))
    moser = prescribed_jacobian(jacobian_target)
    g_tilde = compose(g, invert(moser.phi))

    # Glue: λ·A·g̃(y/λ) inside (2λ/3)B, A·y on the plateau, f elsewhere
    inside = radius < GLUE_RADIUS * lam
    images = np.array(f.images, copy=True)
    images[:, inside] = lam * (A @ g_tilde(points[inside] / lam).T)
    images[:, plateau] = A @ points[plateau].T
    f_A = DiffeoGrid(domain, images)

    report = FranksReport(
        f_A=f_A,
        lam=lam,
        history=tuple(history),
        admissibility=measured,
        chi=chi,
        eps0=eps0,
        trivial=False,
        plateau_exact=bool(np.array_equal(f_A.images[:, plateau], A @ points[plateau].T)),
        plateau_jacobian_deviation=_plateau_jacobian(f_A, A, lam),
        exterior_exact=bool(np.array_equal(f_A.images[:, exterior], f.images[:, exterior])),
        det_deviation=float(np.max(np.abs(jacobian_det(f_A).values - 1.0))),
        distance=cr_norm(f_A.field - f.field, 1).value,
        injectivity=certificate,
        clamp_defect=clamp_defect,
        moser=moser,
    )
    status = "✅" if report.passed else "⚠️"
    logger.info(
        f"{status} Franks linearization with λ = {lam:.4g}: "
        f"|f_A − f|₁ = {report.distance:.3e} (ε₀ = {eps0:g}), "
        f"sup |det − 1| = {report.det_deviation:.3e}"
    )
    return report


def _plateau_jacobian(f_A: DiffeoGrid, A: np.ndarray, lam: float) -> float:
    """max |Df_A − A| on plateau nodes whose stencil stays on the plateau."""
    domain = f_A.domain
    inner = Ball(_origin(domain.n), PLATEAU_RADIUS * lam - domain.max_spacing)
    mask = inner.closure_mask(domain)
    J = jacobian(f_A.field)[:, :, mask]
    return float(np.max(np.abs(J - A[:, :, np.newaxis]), initial=0.0))


def unimodular_target(base: np.ndarray, direction: np.ndarray, delta: float) -> np.ndarray:
    """base·exp(δ·D/‖D‖) rescaled to determinant 1."""
    direction = np.asarray(direction, dtype=float)
    n = direction.shape[0]
    direction = direction - np.trace(direction) / n * np.eye(n)
    size = operator_norm(direction)
    matrix = np.asarray(base, dtype=float)
    if size > 0:
        matrix = matrix @ expm(delta * direction / size)
    det = np.linalg.det(matrix)
    if det <= 0:
        raise ValidationError(f"Target matrix must have positive determinant, got {det:.3e}")
    return matrix / det ** (1.0 / matrix.shape[0])


def franks_sweep(
    f: DiffeoGrid,
    direction: np.ndarray,
    eps_values: Sequence[float],
    unit: Optional[Domain] = None,
) -> pl.DataFrame:
    """
    Linearize with A = Df(0)·exp(δ·direction), δ = χ_cfg·ε₀/2, for each ε₀.

    Returns:
        DataFrame with columns eps0, delta, lambda, distance, ratio, det_deviation
    """
    base = derivative_at_origin(f)
    chi = chi_cfg(f.n)
    rows = []
    for eps0 in eps_values:
        delta = chi * eps0 / 2
        report = franks_linearize(f, unimodular_target(base, direction, delta), eps0, unit)
        rows.append({
            "eps0": float(eps0),
            "delta": delta,
            "lambda": report.lam,
            "distance": report.distance,
            "ratio": report.distance / eps0,
            "det_deviation": report.det_deviation,
        })
    return pl.DataFrame(rows)
