"""Maps with a prescribed Jacobian, built from the flow of a divergence corrector.

For θ > 0 with θ − 1 supported in a shell of the unit ball and ∫(θ − 1) = 0,
the corrector u = Φ(θ − 1) is supported in the collar annulus between ⅓B
and ⅔B. Flowing dy/dt = u(y) / ((1 − t)θ(y) + t) for unit time gives φ with
det Dφ = θ, and φ is the identity wherever u vanishes.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import ceil, gamma, pi
from typing import Optional, Sequence

import numpy as np
import polars as pl
from scipy.stats import qmc

from divsurgeon.config import get_settings
from divsurgeon.cutoffs import bump
from divsurgeon.divsolve.chain import fit_chain
from divsurgeon.divsolve.operator import DivergenceInverse
from divsurgeon.errors import GeometryError, RangeError
from divsurgeon.grid.calculus import Interpolant, divergence, integrate_values
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Annulus, Box
from divsurgeon.logger import logger, logger_timer
from divsurgeon.validators import raise_if_errors, validate_support_ball
from divsurgeon.volmaps.diffeo import DiffeoGrid, escape_distance, jacobian_det, solve_preimages

COLLAR_INNER = 1.0 / 3.0
COLLAR_OUTER = 2.0 / 3.0
DEFAULT_SHELL = (0.44, 0.56)
CHAIN_SIDE_FRACTION = 0.8  # cube side over the collar annulus width
OUTSIDE_TOLERANCE = 1e-12
MASS_TOLERANCE = 1e-6  # relative to meas(B)


def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


def _origin(n: int) -> tuple[float, ...]:
    return tuple(0.0 for _ in range(n))


def collar_annulus(n: int) -> Annulus:
    """The open annulus between ⅓B and ⅔B, where the flow may move points."""
    return Annulus(_origin(n), COLLAR_INNER, COLLAR_OUTER)


@dataclass(frozen=True, eq=False)
class JacobianTarget:
    """A positive density θ on the unit-scale grid with θ = 1 off a shell."""

    theta: ScalarField
    shell: Annulus

    def __post_init__(self) -> None:
        raise_if_errors(self.validate(), "Jacobian target")

    @property
    def domain(self) -> Domain:
        return self.theta.domain

    @property
    def trivial(self) -> bool:
        return bool(np.all(self.theta.values == 1.0))

    def validate(self) -> list[str]:
        domain = self.domain
        theta = self.theta.values
        errors = []
        if domain.periodic:
            return ["Jacobian targets live on box domains"]
        errors.extend(
            validate_support_ball(
                _origin(domain.n), COLLAR_OUTER, domain.lower, domain.lengths, False
            )
        )
        if any(abs(c) > 1e-12 for c in self.shell.center):
            errors.append(f"Shell must be centered at the origin, got {self.shell.center}")
        if not COLLAR_INNER < self.shell.inner or not self.shell.outer < COLLAR_OUTER:
            errors.append(
                f"Shell ({self.shell.inner:g}, {self.shell.outer:g}) must lie strictly "
                f"between radii {COLLAR_INNER:.4g} and {COLLAR_OUTER:.4g}"
            )
        if not np.all(theta > 0):
            errors.append(f"θ must be positive, min θ = {float(np.min(theta)):.3e}")
        outside = ~self.shell.closure_mask(domain)
        leak = float(np.max(np.abs(theta[outside] - 1.0), initial=0.0))
        if leak > OUTSIDE_TOLERANCE:
            errors.append(f"θ − 1 reaches {leak:.3e} outside the shell")
        mass = integrate_values(theta - 1.0, domain).value
        if abs(mass) > MASS_TOLERANCE * unit_ball_volume(domain.n):
            errors.append(f"∫(θ − 1) = {mass:.3e} is not zero")
        return errors


def radial_bump_target(
    domain: Domain,
    amplitude: float = 0.1,
    shell: Optional[Annulus] = None,
) -> JacobianTarget:
    """
    θ = 1 + c·b(u)·(sin πu − m) with u the radius rescaled to (−1, 1) across
    the shell, b the classic bump, m fixing ∫(θ − 1) = 0 and c the amplitude.

    Args:
        domain: Unit-scale box grid
        amplitude: sup |θ − 1|, below 1
        shell: Support shell (DEFAULT_SHELL around the origin if None)
    """
    if not 0 <= amplitude < 1:
        raise GeometryError(f"Amplitude must lie in [0, 1), got {amplitude}")
    shell = shell or Annulus(_origin(domain.n), *DEFAULT_SHELL)
    radius = np.linalg.norm(domain.points(), axis=-1)
    middle = (shell.inner + shell.outer) / 2
    u = (radius - middle) / ((shell.outer - shell.inner) / 2)
    weight = bump(u)
    profile = np.sin(pi * u)
    values = weight * profile
    values = values - (
        integrate_values(values, domain).value / integrate_values(weight, domain).value
    ) * weight
    peak = float(np.max(np.abs(values)))
    if peak > 0:
        values = values * (amplitude / peak)
    return JacobianTarget(ScalarField(domain, 1.0 + values), shell)


@dataclass(frozen=True, eq=False)
class MoserReport:
    phi: DiffeoGrid
    residual: float  # sup |det Dφ − θ|
    collar_exact: bool  # φ = Id bit for bit off the collar annulus
    corrector_residual: float  # sup |div u − (θ − 1)| / sup |θ − 1|
    steps: int
    cubes: int

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "jacobian": self.residual <= get_settings().jacobian_tolerance,
            "collar_exact": self.collar_exact,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_mapping(self) -> dict[str, float]:
        entries = {
            "moser.residual": self.residual,
            "moser.corrector_residual": self.corrector_residual,
            "moser.steps": float(self.steps),
            "moser.cubes": float(self.cubes),
        }
        for name, ok in self.checks.items():
            entries[f"check.{name}"] = float(ok)
        return entries


def _rk4(
    reader: Interpolant, domain: Domain, y: np.ndarray, steps: int
) -> np.ndarray:
    """Integrate dy/dt = u(y) / ((1 − t)θ(y) + t) over t ∈ [0, 1]."""
    n = domain.n
    slack = 1e-9 * max(domain.lengths)
    dt = 1.0 / steps

    def rate(points: np.ndarray, t: float) -> np.ndarray:
        escape = escape_distance(domain, points)
        if escape > slack:
            raise RangeError("Moser flow left the grid", escape=escape)
        sample = reader(np.clip(points, domain.lower, domain.upper))
        return sample[:, :n] / ((1 - t) * sample[:, n:] + t)

    for k in range(steps):
        t = k * dt
        k1 = rate(y, t)
        k2 = rate(y + dt / 2 * k1, t + dt / 2)
        k3 = rate(y + dt / 2 * k2, t + dt / 2)
        k4 = rate(y + dt * k3, t + dt)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


@logger_timer("Moser flow")
def prescribed_jacobian(
    target: JacobianTarget, step: Optional[float] = None
) -> MoserReport:
    """
    Build φ with det Dφ = θ, equal to the identity off the collar annulus.

    Args:
        target: Validated Jacobian target
        step: RK4 time step (settings.rk4_step)

    Returns:
        MoserReport with φ

    Raises:
        GeometryError: no cube chain fits the collar annulus
        RangeError: the flow left the grid
    """
    settings = get_settings()
    domain = target.domain
    n = domain.n
    identity = DiffeoGrid.identity(domain)
    if target.trivial:
        logger.info("🟰 θ ≡ 1, φ is the identity")
        return MoserReport(identity, 0.0, True, 0.0, 0, 0)

    omega = collar_annulus(n)
    chain = fit_chain(
        target.shell, omega, CHAIN_SIDE_FRACTION * (COLLAR_OUTER - COLLAR_INNER), domain
    )
    datum = ScalarField(domain, target.theta.values - 1.0)
    u = DivergenceInverse(chain)(datum)
    corrector_residual = (divergence(u) - datum).sup() / datum.sup()

    reader = Interpolant(
        domain,
        np.concatenate(
            [np.moveaxis(u.data, 0, -1), target.theta.values[..., np.newaxis]], axis=-1
        ),
    )
    steps = max(1, ceil(1.0 / (step or settings.rk4_step)))
    moving = omega.grown(2 * domain.max_spacing).mask(domain)
    start = domain.points()[moving]

    workers = settings.worker_count()
    chunks = np.array_split(np.arange(start.shape[0]), workers)

    def flow(chunk: np.ndarray) -> np.ndarray:
        return _rk4(reader, domain, start[chunk], steps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ends = list(pool.map(flow, chunks))
    else:
        ends = [flow(chunk) for chunk in chunks]

    images = np.array(identity.images, copy=True)
    images[:, moving] = np.concatenate(ends).T
    phi = DiffeoGrid(domain, images)

    frozen = ~omega.mask(domain)
    report = MoserReport(
        phi=phi,
        residual=float(np.max(np.abs(jacobian_det(phi).values - target.theta.values))),
        collar_exact=bool(np.array_equal(phi.images[:, frozen], identity.images[:, frozen])),
        corrector_residual=corrector_residual,
        steps=steps,
        cubes=len(chain.cubes),
    )
    status = "✅" if report.passed else "⚠️"
    logger.info(
        f"{status} Moser map in {steps} RK4 steps over {len(chain.cubes)} cubes: "
        f"sup |det Dφ − θ| = {report.residual:.3e}"
    )
    return report


def measure_transport(
    phi: DiffeoGrid,
    theta: ScalarField,
    boxes: Sequence[Box],
    log2_samples: int = 17,
    seed: int = 0,
) -> pl.DataFrame:
    """
    Compare vol φ(R) with ∫_R θ on boxes R by scrambled Sobol sampling.

    vol φ(R) counts the points p of a bounding box of φ(R) with φ⁻¹(p) ∈ R;
    ∫_R θ averages θ over Sobol points of R.

    Returns:
        DataFrame with columns box, image_volume, predicted, error
    """
    domain = phi.domain
    n = domain.n
    theta_at = Interpolant(domain, theta.values)
    h = domain.max_spacing
    rows = []
    for k, box in enumerate(boxes):
        lower, upper = np.asarray(box.lower), np.asarray(box.upper)
        sampler = qmc.Sobol(d=n, scramble=True, seed=seed + 2 * k)
        inside = qmc.scale(sampler.random_base2(m=log2_samples), lower, upper)
        predicted = float(np.prod(upper - lower) * np.mean(theta_at(inside)))

        near = box.grown(2 * h).closure_mask(domain)
        images = np.moveaxis(phi.images, 0, -1)[near]
        low = np.maximum(images.min(axis=0) - 2 * h, domain.lower)
        high = np.minimum(images.max(axis=0) + 2 * h, domain.upper)
        sampler = qmc.Sobol(d=n, scramble=True, seed=seed + 2 * k + 1)
        samples = qmc.scale(sampler.random_base2(m=log2_samples), low, high)
        preimages, _ = solve_preimages(phi, samples)
        hit = np.all((preimages >= lower) & (preimages <= upper), axis=-1)
        image_volume = float(np.prod(high - low) * np.mean(hit))

        rows.append({
            "box": box.describe(),
            "image_volume": image_volume,
            "predicted": predicted,
            "error": abs(image_volume - predicted),
        })
    return pl.DataFrame(rows)
