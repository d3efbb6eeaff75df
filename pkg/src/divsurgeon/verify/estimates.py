"""Spot-checks of the linear estimates behind the linearization lemmas."""

from typing import NamedTuple, Optional, Sequence

import numpy as np

from divsurgeon.cutoffs import chain_partition, unit_mass_window
from divsurgeon.divsolve.chain import CubeChain
from divsurgeon.divsolve.operator import measure_stability
from divsurgeon.divsolve.samples import interior_bump
from divsurgeon.errors import UnsupportedOrderError, VerificationFailure
from divsurgeon.grid.calculus import integrate_values
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Ball
from divsurgeon.logger import logger
from divsurgeon.norms import MAX_ORDER, NormReport, cr_norm, operator_norm
from divsurgeon.validators import ValidationError
from divsurgeon.volmaps.diffeo import DiffeoGrid, invert

# Relative slack for comparisons between quantities computed from the same samples
ROUNDOFF = 1e-12


class CheckStats(NamedTuple):
    checked: int
    violations: int
    worst_ratio: float  # max measured / bound


def check_inverse_composition_bound(
    A: np.ndarray, D: np.ndarray, delta: float, c: float
) -> bool:
    """
    ‖A⁻¹D − Id‖ < (c + 1)^{n−1}·δ for A ∈ SL(n), ‖D‖ ≤ c and ‖A − D‖ < δ ≤ 1.

    Raises:
        ValidationError: the hypotheses do not hold
    """
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    n = A.shape[0]
    if not 0 < delta <= 1:
        raise ValidationError(f"δ must lie in (0, 1], got {delta}")
    if abs(np.linalg.det(A) - 1) > 1e-10:
        raise ValidationError(f"A must have determinant 1, got {np.linalg.det(A):.3e}")
    if operator_norm(D) > c * (1 + ROUNDOFF):
        raise ValidationError(f"‖D‖ = {operator_norm(D):.4g} exceeds c = {c:g}")
    if operator_norm(A - D) >= delta:
        raise ValidationError(f"‖A − D‖ = {operator_norm(A - D):.4g} is not below δ")
    deviation = operator_norm(np.linalg.solve(A, D) - np.eye(n))
    return deviation < (c + 1) ** (n - 1) * delta


def _rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pair(
    n: int, c: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Random (A, D, δ) meeting the hypotheses of the composition bound.

    D = U·diag(s)·Vᵀ has det 1 and singular values in [1/c, c]; A is a
    perturbation of D rescaled back to det 1.
    """
    while True:
        logs = rng.uniform(-np.log(c) / 2, np.log(c) / 2, size=n)
        logs -= logs.mean()
        D = _rotation(n, rng) @ np.diag(np.exp(logs)) @ _rotation(n, rng).T
        delta = float(rng.uniform(0.01, 1.0))
        E = rng.normal(size=(n, n))
        E *= rng.uniform(0.1, 0.5) * delta / operator_norm(E)
        candidate = D + E
        det = np.linalg.det(candidate)
        if det <= 0:
            continue
        A = candidate / det ** (1.0 / n)
        if operator_norm(A - D) < delta and operator_norm(D) <= c:
            return A, D, delta


def run_inverse_composition_checks(
    count: int = 100,
    c_values: Sequence[float] = (1.0, 2.0, 4.0),
    seed: int = 0,
    n: int = 2,
) -> CheckStats:
    """
    Check the composition bound on random pairs for every c.

    Raises:
        VerificationFailure: any pair violates the bound
    """
    rng = np.random.default_rng(seed)
    checked = violations = 0
    worst = 0.0
    for c in c_values:
        for _ in range(count):
            A, D, delta = random_pair(n, c, rng)
            bound = (c + 1) ** (n - 1) * delta
            ratio = operator_norm(np.linalg.solve(A, D) - np.eye(n)) / bound
            worst = max(worst, ratio)
            checked += 1
            if not check_inverse_composition_bound(A, D, delta, c):
                violations += 1
    stats = CheckStats(checked, violations, worst)
    logger.info(
        f"🔎 Composition bound: {checked} pairs, {violations} violations, "
        f"worst ratio {worst:.3f}"
    )
    if violations:
        raise VerificationFailure(
            f"{violations} of {checked} pairs violate ‖A⁻¹D − Id‖ < (c + 1)^(n−1)·δ"
        )
    return stats


class InverseCloseness(NamedTuple):
    forward: float  # ‖φ − Id‖₁
    inverse: float  # ‖φ⁻¹ − Id‖₁
    delta: float

    @property
    def holds(self) -> bool:
        return self.inverse < 3 * self.delta


def check_inverse_closeness(phi: DiffeoGrid, delta: float) -> InverseCloseness:
    """
    For ‖φ − Id‖₁ < δ ≤ ½ measure ‖φ⁻¹ − Id‖₁, expected below 3δ.

    Raises:
        ValidationError: δ > ½ or φ is not δ-close to the identity
    """
    if not 0 < delta <= 0.5:
        raise ValidationError(f"δ must lie in (0, ½], got {delta}")
    forward = cr_norm(phi.displacement(), 1).value
    if forward >= delta:
        raise ValidationError(f"‖φ − Id‖₁ = {forward:.4g} is not below δ = {delta:g}")
    inverse = cr_norm(invert(phi).displacement(), 1).value
    return InverseCloseness(forward, inverse, delta)


def random_near_identity(
    domain: Domain, rng: np.random.Generator, size: float, modes: int = 3
) -> DiffeoGrid:
    """Id plus a smooth displacement supported in 0.8B with |φ − Id|₁ = size."""
    weight = interior_bump(domain, Ball(tuple(0.0 for _ in range(domain.n)), 0.8))
    mesh = domain.mesh()
    components = []
    for _ in range(domain.n):
        signal = np.zeros(domain.shape)
        for _ in range(modes):
            frequency = rng.integers(1, modes + 1, size=domain.n)
            phase = rng.uniform(0, 2 * np.pi)
            argument = sum(
                np.pi * k * (x - lo) / length
                for k, x, lo, length in zip(frequency, mesh, domain.lower, domain.lengths)
            )
            signal = signal + rng.normal() * np.cos(argument + phase)
        components.append(weight * signal)
    displacement = np.stack(components)
    scale = cr_norm(VectorField(domain, displacement), 1).value
    identity = np.moveaxis(domain.points(), -1, 0)
    return DiffeoGrid(domain, identity + displacement * (size / scale))


def run_inverse_closeness_checks(
    domain: Domain,
    count: int = 20,
    seed: int = 0,
    sizes: tuple[float, float] = (0.01, 0.15),
) -> CheckStats:
    """
    Check ‖φ⁻¹ − Id‖₁ < 3δ on random near-identity maps with δ just above ‖φ − Id‖₁.

    Raises:
        VerificationFailure: any map violates the bound
    """
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    for _ in range(count):
        size = float(rng.uniform(*sizes))
        phi = random_near_identity(domain, rng, size)
        result = check_inverse_closeness(phi, min(0.5, size * 1.01))
        worst = max(worst, result.inverse / (3 * result.delta))
        if not result.holds:
            violations += 1
    stats = CheckStats(count, violations, worst)
    logger.info(
        f"🔎 Inverse closeness: {count} maps, {violations} violations, "
        f"worst ratio {worst:.3f}"
    )
    if violations:
        raise VerificationFailure(f"{violations} of {count} maps violate ‖φ⁻¹ − Id‖₁ < 3δ")
    return stats


def check_norm_sandwich(report: NormReport, n: int) -> bool:
    """|F|_r ≤ ‖F‖_{C^r} ≤ n^{(r+1)/2}·|F|_r with ‖F‖_{C^r} the Whitney estimate."""
    coordinate = max(report.per_order)
    upper = n ** ((report.r + 1) / 2) * coordinate
    return bool(
        coordinate <= report.whitney * (1 + ROUNDOFF)
        and report.whitney <= upper * (1 + ROUNDOFF)
    )


def _window_norm(side: float, r: int) -> float:
    """max_{k ≤ r} sup |window^{(k)}| of the unit-mass window on (0, side)."""
    window = unit_mass_window(side)
    values = window.samples()
    best = float(np.max(np.abs(values)))
    for _ in range(r):
        values = np.gradient(values, window.spacing)
        best = max(best, float(np.max(np.abs(values))))
    return best


def constant_chain(
    chain: CubeChain,
    xi: ScalarField,
    r: int,
    samples: int = 3,
    seed: Optional[int] = None,
) -> dict[str, float]:
    """
    A-priori constants of the paste estimate next to the measured one.

    C1 = n·2^r·|ξ|_{r+1}, C2 = 2^r·d1 + N²·2^{N−3}·d2·meas Ω,
    C3 = (2^r·d0)^n and the bound (N + 1)·C1·C2·C3, where d1, d2 and d0 are
    the measured r-norms of the partition bumps, transfer windows and the
    unit-mass window.

    Returns:
        Mapping of constants.* keys
    """
    if r + 1 > MAX_ORDER:
        raise UnsupportedOrderError(f"Constant chain needs |ξ|_(r+1) with r + 1 ≤ {MAX_ORDER}")
    domain = chain.domain
    n = domain.n
    N = chain.N
    psi, eta = chain_partition(chain)
    d1 = max(cr_norm(p, r).value for p in psi)
    d2 = max((cr_norm(e, r).value for e in eta), default=0.0)
    d0 = max(_window_norm(cube.side(domain), r) for cube in chain.cubes)
    meas_omega = integrate_values(chain.omega.mask(domain).astype(float), domain).value

    c1 = n * 2**r * cr_norm(xi, r + 1).value
    c2 = 2**r * d1 + N**2 * 2.0 ** (N - 3) * d2 * meas_omega
    c3 = (2**r * d0) ** n
    bound = (N + 1) * c1 * c2 * c3
    measured = measure_stability(
        chain, samples=samples, order=r, seed=0 if seed is None else seed
    ).constant
    logger.info(
        f"📐 Constant chain: bound {bound:.3e} against measured C_meas {measured:.3e}"
    )
    return {
        "constants.N": float(N),
        "constants.d0": d0,
        "constants.d1": d1,
        "constants.d2": d2,
        "constants.meas_omega": meas_omega,
        "constants.C1": c1,
        "constants.C2": c2,
        "constants.C3": c3,
        "constants.bound": bound,
        "constants.measured": measured,
    }
