# config.py
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Parallelism (per-cube solves, per-node flows and inversions)
    threads: int = 1

    # Cube chain geometry
    cube_budget: int = 64
    cube_margin_fraction: float = 0.0625
    min_overlap_cells: int = 4
    min_gap_cells: int = 4
    coverage_threshold: float = 0.01  # min Σφ over closure(Ω₁)
    coverage_target: float = 0.05  # Σφ the annulus walk aims for before moving on

    # Transition shell of the blending cutoff, as a fraction of the K-to-U^c gap
    transition_fraction: float = 0.25

    # Tolerances for admissibility of divergence data
    mean_tolerance: float = 1e-8  # relative to ‖h‖∞·vol
    support_tolerance: float = 1e-12  # relative roundoff admitted outside Ω₁
    obstruction_tolerance: float = 1e-8

    # Report checks 🎯
    paste_residual_tolerance: float = 1e-3  # ‖div Z‖∞ relative to ‖Y − X‖₀
    smooth_residual_tolerance: float = 1e-3  # ‖div Z‖∞ relative to ‖X‖₀
    phi_residual_tolerance: float = 1e-3  # ‖div Φ(h) − h‖∞ relative to ‖h‖∞
    jacobian_tolerance: float = 1e-2

    # Flux quadrature
    flux_samples: int = 1024

    # Norm estimation
    holder_pair_budget: int = 1_000_000
    norm_seed: int = 0
    separation_pairs: int = 10_000

    # Moser flow and inversion
    rk4_step: float = 1.0 / 64.0
    newton_max_iterations: int = 50
    newton_tolerance: float = 1e-10
    inversion_residual: float = 1e-8
    clamp_mass_tolerance: float = 1e-4
    range_padding_cells: int = 0  # cells a composed image may reach past the grid

    # Homothety trick
    lambda_floor_cells: int = 16
    rescale_min_cells: int = 4
    unit_resolution: int = 256  # cells across the unit-scale box [−1, 1]^n

    # Admissibility constant χ_cfg
    chi_override: Optional[float] = None
    calibration_resolution: int = 256
    calibration_samples: int = 4

    # Logging
    logs_dir: Path = Path("logs")

    class Config:
        env_prefix = "DIVSURGEON_"
        env_file = ".env"
        env_file_encoding = "utf-8"

    def worker_count(self) -> int:
        """Number of worker threads, never below one."""
        return max(1, self.threads)


def get_settings() -> Settings:
    return Settings()
