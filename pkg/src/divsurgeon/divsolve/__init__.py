"""Compactly supported right inverse of the divergence."""

from divsurgeon.divsolve.chain import Cube, CubeChain, build_chain, fit_chain
from divsurgeon.divsolve.cube import centered_antiderivative, solve_div_cube
from divsurgeon.divsolve.decompose import (
    Decomposition,
    class_balanced,
    decompose_chain,
    node_classes,
)
from divsurgeon.divsolve.operator import (
    DivergenceInverse,
    StabilityReport,
    div_inverse,
    measure_stability,
)

__all__ = [
    "Cube",
    "CubeChain",
    "Decomposition",
    "DivergenceInverse",
    "StabilityReport",
    "build_chain",
    "centered_antiderivative",
    "class_balanced",
    "decompose_chain",
    "div_inverse",
    "fit_chain",
    "measure_stability",
    "node_classes",
    "solve_div_cube",
]
