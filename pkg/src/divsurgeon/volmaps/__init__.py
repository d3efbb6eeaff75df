"""Volume-preserving maps on grids: Moser maps and the Franks linearization."""

from divsurgeon.volmaps.diffeo import (
    DiffeoGrid,
    InjectivityMargin,
    compose,
    injectivity_margin,
    invert,
    jacobian_det,
    solve_preimages,
)
from divsurgeon.volmaps.franks import (
    FranksReport,
    derivative_at_origin,
    franks_linearize,
    franks_sweep,
    unimodular_target,
)
from divsurgeon.volmaps.moser import (
    JacobianTarget,
    MoserReport,
    measure_transport,
    prescribed_jacobian,
    radial_bump_target,
)

__all__ = [
    "DiffeoGrid",
    "FranksReport",
    "InjectivityMargin",
    "JacobianTarget",
    "MoserReport",
    "compose",
    "derivative_at_origin",
    "franks_linearize",
    "franks_sweep",
    "injectivity_margin",
    "invert",
    "jacobian_det",
    "measure_transport",
    "prescribed_jacobian",
    "radial_bump_target",
    "solve_preimages",
    "unimodular_target",
]
