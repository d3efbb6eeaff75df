"""Measured spot-checks of the estimates behind the constructions."""

from divsurgeon.verify.estimates import (
    CheckStats,
    InverseCloseness,
    check_inverse_closeness,
    check_inverse_composition_bound,
    check_norm_sandwich,
    constant_chain,
    run_inverse_closeness_checks,
    run_inverse_composition_checks,
)

__all__ = [
    "CheckStats",
    "InverseCloseness",
    "check_inverse_closeness",
    "check_inverse_composition_bound",
    "check_norm_sandwich",
    "constant_chain",
    "run_inverse_closeness_checks",
    "run_inverse_composition_checks",
]
