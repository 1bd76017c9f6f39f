"""Functionals, identity residuals, decay fits and scattering diagnostics."""
from .energy import EnergyLedger, conformal_energy, dirac_energy_bound, energy_snapshot
from .fits import DecayFit, decay_fit, default_window, wrap_time
from .ghost import P_INF, ghost_identity_residual, ghost_primitive
from .scattering import Profile, ScatterTrace, free_profile, scattering_trace
from .structure import dirac_gradient_ratio, kg_interior_ratio, smallness_norm, sobolev_quotient
from .transforms import (
    SELECTORS, TransformBundle, aux_identity_residual, transform_fields, transform_residual, transform_residuals,
)

__all__ = [
    "EnergyLedger", "conformal_energy", "dirac_energy_bound", "energy_snapshot",
    "DecayFit", "decay_fit", "default_window", "wrap_time",
    "P_INF", "ghost_identity_residual", "ghost_primitive",
    "Profile", "ScatterTrace", "free_profile", "scattering_trace",
    "dirac_gradient_ratio", "kg_interior_ratio", "smallness_norm", "sobolev_quotient",
    "SELECTORS", "TransformBundle", "aux_identity_residual", "transform_fields", "transform_residual",
    "transform_residuals",
]
