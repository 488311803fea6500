"""Deterministic numerics for the isotropic alpha-stable semigroup."""

from .density import (StableKernel, density_at_origin, density_pt, radial_density,
                      radial_density_result, radial_inverse, sphere_area)
from .potential import (DecayReport, SubordinatorQuadrature, potential_decay_check, potential_G,
                        potential_G_fourier, potential_G_time_integral, riesz_constant, semigroup_apply,
                        semigroup_apply_subordinated, sphere_gaussian_mass)
from .scaling import P1Table, p1_table
from .constants import QuadratureValue, constant_K, constant_K1, constant_K2
