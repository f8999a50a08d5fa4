"""Stationary density of the rank-based system with flux B(u) = u(1 - u).

The fixed-point iteration recovers the logistic density, whose free energy
is -1 at sigma^2 = 2. A standard normal density has positive rate, split into a
relative-entropy part and a non-positive Gamma part for this concave flux.

Usage: python demos/stationary_logistic.py
"""

import numpy as np
from scipy import stats

from meanfield_ldp.densities import GridDensity, entropy, energy_of_density, fokker_planck_residual, logistic_density, rate, rate_gap
from meanfield_ldp.ldp_harness import equilibrium
from meanfield_ldp.models import rb_logistic_flux

model = rb_logistic_flux()
eq = equilibrium(model)
p = eq.density
print(f"grid [{p.a}, {p.b}] with {p.m} cells, {p.meta['iterations']} iterations")
print(f"sup |p - logistic|      = {np.max(np.abs(p.values - logistic_density(p.x))):.2e}")
print(f"Fokker-Planck residual  = {fokker_planck_residual(p, model):.2e}")
print(f"entropy, energy, F_star = {entropy(p):.6f}, {energy_of_density(p, model):.6f}, {eq.F_star:.6f}")

normal = GridDensity.from_function(stats.norm.pdf, p.a, p.b, p.m)
parts = rate_gap(normal, model, p)
print(f"rate of N(0, 1): {rate(normal, model, eq.F_star):.6f}")
print(f"  relative entropy part {parts['relative_entropy_part']:.6f}, Gamma part {parts['gamma_part']:.6f}")
