"""Finite-n slopes -(1/n) log P(mean |x| >= a) against the tilted-family rate.

At desk scale the slopes still fall with n, well above the reference, so
this prints the table rather than asserting convergence.

Usage: python demos/ldp_slopes.py [chains]
"""

import sys

from meanfield_ldp.ldp_harness import EventSpec, estimate_ldp_curve
from meanfield_ldp.models import rb_logistic_flux
from meanfield_ldp.sampler import SamplerConfig

chains = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
est = estimate_ldp_curve(rb_logistic_flux(), EventSpec.mean_abs_at_least(1.8), [8, 16, 32], chains,
                         SamplerConfig(n=2, burn_in=500, seed=6))
print(f"tilted-family reference: {est.reference:.4f}")
for r in est.rows:
    slope = f"{r.slope:.4f}" if r.slope is not None else "  none"
    print(f"n = {r.n:>2}: hits {r.hits:>5}/{r.total}, slope {slope} in [{r.slope_lower:.4f}, {r.slope_upper:.4f}]")
