"""Sample the centred Gibbs measure and compare capital distribution curves.

MALA draws configurations of n = 64 particles for the logistic flux; the
pooled empirical capital curve is compared with the curve built from
equilibrium quantiles.

Usage: python demos/gibbs_sampling_capital.py
"""

from meanfield_ldp.ldp_harness import equilibrium
from meanfield_ldp.models import rb_logistic_flux
from meanfield_ldp.sampler import SamplerConfig, sample_equilibrium
from meanfield_ldp.spt import empirical_curve, typical_curve

model = rb_logistic_flux()
cfg = SamplerConfig(n=64, chains=500, burn_in=500, thin=20, total_samples=10, seed=1)
s = sample_equilibrium(model, cfg)
d = s.diagnostics
print(f"{len(s)} samples, acceptance {d['acceptance_rate']:.2f}, step {d['step']:.3f}, ESS {d['ess']:.0f}")

emp = empirical_curve(s.samples)
typ = typical_curve(model, 64, eq=equilibrium(model))
print(f"sup distance between log-weight curves: {emp.sup_distance(typ):.3f}")
for k in (0, 7, 31, 63):
    print(f"rank {k + 1:>2}: empirical {emp.log_weight[k]:+.3f}, typical {typ.log_weight[k]:+.3f}")
