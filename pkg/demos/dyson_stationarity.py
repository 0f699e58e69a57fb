# Dyson Brownian motion with drift half the log-derivative keeps the Hermite
# ensemble invariant.  Doubling the confinement does not: the cloud shrinks.
import numpy as np

from dpplog import DiffusionConfig, HermiteKernel, run_diffusion

k = HermiteKernel(5)
for c in (1.0, 2.0):
    rep = run_diffusion(k, DiffusionConfig(dt=1e-3, T=0.5, confinement=c), 300, rng=11)
    print(f"confinement {c}: max |z| = {rep.max_abs_z:.2f}, gap KS p = {rep.gap_ks_pvalue:.3f}")
    print("   density_0:", np.round(rep.density_0, 3))
    print("   density_T:", np.round(rep.density_T, 3))
