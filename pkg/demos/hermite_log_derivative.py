# For N eigenvalues of a GUE-type matrix the log-derivative is known in
# closed form: -2a + sum 2/(a - x).  The regularized Coulomb sum, centred by
# its Palm expectation, recovers it from the kernel alone.
import numpy as np

from dpplog import (HermiteKernel, RegularizationSchedule, hermite_log_derivative,
                    log_derivative, spectral_sampler)

k = HermiteKernel(6)
W = k.window.half_width
sched = RegularizationSchedule(((4.0, 0.1), (6.0, 0.01), (W, 1e-4)))
rng = np.random.default_rng(7)

for a in (-1.0, 0.0, 0.8, 2.5):
    X = spectral_sampler(k, 400, (a,)).sample_palm([a], rng)
    est = log_derivative(k, a, sched, X)
    exact = hermite_log_derivative(a, X)
    steps = ", ".join(f"{v:+.5f}" for _, _, v in est.per_pair)
    print(f"a = {a:+.1f}: schedule [{steps}]  exact {exact:+.5f}  "
          f"error {abs(est.extrapolated - exact):.1e}")

#%% truncating at small R leaves a visible error: the far points carry the confinement
X = spectral_sampler(k, 400, (0.8,)).sample_palm([0.8], rng)
for R in (1.5, 3.0, W):
    s = RegularizationSchedule(((R, 0.1), (R, 0.01), (R, 1e-3)))
    print(f"R = {R:5.2f}: {log_derivative(k, 0.8, s, X).extrapolated:+.5f}"
          f"  (exact {hermite_log_derivative(0.8, X):+.5f})")
