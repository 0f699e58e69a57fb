# The defining identity of the log-derivative,
#     E_C[chi'(a) psi(X)] = -E_C[d(a, X) chi(a) psi(X)],
# checked on the Campbell measure for a few product observables.
# Small sample sizes here; the acceptance suite runs 1e5 samples.
import numpy as np

from dpplog import (STANDARD_PSI, HermiteKernel, RegularizationSchedule, SineKernel, Window,
                    ibp_battery)

cases = [("hermite:4", HermiteKernel(4), 400), ("sine [-10,10]", SineKernel(Window(-10, 10)), 1200)]
for name, k, nodes in cases:
    W = k.window.half_width
    sched = RegularizationSchedule(((W - 1, 1e-2), (W - 0.5, 1e-3), (W, 1e-4)))
    res = ibp_battery(k, STANDARD_PSI, sched, 4000, np.random.default_rng(3), n_nodes=nodes)
    print(name)
    for r in res:
        print(f"  {r.name:10s} lhs {r.lhs.value:+.4f} +- {r.lhs.stderr:.4f}   "
              f"rhs {r.rhs.value:+.4f} +- {r.rhs.stderr:.4f}   z {r.z_score:.2f}")
