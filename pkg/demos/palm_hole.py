# Conditioning the sine process on a point at 0 digs a hole there.
# The Palm intensity is 1 - sinc(x)^2, quadratic at the anchor.
import numpy as np

from dpplog import SineKernel, Window, empirical_intensity, palm_kernel, spectral_sampler
from dpplog.quadrature import composite_gauss_legendre

k = SineKernel(Window(-10, 10))
rng = np.random.default_rng(1)
sp = spectral_sampler(k, 800, (0.0,))

#%% draw Palm samples and bin them near the anchor
samples = [sp.sample_palm([0.0], rng) for _ in range(5000)]
edges = np.linspace(-2, 2, 17)
hist = empirical_intensity(samples, edges)
pk = palm_kernel(k, [0.0])

# bin averages of the exact Palm intensity, for a like-for-like comparison
exact = []
for lo, hi in zip(edges[:-1], edges[1:]):
    q = composite_gauss_legendre(lo, hi, n_panels=1, order=12)
    exact.append(q.integrate(pk.diag(q.nodes)) / (hi - lo))

mids = 0.5 * (edges[:-1] + edges[1:])
print(f"{'x':>6} {'empirical':>10} {'stderr':>8} {'exact':>8}")
for x, v, s, e in zip(mids, hist.density, hist.stderr, exact):
    print(f"{x:6.2f} {v:10.4f} {s:8.4f} {e:8.4f}")

#%% the unconditioned process has no hole
plain = empirical_intensity([sp.sample(rng) for _ in range(2000)], edges)
print("unconditioned, bins around 0:", np.round(plain.density[7:9], 3))
