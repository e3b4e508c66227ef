"""
Estimating the noise level from the stream
==========================================

Repeated looks through one fixed blur give a consistent variance
estimate. A badly blurred look carries almost no signal in its weak
frequencies, so its power there estimates the noise from above.
"""

import numpy as np

from seqdeconv.noise_variance import epsilon_consistent, epsilon_tail, flag_low_quality
from seqdeconv.simlab import gaussian_kernel, gen_theta_smooth, make_rng, sample_kernel, simulate_observation
from seqdeconv.spectral import SpectralBasis, diagonalize, to_spectral

p, eps = 64, 0.3
basis = SpectralBasis.one_d(p)
theta = gen_theta_smooth(p)
rng = make_rng(1)

# fixed kernel: converges to eps^2
kernel = sample_kernel(rng, p)
for n in (10, 100, 1000):
    ys = [simulate_observation(rng, theta, eps, kernel=kernel) for _ in range(n)]
    print(f"consistent, fixed kernel, n'={n:5d}: {epsilon_consistent(ys):.4f}  (eps^2 = {eps**2})")

# varying kernels: the blurred means differ, so the estimate is inflated
ys = [simulate_observation(rng, theta, eps, kernel=sample_kernel(rng, p)) for _ in range(1000)]
print(f"consistent, varying kernels:       {epsilon_consistent(ys):.4f}  (upper bound)")

# tail of a strongly blurred observation
d = diagonalize(basis, gaussian_kernel(p, 3.0))
flag = flag_low_quality(d)
x = to_spectral(basis, simulate_observation(rng, theta, eps, kernel=gaussian_kernel(p, 3.0)))
print(f"flagged={flag.flagged}, strong components={flag.p_prime}, "
      f"tail estimate {epsilon_tail(x, flag.p_prime, flag.order):.4f}")
