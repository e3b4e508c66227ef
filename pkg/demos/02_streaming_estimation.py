"""
Estimating a signal from a stream of differently blurred copies
===============================================================

Each observation is folded into an O(p) state; the estimate can be
computed at any time. Two half-streams merged together give the same
state as the whole stream.
"""

import numpy as np

from seqdeconv import EstimatorSpec, estimate, init_state, merge, update
from seqdeconv.simlab import gen_theta_smooth, make_rng, sample_kernel
from seqdeconv.spectral import SpectralBasis, diagonalize, to_spectral

p = 128
basis = SpectralBasis.one_d(p)
theta = gen_theta_smooth(p)
eps = np.abs(theta).sum() / p   # signal-to-noise ratio 1
rng = make_rng(2024)

state = init_state(basis)
halves = [init_state(basis), init_state(basis)]
for i in range(200):
    k = sample_kernel(rng, p)
    y = np.real(np.fft.ifft(np.fft.fft(k) * np.fft.fft(theta))) + eps * rng.standard_normal(p)
    d, x = diagonalize(basis, k), to_spectral(basis, y)
    state = update(state, d, x)
    halves[i % 2] = update(halves[i % 2], d, x)
    if i + 1 in (10, 50, 200):
        est = estimate(state, EstimatorSpec("soft"), eps)
        err = np.linalg.norm(est.theta_hat - theta) / np.linalg.norm(theta)
        print(f"n={i + 1:4d}  relative error {err:.3f}  zeroed components {est.n_zeroed}")

both = merge(*halves)
print("merged halves match the full stream:", np.allclose(both.num, state.num) and both.n == state.n)
print("state round-trips through JSON:", type(state).from_json(state.to_json()) == state)
