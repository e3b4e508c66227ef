"""
Circular convolution in the Fourier basis
=========================================

A circulant blur is diagonal in the unitary DFT basis. This script checks
that against a dense matrix and shows how little of a Gaussian blur's
spectrum survives at high frequency.
"""

import numpy as np
import scipy.linalg

from seqdeconv import SpectralBasis, diagonalize, from_spectral, to_spectral
from seqdeconv.simlab import gaussian_kernel, gen_theta_peaked

p = 64
basis = SpectralBasis.one_d(p)
theta = gen_theta_peaked(p)
kernel = gaussian_kernel(p, sigma=1.5)

# eigenvalues of the blur, one per frequency
d = diagonalize(basis, kernel)

# blur in the spectral domain, then come back
blurred, imag = from_spectral(basis, d * to_spectral(basis, theta))
dense = scipy.linalg.circulant(kernel) @ theta
print("max |FFT path - dense matrix| =", np.abs(blurred - dense).max())
print("imaginary residual            =", imag)

# the blur multiplies frequency j by |d_j|
for j in (0, 4, 8, 16, 32):
    print(f"|d_{j:<2}| = {abs(d[j]):.3e}")
