"""Sample graphs from a two-block kernel and watch the empirical spectrum
settle onto the kernel operator's eigenvalues as N grows."""
import numpy as np

import graphon_mf as gm

kernel = gm.blockwise([[0.8, 0.2], [0.2, 0.6]])
exact = gm.spectral.eigenvalues(kernel, 2)
print("kernel eigenvalues:", np.round(exact, 4))

for n in (200, 800, 3200):
    g = gm.sample_graph(kernel, n, seed=1)
    emp = gm.empirical_graphon(g)
    top = gm.spectral.eigenvalues(emp, n)[:2]
    print(f"N={n:5d}  mean degree {g.degrees.mean():7.1f}  top eigenvalues {np.round(top, 4)}")

# the threshold for SIS is the reciprocal of the top eigenvalue
print("epidemic threshold 1/lambda_1 =", round(gm.epidemic_threshold(kernel, 2), 4))
