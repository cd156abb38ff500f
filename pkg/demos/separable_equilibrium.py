"""Closed-form endemic equilibrium for W(x, y) = x y against a long
mean-field run, on the same grid and on the continuum."""
import numpy as np

import graphon_mf as gm

beta, M = 6.0, 100
kernel = gm.separable_poly([0.0, 1.0])
sol = gm.solve(kernel, gm.sis(beta), gm.sis_initial(0.01), M, dt=0.05, T=200.0)
long_run = sol.values[-1, :, 1]

on_grid = gm.sis_equilibrium_separable(kernel, beta, quadrature_M=M, nodes="right")
continuum = gm.sis_equilibrium_separable(kernel, beta).on_grid(M)
print("sup gap, same grid:      ", np.abs(long_run - on_grid.values[:, 0]).max())
print("sup gap, continuum limit:", np.abs(long_run - continuum.values[:, 0]).max())
print("below threshold:", gm.sis_equilibrium_separable(kernel, 2.0))
