"""Long-run SIS prevalence on either side of the spectral threshold."""
import graphon_mf as gm

for kernel, M in ((gm.constant(1.0), 1), (gm.separable_poly([0.0, 1.0]), 100)):
    beta_c = gm.epidemic_threshold(kernel, M)
    print(f"{kernel}: beta_c = {beta_c:.4f}")
    for factor in (0.7, 0.9, 1.1, 1.5):
        beta = factor * beta_c
        p = gm.long_run_prevalence(kernel, beta, M=M, T=200.0)
        print(f"  beta = {beta:6.3f}  prevalence {p:.5f}")
