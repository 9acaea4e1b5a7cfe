"""Convergence of the P1/L1 direct solver against the exact solution.

For f = sin(pi x), mu = 1 the final state is known in closed form,

    u(x, T) = sin(pi x) T^alpha E_{alpha, alpha+1}(-pi^2 T^alpha),

so the discretisation error can be measured directly. The time error
halves with the step (first order) once the mesh is fine, and the space
error drops by about four per halving of h once the steps are small.
"""
import numpy as np

from fracinv import SubdiffusionOperator, TimeGrid, build_interval_mesh, mittag_leffler


def error(n, K, alpha, T=1.0):
    mesh = build_interval_mesh(n)
    x = mesh.nodes[:, 0]
    op = SubdiffusionOperator(mesh, TimeGrid(T, K), alpha, 1.0)
    u = op.forward_final(np.sin(np.pi * x))
    exact = np.sin(np.pi * x) * T**alpha * mittag_leffler(alpha, alpha + 1, -np.pi**2 * T**alpha)
    return op.norm(u - exact) / op.norm(exact)


for alpha in (0.3, 0.5, 0.9):
    print(f"alpha = {alpha}")
    print("  time refinement on N = 1024")
    prev = None
    for K in (32, 64, 128, 256):
        e = error(1024, K, alpha)
        print(f"    M = {K:4d}  error {e:.3e}" + (f"  ratio {prev / e:.2f}" if prev else ""))
        prev = e
    print("  space refinement with M = 4000")
    prev = None
    for n in (8, 16, 32):
        e = error(n, 4000, alpha)
        print(f"    N = {n:4d}  error {e:.3e}" + (f"  ratio {prev / e:.2f}" if prev else ""))
        prev = e
