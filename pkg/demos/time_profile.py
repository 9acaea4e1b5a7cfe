"""Which time profile mu(t) do the published tables correspond to?

The text states mu(t) = sin(2 pi t), but every table row stops by the
discrepancy principle with res about 1.2 delta, where
delta = delta_rel ||g||. Dividing the published residual by
delta_rel ||g|| therefore recovers a factor close to 1.2 only if ||g|| is
computed with the right profile. This script evaluates that factor for a
few published rows under both candidate profiles, then runs Example 1
with each.
"""
import numpy as np

from fracinv import experiments as ex

# (source, alpha, delta_rel, published res)
ROWS = [("example1", 0.9, 0.005, 7.2923e-05), ("example1", 0.9, 0.02, 2.9186e-04),
        ("example1", 0.3, 0.02, 3.0487e-04), ("example2", 0.9, 0.01, 5.0506e-04),
        ("example3", 0.9, 0.005, 7.4150e-05), ("example3", 0.3, 0.001, 1.7274e-05)]

for mu in ("sin", "cos"):
    print(f"mu = {mu}(2 pi t)")
    for source, alpha, d, res in ROWS:
        c = ex.ExperimentConfig(source=source, alpha=alpha, mu=mu)
        mesh = c.mesh()
        op = c.operator(mesh)
        f = c.source_field(mesh)
        g = op.forward_final(f)
        print(f"  {source} alpha={alpha} delta_rel={d}: res / (delta_rel ||g||) = {res / (d * op.norm(g)):.3f},"
              f"  ||S f|| / ||f|| = {op.norm(g) / op.norm(f):.4f}")
    row, _, _ = ex.invert(ex.resolve_config(None, {"source": "example1", "mu": mu}), force=True)
    print(f"  Example 1 reconstruction: e_r = {row.e_r:.4f} after {row.n} iterations\n")
