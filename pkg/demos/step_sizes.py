"""The step-size condition, and what happens at alpha = 0.3.

The sufficient condition (1 - 3 c^2 s0) / s0 > beta^2 (s0 / u0) |grad|^2
needs s0 < 1 / (3 c^2). With c the norm of the forward map this bound is
far below the published s0 = 300 for every setting. For alpha = 0.9 the
iteration converges anyway. For alpha = 0.3 the forward map is larger
(c is about 0.087), s0 c^2 exceeds 2 and the iteration blows up. Lowering
s0 restores convergence.
"""
from fracinv import experiments as ex

for alpha in (0.3, 0.9):
    rep = ex.norms_report(ex.ExperimentConfig(alpha=alpha))
    print(f"alpha={alpha}: c={rep['c']:.4f}, |grad|={rep['grad_norm']:.1f}, "
          f"s0 bound {rep['sigma0_bound']:.1f}, s0 c^2 = {300 * rep['c'] ** 2:.2f}")

print("\nExample 1, alpha=0.3, delta_rel=2%, (beta, gamma)=(5e-8, 5e-8)")
for sigma0 in (300.0, 200.0, 100.0, 50.0):
    config = ex.resolve_config(None, {"source": "example1", "alpha": 0.3, "delta_rel": 0.02,
                                      "beta": 5e-8, "gamma": 5e-8, "sigma0": sigma0})
    row, _, _ = ex.invert(config, force=True)
    e = f"{row.e_r:.4f}" if row.e_r is not None and row.e_r < 1e3 else f"{row.e_r:.2e}"
    print(f"  sigma0={sigma0:5.0f}: n={row.n:5d}  e_r={e}  ({row.stop_reason})")
print("published: e_r = 0.0448")
