"""Checking PID gains before running them.

Convergence is guaranteed when three inequalities between the gains and two
constants of the potential hold.  ``lambda`` bounds the squared projected
gradient against V, and ``mu`` bounds the Hessian restricted to the allowed
directions.  This script estimates both on a grid, certifies a few gain
triples and searches over the free weight ``kappa``.

Run with ``python3 demos/gain_certificate.py``.
"""

# %%
from geopid import Gains, certify_geometric, estimate_lambda_mu, find_d_critical, unicycle
from geopid.controller import best_kappa

model = unicycle()
sys = model.system

# %% [markdown]
# Sample lambda and mu over the region |x|, |y| <= 2 with every heading.  The
# declared values for this potential are lambda = 4 and mu = 1; the samples
# give a smaller lambda, so certifying with 4 is conservative.

# %%
est = estimate_lambda_mu(model.morse, sys.metric, sys.dist, model.region)
print(f"sampled lambda = {est.lam:.4f}   (declared {model.lam:g})")
print(f"sampled mu     = {est.mu:.4f}   (declared {model.mu:g})")
print(f"samples used   = {est.sample_count}")

# %%
for gains in (Gains(20, 2, 0.5), Gains(20, 2, 10), Gains(5, 2, 0.5), Gains(20, 0.5, 0.05)):
    cert = certify_geometric(gains, lam=4.0, mu=1.0, kappa=1.0)
    print(f"{gains}  ->  {cert.verdict}")
    for rule in cert.violated:
        print(f"    violated: {rule}")

# %% [markdown]
# kappa enters the Lyapunov function only through a cross term, so any value
# in (0, 2/mu) is admissible.  A sweep picks the value with the largest
# worst-case margin.

# %%
best, certs = best_kappa(Gains(20, 2, 0.5), lam=4.0, mu=1.0)
print(f"best kappa = {best.kappa:.3f}, smallest margin {min(best.margins.values()):.3f}")

# %% [markdown]
# The equilibria of the closed loop are the points where the projected
# differential of V vanishes.  Newton's method from a grid of seeds finds
# them on the line x = 0 with a horizontal heading.

# %%
search = find_d_critical(model.morse, sys.metric, sys.dist, model.region, seeds_per_axis=6)
for cp in sorted(search, key=lambda c: (round(c.point.coords[2], 6), c.point.coords[1])):
    x, y, th = cp.point.coords
    print(f"x={x:+.1e}  y={y:+.3f}  theta={th:.4f}  {cp.kind}")
