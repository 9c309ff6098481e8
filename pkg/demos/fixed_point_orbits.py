# %% [markdown]
# Two stable fixed points
#
# At p = 0.05, lambda = 0.8 the map mu -> G(mu) has three fixed points:
# 0 (stable), beta (unstable) and alpha (stable). Where the orbit ends up
# depends on the starting point mu_1, which is set by the reveal fraction q.

# %%
import numpy as np
import matplotlib.pyplot as plt

from unbalanced_sbm import density_evolution as de

P = de.limit_params(0.05, 0.8)
rep = de.fixed_points(P)
q_thr = de.q_threshold(P, rep)
print(f"beta = {rep.beta:.6f}, alpha = {rep.alpha:.6f}, q threshold = {q_thr:.6f}")

# %%
orbits = {}
for factor in (0.9, 0.99, 1.01, 1.1):
    trace = de.iterate_mu(factor * q_thr, P)
    orbits[factor] = trace.mus
    print(f"q = {factor:4.2f} q_thr: {trace.iterations:4d} steps -> {trace.converged_to:.6g} "
          f"({trace.classification})")

# %%
grid = np.linspace(0, 16, 200)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
ax1.plot(grid, [de.g_map(m, P) - m for m in grid])
ax1.axhline(0, color="k", lw=0.8)
ax1.set_xlabel("mu")
ax1.set_ylabel("G(mu) - mu")
for factor, mus in orbits.items():
    ax2.semilogy(np.maximum(mus[:60], 1e-12), label=f"{factor} q_thr")
ax2.set_xlabel("iteration")
ax2.set_ylabel("mu_k")
ax2.legend()
fig.tight_layout()
fig.savefig("fixed_point_orbits.png", dpi=120)
