# %% [markdown]
# Where detection becomes possible
#
# For each community fraction p we locate the largest signal-to-noise ratio
# at which mu = 0 is the only fixed point of the density-evolution map. Above
# p* the curve sits on lambda = 1; below it the curve drops under 1, leaving
# a window where a small fraction of revealed labels is enough to detect.

# %%
import numpy as np
import matplotlib.pyplot as plt

from unbalanced_sbm import density_evolution as de

ps = np.linspace(0.02, 0.5, 25)
rows = de.phase_diagram(ps)
lam_sp = np.array([r["lambda_sp"] for r in rows])
print(f"p* = {de.p_star():.9f}")
for r in rows[::4]:
    print(f"p = {r['p']:.3f}   lambda_sp = {r['lambda_sp']:.5f}")

# %%
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(ps, lam_sp, label="spinodal")
ax.axhline(1.0, color="k", lw=0.8, ls="--", label="lambda = 1")
ax.axvline(de.p_star(), color="gray", lw=0.8, ls=":")
ax.set_xlabel("p")
ax.set_ylabel("lambda")
ax.legend()
fig.tight_layout()
fig.savefig("phase_diagram.png", dpi=120)
