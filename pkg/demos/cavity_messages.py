# %% [markdown]
# Cavity messages at large degree
#
# Population dynamics draws depth-r root messages conditioned on the root
# label. As d grows the label-1 messages approach a Gaussian with mean
# h + mu_r / 2 and variance mu_r, and both pools satisfy the Bayes
# consistency identity p/(1-p) E[exp(-xi1)] = 1.

# %%
import numpy as np
import matplotlib.pyplot as plt
from scipy import stats

from unbalanced_sbm import density_evolution as de
from unbalanced_sbm.experiments import (
    gaussian_moments,
    nishimori_terms,
    population_dynamics,
)
from unbalanced_sbm.model import derive_params

p, lam, q, r = 0.25, 2.0, 0.1, 3
mu = de.iterate_mu(q, de.limit_params(p, lam), classify=False).mus[r - 1]
pairs = {d: population_dynamics(derive_params(p, d, lam), q, r, pool=50_000, seed=d)
         for d in (10, 50, 200)}

# %%
for d, pair in pairs.items():
    mom = gaussian_moments(pair)
    print(f"d = {d:3d}: mean {mom['mean']:.3f} +- {mom['mean_stderr']:.3f}, var {mom['var']:.3f}")
    for t in nishimori_terms(pair):
        print(f"    {t['name']:8s} lhs {t['lhs']:.4f}  rhs {t['rhs']:.4f}  z {t['z']:.2f}")
print(f"limit: mean {np.log(p / (1 - p)) + mu / 2:.3f}, var {mu:.3f}")

# %%
h = np.log(p / (1 - p))
x = np.linspace(h + mu / 2 - 4 * np.sqrt(mu), h + mu / 2 + 4 * np.sqrt(mu), 300)
fig, ax = plt.subplots(figsize=(5, 3.5))
for d, pair in pairs.items():
    xi = pair.xi1[np.isfinite(pair.xi1)]
    ax.hist(xi, bins=120, density=True, histtype="step", label=f"d = {d}")
ax.plot(x, stats.norm.pdf(x, h + mu / 2, np.sqrt(mu)), "k--", label="Gaussian limit")
ax.set_xlabel("xi (root label 1)")
ax.legend()
fig.tight_layout()
fig.savefig("cavity_messages.png", dpi=120)
