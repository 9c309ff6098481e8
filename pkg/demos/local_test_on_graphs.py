# %% [markdown]
# Local tests on sampled graphs
#
# The radius-r local test looks at a vertex's ball and the labels revealed
# on its boundary sphere. On a large sparse graph it should score like the
# same test on the limiting tree, and at large degree like the Gaussian
# prediction success(mu_r).

# %%
import matplotlib.pyplot as plt

from unbalanced_sbm import density_evolution as de
from unbalanced_sbm.experiments import estimate_psucc_sbm, estimate_psucc_tree
from unbalanced_sbm.model import derive_params

P = derive_params(0.25, 20, 2.0)
q = 0.1
mus = de.iterate_mu(q, de.limit_params(P.p, P.lam), classify=False).mus
rows = []
for r in (1, 2):
    g = estimate_psucc_sbm(P, 20_000, q, r, 1000, seed=r)
    t = estimate_psucc_tree(P, q, r, 1000, seed=r)
    rows.append((r, g, t, de.success_from_mu(mus[r - 1])))
    print(f"r = {r}: graph {g.estimate:.3f} +- {g.stderr:.3f} (flagged {g.flagged_fraction:.2f}), "
          f"tree {t.estimate:.3f} +- {t.stderr:.3f}, Gaussian {rows[-1][3]:.3f}")

# %%
fig, ax = plt.subplots(figsize=(5, 3.5))
rs = [row[0] for row in rows]
ax.errorbar(rs, [row[1].estimate for row in rows], [2 * row[1].stderr for row in rows],
            fmt="o", label="graph")
ax.errorbar([x + 0.05 for x in rs], [row[2].estimate for row in rows],
            [2 * row[2].stderr for row in rows], fmt="s", label="tree")
ax.plot(rs, [row[3] for row in rows], "k^", label="success(mu_r)")
ax.set_xlabel("radius r")
ax.set_ylabel("rescaled success")
ax.legend()
fig.tight_layout()
fig.savefig("local_test_on_graphs.png", dpi=120)
