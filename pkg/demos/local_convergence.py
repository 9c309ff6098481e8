# %% [markdown]
# How tree-like are small balls?
#
# The radius-2 ball around a uniform vertex of a sparse block-model graph
# is a tree with probability tending to 1 as n grows, and the center's
# degree is Poisson(d) regardless of its label.

# %%
import numpy as np

from unbalanced_sbm.experiments import local_convergence, poisson_chisquare
from unbalanced_sbm.model import derive_params

P = derive_params(0.25, 5, 2)
for n in (1_000, 3_000, 10_000, 30_000):
    out = local_convergence(P, n, 2, 1000, seed=n)
    stat, pval = poisson_chisquare(out["root_degrees"], P.d)
    print(f"n = {n:6d}: tree fraction {out['tree_fraction']:.3f} +- {out['stderr']:.3f}, "
          f"mean degree {np.mean(out['root_degrees']):.2f}, Poisson chi-square p = {pval:.3f}")
