"""Community detection in unbalanced two-community sparse block models.

Submodules: :mod:`.model` (parameters), :mod:`.graphs` (sampling),
:mod:`.bp` (exact tree inference and local tests), :mod:`.density_evolution`
(the large-degree recursion and its phase diagram), :mod:`.experiments`
(Monte Carlo checks) and :mod:`.cli`.
"""

__version__ = "0.1.0"

from .model import ModelParams, derive_params, params_from_abc, transition_matrix  # noqa: E402
