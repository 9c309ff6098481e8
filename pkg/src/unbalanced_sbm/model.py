"""Parameterization of the balanced-degree two-community block model.

Community 1 holds a fraction ``p <= 1/2`` of the vertices. The connectivity
matrix is ``M = (d/n) [[a, b], [b, c]]`` with ``pa + (1-p)b = pb + (1-p)c = 1``,
so every vertex has mean degree ``d`` whatever its label. The signal-to-noise
ratio is ``lambda = d (1-b)^2``; ``lambda = 1`` is the Kesten-Stigum line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Immutable model parameters with all derived scalars.

    Build instances with :func:`derive_params` or :func:`params_from_abc`
    rather than calling the constructor directly.
    """

    p: float
    d: float
    lam: float
    epsilon: float
    a: float
    b: float
    c: float

    @property
    def h(self) -> float:
        """Prior log-ratio ``log(p / (1-p))``."""
        return math.log(self.p / (1.0 - self.p))

    @property
    def M_scale(self) -> np.ndarray:
        """``d * [[a, b], [b, c]]``; divide by ``n`` to get edge probabilities."""
        return self.d * np.array([[self.a, self.b], [self.b, self.c]])

    def as_dict(self, form: str = "lambda") -> dict:
        """Flat JSON-ready mapping, ``{p, d, lambda}`` or ``{p, d, a, b, c}``."""
        if form == "lambda":
            return {"p": self.p, "d": self.d, "lambda": self.lam}
        if form == "abc":
            return {"p": self.p, "d": self.d, "a": self.a, "b": self.b, "c": self.c}
        if form == "full":
            return {
                "p": self.p, "d": self.d, "lambda": self.lam,
                "epsilon": self.epsilon, "a": self.a, "b": self.b, "c": self.c,
                "h": self.h,
            }
        raise ValueError(f"unknown form {form!r}")


def _check_p(p: float) -> None:
    if not (0.0 < p <= 0.5):
        raise ValueError(f"p must lie in (0, 1/2], got {p}")


def _check_d(d: float) -> None:
    if not (d > 0.0 and math.isfinite(d)):
        raise ValueError(f"d must be a positive finite real, got {d}")


def derive_params(p: float, d: float, lam: float) -> ModelParams:
    """Model parameters from the ``(p, d, lambda)`` coordinates.

    Examples
    --------
    >>> derive_params(0.5, 100, 1).a
    1.1
    """
    p, d, lam = float(p), float(d), float(lam)
    _check_p(p)
    _check_d(d)
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if lam > d:
        raise ValueError(f"lambda={lam} exceeds d={d}: b = 1 - sqrt(lambda/d) would be negative")
    eps = math.sqrt(lam / d)
    a = 1.0 + (1.0 - p) / p * eps
    b = 1.0 - eps
    c = 1.0 + p / (1.0 - p) * eps
    return ModelParams(p=p, d=d, lam=lam, epsilon=eps, a=a, b=b, c=c)


def params_from_abc(p: float, d: float, a: float, b: float, c: float) -> ModelParams:
    """Validate user-supplied affinities and complete the parameter set.

    Raises ``ValueError`` when either balance equation is off by more than
    ``1e-9``: degrees would then carry label information, which is outside
    this model.
    """
    p, d, a, b, c = map(float, (p, d, a, b, c))
    _check_p(p)
    _check_d(d)
    if min(a, b, c) < 0.0:
        raise ValueError("a, b, c must be nonnegative")
    r1 = p * a + (1.0 - p) * b - 1.0
    r2 = p * b + (1.0 - p) * c - 1.0
    if abs(r1) > BALANCE_TOL or abs(r2) > BALANCE_TOL:
        raise ValueError(
            f"balance constraint violated: pa+(1-p)b-1={r1:.3g}, pb+(1-p)c-1={r2:.3g}"
        )
    eps = 1.0 - b
    return ModelParams(p=p, d=d, lam=d * eps * eps, epsilon=eps, a=a, b=b, c=c)


def params_from_dict(obj: dict) -> ModelParams:
    """Inverse of :meth:`ModelParams.as_dict` for either flat form."""
    keys = set(obj)
    if {"a", "b", "c"} <= keys:
        return params_from_abc(obj["p"], obj["d"], obj["a"], obj["b"], obj["c"])
    if "lambda" in keys:
        return derive_params(obj["p"], obj["d"], obj["lambda"])
    raise ValueError("parameter object needs {p, d, lambda} or {p, d, a, b, c}")


def transition_matrix(params: ModelParams) -> np.ndarray:
    """Row-stochastic label broadcast matrix ``R = [[pa, (1-p)b], [pb, (1-p)c]]``.

    Its eigenvalues are ``1`` and ``1 - b``.
    """
    p = params.p
    R = np.array(
        [[p * params.a, (1.0 - p) * params.b], [p * params.b, (1.0 - p) * params.c]]
    )
    R.setflags(write=False)
    return R


def poisson_tv(mean1: float, mean2: float) -> float:
    """Total-variation distance between ``Poi(mean1)`` and ``Poi(mean2)``.

    Summed directly up to the point where both upper tails hold less than
    ``1e-12`` mass.
    """
    if mean1 <= 0 or mean2 <= 0:
        raise ValueError("Poisson means must be positive")
    if mean1 == mean2:
        return 0.0
    kmax = int(max(stats.poisson.isf(1e-13, mean1), stats.poisson.isf(1e-13, mean2))) + 1
    k = np.arange(kmax + 1)
    diff = np.abs(stats.poisson.pmf(k, mean1) - stats.poisson.pmf(k, mean2))
    return float(min(1.0, 0.5 * math.fsum(diff)))


def overlap_from_psucc(p: float, psucc: float) -> float:
    """Overlap of the optimal test, ``p (1-p) P_succ``."""
    if not (0.0 <= psucc <= 1.0):
        raise ValueError("psucc must lie in [0, 1]")
    return p * (1.0 - p) * psucc
