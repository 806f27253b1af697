"""Exact classical probability objects.

Binomial laws, exponential noise, the law of a binomial count conditioned on
a noisy threshold *not* firing, and the standard f-divergences between finite
distributions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, InvalidInput, PreconditionError, ZeroProbabilityError

__all__ = [
    "DiscreteDistribution",
    "NoisyThresholdParams",
    "binomial_pmf",
    "exponential_tail",
    "divergence",
    "noise_response",
    "conditioned_binomial",
    "certify_chi2_stability",
    "certify_inequality_1",
    "Chi2Certificate",
    "chi2_stability_sweep",
    "function_variance",
]

DIVERGENCES = ("tv", "hellinger", "kl", "chisq", "bc")


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability mass function on ``{0, ..., len(weights) - 1}``.

    Parameters
    ----------
    weights : array_like
        Nonnegative masses summing to one (tolerance ``1e-12``).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidInput("weights must be a non-empty vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InvalidInput("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12 * max(1, w.size):
            raise InvalidInput(f"weights sum to {w.sum():.15g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    def __getitem__(self, k):
        return self.weights[k]

    def mean(self):
        return float(np.dot(np.arange(self.weights.size), self.weights))

    def expect(self, values):
        """Expectation of ``values[k]`` under this law."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class NoisyThresholdParams:
    """Parameters of the noisy threshold test ``S + X > theta * n``.

    ``S ~ Binomial(n, p)`` and ``X ~ Exponential(lam)`` independent.
    """

    n: int
    p: float
    lam: float
    theta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInput(f"n must be a positive integer, got {self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidInput(f"p must lie in [0, 1], got {self.p}")
        if not self.lam > 0:
            raise InvalidInput(f"lam must be positive, got {self.lam}")
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidInput(f"theta must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def noise_mean(self):
        return 1.0 / self.lam

    @property
    def sigma(self):
        """Standard deviation of the binomial count."""
        return math.sqrt(self.p * (1 - self.p) * self.n)


def _as_weights(x):
    if isinstance(x, DiscreteDistribution):
        return x.weights
    return DiscreteDistribution(x).weights


def binomial_pmf(n, p):
    """Binomial(n, p) law, evaluated in log space.

    Each term ``log C(n, k) + k log p + (n - k) log(1 - p)`` is computed with
    log-gamma, exponentiated and the vector renormalised, so that ``n`` in the
    tens of thousands neither underflows nor overflows.
    """
    if int(n) != n or n < 0:
        raise InvalidInput(f"n must be a nonnegative integer, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidInput(f"p must lie in [0, 1], got {p}")
    n = int(n)
    k = np.arange(n + 1)
    if p == 0.0 or p == 1.0:
        w = np.zeros(n + 1)
        w[0 if p == 0.0 else n] = 1.0
        return DiscreteDistribution(w)
    logw = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))
    w = np.exp(logw - logw.max())
    return DiscreteDistribution(w / w.sum())


def exponential_tail(lam, t):
    """``Pr[X > t]`` for ``X ~ Exponential(lam)``; vectorised over ``t``."""
    if not lam > 0:
        raise InvalidInput(f"lam must be positive, got {lam}")
    t = np.asarray(t, dtype=float)
    out = np.exp(-lam * np.maximum(t, 0.0))
    return float(out) if out.ndim == 0 else out


def divergence(kind, p, q):
    """Distance or affinity between two finite distributions.

    Parameters
    ----------
    kind : {'tv', 'hellinger', 'kl', 'chisq', 'bc'}
        Total variation, Hellinger distance (with ``H^2 = 2(1 - BC)``),
        Kullback-Leibler ``sum p ln(p/q)``, chi-squared ``sum (p-q)^2/q``,
        or the Bhattacharyya coefficient ``sum sqrt(p q)``.
    p, q : DiscreteDistribution or array_like

    Returns
    -------
    float
        ``math.inf`` for KL and chi-squared when some ``q_i = 0 < p_i``.
    """
    kind = kind.lower()
    if kind not in DIVERGENCES:
        raise InvalidInput(f"unknown divergence {kind!r}; choose from {DIVERGENCES}")
    p, q = _as_weights(p), _as_weights(q)
    if p.shape != q.shape:
        raise DimensionMismatch(f"supports differ: {p.size} vs {q.size}")
    if kind == "tv":
        return 0.5 * float(np.abs(p - q).sum())
    if kind == "bc":
        return float(np.sqrt(p * q).sum())
    if kind == "hellinger":
        # sum (sqrt p - sqrt q)^2 avoids the cancellation in 2(1 - BC)
        return math.sqrt(float(((np.sqrt(p) - np.sqrt(q)) ** 2).sum()))
    if np.any((q == 0) & (p > 0)):
        return math.inf
    live = q > 0
    if kind == "kl":
        # sum of q ((1+u) log(1+u) - u) with u = p/q - 1: each term is
        # nonnegative and free of the cancellation in sum p log p - p log q
        u = (p[live] - q[live]) / q[live]
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.log1p(u)
            terms = np.where(u > -1, q[live] * ((lg - u) + u * lg), q[live])
        return float(np.maximum(terms, 0.0).sum())
    return float((((p[live] - q[live]) ** 2) / q[live]).sum())


def noise_response(params, s):
    """``Pr[X > theta n - s]`` for the noise of ``params``; vectorised in ``s``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > params.n):
        raise InvalidInput(f"s must lie in [0, {params.n}]")
    return exponential_tail(params.lam, params.theta * params.n - s)


def function_variance(dist, values):
    """Exact variance of ``values[S]`` for ``S ~ dist``."""
    w = _as_weights(dist)
    v = np.asarray(values, dtype=float)
    mu = float(np.dot(w, v))
    return float(np.dot(w, (v - mu) ** 2))


def conditioned_binomial(params):
    """Law of ``S`` given that ``S + X <= theta n``, and ``Pr[S + X > theta n]``.

    Returns
    -------
    law : DiscreteDistribution
    prob_fire : float
    """
    pmf = binomial_pmf(params.n, params.p).weights
    gap = np.maximum(params.theta * params.n - np.arange(params.n + 1), 0.0)
    f = np.exp(-params.lam * gap)
    # 1 - f via expm1 keeps relative accuracy when the noise almost never fires
    stay = pmf * -np.expm1(-params.lam * gap)
    pr_stay = float(stay.sum())
    if pr_stay <= 0.0:
        raise ZeroProbabilityError("the threshold fires with probability one")
    return DiscreteDistribution(stay / pr_stay), float(np.dot(pmf, f))


class Chi2Certificate(NamedTuple):
    lhs: float
    prob_fire: float
    bound_core: float

    @property
    def ratio(self):
        if self.bound_core == 0:
            return 0.0 if self.lhs <= 1e-15 else math.inf
        return self.lhs / self.bound_core


def certify_chi2_stability(params):
    """Both sides of the chi-squared stability bound for one parameter point.

    The certified statement is ``lhs <= C * bound_core`` where
    ``lhs = chi2(S | no fire, S)`` and ``bound_core = (Pr[fire] sigma / E[X])^2``.
    The constant ``C`` is not fixed here; see :func:`chi2_stability_sweep`.

    Raises
    ------
    PreconditionError
        If ``E[X] < max(1, sigma)`` or ``Pr[fire] >= 1/4``.
    """
    ex, sigma = params.noise_mean, params.sigma
    if ex < 1.0:
        raise PreconditionError(f"noise mean {ex:.4g} is below 1")
    if ex < sigma:
        raise PreconditionError(f"noise mean {ex:.4g} is below the binomial std {sigma:.4g}")
    law, prob_fire = conditioned_binomial(params)
    if prob_fire >= 0.25:
        raise PreconditionError(f"firing probability {prob_fire:.4g} is not below 1/4")
    lhs = divergence("chisq", law, binomial_pmf(params.n, params.p))
    return Chi2Certificate(lhs, prob_fire, (prob_fire * sigma / ex) ** 2)


def chi2_stability_sweep(ns, ps, thetas, noise_means):
    """Evaluate :func:`certify_chi2_stability` over a parameter grid.

    Points violating the preconditions are skipped. Returns the list of
    ``(params, certificate)`` pairs and the largest observed ratio, which is
    the empirical constant for this grid.
    """
    rows = []
    for n in ns:
        for p in ps:
            for theta in thetas:
                for ex in noise_means:
                    params = NoisyThresholdParams(n, p, 1.0 / ex, theta)
                    try:
                        cert = certify_chi2_stability(params)
                    except (PreconditionError, ZeroProbabilityError):
                        continue
                    rows.append((params, cert))
    c_test = max((cert.ratio for _, cert in rows), default=0.0)
    return rows, c_test


def certify_inequality_1(p, lam):
    """Both sides of ``q + p e^{2 lam} <= (1 + (e-1)^2 p q lam^2)(q + p e^lam)^2``.

    Valid for ``p, lam`` in ``[0, 1]`` with ``q = 1 - p``.
    """
    if not (0.0 <= p <= 1.0 and 0.0 <= lam <= 1.0):
        raise InvalidInput("p and lam must lie in [0, 1]")
    q = 1.0 - p
    lhs = q + p * math.exp(2 * lam)
    rhs = (1 + (math.e - 1) ** 2 * p * q * lam ** 2) * (q + p * math.exp(lam)) ** 2
    return lhs, rhs
