"""Quantum OR and the single-measurement threshold decision.

``quantum_or_projector`` keeps the eigenvectors of ``#A = A_1 + ... + A_m``
with eigenvalue at least ``nu``; for every state
``p_max - 2 sqrt(nu) <= E[B] <= E[#A] / nu``. ``threshold_decision``
amplifies each event on ``n`` copies, takes the OR with ``nu = delta^2/16``
and measures it once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom

from . import quantum_core as qc
from .errors import DimensionMismatch, InvalidInput
from .events import CountEvent, OrEvent, as_event

__all__ = [
    "OrInstance",
    "quantum_or_projector",
    "verify_or_bounds",
    "verify_matrix_cs",
    "DecisionResult",
    "decision_copies",
    "decision_event",
    "threshold_decision",
]


@dataclass(frozen=True, eq=False)
class OrInstance:
    """Events on a common space and the eigenvalue cutoff ``nu``."""

    events: Sequence
    nu: float

    def __post_init__(self):
        if not self.events:
            raise InvalidInput("an OR instance needs at least one event")
        if not self.nu > 0:
            raise InvalidInput(f"nu must be positive, got {self.nu}")
        dims = {e.dim for e in self.events}
        if len(dims) != 1:
            raise DimensionMismatch(f"events have dimensions {sorted(dims)}")

    def total(self):
        return sum(e.matrix for e in self.events)


def quantum_or_projector(inst):
    """Projector onto the eigenvectors of ``#A`` with eigenvalue ``>= nu``."""
    w, v = np.linalg.eigh(qc.hermitize(inst.total()))
    keep = v[:, w >= inst.nu - 1e-12]
    return qc.QuantumEvent(keep @ keep.conj().T, is_projector=True, validate=False)


def verify_or_bounds(inst, rho, projector=None):
    """``(p_max - 2 sqrt(nu), E[B], E[#A] / nu)`` for the OR projector ``B``."""
    b = quantum_or_projector(inst) if projector is None else projector
    p_max = max(qc.expectation(rho, e) for e in inst.events)
    total = float(np.vdot(inst.total(), rho.matrix).real)
    return p_max - 2 * math.sqrt(inst.nu), qc.expectation(rho, b), total / inst.nu


def verify_matrix_cs(rho, x, y):
    """Both sides of ``E[XY] <= sqrt(E[X]) sqrt(E[Y^+ X Y])`` for PSD ``X``.

    The left side is the real part of ``tr(rho X Y)``.
    """
    r = qc._as_matrix(rho)
    x, y = qc._as_matrix(x), qc._as_matrix(y)
    lhs = float(np.trace(r @ x @ y).real)
    ex = max(float(np.trace(r @ x).real), 0.0)
    eyxy = max(float(np.trace(r @ y.conj().T @ x @ y).real), 0.0)
    return lhs, math.sqrt(ex) * math.sqrt(eyxy)


@dataclass
class DecisionResult:
    """``kind`` is ``'some_above'`` or ``'all_below'``.

    ``probability`` is the exact probability of ``'some_above'`` on the fresh
    register; ``copies`` the number of copies measured.
    """

    kind: str
    probability: float
    copies: int
    event: object = None


def _fire_probability(n, tau, c, p):
    """``Pr[|K/n - tau| >= c]`` for ``K ~ Binomial(n, p)``; vectorised in ``p``."""
    coeffs = qc.amplification_coefficients(n, tau, c)
    k = np.arange(n + 1)
    upper = k[(coeffs > 0) & (k >= tau * n)]
    lower = k[(coeffs > 0) & (k < tau * n)]
    p = np.atleast_1d(p)
    out = np.zeros(p.shape)
    if upper.size:
        out += binom.sf(upper[0] - 1, n, p)
    if lower.size:
        out += binom.cdf(lower[-1], n, p)
    return out


def _meets_targets(n, checks, high, low):
    for tau, c, fire, quiet in checks:
        if fire.size and _fire_probability(n, tau, c, fire).min() < high:
            return False
        if quiet.size and _fire_probability(n, tau, c, quiet).max() > low:
            return False
    return True


def decision_copies(thresholds, epsilon, etas, high, low, grid=101, limit=1 << 20):
    """A copy count ``n`` meeting the two amplification requirements for every event.

    Plain form (``etas`` is None): fire when ``K/n >= theta - epsilon/2``;
    need ``>= high`` for ``E > theta`` and ``<= low`` for ``E <= theta - epsilon``.
    Two-sided form: fire when ``|K/n - theta| >= eta + epsilon/2``; need
    ``>= high`` for ``|E - theta| >= eta + epsilon`` and ``<= low`` for
    ``|E - theta| <= eta``. Both are checked with exact binomial tails on a
    grid of expectations that includes the region endpoints.

    The count is found by doubling and then bisection, so it is the smallest
    passing ``n`` up to lattice effects of the integer thresholds; the
    returned value always passes the check.
    """
    checks = []
    for i, theta in enumerate(thresholds):
        if etas is None:
            tau, c = 0.0, max(theta - epsilon / 2, 0.0)
            fire = np.linspace(theta, 1.0, grid) if theta < 1 else np.array([])
            quiet = np.linspace(0.0, theta - epsilon, grid) if theta >= epsilon else np.array([])
        else:
            eta = etas[i]
            tau, c = theta, eta + epsilon / 2
            lo, hi = theta - eta - epsilon, theta + eta + epsilon
            fire = np.concatenate([np.linspace(0.0, lo, grid) if lo >= 0 else [],
                                   np.linspace(hi, 1.0, grid) if hi <= 1 else []])
            quiet = np.linspace(max(theta - eta, 0.0), min(theta + eta, 1.0), grid)
        checks.append((tau, c, np.asarray(fire, float), np.asarray(quiet, float)))
    if _meets_targets(1, checks, high, low):
        return 1
    bad, good = 1, 2
    while not _meets_targets(good, checks, high, low):
        bad, good = good, 2 * good
        if good > limit:
            raise InvalidInput(f"no copy count below {limit} meets the amplification targets")
    while good - bad > 1:
        mid = (bad + good) // 2
        if _meets_targets(mid, checks, high, low):
            good = mid
        else:
            bad = mid
    return good


def decision_event(events, thresholds, epsilon, delta, etas=None, n=None):
    """The composed decision projector on ``n`` copies and the copy count.

    Returns ``(OrEvent, n)``. ``B`` fires for "some event is above".
    """
    m = len(events)
    if n is None:
        n = decision_copies(thresholds, epsilon, etas, 1 - delta / 2, delta ** 3 / (16 * m))
    amplified = []
    for i, (e, theta) in enumerate(zip(events, thresholds)):
        if etas is None:
            coeffs = qc.amplification_coefficients(n, 0.0, max(theta - epsilon / 2, 0.0))
        else:
            coeffs = qc.amplification_coefficients(n, theta, etas[i] + epsilon / 2)
        amplified.append(CountEvent(as_event(e), n, coeffs))
    return OrEvent(amplified, delta ** 2 / 16), n


def threshold_decision(instance, rho, seed=None, eta: Optional[Sequence] = None,
                       mode="sampled"):
    """Decide whether some event is above its threshold with one measurement.

    Plain form: ``'some_above'`` claims ``E[A_i] > theta_i - epsilon`` for some
    ``i``; ``'all_below'`` claims ``E[A_i] <= theta_i`` for all ``i``.
    With ``eta``: ``'some_above'`` claims ``|E[A_i] - theta_i| > eta_i`` for
    some ``i``; ``'all_below'`` claims ``|E[A_i] - theta_i| <= eta_i + epsilon``
    for all ``i``.

    Parameters
    ----------
    instance : ThresholdInstance
        Must carry a static list of pairs.
    rho : QuantumState
    seed : int, optional
    eta : sequence of float, optional
    mode : {'sampled', 'exact'}
        In exact mode ``kind`` is the likelier outcome.
    """
    if instance.pairs is None:
        raise InvalidInput("the decision needs all pairs up front")
    events = [e for e, _ in instance.pairs]
    thresholds = [th for _, th in instance.pairs]
    if eta is not None:
        eta = [float(x) for x in eta]
        if len(eta) != len(events):
            raise InvalidInput("eta must have one entry per event")
        if any(x < 0 for x in eta):
            raise InvalidInput("eta entries must be nonnegative")
    b, n = decision_event(events, thresholds, instance.epsilon, instance.delta, eta)
    prob = min(max(b.fresh_expectation(rho), 0.0), 1.0)
    if mode == "exact":
        fired = prob >= 0.5
    elif mode == "sampled":
        fired = bool(np.random.default_rng(seed).random() < prob)
    else:
        raise InvalidInput(f"mode must be 'sampled' or 'exact', got {mode!r}")
    return DecisionResult("some_above" if fired else "all_below", prob, n, b)
