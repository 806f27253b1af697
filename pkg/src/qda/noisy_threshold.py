"""Noisy threshold events on tensor powers.

For a projector ``A`` and ``n`` copies, the count projectors ``E_k`` split
``(C^d)^(x)n`` by how many factors lie in the range of ``A``. The noisy
threshold event ``B = sum_k Pr[X + k > theta n] E_k`` (``X`` exponential
with rate ``lam``) measures like the classical test ``S + X > theta n`` with
``S ~ Binomial(n, tr(rho A))``, and collapsing on its complement moves the
state only as much as conditioning ``S`` on ``S + X <= theta n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import quantum_core as qc
from .classical_stats import (
    NoisyThresholdParams,
    binomial_pmf,
    conditioned_binomial,
    divergence,
    exponential_tail,
)
from .errors import InvalidInput, ZeroProbabilityError
from .events import CountEvent, as_event

__all__ = [
    "CountProjectorFamily",
    "ThresholdEvent",
    "threshold_coefficients",
    "build_count_projectors",
    "build_threshold_event",
    "threshold_count_event",
    "certify_statistics_and_fidelity",
    "StatisticsReport",
    "tail_bound",
    "bures_bound",
]


@dataclass(frozen=True, eq=False)
class CountProjectorFamily:
    """Count projectors ``E_0, ..., E_n`` of a projector on ``n`` copies."""

    n: int
    base: qc.QuantumEvent
    projectors: tuple

    def __len__(self):
        return len(self.projectors)

    def __getitem__(self, k):
        return self.projectors[k]

    def combine(self, coeffs):
        """``sum_k coeffs[k] E_k``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n + 1,):
            raise InvalidInput(f"need {self.n + 1} coefficients")
        return sum(c * e.matrix for c, e in zip(coeffs, self.projectors))


@dataclass(frozen=True, eq=False)
class ThresholdEvent:
    """Dense noisy threshold event with the parameters it was built from."""

    event: qc.QuantumEvent
    base: qc.QuantumEvent
    n: int
    lam: float
    theta: float
    coefficients: np.ndarray
    family: CountProjectorFamily

    def params(self, p):
        return NoisyThresholdParams(self.n, p, self.lam, self.theta)

    def stay_kraus(self):
        """``sqrt(1 - B)`` assembled from the count projectors.

        Going through the projectors keeps exact zeros exact; a generic
        matrix square root would turn roundoff in vanishing eigenvalues into
        errors of order ``1e-8``.
        """
        return self.family.combine(np.sqrt(1.0 - self.coefficients))


def threshold_coefficients(n, lam, theta):
    """``Pr[X + k > theta n]`` for ``k = 0..n``."""
    return np.atleast_1d(exponential_tail(lam, theta * n - np.arange(n + 1)))


def build_count_projectors(a, n):
    """Count projectors of the projector ``a`` on ``n`` copies.

    Raises
    ------
    InvalidInput
        If ``a`` is not a projector; dilate it first.
    """
    if not a.is_projector:
        raise InvalidInput("count projectors need a projector; Naimark-dilate the event first")
    return CountProjectorFamily(int(n), a, tuple(qc.count_events(a, int(n))))


def build_threshold_event(a, n, lam, theta):
    """Dense noisy threshold event ``sum_k Pr[X + k > theta n] E_k``."""
    fam = build_count_projectors(a, n)
    coeffs = threshold_coefficients(n, lam, theta)
    mat = fam.combine(coeffs)
    return ThresholdEvent(qc.QuantumEvent(mat, is_projector=False, validate=False),
                          a, int(n), float(lam), float(theta), coeffs, fam)


def threshold_count_event(inner, n, lam, theta):
    """Structured form of the noisy threshold event, for the simulation engines."""
    return CountEvent(as_event(inner), n, threshold_coefficients(n, lam, theta))


class StatisticsReport(NamedTuple):
    expectation: float
    classical_probability: float
    fidelity: float
    bhattacharyya: float

    @property
    def expectation_residual(self):
        return abs(self.expectation - self.classical_probability)

    @property
    def fidelity_residual(self):
        return abs(self.fidelity - self.bhattacharyya)


def certify_statistics_and_fidelity(te, rho):
    """Quantum and classical sides of the statistics and fidelity identities.

    Quantum side: ``E[B]`` on ``rho^(x)n`` and the fidelity between
    ``rho^(x)n`` and its collapse by ``sqrt(1 - B)``. Classical side:
    ``Pr[S + X > theta n]`` and ``BC(S | no fire, S)``.
    """
    p = qc.expectation(rho, te.base)
    big = qc.tensor_power(rho, te.n)
    e_b = qc.expectation(big, te.event)
    if 1.0 - e_b <= 1e-12:
        raise ZeroProbabilityError("the threshold event fires almost surely")
    collapsed, _ = qc.collapse_with(big, te.stay_kraus())
    fid = qc.fidelity(big, collapsed)
    law, prob_fire = conditioned_binomial(te.params(p))
    bc = divergence("bc", law, binomial_pmf(te.n, p))
    return StatisticsReport(e_b, prob_fire, fid, bc)


def tail_bound(n, lam, theta, p):
    """``exp(-n lam (theta - (e - 1) p))``, an upper bound on the firing probability.

    Valid when ``lam <= 1``.
    """
    return math.exp(-n * lam * (theta - (math.e - 1) * p))


def bures_bound(te, rho, c_test):
    """Bures distance moved by the no-fire collapse and its stability bound.

    Returns ``(distance, sqrt(c_test) E[B] sigma / E[X])``.
    """
    p = qc.expectation(rho, te.base)
    big = qc.tensor_power(rho, te.n)
    e_b = qc.expectation(big, te.event)
    collapsed, _ = qc.collapse_with(big, te.stay_kraus())
    sigma = math.sqrt(p * (1 - p) * te.n)
    return qc.bures_distance(big, collapsed), math.sqrt(c_test) * e_b * sigma * te.lam
