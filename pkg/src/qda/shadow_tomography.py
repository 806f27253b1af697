"""Online Shadow Tomography from a mistake-bounded learner and threshold search.

A matrix-multiplicative-weights student predicts every expectation; a
teacher built on threshold search checks the predictions on the current
batch of copies and, when one is off, corrects it from a holdout and moves
on to a fresh batch. Each batch absorbs at most one correction, and the
student makes at most ``C_0 log(d) / epsilon^2`` of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binom

from . import quantum_core as qc
from .errors import DimensionMismatch, InvalidInput, OverBudget
from .threshold_search import SearchConfig, ThresholdInstance, search_plan, threshold_search

__all__ = [
    "StudentState",
    "ShadowConfig",
    "new_student",
    "student_predict",
    "student_update",
    "estimate_copies",
    "UpgradedResult",
    "upgraded_search",
    "ShadowResult",
    "shadow_tomography",
]


@dataclass(frozen=True, eq=False)
class StudentState:
    """Matrix-multiplicative-weights learner.

    Attributes
    ----------
    dim : int
    learning_rate : float
    history : tuple of (event, corrected value, sign)
        One entry per mistake; ``sign`` is the sign of ``predicted - corrected``.
    hypothesis : QuantumState
        ``exp(-learning_rate * sum sign_s A_s)`` normalised to unit trace.
    """

    dim: int
    learning_rate: float
    history: tuple = ()
    hypothesis: Optional[qc.QuantumState] = None

    def __post_init__(self):
        if self.hypothesis is None:
            object.__setattr__(self, "hypothesis", self._fit())

    def _fit(self):
        if not self.history:
            return qc.QuantumState.maximally_mixed(self.dim)
        grad = sum(s * e.matrix for e, _, s in self.history)
        w, v = np.linalg.eigh(qc.hermitize(-self.learning_rate * grad))
        # shift before exponentiating so the largest weight is exactly 1
        x = np.exp(w - w.max())
        mat = (v * (x / x.sum())) @ v.conj().T
        return qc.QuantumState(qc.hermitize(mat), validate=False)

    @property
    def mistake_count(self):
        return len(self.history)


def new_student(d, epsilon):
    """Fresh student with learning rate ``epsilon / 2``."""
    return StudentState(int(d), epsilon / 2)


def student_predict(state, a):
    if a.dim != state.dim:
        raise DimensionMismatch(f"event has dimension {a.dim}, student {state.dim}")
    return qc.expectation(state.hypothesis, a)


def student_update(state, a, predicted, corrected):
    """Record a mistake on ``a`` and refit the hypothesis."""
    sign = float(np.sign(predicted - corrected))
    return StudentState(state.dim, state.learning_rate,
                        state.history + ((a, float(corrected), sign),))


@dataclass(frozen=True)
class ShadowConfig:
    """Parameters of the Shadow Tomography driver.

    ``rounds = ceil(mistake_constant * ln(d) / epsilon^2) + 1`` batches, each
    run at confidence ``delta / rounds``.
    """

    epsilon: float = 0.25
    delta: float = 0.2
    mistake_constant: float = 2.0
    search: SearchConfig = SearchConfig()

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5 or not 0 < self.delta < 0.5:
            raise InvalidInput("epsilon and delta must lie in (0, 1/2)")
        if not self.mistake_constant > 0:
            raise InvalidInput("mistake_constant must be positive")

    def rounds(self, d):
        return math.ceil(self.mistake_constant * math.log(d) / self.epsilon ** 2) + 1

    def round_delta(self, d):
        return self.delta / self.rounds(d)


@lru_cache(maxsize=None)
def estimate_copies(accuracy, delta, grid=401):
    """Smallest ``h`` with ``Pr[|K/h - p| > accuracy] <= delta`` for all ``p``.

    ``K ~ Binomial(h, p)``; checked with exact tails on a grid of ``p``
    refined near the worst case ``p = 1/2``.
    """
    ps = np.unique(np.concatenate([np.linspace(0, 1, grid), np.linspace(0.4, 0.6, grid)]))
    h = 1
    while True:
        lo = np.ceil(h * (ps - accuracy) - 1e-12) - 1
        hi = np.floor(h * (ps + accuracy) + 1e-12)
        bad = binom.cdf(lo, h, ps) + binom.sf(hi, h, ps)
        if bad.max() <= delta:
            return h
        h = h + max(1, h // 16)


@dataclass
class UpgradedResult:
    """``kind`` is ``'deviation'`` (with ``index`` and ``estimate``) or ``'all_within'``."""

    kind: str
    index: Optional[int] = None
    estimate: Optional[float] = None
    search: object = None
    copies: int = 0


def _simulated_pair(event, theta, epsilon, upper):
    """Pair ``(A, theta + epsilon)`` or ``(1 - A, 1 - theta + epsilon)``.

    A threshold above 1 cannot be exceeded; such a pair is replaced by the
    zero event against threshold 1, which is equally unexceedable and keeps
    thresholds inside [0, 1].
    """
    if upper:
        a, th = event, theta + epsilon
    else:
        a, th = event.complement(), 1.0 - theta + epsilon
    if th > 1.0:
        return qc.QuantumEvent.zero(event.dim), 1.0
    return a, th


def upgraded_search(instance, rho, seed=None, config=SearchConfig()):
    """Two-sided threshold search with a corrected estimate on deviation.

    ``'deviation'`` claims ``|E[A_j] - theta_j| > 3 epsilon / 4`` and
    ``|E[A_j] - estimate| <= epsilon / 4``; ``'all_within'`` claims
    ``|E[A_i] - theta_i| <= epsilon`` for all ``i``. Wrong with probability
    at most ``delta``.
    """
    eps, delta = instance.epsilon, instance.delta
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    search_seed, holdout_seed = ss.spawn(2)
    originals = {}

    def original(i, history):
        if i not in originals:
            passes = ["pass"] * i
            originals[i] = instance.pair(i, passes)
        return originals[i]

    def simulated(t, history):
        event, theta = original(t // 2, history)
        return _simulated_pair(event, theta, eps, t % 2 == 0)

    sim = ThresholdInstance(adversary=simulated, m=2 * instance.m, epsilon=eps / 4,
                            delta=delta / 2)
    result = threshold_search(sim, rho, search_seed, config)
    h = estimate_copies(eps / 4, delta / 2)
    copies = result.transcript.copies_used + h
    if result.kind == "all_below":
        return UpgradedResult("all_within", search=result, copies=copies)
    j = result.index // 2
    event, _ = originals[j]
    p = min(max(qc.expectation(rho, event), 0.0), 1.0)
    estimate = np.random.default_rng(holdout_seed).binomial(h, p) / h
    return UpgradedResult("deviation", j, float(estimate), result, copies)


@dataclass
class ShadowResult:
    estimates: list
    mistakes: int
    rounds_used: int
    rounds: int
    copies_budget: int
    records: list = field(default_factory=list)
    student: Optional[StudentState] = None


def shadow_tomography(event_stream, rho, config=ShadowConfig(), seed=None, m=None):
    """Estimate ``tr(rho A_t)`` for every event of an online stream.

    Parameters
    ----------
    event_stream : sequence of QuantumEvent or callable
        A list, or ``stream(t, estimates_so_far) -> QuantumEvent`` for an
        adaptive stream (then ``m`` is required).
    rho : QuantumState
    config : ShadowConfig
    seed : int or SeedSequence
    m : int, optional

    Returns
    -------
    ShadowResult

    Raises
    ------
    OverBudget
        If a correction would be needed after the last batch.
    """
    if callable(event_stream):
        if m is None:
            raise InvalidInput("an adaptive stream needs its length m")
        stream: Callable = event_stream
    else:
        events = list(event_stream)
        m = len(events) if m is None else m
        stream = lambda t, est: events[t]  # noqa: E731
    d = rho.dim
    eps = config.epsilon
    rounds = config.rounds(d)
    delta0 = config.round_delta(d)
    plan = search_plan(2 * m, eps / 4, delta0 / 2, config.search)
    copies_budget = rounds * (plan["copies"] + estimate_copies(eps / 4, delta0 / 2))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    student = new_student(d, eps)
    estimates, records = [], []
    pos, used = 0, 0
    while pos < m:
        if used == rounds:
            raise OverBudget(f"all {rounds} batches spent after {student.mistake_count} mistakes")
        round_events, preds = [], []

        def pair(t, history, _pos=pos, _events=round_events, _preds=preds):
            if t == len(_events):
                a = stream(_pos + t, estimates + _preds[:t])
                if a.dim != d:
                    raise DimensionMismatch("stream event dimension differs from the state")
                _events.append(a)
                _preds.append(student_predict(student, a))
            return _events[t], min(max(_preds[t], 0.0), 1.0)

        inst = ThresholdInstance(adversary=pair, m=m - pos, epsilon=eps, delta=delta0)
        res = upgraded_search(inst, rho, ss.spawn(1)[0], config.search)
        used += 1
        if res.kind == "all_within":
            for t, (a, mu_hat) in enumerate(zip(round_events, preds)):
                estimates.append(mu_hat)
                records.append({"t": pos + t, "round": used, "outcome": "pass",
                                "predicted": mu_hat, "corrected": None})
            pos = m
            break
        j = res.index
        for t in range(j):
            estimates.append(preds[t])
            records.append({"t": pos + t, "round": used, "outcome": "pass",
                            "predicted": preds[t], "corrected": None})
        estimates.append(res.estimate)
        records.append({"t": pos + j, "round": used, "outcome": "mistake",
                        "predicted": preds[j], "corrected": res.estimate})
        student = student_update(student, round_events[j], preds[j], res.estimate)
        pos += j + 1
    return ShadowResult(estimates, student.mistake_count, used, rounds, copies_budget,
                        records, student)
