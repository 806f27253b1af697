"""Online threshold search reusing one batch of copies.

Pipeline: every event is Naimark-dilated to a projector, amplified on
``n_0`` copies so that expectations above the threshold map above 3/4 and
expectations ``epsilon`` below map under 1/4, and then fed to a search
that measures noisy threshold events on a single register of ``n`` copies,
halting at the first one that fires. ``L`` independent batches, each guarded
by a holdout check before it is allowed to select, drive the failure
probability down to ``delta``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binom

from . import quantum_core as qc
from .engines import holdout_count, make_register
from .errors import InvalidInput, ResourceCapExceeded, UnsupportedBackend
from .events import CountEvent, DilatedEvent, Event, as_event
from .noisy_threshold import tail_bound, threshold_coefficients

__all__ = [
    "ThresholdInstance",
    "SearchConfig",
    "StepRecord",
    "Transcript",
    "SearchResult",
    "reduce_to_projectors",
    "reduce_to_quarters",
    "quarters_copies",
    "amplification_copies_exact",
    "core_copies",
    "noise_rate",
    "core_event",
    "core_search",
    "CoreSearchRunner",
    "batched_search",
    "threshold_search",
    "search_plan",
]


@dataclass
class ThresholdInstance:
    """Events with thresholds, revealed one at a time.

    Parameters
    ----------
    pairs : sequence of (event, threshold), optional
        A fixed list.
    epsilon, delta : float
        Accuracy and confidence, both in ``(0, 1/2)``.
    adversary : callable, optional
        ``adversary(t, history) -> (event, threshold)`` producing the pair at
        zero-based step ``t`` from the outcomes so far (a list of strings).
        Used instead of ``pairs`` for adaptive streams.
    m : int, optional
        Stream length; required with ``adversary``.
    """

    pairs: Optional[Sequence] = None
    epsilon: float = 0.25
    delta: float = 0.2
    adversary: Optional[Callable] = None
    m: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise InvalidInput(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if not 0 < self.delta < 0.5:
            raise InvalidInput(f"delta must lie in (0, 1/2), got {self.delta}")
        if (self.pairs is None) == (self.adversary is None):
            raise InvalidInput("give exactly one of pairs or adversary")
        if self.pairs is not None:
            self.pairs = [(e, float(th)) for e, th in self.pairs]
            for _, th in self.pairs:
                if not 0.0 <= th <= 1.0:
                    raise InvalidInput(f"threshold {th} outside [0, 1]")
            if self.m is None:
                self.m = len(self.pairs)
            elif self.m != len(self.pairs):
                raise InvalidInput("m disagrees with the number of pairs")
        if self.m is None or self.m < 1:
            raise InvalidInput("the stream length m must be a positive integer")

    def pair(self, t, history):
        if self.pairs is not None:
            return self.pairs[t]
        event, theta = self.adversary(t, list(history))
        if not 0.0 <= theta <= 1.0:
            raise InvalidInput(f"threshold {theta} outside [0, 1]")
        return event, float(theta)


@dataclass(frozen=True)
class SearchConfig:
    """Constants of the search; the defaults were calibrated once and frozen.

    Attributes
    ----------
    n_override : int, optional
        Fixed register size for the core search.
    noise_mean_factor : float
        Noise mean is ``factor * sqrt(n)``.
    n_core_constant, n_core_min : float, int
        ``n = max(n_core_min, ceil(n_core_constant * log2(m)^2))``; the floor
        only matters for ``m = 1``.
    theta_core : float
        Threshold fraction of the noisy test.
    mode : {'sampled', 'exact'}
    backend : {'auto', 'dense', 'collective', 'classical'}
    batch_success : float
        Per-batch success floor used to size ``L``.
    failsafe_c, failsafe_eps : float
        Holdout test fires when the empirical frequency is at least ``c``;
        certified for expectations ``c + eps`` vs ``c - eps``.
    failsafe_constant : float
        ``delta' = delta / (constant * ln(1/delta))``.
    """

    n_override: Optional[int] = None
    noise_mean_factor: float = 4.0
    n_core_constant: float = 8.0
    n_core_min: int = 8
    theta_core: float = 2.0 / 3.0
    mode: str = "sampled"
    backend: str = "auto"
    batch_success: float = 0.05
    failsafe_c: float = 0.3
    failsafe_eps: float = 0.03
    failsafe_constant: float = 42.0

    def __post_init__(self):
        if self.noise_mean_factor < 1:
            raise InvalidInput("noise_mean_factor must be at least 1")
        if not 0 < self.theta_core < 1:
            raise InvalidInput("theta_core must lie in (0, 1)")
        if self.mode not in ("sampled", "exact"):
            raise InvalidInput(f"mode must be 'sampled' or 'exact', got {self.mode!r}")
        if self.n_override is not None and self.n_override < 1:
            raise InvalidInput("n_override must be positive")

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass
class StepRecord:
    index: int
    outcome: str
    p: Optional[float] = None
    r: Optional[float] = None
    q: Optional[float] = None
    trace: Optional[float] = None
    batch: int = 0

    def as_dict(self):
        return {k: getattr(self, k) for k in ("index", "batch", "outcome", "p", "r", "q", "trace")}


@dataclass
class Transcript:
    steps: list = field(default_factory=list)
    selected: Optional[int] = None
    copies_used: int = 0
    halting: Optional[np.ndarray] = None

    def q_values(self, batch=0):
        return [s.q for s in self.steps if s.batch == batch and s.q is not None]

    def records(self):
        return [s.as_dict() for s in self.steps]


@dataclass
class SearchResult:
    """Outcome of a search.

    ``kind`` is ``'above'`` (with ``index``) or ``'all_below'``.
    """

    kind: str
    index: Optional[int]
    transcript: Transcript

    @property
    def selected(self):
        return self.index


def reduce_to_projectors(events):
    """Naimark-dilate every event; expectations on ``|0><0| (x) rho`` are preserved."""
    return [DilatedEvent(as_event(e)) for e in events]


def _tail_ge(k, n, p):
    return float(binom.sf(k - 1, n, p))


@lru_cache(maxsize=None)
def quarters_copies(epsilon, high=0.75, low=0.25, limit=100000):
    """Smallest ``n_0`` such that, for every threshold, amplification maps
    ``E > theta`` above ``high`` and ``E <= theta - epsilon`` to at most ``low``.

    The amplified event fires when at least ``ceil((theta - epsilon/2) n_0)``
    of ``n_0`` copies fire, so it suffices to check, for each count ``k``, the
    least favourable expectation in each direction via exact binomial tails.
    """
    for n in range(1, limit):
        k = np.arange(1, n + 1)
        p_up = (k - 1) / n + epsilon / 2
        mask = p_up <= 1
        if np.any(binom.sf(k[mask] - 1, n, p_up[mask]) < high):
            continue
        p_lo = k / n - epsilon / 2
        mask = (p_lo >= 0) & (p_lo <= 1)
        if np.any(binom.sf(k[mask] - 1, n, p_lo[mask]) > low):
            continue
        return n
    raise InvalidInput(f"no block size below {limit} works for epsilon={epsilon}")


@lru_cache(maxsize=None)
def amplification_copies_exact(c, eps, delta, limit=200000):
    """Smallest ``h`` and count threshold ``k`` with one-sided error ``delta``.

    Firing rule: at least ``k = ceil(c h)`` of ``h`` fresh copies fire.
    Expectation ``>= c + eps`` fires with probability ``>= 1 - delta``;
    expectation ``<= c - eps`` fires with probability ``<= delta``.
    """
    h = np.arange(1, limit)
    k = np.ceil(c * h - 1e-12)
    ok = (binom.sf(k - 1, h, c + eps) >= 1 - delta) & (binom.sf(k - 1, h, c - eps) <= delta)
    if not ok.any():
        raise InvalidInput("holdout size exceeds the search limit")
    i = int(np.argmax(ok))
    return int(h[i]), int(k[i])


def core_copies(m, config):
    if config.n_override is not None:
        return int(config.n_override)
    return max(int(config.n_core_min),
               math.ceil(config.n_core_constant * math.log2(max(m, 1)) ** 2))


def noise_rate(n, config):
    """``lam = 1 / E[X]`` with ``E[X] = factor * sqrt(n)``."""
    return 1.0 / (config.noise_mean_factor * math.sqrt(n))


def core_event(projector, n, config):
    """Noisy threshold event of the core search on ``n`` copies."""
    return CountEvent(as_event(projector), n,
                      threshold_coefficients(n, noise_rate(n, config), config.theta_core))


def reduce_to_quarters(projectors, thresholds, epsilon, n0=None):
    """Amplify projectors to the 3/4-vs-1/4 promise form."""
    if n0 is None:
        n0 = quarters_copies(epsilon)
    out = []
    for proj, theta in zip(projectors, thresholds):
        c = max(theta - epsilon / 2, 0.0)
        out.append(CountEvent(as_event(proj), n0, qc.amplification_coefficients(n0, 0.0, c)))
    return out


class CoreSearchRunner:
    """Core search over a fixed list of projectors on ``n`` copies.

    With an exact engine the chain of "pass" collapses is deterministic, so
    it is computed once and reused across sampled trials: each trial only
    draws the halting step from the exact conditional pass probabilities.
    """

    def __init__(self, projectors, rho, config=SearchConfig(), m=None):
        self.events = [as_event(p) for p in projectors]
        self.rho = rho
        self.config = config
        self.m = m if m is not None else len(self.events)
        self.n = core_copies(self.m, config)
        self.lam = noise_rate(self.n, config)
        self.core = [core_event(e, self.n, config) for e in self.events]
        self.layout = self.core[0].layout if self.core else None
        diagonal = all(e.is_diagonal() for e in self.events)
        self._diagonal = diagonal
        self._chain = None

    def _register(self, rng=None):
        return make_register(self.layout, self.rho, self.config.backend, rng, self._diagonal)

    def exact_chain(self):
        """Fresh probabilities ``p_i`` and pass probabilities ``r_i``, ``q_i``."""
        if self._chain is None:
            reg = self._register()
            if not reg.exact:
                raise UnsupportedBackend("exact mode needs the dense or collective engine")
            fresh = reg.snapshot()
            p, r, q = [], [], []
            qi = 1.0
            for ev in self.core:
                snap = reg.snapshot()
                reg.restore(fresh)
                p.append(reg.probability(ev))
                reg.restore(snap)
                fire = reg.probability(ev)
                ri = 1.0 - fire
                r.append(ri)
                qi *= ri
                q.append(qi)
                if ri <= 1e-15:
                    break
                reg.collapse(ev, occurred=False)
            self._chain = (np.array(p), np.array(r), np.array(q))
        return self._chain

    def halting_distribution(self):
        """Probability of selecting each step; last entry is passing on all."""
        _, r, q = self.exact_chain()
        prev = np.concatenate([[1.0], q[:-1]])
        sel = prev * (1.0 - r)
        out = np.zeros(len(self.core) + 1)
        out[: sel.size] = sel
        out[-1] = q[-1] if q[-1] > 1e-15 else 0.0
        return out

    def run(self, rng, mode=None):
        mode = mode or self.config.mode
        tr = Transcript(copies_used=self.n * self._atomic_span())
        if mode == "exact":
            p, r, q = self.exact_chain()
            for i in range(r.size):
                tr.steps.append(StepRecord(i, "pass", float(p[i]), float(r[i]), float(q[i]),
                                           float(q[i])))
            tr.halting = self.halting_distribution()
            return SearchResult("distribution", None, tr)
        try:
            _, r, q = self.exact_chain()
            exact = True
        except UnsupportedBackend:
            exact = False
        if exact:
            trace = 1.0
            for i in range(r.size):
                fired = rng.random() >= r[i]
                trace *= (1.0 - r[i]) if fired else r[i]
                tr.steps.append(StepRecord(i, "select" if fired else "pass", None, float(r[i]),
                                           float(q[i]), trace))
                if fired:
                    tr.selected = i
                    return SearchResult("above", i, tr)
            return SearchResult("all_below", None, tr)
        reg = self._register(rng)
        for i, ev in enumerate(self.core):
            fired = reg.measure(ev, rng)
            tr.steps.append(StepRecord(i, "select" if fired else "pass"))
            if fired:
                tr.selected = i
                return SearchResult("above", i, tr)
        return SearchResult("all_below", None, tr)

    def _atomic_span(self):
        return self.events[0].span if self.events else 1

    def fresh_bounds(self):
        """Per-step tail bound ``exp(-n lam (theta - (e-1) E[A]))``."""
        return np.array([tail_bound(self.n, self.lam, self.config.theta_core,
                                    e.fresh_expectation(self.rho)) for e in self.events])


def core_search(projectors, rho, config=SearchConfig(), seed=None, mode=None):
    """Single pass of the core search.

    Returns a :class:`SearchResult`; in exact mode ``kind`` is
    ``'distribution'`` and ``transcript.halting`` holds the probability of
    selecting each index (last entry: passing on all).
    """
    runner = CoreSearchRunner(projectors, rho, config)
    return runner.run(np.random.default_rng(seed), mode)


def search_plan(m, epsilon, delta, config=SearchConfig()):
    """Sizes used by :func:`threshold_search`; also the copy budget."""
    return dict(_search_plan(m, epsilon, delta, config))


@lru_cache(maxsize=None)
def _search_plan(m, epsilon, delta, config):
    n0 = quarters_copies(epsilon)
    n_core = core_copies(m, config)
    batches = max(1, math.ceil(math.log(delta) / math.log(1 - config.batch_success)))
    delta_fs = delta / (config.failsafe_constant * math.log(1 / delta))
    holdout, k_fs = amplification_copies_exact(config.failsafe_c, config.failsafe_eps, delta_fs)
    copies = batches * (n_core + holdout) * n0
    return {
        "n0": n0, "n_core": n_core, "batches": batches, "delta_failsafe": delta_fs,
        "holdout": holdout, "failsafe_count": k_fs, "copies": copies,
        "lam": noise_rate(n_core, config),
    }


def batched_search(next_event, m, rho, delta, config=SearchConfig(), seed=None, plan=None,
                   inner_span=None):
    """Failsafe-guarded search over ``L`` batches for promise-form projectors.

    Parameters
    ----------
    next_event : callable
        ``next_event(t, history) -> Event`` returning the promise-form
        projector (expectation above 3/4 or at most 1/4 is the intended
        promise) at zero-based step ``t``.
    m : int
        Stream length.
    rho : QuantumState
        Local state; events act on registers built from it.
    delta : float
    config : SearchConfig
    seed : int or SeedSequence
    plan : dict, optional
        Output of :func:`search_plan` (recomputed with ``epsilon=None`` if absent).

    Returns
    -------
    SearchResult
        ``'above'`` claims the selected expectation exceeds 1/4;
        ``'all_below'`` claims every expectation is at most 3/4.
    """
    if plan is None:
        n_core = core_copies(m, config)
        batches = max(1, math.ceil(math.log(delta) / math.log(1 - config.batch_success)))
        delta_fs = delta / (config.failsafe_constant * math.log(1 / delta))
        holdout, k_fs = amplification_copies_exact(config.failsafe_c, config.failsafe_eps,
                                                   delta_fs)
        plan = {"n_core": n_core, "batches": batches, "holdout": holdout,
                "failsafe_count": k_fs}
    n_core, batches = plan["n_core"], plan["batches"]
    holdout, k_fs = plan["holdout"], plan["failsafe_count"]
    lam = noise_rate(n_core, config)
    coeffs = threshold_coefficients(n_core, lam, config.theta_core)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(s) for s in ss.spawn(batches)]
    registers = [None] * batches
    active = [True] * batches
    history = []
    tr = Transcript()
    for t in range(m):
        event = as_event(next_event(t, history))
        core = CountEvent(event, n_core, coeffs)
        if tr.copies_used == 0:
            tr.copies_used = batches * (n_core + holdout) * event.span
        diagonal = event.is_diagonal()
        for b in range(batches):
            if not active[b]:
                continue
            if registers[b] is None:
                registers[b] = make_register(core.layout, rho, config.backend, rngs[b], diagonal)
            fired = registers[b].measure(core, rngs[b])
            if not fired:
                tr.steps.append(StepRecord(t, "pass", batch=b))
                continue
            try:
                count = holdout_count(event, rho, holdout, rngs[b])
            except ResourceCapExceeded:
                count = holdout_count(event, rho, holdout, rngs[b], classical=True)
            if count >= k_fs:
                tr.steps.append(StepRecord(t, "select", batch=b))
                tr.selected = t
                return SearchResult("above", t, tr)
            tr.steps.append(StepRecord(t, "abort", batch=b))
            active[b] = False
        history.append("pass")
    return SearchResult("all_below", None, tr)


def threshold_search(instance, rho, seed=None, config=SearchConfig()):
    """Online threshold search.

    Returns ``SearchResult('above', j)`` claiming ``E[A_j] > theta_j - epsilon``
    or ``SearchResult('all_below')`` claiming ``E[A_i] <= theta_i`` for all
    ``i``; wrong with probability at most ``delta``.
    """
    plan = search_plan(instance.m, instance.epsilon, instance.delta, config)
    n0 = plan["n0"]
    span = []

    def next_event(t, history):
        event, theta = instance.pair(t, history)
        proj = reduce_to_projectors([event])[0]
        span.append(proj.span)
        return reduce_to_quarters([proj], [theta], instance.epsilon, n0)[0]

    result = batched_search(next_event, instance.m, rho, instance.delta, config, seed, plan)
    # events may themselves act on several copies of rho
    result.transcript.copies_used = plan["copies"] * (span[0] if span else 1)
    return result
