"""Select the hypothesis state closest to an unknown state.

Three routes over the pairwise Helstrom events ``A_ij``:

* ``select_via_shadow``: estimate every ``E[A_ij]`` with Shadow Tomography,
  then pick the minimum-distance (Yatracos) hypothesis.
* ``select_via_search``: for a guess ``eta_bar`` of the optimal distance,
  build one decision projector per hypothesis and threshold-search over
  their complements, halving ``eta_bar`` until the search comes back empty
  and then bisecting toward the optimal distance.
* ``unique_decode``: when the hypotheses are well separated, measure all
  decision projectors once in sequence and read off the single survivor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import quantum_core as qc
from .engines import make_register
from .errors import Ambiguous, DimensionMismatch, InvalidInput, ZeroProbabilityError
from .events import ComplementEvent
from .shadow_tomography import ShadowConfig, shadow_tomography
from .threshold_decision import decision_copies, decision_event
from .threshold_search import SearchConfig, ThresholdInstance, threshold_search

__all__ = [
    "HypothesisSet",
    "build_hypothesis_set",
    "yatracos_select",
    "SelectionResult",
    "select_via_shadow",
    "select_via_search",
    "unique_decode",
    "decoding_projectors",
]


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Hypothesis states with their pairwise Helstrom events and distances.

    ``events[(i, j)]`` for ``i < j`` satisfies
    ``E_{sigma_i}[A_ij] - E_{sigma_j}[A_ij] = d_tr(sigma_i, sigma_j)``.
    """

    states: tuple
    events: dict
    distances: np.ndarray

    @property
    def m(self):
        return len(self.states)

    @property
    def dim(self):
        return self.states[0].dim

    @property
    def pairs(self):
        return list(combinations(range(self.m), 2))

    def event(self, i, j):
        """``A_ij``, with ``A_ji = 1 - A_ij``."""
        if i < j:
            return self.events[(i, j)]
        return self.events[(j, i)].complement()

    def expectations(self, state):
        """``E_state[A_ij]`` in the order of :attr:`pairs`."""
        return np.array([qc.expectation(state, self.events[p]) for p in self.pairs])

    def hypothesis_table(self):
        """Row ``k`` holds ``E_{sigma_k}[A_ij]`` for every pair."""
        return np.stack([self.expectations(s) for s in self.states])

    def separation(self):
        """Smallest pairwise trace distance."""
        return float(min(self.distances[p] for p in self.pairs))

    def gaps(self, rho):
        """``Delta_k = max_ij |E_{sigma_k}[A_ij] - E_rho[A_ij]|`` for every ``k``."""
        return np.abs(self.hypothesis_table() - self.expectations(rho)).max(axis=1)


def build_hypothesis_set(states):
    states = tuple(states)
    if len(states) < 2:
        raise InvalidInput("need at least two hypotheses")
    if len({s.dim for s in states}) != 1:
        raise DimensionMismatch("hypotheses have different dimensions")
    m = len(states)
    events, dist = {}, np.zeros((m, m))
    for i, j in combinations(range(m), 2):
        events[(i, j)] = qc.helstrom_event(states[i], states[j])
        dist[i, j] = dist[j, i] = qc.trace_distance(states[i], states[j])
    dist.setflags(write=False)
    return HypothesisSet(states, events, dist)


def yatracos_select(hset, estimates, tie_tol=1e-12):
    """Minimum-distance hypothesis for estimates of ``E_rho[A_ij]``.

    Parameters
    ----------
    hset : HypothesisSet
    estimates : mapping (i, j) -> float, or array in the order of ``hset.pairs``

    Returns
    -------
    k : int
        Minimiser of ``max_ij |E_{sigma_k}[A_ij] - estimate_ij|``; ties within
        ``tie_tol`` go to the smallest index.
    scores : ndarray
    """
    if isinstance(estimates, dict):
        missing = [p for p in hset.pairs if p not in estimates]
        if missing:
            raise InvalidInput(f"missing estimates for pairs {missing}")
        mu = np.array([estimates[p] for p in hset.pairs], dtype=float)
    else:
        mu = np.asarray(estimates, dtype=float)
        if mu.shape != (len(hset.pairs),):
            raise InvalidInput(f"need {len(hset.pairs)} estimates")
    scores = np.abs(hset.hypothesis_table() - mu).max(axis=1)
    k = int(np.flatnonzero(scores <= scores.min() + tie_tol)[0])
    return k, scores


@dataclass
class SelectionResult:
    index: int
    detail: dict = field(default_factory=dict)


def select_via_shadow(hset, rho, epsilon, delta, seed=None, config: Optional[ShadowConfig] = None):
    """Shadow Tomography at accuracy ``epsilon / 2`` then Yatracos selection."""
    base = config or ShadowConfig()
    cfg = ShadowConfig(epsilon / 2, delta, base.mistake_constant, base.search)
    events = [hset.events[p] for p in hset.pairs]
    shadow = shadow_tomography(events, rho, cfg, seed)
    k, scores = yatracos_select(hset, shadow.estimates)
    return SelectionResult(k, {"estimates": shadow.estimates, "scores": scores,
                               "mistakes": shadow.mistakes, "copies": shadow.copies_budget})


def _decision_projectors(hset, eta_bar, epsilon, delta0):
    """Per-hypothesis decision projectors ``B_k`` on a common number of copies."""
    events = [hset.events[p] for p in hset.pairs]
    table = hset.hypothesis_table()
    etas = [eta_bar] * len(events)
    m0 = len(events)
    high, low = 1 - delta0 / 2, delta0 ** 3 / (16 * m0)
    n = max(decision_copies(list(row), epsilon, etas, high, low) for row in table)
    projs = [decision_event(events, list(row), epsilon, delta0, etas, n)[0] for row in table]
    return projs, n


def decoding_projectors(hset, epsilon, delta):
    """``B_k`` for unique decoding with ``eta_bar = (alpha - epsilon) / 2``."""
    alpha = hset.separation()
    if alpha <= epsilon:
        raise InvalidInput(f"separation {alpha:.3g} does not exceed epsilon {epsilon}")
    return _decision_projectors(hset, (alpha - epsilon) / 2, epsilon, delta / (4 * hset.m))


def select_via_search(hset, rho, epsilon, delta, seed=None, eta=None,
                      config=SearchConfig(), ratio=1.01):
    """Threshold search over decision projectors with an ``eta_bar`` schedule.

    A search at guess ``eta_bar`` with decision accuracy ``eps0`` returns
    (with high probability) some ``k`` whose gap is at most
    ``eta_bar + eps0``, and finds one whenever ``eta <= eta_bar``. The
    schedule halves ``eta_bar`` from 1 until a search comes back empty or
    ``eta_bar <= epsilon / 2``, then bisects geometrically between the last
    empty and the last successful guess until they are within ``ratio``.
    With ``eps0 = epsilon / 2`` the returned hypothesis is within
    ``(2 + ratio) * eta + epsilon`` of ``rho``.

    With ``eta`` given a single search runs at ``eta_bar = eta`` and
    ``eps0 = epsilon``.

    Parameters
    ----------
    ratio : float
        Stopping ratio of the bisection, greater than 1.
    """
    if not 0 < epsilon < 0.5 or not 0 < delta < 0.5:
        raise InvalidInput("epsilon and delta must lie in (0, 1/2)")
    if ratio <= 1:
        raise InvalidInput("ratio must exceed 1")
    halving = math.ceil(math.log2(2 / epsilon)) + 1
    bisection = max(0, math.ceil(math.log2(math.log(2) / math.log(ratio))))
    delta_step = delta / (2 * (halving + bisection))
    eps0 = epsilon if eta is not None else epsilon / 2
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rounds, copies = [], 0

    def search(eta_bar):
        nonlocal copies
        projs, n0 = _decision_projectors(hset, eta_bar, eps0, 1 / 3)
        pairs = [(ComplementEvent(b), 0.5) for b in projs]
        inst = ThresholdInstance(pairs=pairs, epsilon=1 / 6, delta=delta_step)
        res = threshold_search(inst, rho, ss.spawn(1)[0], config)
        copies += res.transcript.copies_used
        rounds.append({"eta_bar": eta_bar, "kind": res.kind, "index": res.index, "n0": n0})
        return res.index if res.kind == "above" else None

    if eta is not None:
        best = search(float(eta))
    else:
        best, hi, lo = None, None, None
        eta_bar = 1.0
        while True:
            found = search(eta_bar)
            if found is None:
                lo = eta_bar
                break
            best, hi = found, eta_bar
            if eta_bar <= epsilon / 2:
                break
            eta_bar /= 2
        # an empty search at lo says eta > lo; tighten hi toward it
        while best is not None and lo is not None and hi > ratio * lo:
            mid = math.sqrt(lo * hi)
            found = search(mid)
            if found is None:
                lo = mid
            else:
                best, hi = found, mid
    # no candidate at all only happens when the first search already failed
    return SelectionResult(0 if best is None else best,
                           {"rounds": rounds, "copies": copies, "found": best is not None})


def unique_decode(hset, rho, epsilon, delta, seed=None, mode="sampled", backend="auto"):
    """Sequentially measure the complements of ``B_1..B_m`` and return the survivor.

    The caller asserts ``eta < (alpha - epsilon) / 2``. In sampled mode the
    outcomes are drawn and :class:`Ambiguous` is raised unless exactly one
    complement occurs. In exact mode the result's detail holds, for every
    ``k``, the exact probability that ``k`` is the single survivor.
    """
    projs, n = decoding_projectors(hset, epsilon, delta)
    comps = [ComplementEvent(b) for b in projs]
    layout = comps[0].layout
    diagonal = all(c.is_diagonal() for c in comps)
    if mode == "exact":
        reg = make_register(layout, rho, backend, None, diagonal)
        fresh = reg.snapshot()
        probs = np.zeros(hset.m)
        for target in range(hset.m):
            reg.restore(fresh)
            prob = 1.0
            for k, c in enumerate(comps):
                want = k == target
                p = reg.probability(c)
                p = p if want else 1.0 - p
                if p <= 1e-15:
                    prob = 0.0
                    break
                prob *= p
                try:
                    reg.collapse(c, occurred=want)
                except ZeroProbabilityError:
                    # 1 - p computed by subtraction can sit above the floor
                    # while the engine's direct value is below it
                    prob = 0.0
                    break
            probs[target] = prob
        best = int(np.argmax(probs))
        return SelectionResult(best, {"success": probs, "copies": n})
    rng = np.random.default_rng(seed)
    reg = make_register(layout, rho, backend, rng, diagonal)
    survivors = [k for k, c in enumerate(comps) if reg.measure(c, rng)]
    if len(survivors) != 1:
        raise Ambiguous(f"{len(survivors)} hypotheses survived: {survivors}")
    return SelectionResult(survivors[0], {"copies": n})
