"""Registers holding the copies an algorithm measures sequentially.

A register is created from a layout (see :mod:`qda.events`) and the local
state; it answers two-outcome measurements of events with that layout and
applies the canonical collapse.

``DenseRegister``
    full density matrix; exact probabilities; subject to the dimension cap.
``CollectiveRegister``
    permutation-symmetric blocks for a flat register of qubits; exact.
``ClassicalRegister``
    for diagonal events only: computational-basis labels of every copy are
    drawn once from the diagonal of the state. Every event is then a
    function of the hidden labels, so drawing each outcome with its
    label-conditional probability reproduces the joint law of all outcomes
    exactly. Sampling only: no exact probabilities.
"""
from __future__ import annotations

import numpy as np

from . import quantum_core as qc
from .collective import CollectiveState, collective_blocks, supports_collective
from .errors import InvalidInput, ResourceCapExceeded, UnsupportedBackend, ZeroProbabilityError
from .events import layout_dim, layout_local_dim, layout_span, layout_state

__all__ = [
    "DenseRegister",
    "CollectiveRegister",
    "ClassicalRegister",
    "choose_backend",
    "make_register",
    "holdout_count",
    "BACKENDS",
]

BACKENDS = ("auto", "dense", "collective", "classical")


class DenseRegister:
    exact = True
    name = "dense"

    def __init__(self, layout, rho, rng=None):
        self.layout = layout
        self.rho = layout_state(layout, rho).matrix.copy()

    def _check(self, event):
        if event.layout != self.layout:
            raise InvalidInput("event does not act on this register")

    def probability(self, event):
        self._check(event)
        return float(np.clip(np.vdot(event.dense(), self.rho).real, 0.0, 1.0))

    def collapse(self, event, occurred):
        self._check(event)
        k = (event if occurred else event.complement()).dense_sqrt()
        out = qc.hermitize(k @ self.rho @ k.conj().T)
        prob = float(np.trace(out).real)
        if prob <= 1e-15:
            raise ZeroProbabilityError(f"outcome has probability {prob:.3g}")
        self.rho = out / prob
        return prob

    def measure(self, event, rng):
        p = self.probability(event)
        occurred = bool(rng.random() < p)
        self.collapse(event, occurred)
        return occurred

    def snapshot(self):
        return self.rho.copy()

    def restore(self, snap):
        self.rho = snap.copy()


class CollectiveRegister:
    exact = True
    name = "collective"

    def __init__(self, layout, rho, rng=None):
        if not (layout[0] == "pow" and layout[2] == ("local", 2)):
            raise UnsupportedBackend("collective engine needs a flat register of qubits")
        self.layout = layout
        self.n = layout[1]
        if self.n + 1 > qc.get_dimension_cap():
            raise ResourceCapExceeded(self.n + 1, qc.get_dimension_cap(), "collective block")
        self.state = CollectiveState.product(rho, self.n)
        self.sectors = tuple(sorted(self.state.weights))

    def _blocks(self, event, sqrt=False):
        if event.layout != self.layout or not supports_collective(event):
            raise UnsupportedBackend(f"{type(event).__name__} has no collective form")
        return collective_blocks(event, self.sectors, sqrt=sqrt)

    def probability(self, event):
        return float(np.clip(self.state.expectation(self._blocks(event)), 0.0, 1.0))

    def collapse(self, event, occurred):
        ev = event if occurred else event.complement()
        return self.state.collapse(self._blocks(ev, sqrt=True))

    def measure(self, event, rng):
        p = self.probability(event)
        occurred = bool(rng.random() < p)
        self.collapse(event, occurred)
        return occurred

    def snapshot(self):
        return self.state.copy()

    def restore(self, snap):
        self.state = snap.copy()


class ClassicalRegister:
    exact = False
    name = "classical"

    def __init__(self, layout, rho, rng):
        self.layout = layout
        probs = np.clip(np.diag(rho.matrix).real, 0.0, None)
        probs = probs / probs.sum()
        self.labels = rng.choice(probs.size, size=layout_span(layout), p=probs)[None, :]

    def firing_probability(self, event):
        if event.layout != self.layout:
            raise InvalidInput("event does not act on this register")
        if not event.is_diagonal():
            raise UnsupportedBackend("classical engine needs diagonal events")
        return float(event.classical(self.labels)[0])

    def probability(self, event):
        raise UnsupportedBackend("the classical engine samples; it has no exact probabilities")

    def measure(self, event, rng):
        return bool(rng.random() < self.firing_probability(event))


def choose_backend(layout, backend="auto", diagonal=None):
    """Pick a register class for ``layout``.

    ``auto`` prefers the collective engine for flat qubit registers (exact
    and far cheaper), then the dense engine when it fits the cap, then the
    classical engine when the caller certifies that all events will be
    diagonal.
    """
    if backend not in BACKENDS:
        raise InvalidInput(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == "dense":
        qc.check_dimension(layout_dim(layout), "dense register")
        return DenseRegister
    if backend == "collective":
        return CollectiveRegister
    if backend == "classical":
        return ClassicalRegister
    cap = qc.get_dimension_cap()
    if layout[0] == "pow" and layout[2] == ("local", 2) and layout[1] + 1 <= cap:
        return CollectiveRegister
    if layout_dim(layout) <= cap:
        return DenseRegister
    if diagonal:
        return ClassicalRegister
    raise ResourceCapExceeded(layout_dim(layout), cap, "register")


def make_register(layout, rho, backend="auto", rng=None, diagonal=None):
    cls = choose_backend(layout, backend, diagonal)
    if layout_local_dim(layout) != rho.dim:
        raise InvalidInput("state dimension does not match the register layout")
    return cls(layout, rho, rng)


def holdout_count(event, rho, copies, rng, classical=False):
    """Number of firings when ``event`` is measured once on each of ``copies`` fresh registers.

    Fresh registers are independent, so the count is
    ``Binomial(copies, fresh expectation)``. With ``classical=True`` the
    registers are simulated label by label instead, which needs no exact
    expectation.
    """
    if classical:
        probs = np.clip(np.diag(rho.matrix).real, 0.0, None)
        probs = probs / probs.sum()
        labels = rng.choice(probs.size, size=(copies, event.span), p=probs)
        return int((rng.random(copies) < event.classical(labels)).sum())
    p = min(max(event.fresh_expectation(rho), 0.0), 1.0)
    return int(rng.binomial(copies, p))
