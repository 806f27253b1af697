"""Structured events on tensor-power registers.

The search and decision algorithms compose events out of a few building
blocks: a local event on one copy of the state, its Naimark dilation, count
functions ``sum_k c_k A_k`` over many copies of a sub-event, complements and
quantum-OR projectors. Keeping that structure (instead of a dense matrix)
lets each simulation engine evaluate the event in its own representation:

* ``dense()``: the full matrix, subject to the dimension cap;
* ``fresh_expectation(rho)``: exact expectation on a fresh tensor power,
  using the binomial statistics of count events;
* ``classical(labels)``: firing probability given computational-basis labels
  of every atomic copy, valid for diagonal events;
* collective (permutation-symmetric) blocks, see :mod:`qda.collective`.

Every event carries a ``layout`` describing the register it acts on:
``("local", d)``, ``("dilate", inner)`` or ``("pow", copies, inner)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from . import quantum_core as qc
from .classical_stats import binomial_pmf
from .errors import DimensionMismatch, InvalidInput, UnsupportedBackend

__all__ = [
    "Event",
    "LocalEvent",
    "DilatedEvent",
    "CountEvent",
    "ComplementEvent",
    "OrEvent",
    "as_event",
    "layout_dim",
    "layout_span",
    "layout_local_dim",
    "layout_state",
    "poisson_binomial",
]


def layout_dim(layout):
    """Hilbert-space dimension of a layout, as an exact (possibly huge) integer."""
    kind = layout[0]
    if kind == "local":
        return int(layout[1])
    if kind == "dilate":
        return 2 * layout_dim(layout[1])
    return layout_dim(layout[2]) ** layout[1]


def layout_span(layout):
    """Number of atomic copies of the local state inside one register."""
    kind = layout[0]
    if kind == "local":
        return 1
    if kind == "dilate":
        return layout_span(layout[1])
    return layout[1] * layout_span(layout[2])


def layout_local_dim(layout):
    while layout[0] != "local":
        layout = layout[1] if layout[0] == "dilate" else layout[2]
    return layout[1]


def layout_state(layout, rho):
    """Dense state of a register with the given layout built from ``rho``."""
    qc.check_dimension(layout_dim(layout), "register state")
    kind = layout[0]
    if kind == "local":
        if rho.dim != layout[1]:
            raise DimensionMismatch(f"state has dimension {rho.dim}, layout expects {layout[1]}")
        return rho
    if kind == "dilate":
        return qc.dilate_state(layout_state(layout[1], rho))
    return qc.tensor_power(layout_state(layout[2], rho), layout[1])


def poisson_binomial(probs):
    """Law of the number of successes, one row per row of ``probs``.

    ``probs`` has shape ``(T, n)``; the result has shape ``(T, n + 1)``.
    """
    probs = np.atleast_2d(probs)
    t, n = probs.shape
    dist = np.zeros((t, n + 1))
    dist[:, 0] = 1.0
    for j in range(n):
        p = probs[:, j:j + 1]
        dist[:, 1:j + 2] = dist[:, 1:j + 2] * (1 - p) + dist[:, 0:j + 1] * p
        dist[:, 0:1] *= 1 - p
    return dist


class Event:
    """Base class; subclasses fill in the evaluation hooks."""

    layout: tuple
    is_projector: bool

    def __init__(self):
        self._cache = {}

    @property
    def dim(self):
        return layout_dim(self.layout)

    @property
    def span(self):
        return layout_span(self.layout)

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def dense(self):
        """Dense matrix of the event (cached)."""
        qc.check_dimension(self.dim, f"dense {type(self).__name__}")
        return self._cached("dense", self._dense)

    def dense_sqrt(self):
        return self._cached("dense_sqrt", lambda: qc.psd_sqrt(self.dense()))

    def quantum_event(self):
        return qc.QuantumEvent(self.dense(), is_projector=self.is_projector, validate=False)

    def _dense(self):
        raise NotImplementedError

    def fresh_expectation(self, rho):
        raise NotImplementedError

    def is_diagonal(self):
        raise NotImplementedError

    def classical(self, labels):
        raise NotImplementedError

    def complement(self):
        return ComplementEvent(self)


def as_event(x):
    if isinstance(x, Event):
        return x
    if isinstance(x, qc.QuantumEvent):
        return LocalEvent(x)
    raise InvalidInput(f"cannot interpret {type(x).__name__} as an event")


class LocalEvent(Event):
    """A :class:`~qda.quantum_core.QuantumEvent` acting on a single copy."""

    def __init__(self, event):
        super().__init__()
        self.event = event
        self.layout = ("local", event.dim)
        self.is_projector = event.is_projector

    def _dense(self):
        return self.event.matrix

    def fresh_expectation(self, rho):
        return qc.expectation(rho, self.event)

    def is_diagonal(self):
        return self._cached("diag", self.event.is_diagonal)

    def classical(self, labels):
        if not self.is_diagonal():
            raise UnsupportedBackend("classical engine needs diagonal events")
        values = np.clip(np.diag(self.event.matrix).real, 0.0, 1.0)
        return values[labels[:, 0]]


class DilatedEvent(Event):
    """Naimark dilation of ``inner``: a projector read on ``|0><0| (x) state``."""

    def __init__(self, inner):
        super().__init__()
        self.inner = as_event(inner)
        self.layout = ("dilate", self.inner.layout)
        self.is_projector = True

    def _dense(self):
        return qc.naimark_dilate(self.inner.quantum_event()).matrix

    def fresh_expectation(self, rho):
        return self.inner.fresh_expectation(rho)

    def is_diagonal(self):
        # the dilation of a diagonal projector is diagonal; otherwise the
        # off-diagonal block sqrt(A(1-A)) is nonzero
        return self.inner.is_projector and self.inner.is_diagonal()

    def classical(self, labels):
        if not self.is_diagonal():
            raise UnsupportedBackend(
                "classical engine cannot dilate a non-projector event; "
                "the ancilla would no longer stay in |0>")
        # the ancilla is |0> and the dilation of a projector acts as the
        # projector itself on that sector
        return self.inner.classical(labels)


class CountEvent(Event):
    """``sum_k coeffs[k] A_k`` over ``copies`` copies of ``inner``.

    ``A_k`` is the count event of ``inner`` (exactly ``k`` factors fire).
    """

    def __init__(self, inner, copies, coeffs):
        super().__init__()
        self.inner = as_event(inner)
        self.copies = int(copies)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.copies + 1,):
            raise InvalidInput(f"need {self.copies + 1} coefficients, got {coeffs.shape}")
        if coeffs.min() < -1e-12 or coeffs.max() > 1 + 1e-12:
            raise InvalidInput("coefficients must lie in [0, 1]")
        self.coeffs = np.clip(coeffs, 0.0, 1.0)
        self.layout = ("pow", self.copies, self.inner.layout)
        self.is_projector = self.inner.is_projector and bool(
            np.all((self.coeffs == 0) | (self.coeffs == 1)))

    def _parts(self):
        """Eigenbasis ``u`` of the inner event and diagonal of the count operator."""
        def build():
            w, u = np.linalg.eigh(qc.hermitize(self.inner.dense()))
            w = np.clip(w, 0.0, 1.0)
            if self.inner.is_projector:
                w = np.rint(w)
            diag = qc._poisson_binomial_rows(w, self.copies)
            return u, diag
        return self._cached("parts", build)

    def _from_diag(self, values):
        u, rows = self._parts()
        diag = rows @ values
        big = u
        for _ in range(self.copies - 1):
            big = np.kron(big, u)
        return qc.hermitize((big * diag) @ big.conj().T)

    def _dense(self):
        return self._from_diag(self.coeffs)

    def dense_sqrt(self):
        # all count events of one inner event commute, so the square root is
        # the count operator whose per-string value is sqrt of the mixture;
        # for projector inner events that is just sqrt of the coefficients
        def build():
            u, rows = self._parts()
            diag = np.sqrt(np.clip(rows @ self.coeffs, 0.0, None))
            big = u
            for _ in range(self.copies - 1):
                big = np.kron(big, u)
            return qc.hermitize((big * diag) @ big.conj().T)
        qc.check_dimension(self.dim, "dense CountEvent")
        return self._cached("dense_sqrt", build)

    def complement(self):
        # the count events resolve the identity, so 1 - sum c_k A_k = sum (1 - c_k) A_k
        return self._cached("complement",
                            lambda: CountEvent(self.inner, self.copies, 1.0 - self.coeffs))

    def fresh_expectation(self, rho):
        p = self.inner.fresh_expectation(rho)
        return float(np.dot(binomial_pmf(self.copies, min(max(p, 0.0), 1.0)).weights, self.coeffs))

    def is_diagonal(self):
        return self.inner.is_diagonal()

    def classical(self, labels):
        t = labels.shape[0]
        inner = self.inner.classical(labels.reshape(t * self.copies, -1)).reshape(t, self.copies)
        if self.inner.is_projector:
            # projector values are 0/1, so the row sums are exact counts
            k = np.rint(inner.sum(axis=1)).astype(int)
            return self.coeffs[k]
        return poisson_binomial(inner) @ self.coeffs


class ComplementEvent(Event):
    def __init__(self, inner):
        super().__init__()
        self.inner = as_event(inner)
        self.layout = self.inner.layout
        self.is_projector = self.inner.is_projector

    def _dense(self):
        m = self.inner.dense()
        return np.eye(m.shape[0]) - m

    def fresh_expectation(self, rho):
        return 1.0 - self.inner.fresh_expectation(rho)

    def is_diagonal(self):
        return self.inner.is_diagonal()

    def classical(self, labels):
        return 1.0 - self.inner.classical(labels)

    def complement(self):
        return self.inner


class OrEvent(Event):
    """Projector onto eigenvalues ``>= nu`` of the sum of ``events``."""

    def __init__(self, events, nu):
        super().__init__()
        self.events = [as_event(e) for e in events]
        if not self.events:
            raise InvalidInput("OR of zero events")
        if not nu > 0:
            raise InvalidInput("nu must be positive")
        self.nu = float(nu)
        self.layout = self.events[0].layout
        if any(e.layout != self.layout for e in self.events):
            raise DimensionMismatch("OR components act on different registers")
        self.is_projector = True

    def _dense(self):
        total = sum(e.dense() for e in self.events)
        w, v = np.linalg.eigh(qc.hermitize(total))
        keep = v[:, w >= self.nu - 1e-12]
        return keep @ keep.conj().T

    def fresh_expectation(self, rho):
        if self.is_diagonal():
            return _classical_fresh_expectation(self, rho)
        if layout_dim(self.layout) <= qc.get_dimension_cap():
            return qc.expectation(layout_state(self.layout, rho).matrix, self.dense())
        from .collective import collective_fresh_expectation
        return collective_fresh_expectation(self, rho)

    def is_diagonal(self):
        return all(e.is_diagonal() for e in self.events)

    def classical(self, labels):
        total = sum(e.classical(labels) for e in self.events)
        return (total >= self.nu - 1e-12).astype(float)


def _label_types(n, d):
    """All count vectors of ``n`` labels over ``d`` symbols."""
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _label_types(n - first, d - 1):
            yield (first,) + rest


def _classical_fresh_expectation(event, rho, max_strings=2 ** 16):
    """Exact fresh expectation of a diagonal event.

    Only the diagonal of ``rho`` matters. On a flat register
    ``("pow", n, ("local", d))`` every event built here is invariant under
    permuting the copies, so it suffices to enumerate label types (how many
    copies carry each label) with multinomial weights. Other layouts fall
    back to enumerating all label strings when that is cheap.
    """
    d = layout_local_dim(event.layout)
    span = layout_span(event.layout)
    probs = np.clip(np.diag(rho.matrix).real, 0.0, None)
    layout = event.layout
    if layout[0] == "pow" and layout[2][0] == "local":
        types = np.array(list(_label_types(span, d)))
        reps = np.stack([np.repeat(np.arange(d), t) for t in types])
        live = probs > 0
        logp = np.log(np.where(live, probs, 1.0))
        contrib = np.where(types > 0, types * logp, 0.0)
        contrib[:, ~live] = np.where(types[:, ~live] > 0, -np.inf, 0.0)
        logw = gammaln(span + 1) - gammaln(types + 1).sum(axis=1) + contrib.sum(axis=1)
        return float(np.dot(np.exp(logw), event.classical(reps)))
    if float(d) ** span > max_strings:
        raise UnsupportedBackend(
            f"exact expectation of this event needs {float(d) ** span:.3g} label strings")
    labels = np.indices((d,) * span).reshape(span, -1).T
    weights = np.prod(probs[labels], axis=1)
    return float(np.dot(weights, event.classical(labels)))
