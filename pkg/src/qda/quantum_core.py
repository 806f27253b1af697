"""Dense density-matrix simulation.

States and events are stored as full complex matrices. Anything built from
tensor powers is checked against a global dimension cap (default 4096,
overridable with the ``QDA_DIM_CAP`` environment variable or the
:func:`dimension_cap` context manager).

Tensor products use the :func:`numpy.kron` convention: the leftmost factor is
the most significant index. The Naimark dilation places the ancilla first, so
a state ``rho`` is embedded as ``|0><0| (x) rho = blockdiag(rho, 0)``.
"""
from __future__ import annotations

import contextlib
import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import DimensionMismatch, InvalidInput, ResourceCapExceeded, ZeroProbabilityError

__all__ = [
    "QuantumState",
    "QuantumEvent",
    "SpectralDecomposition",
    "Measurement",
    "QuantumOperation",
    "get_dimension_cap",
    "dimension_cap",
    "check_dimension",
    "hermitize",
    "psd_sqrt",
    "expectation",
    "collapse_canonical",
    "collapse_with",
    "state_distance",
    "trace_distance",
    "fidelity",
    "bures_distance",
    "helstrom_event",
    "naimark_dilate",
    "dilate_state",
    "spectral",
    "tensor",
    "tensor_power",
    "count_events",
    "count_operator",
    "amplification_coefficients",
    "amplification_event",
    "verify_damage",
    "sequential_projective",
    "random_state",
    "random_pure_state",
    "random_event",
    "random_projector",
    "random_unitary",
    "fid_squared_prediction",
]

DEFAULT_DIM_CAP = 4096
_cap_override: list[int] = []

HERMITIAN_TOL = 1e-10
SPECTRUM_TOL = 1e-9
CLUSTER_TOL = 1e-8


def get_dimension_cap():
    """Active cap on the dimension of any dense tensor-power object."""
    if _cap_override:
        return _cap_override[-1]
    raw = os.environ.get("QDA_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise InvalidInput(f"QDA_DIM_CAP must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise InvalidInput("QDA_DIM_CAP must be positive")
    return cap


@contextlib.contextmanager
def dimension_cap(cap):
    """Temporarily replace the dimension cap."""
    _cap_override.append(int(cap))
    try:
        yield
    finally:
        _cap_override.pop()


def check_dimension(required, what="tensor power"):
    cap = get_dimension_cap()
    if required > cap:
        raise ResourceCapExceeded(required, cap, what)


def hermitize(a):
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def _eigh(a):
    w, v = np.linalg.eigh(hermitize(a))
    return w, v


def psd_sqrt(a):
    """Square root of a PSD matrix.

    Eigenvalues at the roundoff floor are set to zero: their square roots
    would otherwise turn ``1e-17`` noise into errors of order ``1e-9``.
    """
    w, v = _eigh(a)
    floor = 10 * w.size * np.finfo(float).eps * max(abs(w).max(), 1e-300)
    root = np.where(w > floor, np.sqrt(np.clip(w, 0.0, None)), 0.0)
    return hermitize((v * root) @ v.conj().T)


def _function_of(a, fn):
    w, v = _eigh(a)
    return hermitize((v * fn(w)) @ v.conj().T)


def _as_matrix(x):
    if isinstance(x, (QuantumState, QuantumEvent)):
        return x.matrix
    return np.asarray(x)


def _check_square(m, name):
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidInput(f"{name} must be a non-empty square matrix, got shape {m.shape}")


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Density matrix: Hermitian, positive semidefinite, unit trace.

    Parameters
    ----------
    matrix : array_like
        ``d x d`` complex matrix.
    validate : bool
        Skip the eigenvalue check when the caller guarantees validity.
    """

    matrix: np.ndarray
    validate: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        _check_square(m, "state")
        if self.validate:
            if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
                raise InvalidInput("state is not Hermitian")
            if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL * max(1, m.shape[0]):
                raise InvalidInput(f"state has trace {np.trace(m).real:.12g}")
            if np.linalg.eigvalsh(hermitize(m)).min() < -SPECTRUM_TOL:
                raise InvalidInput("state is not positive semidefinite")
        m = hermitize(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, d):
        return cls(np.eye(d) / d, validate=False)

    @classmethod
    def from_vector(cls, psi):
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), validate=False)

    @classmethod
    def diagonal(cls, probs):
        return cls(np.diag(np.asarray(probs, dtype=float)))

    def is_diagonal(self, tol=1e-12):
        m = self.matrix
        return bool(np.abs(m - np.diag(np.diag(m))).max() <= tol)

    def __repr__(self):
        return f"QuantumState(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class QuantumEvent:
    """Hermitian matrix with spectrum in ``[0, 1]``.

    ``is_projector`` is detected from ``A @ A == A`` when not supplied.
    """

    matrix: np.ndarray
    is_projector: bool | None = None
    validate: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        _check_square(m, "event")
        if self.validate:
            if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
                raise InvalidInput("event is not Hermitian")
            w = np.linalg.eigvalsh(hermitize(m))
            if w.min() < -SPECTRUM_TOL or w.max() > 1 + SPECTRUM_TOL:
                raise InvalidInput(f"event spectrum [{w.min():.3g}, {w.max():.3g}] leaves [0, 1]")
        m = hermitize(m)
        if self.is_projector is None:
            object.__setattr__(self, "is_projector", bool(np.abs(m @ m - m).max() <= 1e-9))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), is_projector=True, validate=False)

    @classmethod
    def zero(cls, d):
        return cls(np.zeros((d, d)), is_projector=True, validate=False)

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    def complement(self):
        """The event ``1 - A``."""
        return QuantumEvent(np.eye(self.dim) - self.matrix, is_projector=self.is_projector,
                            validate=False)

    def sqrt(self):
        if self.is_projector:
            return self.matrix.copy()
        return psd_sqrt(self.matrix)

    def is_diagonal(self, tol=1e-12):
        m = self.matrix
        return bool(np.abs(m - np.diag(np.diag(m))).max() <= tol)

    def __repr__(self):
        kind = "projector" if self.is_projector else "event"
        return f"QuantumEvent(dim={self.dim}, {kind})"


class SpectralDecomposition(NamedTuple):
    """Distinct eigenvalues (strictly decreasing) with their eigenprojectors."""

    eigenvalues: np.ndarray
    projectors: list

    @property
    def pairs(self):
        return list(zip(self.eigenvalues, self.projectors))

    def reconstruct(self):
        return sum(lam * p.matrix for lam, p in self.pairs)


@dataclass(frozen=True, eq=False)
class Measurement:
    """POVM given by events summing to the identity."""

    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        if not events:
            raise InvalidInput("a measurement needs at least one outcome")
        d = events[0].dim
        if any(e.dim != d for e in events):
            raise DimensionMismatch("measurement outcomes differ in dimension")
        total = sum(e.matrix for e in events)
        if np.abs(total - np.eye(d)).max() > 1e-9:
            raise InvalidInput("measurement events do not sum to the identity")
        object.__setattr__(self, "events", events)

    def probabilities(self, rho):
        return np.array([expectation(rho, e) for e in self.events])


@dataclass(frozen=True, eq=False)
class QuantumOperation:
    """Trace-nonincreasing completely positive map ``X -> sum_j K_j X K_j^+``."""

    kraus: tuple

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise InvalidInput("an operation needs at least one Kraus operator")
        d = ks[0].shape[0]
        if any(k.shape != (d, d) for k in ks):
            raise DimensionMismatch("Kraus operators differ in shape")
        gram = sum(k.conj().T @ k for k in ks)
        if np.linalg.eigvalsh(hermitize(gram)).max() > 1 + 1e-9:
            raise InvalidInput("operation increases trace")
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def identity(cls, d):
        return cls((np.eye(d),))

    @classmethod
    def from_event(cls, a, occurred=True):
        """Canonical unnormalised collapse ``X -> sqrt(A) X sqrt(A)``."""
        e = a if occurred else a.complement()
        return cls((e.sqrt(),))

    @property
    def dim(self):
        return self.kraus[0].shape[0]

    def __call__(self, x):
        x = _as_matrix(x)
        return hermitize(sum(k @ x @ k.conj().T for k in self.kraus))


def _check_dims(*objs):
    dims = {_as_matrix(o).shape[0] for o in objs}
    if len(dims) != 1:
        raise DimensionMismatch(f"operands have dimensions {sorted(dims)}")


def _clamp01(x):
    if -SPECTRUM_TOL <= x < 0.0:
        return 0.0
    if 1.0 < x <= 1.0 + SPECTRUM_TOL:
        return 1.0
    return x


def expectation(rho, a):
    """``tr(rho A)``, clamped to ``[0, 1]`` when within roundoff of the boundary."""
    _check_dims(rho, a)
    r, m = _as_matrix(rho), _as_matrix(a)
    # tr(rho A) for Hermitian operands is sum(rho * conj(A))
    val = float(np.vdot(m, r).real)
    return _clamp01(val) if isinstance(a, QuantumEvent) else val


def collapse_with(rho, kraus, min_prob=1e-12):
    """``K rho K^+ / tr(K rho K^+)`` and the normalising probability."""
    r = _as_matrix(rho)
    k = np.asarray(kraus)
    _check_dims(r, k)
    out = hermitize(k @ r @ k.conj().T)
    prob = float(np.trace(out).real)
    if prob <= min_prob:
        raise ZeroProbabilityError(f"conditioning on an outcome of probability {prob:.3g}")
    return QuantumState(out / prob, validate=False), prob


def collapse_canonical(rho, a, occurred):
    """Post-measurement state of the canonical implementation of ``(1-A, A)``.

    Returns ``sqrt(A) rho sqrt(A) / tr(rho A)`` if ``occurred`` else the same
    with ``1 - A``.
    """
    e = a if occurred else a.complement()
    return collapse_with(rho, e.sqrt())[0]


def trace_distance(rho, sigma):
    _check_dims(rho, sigma)
    w = np.linalg.eigvalsh(hermitize(_as_matrix(rho) - _as_matrix(sigma)))
    return 0.5 * float(np.abs(w).sum())


def fidelity(rho, sigma):
    """``tr sqrt(sqrt(rho) sigma sqrt(rho))`` (root fidelity).

    Evaluated as the nuclear norm of ``sqrt(rho) sqrt(sigma)``: singular values
    carry absolute error near machine precision, whereas square roots of tiny
    eigenvalues of ``sqrt(rho) sigma sqrt(rho)`` amplify roundoff.
    """
    _check_dims(rho, sigma)
    prod = psd_sqrt(_as_matrix(rho)) @ psd_sqrt(_as_matrix(sigma))
    return min(1.0, float(np.linalg.svd(prod, compute_uv=False).sum()))


def bures_distance(rho, sigma):
    return math.sqrt(max(0.0, 2.0 * (1.0 - fidelity(rho, sigma))))


_DISTANCES = {"trace": trace_distance, "fidelity": fidelity, "bures": bures_distance}


def state_distance(kind, rho, sigma):
    """Trace distance, fidelity or Bures distance between two states."""
    try:
        fn = _DISTANCES[kind.lower()]
    except KeyError:
        raise InvalidInput(f"unknown distance {kind!r}; choose from {tuple(_DISTANCES)}") from None
    return fn(rho, sigma)


def helstrom_event(sigma_i, sigma_j):
    """Projector onto the nonnegative eigenspace of ``sigma_i - sigma_j``.

    Maximises ``E_{sigma_i}[A] - E_{sigma_j}[A]``; the maximum is the trace
    distance.
    """
    _check_dims(sigma_i, sigma_j)
    w, v = _eigh(_as_matrix(sigma_i) - _as_matrix(sigma_j))
    keep = v[:, w >= 0]
    return QuantumEvent(keep @ keep.conj().T, is_projector=True, validate=False)


def naimark_dilate(a):
    """Projector on ``C^2 (x) C^d`` reproducing ``A`` on ``|0><0| (x) rho``.

    Block form ``[[A, sqrt(A(1-A))], [sqrt(A(1-A)), 1-A]]`` with the ancilla as
    the most significant index.
    """
    m = a.matrix
    d = a.dim
    off = _function_of(m, lambda w: np.sqrt(np.clip(w * (1 - w), 0.0, None)))
    big = np.block([[m, off], [off, np.eye(d) - m]])
    return QuantumEvent(big, is_projector=True, validate=False)


def dilate_state(rho):
    """``|0><0| (x) rho``, the state on which :func:`naimark_dilate` is read."""
    d = rho.dim
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = rho.matrix
    return QuantumState(out, validate=False)


def spectral(a, tol=CLUSTER_TOL):
    """Eigenvalues of ``a`` clustered within ``tol`` and their projectors.

    Every cluster is kept, including eigenvalue zero, so the projectors
    always resolve the identity.
    """
    w, v = _eigh(_as_matrix(a))
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    groups = [[0]]
    for i in range(1, w.size):
        if w[groups[-1][-1]] - w[i] > tol:
            groups.append([i])
        else:
            groups[-1].append(i)
    vals, projs = [], []
    for g in groups:
        vals.append(float(np.clip(w[g].mean(), 0.0, 1.0)))
        vec = v[:, g]
        projs.append(QuantumEvent(vec @ vec.conj().T, is_projector=True, validate=False))
    return SpectralDecomposition(np.array(vals), projs)


def tensor(*factors):
    """Kronecker product, leftmost factor most significant."""
    mats = [_as_matrix(f) for f in factors]
    dim = math.prod(m.shape[0] for m in mats)
    check_dimension(dim)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    if all(isinstance(f, QuantumState) for f in factors):
        return QuantumState(out, validate=False)
    if all(isinstance(f, QuantumEvent) for f in factors):
        return QuantumEvent(out, is_projector=all(f.is_projector for f in factors), validate=False)
    return out


def tensor_power(x, n):
    if int(n) != n or n < 1:
        raise InvalidInput(f"n must be a positive integer, got {n}")
    check_dimension(float(_as_matrix(x).shape[0]) ** n)
    return tensor(*([x] * int(n)))


def count_events(a, n):
    """Count events ``A_0, ..., A_n`` of ``a`` on ``n`` tensor copies.

    ``A_k`` sums ``A_{x_1} (x) ... (x) A_{x_n}`` over strings with exactly
    ``k`` factors equal to ``A`` and the rest ``1 - A``. Built by dynamic
    programming over the tensor factors.
    """
    check_dimension(float(a.dim) ** n)
    m, mbar = a.matrix, np.eye(a.dim) - a.matrix
    layer = [np.ones((1, 1), dtype=complex)]
    for _ in range(n):
        nxt = []
        for k in range(len(layer) + 1):
            term = 0
            if k < len(layer):
                term = term + np.kron(layer[k], mbar)
            if k > 0:
                term = term + np.kron(layer[k - 1], m)
            nxt.append(term)
        layer = nxt
    proj = a.is_projector
    return [QuantumEvent(x, is_projector=proj, validate=False) for x in layer]


def _poisson_binomial_rows(values, n):
    """Row ``x`` holds the law of the count for basis string ``x`` of length n."""
    d = values.size
    dist = np.ones((1, 1))
    for _ in range(n):
        rows = dist.shape[0]
        new = np.zeros((rows * d, dist.shape[1] + 1))
        for j, v in enumerate(values):
            new[j::d, :-1] += dist * (1 - v)
            new[j::d, 1:] += dist * v
        dist = new
    return dist


def count_operator(a, n, coeffs):
    """``sum_k coeffs[k] A_k`` as a dense matrix.

    Uses the eigenbasis of ``a``: every count event is diagonal in the
    ``n``-fold tensor power of that basis, with the Poisson-binomial law of
    the eigenvalues on the diagonal.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (n + 1,):
        raise InvalidInput(f"need {n + 1} coefficients, got {coeffs.shape}")
    check_dimension(float(a.dim) ** n)
    w, u = _eigh(a.matrix)
    w = np.clip(w, 0.0, 1.0)
    if a.is_projector:
        w = np.rint(w)
    diag = _poisson_binomial_rows(w, n) @ coeffs
    big = u
    for _ in range(n - 1):
        big = np.kron(big, u)
    return hermitize((big * diag) @ big.conj().T)


def amplification_coefficients(n, tau, c):
    """``f(k/n)`` for ``k = 0..n`` with ``f(t) = 1`` iff ``|t - tau| >= c``."""
    t = np.arange(n + 1) / n
    # a hair of slack so that exact hits like |k/n - tau| == c are not lost to roundoff
    return (np.abs(t - tau) >= c - 1e-12).astype(float)


def amplification_event(e, n, tau, c):
    """Event on ``n`` copies firing when the empirical frequency is ``c``-far from ``tau``."""
    if not (0.0 <= tau <= 1.0 and 0.0 <= c <= 1.0):
        raise InvalidInput("tau and c must lie in [0, 1]")
    coeffs = amplification_coefficients(n, tau, c)
    mat = count_operator(e, n, coeffs)
    return QuantumEvent(mat, is_projector=e.is_projector, validate=False)


def verify_damage(operations, rho, subset):
    """Both sides of the damage bound for a chain of operations.

    Parameters
    ----------
    operations : sequence of QuantumOperation
        ``S_1, ..., S_n`` applied in order.
    rho : QuantumState
    subset : iterable of int
        Zero-based indices ``E``.

    Returns
    -------
    lhs, rhs : float
        ``|p_E - q_E|`` and ``2 / q_{[n-1] minus E} * sum_{i<n} d_tr(S_i(rho)/p_i, rho)``
        where ``p_i`` are fresh-state traces and ``q_i`` chained conditional traces.
    """
    ops = list(operations)
    n = len(ops)
    subset = set(subset)
    if not subset <= set(range(n)):
        raise InvalidInput("subset indices out of range")
    p, dists = [], []
    for op in ops:
        out = op(rho)
        pi = float(np.trace(out).real)
        if pi <= 0:
            raise ZeroProbabilityError("an operation annihilates the fresh state")
        p.append(pi)
        dists.append(trace_distance(out / pi, rho))
    q = []
    cur, prev = rho.matrix, 1.0
    for op in ops:
        cur = op(cur)
        tr = float(np.trace(cur).real)
        if tr <= 0:
            raise ZeroProbabilityError("the chained state has zero trace")
        q.append(tr / prev)
        prev = tr
    p_e = math.prod(p[i] for i in subset)
    q_e = math.prod(q[i] for i in subset)
    q_rest = math.prod(q[i] for i in range(n - 1) if i not in subset)
    return abs(p_e - q_e), 2.0 / q_rest * sum(dists[: n - 1])


def sequential_projective(rho, projectors, target):
    """Probability of outcome string ``target`` under sequential projective tests.

    Test ``i`` is ``(1 - P_i, P_i)`` with ``P_i = projectors[i]``; bit
    ``target[i] = 1`` asks for ``P_i``. A zero-probability prefix gives 0.
    """
    if len(projectors) != len(target):
        raise InvalidInput("need one target bit per projector")
    _check_dims(rho, *projectors)
    # propagate the unnormalised branch: probability is its final trace
    cur = rho.matrix
    for proj, bit in zip(projectors, target):
        p = proj.matrix if bit else np.eye(proj.dim) - proj.matrix
        cur = p @ cur @ p
        if float(np.trace(cur).real) <= 0.0:
            return 0.0
    return _clamp01(float(np.trace(cur).real))


def random_unitary(d, rng):
    return unitary_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1), dtype=complex)


def random_state(d, rng):
    """``G G^+ / tr`` for ``G`` with i.i.d. standard complex Gaussian entries."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return QuantumState(m / np.trace(m).real, validate=False)


def random_pure_state(d, rng):
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return QuantumState.from_vector(psi)


def random_event(d, rng):
    """Haar-rotated diagonal event with i.i.d. uniform eigenvalues."""
    u = random_unitary(d, rng)
    w = rng.uniform(0.0, 1.0, size=d)
    return QuantumEvent((u * w) @ u.conj().T, is_projector=False, validate=False)


def random_projector(d, rank, rng):
    if not 0 <= rank <= d:
        raise InvalidInput(f"rank must lie in [0, {d}]")
    u = random_unitary(d, rng)[:, :rank]
    return QuantumEvent(u @ u.conj().T, is_projector=True, validate=False)


def fid_squared_prediction(rho, m):
    """``E[M]^2 / E[M^2]``, the squared fidelity between ``rho`` and ``rho`` collapsed by ``M``."""
    mm = _as_matrix(m)
    e1 = float(np.vdot(mm, _as_matrix(rho)).real)
    e2 = float(np.vdot(mm @ mm, _as_matrix(rho)).real)
    return e1 * e1 / e2
