"""Permutation-symmetric simulation of many qubit copies.

On ``(C^2)^(x)n`` every operator that commutes with permuting the copies
decomposes as ``sum_J X_J (x) 1_{mult(J)}`` over total spins
``J = n/2, n/2 - 1, ...``. States ``rho^(x)n`` and every event the algorithms
build on ``n`` copies of a qubit (count functions of a qubit event, their
complements and OR projectors) have this form. We store one
``(2J+1) x (2J+1)`` block per spin sector plus the sector weights, so the
cost is polynomial in ``n`` instead of ``2^n``.

Block conventions: spin matrices are the standard ones in the basis
``m = J, J-1, ..., -J``, with ``|0>`` the spin-up qubit state. A count
function ``F`` of a qubit event with eigenvalues ``a1 >= a2`` (eigenvector of
``a1`` pointing along Bloch direction ``b``) acts in sector ``J`` as
``sum_m E[F(Bin(n/2+m, a1) + Bin(n/2-m, a2))] |J,m>_b <J,m|_b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

from . import quantum_core as qc
from .classical_stats import binomial_pmf
from .errors import DimensionMismatch, InvalidInput, UnsupportedBackend, ZeroProbabilityError

__all__ = [
    "spin_matrices",
    "multiplicity",
    "CollectiveState",
    "collective_blocks",
    "collective_fresh_expectation",
    "supports_collective",
]

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# sectors whose total weight falls below this are dropped
SECTOR_FLOOR = 1e-18

_spin_cache: dict = {}
_basis_cache: dict = {}


def spin_matrices(j2):
    """``(Jx, Jy, Jz)`` for spin ``J = j2 / 2``."""
    if j2 in _spin_cache:
        return _spin_cache[j2]
    j = j2 / 2
    m = j - np.arange(j2 + 1)
    jz = np.diag(m).astype(complex)
    # <m+1| J+ |m> sits just above the diagonal in the descending-m basis
    up = np.sqrt(np.clip(j * (j + 1) - m[1:] * (m[1:] + 1), 0.0, None))
    jp = np.diag(up, 1).astype(complex)
    jx = 0.5 * (jp + jp.conj().T)
    jy = -0.5j * (jp - jp.conj().T)
    _spin_cache[j2] = (jx, jy, jz)
    return _spin_cache[j2]


def multiplicity(n, j2):
    """Number of copies of spin ``j2/2`` inside ``n`` qubits (an exact integer)."""
    k = (n - j2) // 2
    return math.comb(n, k) - (math.comb(n, k - 1) if k >= 1 else 0)


def _sectors(n):
    return list(range(n, -1, -2))


def _bloch(vec):
    """Bloch vector of the pure qubit state ``vec``."""
    p = np.outer(vec, vec.conj())
    return np.array([np.trace(p @ s).real for s in _PAULI])


def _direction_basis(j2, bloch):
    """Columns: eigenvectors of ``b.J`` ordered by ``m = J .. -J``."""
    key = (j2, tuple(np.round(bloch, 15)))
    if key in _basis_cache:
        return _basis_cache[key]
    jx, jy, jz = spin_matrices(j2)
    if np.linalg.norm(bloch) < 1e-14:
        out = np.eye(j2 + 1, dtype=complex)
    else:
        b = bloch / np.linalg.norm(bloch)
        _, v = np.linalg.eigh(b[0] * jx + b[1] * jy + b[2] * jz)
        out = v[:, ::-1]
    if len(_basis_cache) > 4096:
        _basis_cache.clear()
    _basis_cache[key] = out
    return out


def _qubit_eigen(matrix):
    """Eigenvalues ``a1 >= a2`` and the Bloch direction of the ``a1`` eigenvector."""
    w, v = np.linalg.eigh(qc.hermitize(matrix))
    a2, a1 = float(w[0]), float(w[1])
    if a1 - a2 < 1e-14:
        return a1, a2, np.zeros(3)
    return a1, a2, _bloch(v[:, 1])


@dataclass
class CollectiveState:
    """State of ``n`` qubits that is block diagonal over spin sectors.

    Attributes
    ----------
    n : int
    weights : dict
        ``j2 -> probability`` of the sector (multiplicity included).
    blocks : dict
        ``j2 -> (2J+1) x (2J+1)`` unit-trace density block.
    """

    n: int
    weights: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)

    @classmethod
    def product(cls, rho, n, floor=SECTOR_FLOOR):
        """``rho^(x)n`` for a qubit state ``rho``."""
        if rho.dim != 2:
            raise DimensionMismatch("collective engine simulates qubits only")
        r1, r2, bloch = _qubit_eigen(rho.matrix)
        r1, r2 = max(r1, 0.0), max(r2, 0.0)
        s = r1 + r2
        r1, r2 = r1 / s, r2 / s
        logw, logm = {}, {}
        for j2 in _sectors(n):
            m = (j2 - 2 * np.arange(j2 + 1)) / 2
            up, down = n / 2 + m, n / 2 - m
            with np.errstate(divide="ignore"):
                terms = xlogy(up, r1) + xlogy(down, r2)
            lse = logsumexp(terms)
            if not np.isfinite(lse):
                continue
            logm[j2] = terms - lse
            logw[j2] = math.log(multiplicity(n, j2)) + lse
        top = logsumexp(list(logw.values()))
        state = cls(n)
        for j2, lw in logw.items():
            w = math.exp(lw - top)
            if w < floor:
                continue
            basis = _direction_basis(j2, bloch)
            state.weights[j2] = w
            state.blocks[j2] = (basis * np.exp(logm[j2])) @ basis.conj().T
        total = sum(state.weights.values())
        for j2 in state.weights:
            state.weights[j2] /= total
        return state

    def copy(self):
        return CollectiveState(self.n, dict(self.weights),
                               {j: b.copy() for j, b in self.blocks.items()})

    def expectation(self, blocks):
        return float(sum(w * np.vdot(blocks[j2], self.blocks[j2]).real
                         for j2, w in self.weights.items()))

    def collapse(self, kraus_blocks, min_prob=1e-15):
        """Condition on the outcome with Kraus blocks ``K_J``; returns the probability."""
        new_blocks, mass = {}, {}
        for j2, w in self.weights.items():
            k = kraus_blocks[j2]
            b = k @ self.blocks[j2] @ k.conj().T
            tr = float(np.trace(b).real)
            if tr > 0:
                new_blocks[j2] = qc.hermitize(b / tr)
                mass[j2] = w * tr
        prob = sum(mass.values())
        if prob <= min_prob:
            raise ZeroProbabilityError(f"conditioning on an outcome of probability {prob:.3g}")
        self.blocks = new_blocks
        self.weights = {j2: m / prob for j2, m in mass.items()}
        return prob

    def dense(self):
        """Embed back into ``2^n`` dimensions (small ``n`` only, for testing)."""
        qc.check_dimension(2.0 ** self.n, "dense collective state")
        scaled = {j2: w * self.blocks[j2] for j2, w in self.weights.items()}
        return _to_dense(self.n, scaled, normalise_by_multiplicity=True)


def _count_table(n, a1, a2, coeffs):
    """``E[F(Bin(n/2+m, a1) + Bin(n/2-m, a2))]`` for ``n/2 + m = 0..n``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if a1 >= 1 - 1e-15 and a2 <= 1e-15:
        return coeffs.copy()
    table = np.empty(n + 1)
    for up in range(n + 1):
        law = np.convolve(binomial_pmf(up, min(max(a1, 0.0), 1.0)).weights,
                          binomial_pmf(n - up, min(max(a2, 0.0), 1.0)).weights)
        table[up] = np.dot(law, coeffs)
    return table


def supports_collective(event, n=None):
    """Whether ``event`` has a block form on a flat qubit register."""
    from .events import ComplementEvent, CountEvent, LocalEvent, OrEvent
    lay = event.layout
    if not (lay[0] == "pow" and lay[2] == ("local", 2)):
        return False
    if n is not None and lay[1] != n:
        return False
    if isinstance(event, CountEvent):
        return isinstance(event.inner, LocalEvent)
    if isinstance(event, ComplementEvent):
        return supports_collective(event.inner)
    if isinstance(event, OrEvent):
        return all(supports_collective(e) for e in event.events)
    return False


def collective_blocks(event, sectors, sqrt=False):
    """Blocks of ``event`` (or its square root) for each requested sector."""
    from .events import ComplementEvent, CountEvent, OrEvent
    if not supports_collective(event):
        raise UnsupportedBackend(f"{type(event).__name__} has no collective form here")
    sectors = tuple(sorted(sectors))
    key = ("collective", sqrt, sectors)
    if key in event._cache:
        return event._cache[key]
    n = event.layout[1]
    if isinstance(event, CountEvent):
        if "table" not in event._cache:
            a1, a2, bloch = _qubit_eigen(event.inner.dense())
            event._cache["table"] = (_count_table(n, a1, a2, event.coeffs), bloch)
        table, bloch = event._cache["table"]
        if sqrt:
            table = np.sqrt(np.clip(table, 0.0, None))
        out = {}
        for j2 in sectors:
            ups = (n + j2) // 2 - np.arange(j2 + 1)
            basis = _direction_basis(j2, bloch)
            out[j2] = (basis * table[ups]) @ basis.conj().T
    elif isinstance(event, ComplementEvent):
        if sqrt:
            inner = collective_blocks(event.inner, sectors)
            out = {j2: qc.psd_sqrt(np.eye(j2 + 1) - inner[j2]) for j2 in sectors}
        else:
            inner = collective_blocks(event.inner, sectors)
            out = {j2: np.eye(j2 + 1) - inner[j2] for j2 in sectors}
    else:  # OrEvent
        parts = [collective_blocks(e, sectors) for e in event.events]
        out = {}
        for j2 in sectors:
            w, v = np.linalg.eigh(qc.hermitize(sum(p[j2] for p in parts)))
            keep = v[:, w >= event.nu - 1e-12]
            out[j2] = keep @ keep.conj().T
    if len(event._cache) > 64:
        for k in [k for k in event._cache if isinstance(k, tuple) and k[0] == "collective"]:
            del event._cache[k]
    event._cache[key] = out
    return out


def collective_fresh_expectation(event, rho):
    """Exact expectation of ``event`` on a fresh ``rho^(x)n``."""
    n = event.layout[1]
    state = CollectiveState.product(rho, n)
    return state.expectation(collective_blocks(event, state.weights))


def _to_dense(n, blocks, normalise_by_multiplicity=False):
    """Assemble ``sum_J X_J (x) 1`` as a ``2^n`` matrix by explicit coupling.

    Testing helper: builds the symmetric-group-adapted basis of each sector
    from the collective spin operators themselves.
    """
    dim = 2 ** n
    total = [np.zeros((dim, dim), dtype=complex) for _ in range(3)]
    for c in range(n):
        for a in range(3):
            op = np.ones((1, 1))
            for k in range(n):
                op = np.kron(op, _PAULI[a] / 2 if k == c else np.eye(2))
            total[a] = total[a] + op
    jx, jy, jz = total
    casimir = jx @ jx + jy @ jy + jz @ jz
    out = np.zeros((dim, dim), dtype=complex)
    for j2, x in blocks.items():
        j = j2 / 2
        # eigenspace of J^2 for this sector, then highest-weight vectors
        w, v = np.linalg.eigh(casimir)
        sector = v[:, np.abs(w - j * (j + 1)) < 1e-8]
        wz, vz = np.linalg.eigh(sector.conj().T @ jz @ sector)
        top = sector @ vz[:, np.abs(wz - j) < 1e-8]
        mult = top.shape[1]
        jm = jx - 1j * jy
        # ladder down from each highest-weight vector: columns indexed by m
        frames = []
        for r in range(mult):
            vecs = [top[:, r]]
            for i in range(j2):
                m = j - i
                nxt = jm @ vecs[-1] / math.sqrt(j * (j + 1) - m * (m - 1))
                vecs.append(nxt)
            frames.append(np.stack(vecs, axis=1))
        scale = 1.0 / mult if normalise_by_multiplicity else 1.0
        for f in frames:
            out += scale * f @ x @ f.conj().T
    return out
