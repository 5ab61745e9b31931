"""Dense density-matrix oracle for small systems (n <= 12)."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .pauli import PauliString, SparsePauliOp
from .states import outcome_code

MAX_QUBITS = 12

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
#: unitaries rotating the X, Y, Z eigenbases onto the computational basis
BASIS_ROTATIONS = (_H, _H @ _SDG, np.eye(2, dtype=complex))


_OUTCOME_BASE = np.array([outcome_code(b, 0) for b in range(3)], dtype=np.int8)
TWO_PI_LD = np.longdouble("6.28318530717958647692528676655900577")


def phases(w: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t w) with the angle reduced modulo 2 pi in extended precision."""
    theta = np.fmod(np.asarray(w, dtype=np.longdouble) * np.longdouble(t), TWO_PI_LD)
    theta = theta.astype(float)
    return np.cos(theta) - 1j * np.sin(theta)


class DenseSizeError(ValueError):
    pass


def _check_n(n: int) -> None:
    if n > MAX_QUBITS:
        raise DenseSizeError(f"dense oracle is capped at {MAX_QUBITS} qubits, got {n}")


def _masks(p: PauliString) -> tuple[int, int, int]:
    n = p.n
    flip = zmask = 0
    ny = 0
    for q, c in enumerate(p.letters):
        bit = 1 << (n - 1 - q)
        if c in "XY":
            flip |= bit
        if c in "YZ":
            zmask |= bit
        ny += c == "Y"
    return flip, zmask, ny


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def _pauli_action(p: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Column map and phases with P|y> = phase[y] |perm[y]>."""
    flip, zmask, ny = _masks(p)
    idx = np.arange(2**p.n)
    phase = (1j) ** ny * (1 - 2 * _parity(idx & zmask))
    return idx ^ flip, phase


def to_dense(op: SparsePauliOp) -> np.ndarray:
    _check_n(op.n)
    dim = 2**op.n
    mat = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    for w, c in op.items():
        perm, phase = _pauli_action(PauliString(w))
        mat[perm, idx] += c * phase
    return mat


def to_sparse(op: SparsePauliOp):
    """CSR matrix of ``op`` (same ordering as :func:`to_dense`)."""
    import scipy.sparse

    _check_n(op.n)
    dim = 2**op.n
    idx = np.arange(dim)
    rows, cols, vals = [], [], []
    for w, c in op.items():
        perm, phase = _pauli_action(PauliString(w))
        rows.append(perm)
        cols.append(idx)
        vals.append(c * phase)
    if not rows:
        return scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    return scipy.sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    p = PauliString(str(p))
    return to_dense(SparsePauliOp(p.n, {p: 1.0}))


def _is_vector(state: np.ndarray) -> bool:
    return state.ndim == 1


def pauli_expectation(p: PauliString, state: np.ndarray) -> float:
    """Tr(P rho) for a density matrix, or <psi|P|psi> for a state vector."""
    state = np.asarray(state)
    if state.shape[0] != 2**p.n:
        raise ValueError("dimension mismatch between Pauli word and state")
    perm, phase = _pauli_action(p)
    if _is_vector(state):
        val = np.vdot(state[perm], phase * state)
    else:
        idx = np.arange(state.shape[0])
        # Tr(P rho) = sum_y phase[y] rho[y, perm[y]]
        val = np.sum(phase * state[idx, perm])
    return float(val.real)


def expectation(op: SparsePauliOp, state: np.ndarray) -> float:
    """Tr(O rho); ``state`` is a density matrix or a normalized state vector."""
    state = np.asarray(state)
    if state.shape[0] != 2**op.n:
        raise ValueError(f"operator on {op.n} qubits vs state of dimension {state.shape[0]}")
    return float(sum(c * pauli_expectation(PauliString(w), state) for w, c in op.items()))


def apply_local(rho: np.ndarray, unitaries: list[np.ndarray]) -> np.ndarray:
    """U rho U^dagger for U a tensor product of single-qubit unitaries."""
    n = len(unitaries)
    t = rho.reshape([2] * (2 * n))
    for q, u in enumerate(unitaries):
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
        t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + q])), 0, n + q)
    return t.reshape(rho.shape)


def partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep`` (kept in sorted order)."""
    n = int(np.log2(rho.shape[0]))
    keep = sorted(keep)
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    # trace out highest qubits first so that axis numbering stays valid
    for q in sorted(drop, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def nonidentity_purity(rho: np.ndarray) -> float:
    """2^-L sum over Q in {X,Y,Z}^L of Tr(Q rho)^2."""
    L = int(np.log2(rho.shape[0]))
    _check_n(L)
    total = 0.0
    for letters in itertools.product("XYZ", repeat=L):
        total += pauli_expectation(PauliString("".join(letters)), rho) ** 2
    return total / 2**L


def born_sample(rho: np.ndarray, bases, rng: np.random.Generator) -> np.ndarray:
    """Measure qubit q of ``rho`` in basis ``bases[q]`` (0=X, 1=Y, 2=Z).

    Outcomes are drawn qubit by qubit from exact conditional marginals; the
    return value holds stab_1 label codes.
    """
    bases = np.asarray(bases, dtype=int)
    n = bases.size
    _check_n(n)
    probs = rotated_probabilities(rho, bases)
    t = probs.reshape([2] * n)
    bits = []
    for q in range(n):
        marg = t.reshape(2, -1).sum(axis=1)
        total = marg.sum()
        p1 = marg[1] / total if total > 0 else 0.5
        bit = int(rng.random() < p1)
        bits.append(bit)
        t = t[bit]
    return np.array([outcome_code(b, s) for b, s in zip(bases, bits)], dtype=np.int8)


def rotated_probabilities(rho: np.ndarray, bases) -> np.ndarray:
    """Joint outcome distribution of measuring each qubit in the given basis."""
    bases = np.asarray(bases, dtype=int)
    us = [BASIS_ROTATIONS[b] for b in bases]
    if _is_vector(rho):
        t = rho.reshape([2] * bases.size)
        for q, u in enumerate(us):
            t = np.moveaxis(np.tensordot(u, t, axes=([1], [q])), 0, q)
        probs = np.abs(t.ravel()) ** 2
    else:
        probs = np.real(np.diag(apply_local(rho, us)))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


@dataclass
class DenseChannel:
    """A CPTP map given as a unitary, a Hamiltonian evolution or a Kraus list."""

    kind: str
    n: int
    unitary: np.ndarray | None = None
    hamiltonian: SparsePauliOp | None = None
    t: float = 0.0
    kraus: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        _check_n(self.n)
        dim = 2**self.n
        if self.kind == "unitary":
            u = np.asarray(self.unitary, dtype=complex)
            if u.shape != (dim, dim) or not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-8):
                raise ValueError("channel unitary is not unitary")
            self.unitary = u
        elif self.kind == "kraus":
            ks = [np.asarray(k, dtype=complex) for k in self.kraus]
            s = sum(k.conj().T @ k for k in ks)
            if not np.allclose(s, np.eye(dim), atol=1e-8):
                raise ValueError("Kraus operators are not trace preserving")
            self.kraus = ks
        elif self.kind == "hamiltonian":
            if self.hamiltonian is None or self.hamiltonian.n != self.n:
                raise ValueError("hamiltonian channel needs an operator on n qubits")
        elif self.kind != "identity":
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def identity(cls, n: int) -> "DenseChannel":
        return cls("identity", n)

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "DenseChannel":
        n = int(np.log2(np.asarray(u).shape[0]))
        return cls("unitary", n, unitary=u)

    @classmethod
    def from_hamiltonian(cls, h: SparsePauliOp, t: float) -> "DenseChannel":
        return cls("hamiltonian", h.n, hamiltonian=h, t=float(t))

    @classmethod
    def from_kraus(cls, kraus: list[np.ndarray]) -> "DenseChannel":
        n = int(np.log2(np.asarray(kraus[0]).shape[0]))
        return cls("kraus", n, kraus=list(kraus))

    @cached_property
    def _eigh(self):
        return np.linalg.eigh(to_dense(self.hamiltonian))

    def evolution_unitary(self, t: float | None = None) -> np.ndarray:
        """exp(-i t H) from the Hermitian eigendecomposition."""
        if self.kind != "hamiltonian":
            raise ValueError("only Hamiltonian channels have an evolution unitary")
        t = self.t if t is None else t
        w, v = self._eigh
        return (v * phases(w, t)) @ v.conj().T

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Like :meth:`evolve` but keeps pure inputs as state vectors when the
        channel is unitary."""
        state = np.asarray(state, dtype=complex)
        if not _is_vector(state) or self.kind == "kraus":
            return self.evolve(state)
        if self.kind == "identity":
            return state.copy()
        u = self.unitary if self.kind == "unitary" else self._unitary_cache
        return u @ state

    def evolve(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel; a state vector input is promoted to a density matrix."""
        rho = np.asarray(rho, dtype=complex)
        if rho.shape[0] != 2**self.n:
            raise ValueError("state dimension does not match channel")
        if _is_vector(rho):
            rho = np.outer(rho, rho.conj())
        if self.kind == "identity":
            return rho.copy()
        if self.kind == "unitary":
            u = self.unitary
        elif self.kind == "hamiltonian":
            u = self._unitary_cache
        else:
            return sum(k @ rho @ k.conj().T for k in self.kraus)
        return u @ rho @ u.conj().T

    @cached_property
    def _unitary_cache(self) -> np.ndarray:
        return self.evolution_unitary()

    def to_json(self) -> dict:
        if self.kind == "identity":
            return {"type": "identity", "n": self.n}
        if self.kind == "hamiltonian":
            return {"type": "hamiltonian", "terms": self.hamiltonian.to_json_list(), "t": self.t}
        raise ValueError("only identity and Hamiltonian channels serialize to JSON")


class DenseBackend:
    """Ground-truth process backend built on a :class:`DenseChannel`.

    Supports both snapshot sampling and exact expectations.
    """

    supports_sampling = True

    def __init__(self, channel: DenseChannel):
        self.channel = channel
        self.n = channel.n

    def describe(self) -> dict:
        ch = self.channel
        if ch.kind in ("identity", "hamiltonian"):
            return {"backend": "dense", **ch.to_json()}
        mats = [ch.unitary] if ch.kind == "unitary" else ch.kraus
        digest = hashlib.sha256(b"".join(np.ascontiguousarray(m, dtype=complex).tobytes() for m in mats)).hexdigest()
        return {"backend": "dense", "type": ch.kind, "n": ch.n, "sha256": digest[:16]}

    def output_state(self, bloch_in: np.ndarray) -> np.ndarray:
        from .states import ProductState

        psi = ProductState(bloch_in).statevector()
        return self.channel.apply(psi)

    def sample(self, bloch_in: np.ndarray, bases, rng: np.random.Generator) -> np.ndarray:
        return born_sample(self.output_state(bloch_in), bases, rng)

    def sample_batch(self, bloch_batch: np.ndarray, bases: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Snapshot outcomes for many rows, one uniform draw per row.

        Joint outcome tables are cached per (input, bases) pattern, which makes
        repeated stabilizer inputs on a few qubits cheap.
        """
        bloch_batch = np.asarray(bloch_batch, dtype=float)
        bases = np.asarray(bases, dtype=int)
        u = rng.random(bloch_batch.shape[0])
        cache: dict[bytes, np.ndarray] = {}
        states: dict[bytes, np.ndarray] = {}
        out = np.empty(bases.shape, dtype=np.int8)
        weights = 1 << np.arange(self.n - 1, -1, -1)
        for row in range(bloch_batch.shape[0]):
            skey = bloch_batch[row].tobytes()
            key = skey + bases[row].tobytes()
            cdf = cache.get(key)
            if cdf is None:
                if len(cache) > 4096:
                    cache.clear()
                    states.clear()
                if skey not in states:
                    states[skey] = self.output_state(bloch_batch[row])
                cdf = np.cumsum(rotated_probabilities(states[skey], bases[row]))
                cache[key] = cdf
            idx = min(int(np.searchsorted(cdf, u[row] * cdf[-1], side="right")), cdf.size - 1)
            bits = (idx & weights) > 0
            out[row] = _OUTCOME_BASE[bases[row]] + bits
        return out

    def expectations(self, bloch_batch: np.ndarray, observables: dict[str, SparsePauliOp]) -> dict[str, np.ndarray]:
        """Per Pauli term exact expectations, keyed by observable id then word."""
        bloch_batch = np.asarray(bloch_batch).reshape(-1, self.n, 3)
        out: dict[str, np.ndarray] = {}
        words = sorted({w for op in observables.values() for w in op})
        table = np.empty((bloch_batch.shape[0], len(words)))
        for row, b in enumerate(bloch_batch):
            rho = self.output_state(b)
            table[row] = [pauli_expectation(PauliString(w), rho) for w in words]
        col = {w: j for j, w in enumerate(words)}
        for name, op in observables.items():
            out[name] = {w: table[:, col[w]] for w in op}
        return out
