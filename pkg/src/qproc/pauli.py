"""Sparse real-coefficient operators on the n-qubit Pauli basis.

Pauli words are stored as letter strings (``"XIZY"``); qubit 0 is the
leftmost letter.  Operators map words to real coefficients, which keeps
every operator Hermitian by construction.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np

LETTERS = "IXYZ"
_CODE = {c: i for i, c in enumerate(LETTERS)}

#: coefficients smaller than this are dropped after arithmetic
ZERO_TOL = 1e-15


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli word such as ``PauliString("XIZ")``."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in _CODE for c in self.letters):
            raise ValueError(f"invalid Pauli word {self.letters!r}")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @classmethod
    def from_sparse(cls, n: int, ops: Mapping[int, str]) -> "PauliString":
        """Build from ``{site: letter}``; unspecified sites are identity."""
        letters = ["I"] * n
        for site, letter in ops.items():
            if not 0 <= site < n:
                raise IndexError(f"site {site} outside 0..{n - 1}")
            letters[site] = letter
        return cls("".join(letters))

    @property
    def n(self) -> int:
        return len(self.letters)

    @cached_property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    @cached_property
    def codes(self) -> tuple[int, ...]:
        """Letter codes (1=X, 2=Y, 3=Z) on the support, aligned with ``support``."""
        return tuple(_CODE[self.letters[i]] for i in self.support)

    @property
    def weight(self) -> int:
        return len(self.support)

    def __str__(self) -> str:
        return self.letters


def weight(p: PauliString | str) -> int:
    """Number of non-identity letters of ``p``."""
    if isinstance(p, str):
        p = PauliString(p)
    return p.weight


def all_pauli_strings(n: int) -> Iterator[PauliString]:
    for letters in itertools.product(LETTERS, repeat=n):
        yield PauliString("".join(letters))


def _fsum_abs_pow(values: Iterable[float], p: float) -> float:
    return math.fsum(abs(v) ** p for v in values)


class SparsePauliOp:
    """Real linear combination of Pauli words on ``n`` qubits.

    Zero (and sub-``ZERO_TOL``) coefficients are never stored.  Instances are
    treated as immutable; arithmetic returns new operators.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[str | PauliString, float] | None = None):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self._terms: dict[str, float] = {}
        for key, coeff in (terms or {}).items():
            word = str(key)
            if len(word) != n:
                raise ValueError(f"word {word!r} does not act on {n} qubits")
            PauliString(word)
            c = self._terms.get(word, 0.0) + float(coeff)
            if abs(c) < ZERO_TOL:
                self._terms.pop(word, None)
            else:
                self._terms[word] = c

    @classmethod
    def from_list(cls, n: int, items: Iterable[tuple[str | PauliString, float]]) -> "SparsePauliOp":
        acc: dict[str, list[float]] = {}
        for key, coeff in items:
            acc.setdefault(str(key), []).append(float(coeff))
        return cls(n, {k: math.fsum(v) for k, v in acc.items()})

    @classmethod
    def single(cls, n: int, ops: Mapping[int, str], coeff: float = 1.0) -> "SparsePauliOp":
        return cls(n, {PauliString.from_sparse(n, ops): coeff})

    # -- container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[str]:
        return iter(self._terms)

    def __contains__(self, key) -> bool:
        return str(key) in self._terms

    def __getitem__(self, key) -> float:
        return self._terms.get(str(key), 0.0)

    def items(self):
        return self._terms.items()

    def paulis(self) -> list[PauliString]:
        return [PauliString(w) for w in self._terms]

    @property
    def terms(self) -> dict[str, float]:
        return dict(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:.6g}*{w}" for w, c in sorted(self._terms.items()))
        return f"SparsePauliOp(n={self.n}, {body or '0'})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SparsePauliOp) and self.n == other.n and self._terms == other._terms

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other: "SparsePauliOp") -> "SparsePauliOp":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        return SparsePauliOp.from_list(self.n, itertools.chain(self.items(), other.items()))

    def __sub__(self, other: "SparsePauliOp") -> "SparsePauliOp":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "SparsePauliOp":
        return SparsePauliOp(self.n, {w: scalar * c for w, c in self.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "SparsePauliOp":
        return -1.0 * self

    def approx_equal(self, other: "SparsePauliOp", atol: float = 1e-10) -> bool:
        keys = set(self) | set(other)
        return all(abs(self[k] - other[k]) <= atol for k in keys)

    # -- structure ------------------------------------------------------------
    @property
    def identity_coeff(self) -> float:
        return self._terms.get("I" * self.n, 0.0)

    def max_weight(self) -> int:
        return max((weight(w) for w in self._terms), default=0)

    def weight_slices(self) -> dict[int, "SparsePauliOp"]:
        """Split into homogeneous parts keyed by weight (identity under key 0)."""
        groups: dict[int, dict[str, float]] = {}
        for w, c in self.items():
            groups.setdefault(weight(w), {})[w] = c
        return {k: SparsePauliOp(self.n, v) for k, v in sorted(groups.items())}

    # -- serialization ------------------------------------------------------
    def to_json_list(self) -> list[dict]:
        return [{"p": w, "c": c} for w, c in sorted(self.items())]

    @classmethod
    def from_json_list(cls, items: list[dict], n: int | None = None) -> "SparsePauliOp":
        if n is None:
            if not items:
                raise ValueError("cannot infer n from an empty term list")
            n = len(items[0]["p"])
        return cls.from_list(n, ((d["p"], d["c"]) for d in items))

    def dumps(self) -> str:
        return json.dumps(self.to_json_list())

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> "SparsePauliOp":
        return cls.from_json_list(json.loads(text), n)

    # -- evaluation on product states -----------------------------------------
    def expectation_product(self, bloch: np.ndarray) -> float:
        """Tr(O rho) for a product state given as an (n, 3) Bloch array."""
        bloch = np.asarray(bloch, dtype=float)
        if bloch.shape != (self.n, 3):
            raise ValueError(f"expected Bloch array of shape ({self.n}, 3), got {bloch.shape}")
        return math.fsum(c * _product_value(PauliString(w), bloch) for w, c in self.items())


def pauli_p_norm(op: SparsePauliOp, p: float) -> float:
    """(sum |alpha_P|^p)^(1/p) over all stored coefficients."""
    if p < 1:
        raise ValueError(f"Pauli-p norm needs p >= 1, got {p}")
    if math.isinf(p):
        return max((abs(c) for _, c in op.items()), default=0.0)
    return _fsum_abs_pow((c for _, c in op.items()), p) ** (1.0 / p)


def truncate(op: SparsePauliOp, k: int) -> SparsePauliOp:
    """Keep the terms of weight at most ``k`` (inclusive)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return SparsePauliOp(op.n, {w: c for w, c in op.items() if weight(w) <= k})


def _product_value(p: PauliString, bloch: np.ndarray) -> float:
    val = 1.0
    for site, code in zip(p.support, p.codes):
        val *= bloch[site, code - 1]
    return float(val)


def expectation_on_product(p: PauliString | str, state) -> float:
    """Tr(P rho) for a product state: the product of Bloch components on dom(P).

    ``state`` is anything with a ``bloch`` attribute or an (n, 3) array.
    """
    if isinstance(p, str):
        p = PauliString(p)
    bloch = np.asarray(getattr(state, "bloch", state), dtype=float)
    if bloch.shape != (p.n, 3):
        raise ValueError(f"Pauli on {p.n} qubits vs state of shape {bloch.shape}")
    return _product_value(p, bloch)


def pauli_features(paulis: list[PauliString], bloch: np.ndarray) -> np.ndarray:
    """Matrix of Tr(P rho_l) for a batch of product states.

    ``bloch`` has shape (N, n, 3); the result has shape (N, len(paulis)).
    """
    bloch = np.asarray(bloch, dtype=float)
    if bloch.ndim == 2:
        bloch = bloch[None]
    N = bloch.shape[0]
    out = np.ones((N, len(paulis)))
    for j, p in enumerate(paulis):
        col = out[:, j]
        for site, code in zip(p.support, p.codes):
            col *= bloch[:, site, code - 1]
    return out


def batch_expectation(op: SparsePauliOp, bloch: np.ndarray) -> np.ndarray:
    """Tr(O rho_l) for each product state in an (N, n, 3) batch."""
    paulis = op.paulis()
    if not paulis:
        return np.zeros(np.asarray(bloch).reshape(-1, op.n, 3).shape[0])
    coeffs = np.array([op[p] for p in paulis])
    return pauli_features(paulis, bloch) @ coeffs


@dataclass(frozen=True)
class ExpansionProfile:
    """Expansion coefficient ``c_e`` and dimension ``d_e`` of an operator."""

    c_e: int
    d_e: int

    @property
    def r(self) -> float:
        return 2.0 * self.d_e / (self.d_e + 1.0)


def expansion_coefficient(op: SparsePauliOp, d_e: int) -> ExpansionProfile:
    """Exhaustive max over qubit subsets U of size ``d_e`` of the number of
    nonzero terms P with U inside dom(P) or dom(P) inside U."""
    if not 1 <= d_e <= op.n:
        raise ValueError(f"d_e must lie in 1..{op.n}")
    supports = [frozenset(PauliString(w).support) for w in op]
    best = 0
    for subset in itertools.combinations(range(op.n), d_e):
        u = frozenset(subset)
        count = sum(1 for s in supports if u <= s or s <= u)
        best = max(best, count)
    return ExpansionProfile(c_e=best, d_e=d_e)


def degree(op: SparsePauliOp) -> int:
    """Max over qubits of the number of non-identity terms acting on it."""
    counts = [0] * op.n
    for w in op:
        for site in PauliString(w).support:
            counts[site] += 1
    return max(counts, default=0)


def enumerate_paulis(n: int, k: int, local: bool = False) -> list[PauliString]:
    """All Pauli words of weight <= k (identity first).

    With ``local=True`` only words whose support fits in a window of ``k``
    consecutive sites of an open chain are produced.
    """
    out = [PauliString.identity(n)]
    for w in range(1, min(k, n) + 1):
        for sites in itertools.combinations(range(n), w):
            if local and sites[-1] - sites[0] >= k:
                continue
            for letters in itertools.product("XYZ", repeat=w):
                out.append(PauliString.from_sparse(n, dict(zip(sites, letters))))
    return out
