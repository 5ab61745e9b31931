"""Single-qubit stabilizer states, product states and random sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: stab_1 labels in code order 0..5
STAB_LABELS = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")
LABEL_CODE = {lab: i for i, lab in enumerate(STAB_LABELS)}

#: Bloch vectors of the six stabilizer states, indexed by label code
STAB_BLOCH = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)

#: measurement basis codes: 0 -> X, 1 -> Y, 2 -> Z
BASES = ("X", "Y", "Z")


def label_codes(labels) -> np.ndarray:
    """Map label strings (or codes) to an int array of codes."""
    arr = np.asarray(labels)
    if arr.dtype.kind in "iu":
        if arr.size and (arr.min() < 0 or arr.max() > 5):
            raise ValueError("stabilizer label codes must lie in 0..5")
        return arr.astype(np.int8)
    flat = [LABEL_CODE[str(lab)] for lab in arr.ravel()]
    return np.array(flat, dtype=np.int8).reshape(arr.shape)


def codes_to_labels(codes) -> list:
    return [STAB_LABELS[int(c)] for c in np.ravel(codes)]


def outcome_code(basis: int, bit: int) -> int:
    """Label code for measuring ``basis`` (0=X,1=Y,2=Z) with outcome bit 0 (+) or 1 (-)."""
    return {0: 2, 1: 4, 2: 0}[int(basis)] + int(bit)


@dataclass(frozen=True, eq=False)
class ProductState:
    """Pure product state stored as one unit Bloch vector per qubit."""

    bloch: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        b = np.asarray(self.bloch, dtype=float)
        if b.ndim != 2 or b.shape[1] != 3:
            raise ValueError("Bloch array must have shape (n, 3)")
        norms = np.linalg.norm(b, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("Bloch vectors of a pure product state must have unit norm")
        b.setflags(write=False)
        object.__setattr__(self, "bloch", b)

    @classmethod
    def from_labels(cls, labels) -> "ProductState":
        codes = label_codes(labels)
        return cls(STAB_BLOCH[codes], tuple(codes_to_labels(codes)))

    @property
    def n(self) -> int:
        return self.bloch.shape[0]

    def statevector(self) -> np.ndarray:
        """Dense 2^n amplitude vector (qubit 0 is the most significant bit)."""
        vec = np.ones(1, dtype=complex)
        for b in self.bloch:
            vec = np.kron(vec, bloch_to_ket(b))
        return vec

    def density_matrix(self) -> np.ndarray:
        v = self.statevector()
        return np.outer(v, v.conj())


def bloch_to_ket(b) -> np.ndarray:
    """Single-qubit ket with the given unit Bloch vector (global phase fixed)."""
    x, y, z = b
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def sample_stab_codes(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform i.i.d. stab_1 label codes, shape (n,) or (size, n)."""
    if n < 1:
        raise ValueError("n must be positive")
    shape = (n,) if size is None else (size, n)
    return rng.integers(0, 6, size=shape).astype(np.int8)


def sample_stab_product(n: int, rng: np.random.Generator) -> ProductState:
    """Random product of uniformly chosen single-qubit stabilizer states."""
    return ProductState.from_labels(sample_stab_codes(n, rng))


def sample_haar_qubit(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Bloch vector(s) uniform on the unit sphere."""
    shape = (3,) if size is None else (size, 3)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_haar_product(n: int, rng: np.random.Generator) -> ProductState:
    return ProductState(sample_haar_qubit(rng, n))


def domain_wall(n: int) -> ProductState:
    """|down ... down up ... up> with the wall in the middle; up is |0>."""
    left = n // 2
    return ProductState.from_labels(["Z-"] * left + ["Z+"] * (n - left))


def rotating_labels(m: int) -> list[str]:
    """Clockwise-rotating product pattern: right, down, left, up, right, ..."""
    cycle = ("X+", "Z-", "X-", "Z+")
    return [cycle[i % 4] for i in range(m)]
