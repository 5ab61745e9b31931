"""Free-fermion dynamics of open XY and transverse-field Ising chains.

Majorana operators (0-indexed sites, S_j = Z_0 ... Z_{j-1}):

    gamma_{2j}   = S_j X_j
    gamma_{2j+1} = S_j Y_j
    Z_j          = -i gamma_{2j} gamma_{2j+1}

A quadratic Hamiltonian H = (i/4) sum_ab A_ab gamma_a gamma_b with real
antisymmetric A evolves the Majoranas linearly, gamma(t) = R(t) gamma with
R(t) = exp(tA).  R is computed from the eigendecomposition of the Hermitian
matrix iA, so arbitrarily large t costs nothing extra.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dense import phases
from .pauli import PauliString, SparsePauliOp
from .shadows import UnsupportedModeError

KINDS = ("xy", "ising")
PRUNE = 1e-12


@dataclass(frozen=True)
class ChainModel:
    """Open chain with nearest-neighbour couplings and a Z field.

    xy:    H = sum_j (X_j X_{j+1} + Y_j Y_{j+1}) / 4 + sum_j h_j Z_j / 2
    ising: H = sum_j X_j X_{j+1} / 2              + sum_j h_j Z_j / 2
    """

    kind: str
    h: tuple[float, ...]
    field_spec: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported chain kind {self.kind!r}; expected one of {KINDS}")
        if len(self.h) < 1:
            raise ValueError("chain needs at least one site")
        object.__setattr__(self, "h", tuple(float(v) for v in self.h))

    @property
    def n(self) -> int:
        return len(self.h)

    @classmethod
    def homogeneous(cls, kind: str, n: int, h: float = 0.5) -> "ChainModel":
        return cls(kind, (h,) * n, ("homogeneous", h))

    @classmethod
    def disordered(cls, kind: str, n: int, seed: int, low: float = -5.0, high: float = 5.0) -> "ChainModel":
        """Fields drawn once, uniformly from [low, high], from ``seed``."""
        rng = np.random.default_rng(seed)
        return cls(kind, tuple(rng.uniform(low, high, n)), ("disordered", low, high, seed))

    def to_json(self) -> dict:
        out = {"kind": self.kind, "n": self.n}
        if self.field_spec and self.field_spec[0] == "homogeneous":
            out["field"] = {"mode": "homogeneous", "h": self.field_spec[1]}
        elif self.field_spec and self.field_spec[0] == "disordered":
            _, low, high, seed = self.field_spec
            out["field"] = {"mode": "disordered", "low": low, "high": high, "seed": seed}
        else:
            out["field"] = {"mode": "explicit", "h": list(self.h)}
        return out

    @classmethod
    def from_json(cls, spec: dict) -> "ChainModel":
        kind = str(spec["kind"]).lower()
        n = int(spec["n"])
        fld = spec.get("field", {"mode": "homogeneous", "h": 0.5})
        mode = fld.get("mode", "homogeneous")
        if mode == "homogeneous":
            return cls.homogeneous(kind, n, float(fld.get("h", 0.5)))
        if mode == "disordered":
            if "seed" not in fld:
                raise ValueError("disordered field needs a seed")
            return cls.disordered(kind, n, int(fld["seed"]), float(fld.get("low", -5)), float(fld.get("high", 5)))
        if mode == "explicit":
            h = fld["h"]
            if len(h) != n:
                raise ValueError("explicit field length differs from n")
            return cls(kind, tuple(h))
        raise ValueError(f"unknown field mode {mode!r}")

    def hamiltonian(self) -> SparsePauliOp:
        """The spin Hamiltonian as a Pauli sum (for dense cross-checks)."""
        n = self.n
        terms = []
        for j in range(n - 1):
            if self.kind == "xy":
                terms.append((PauliString.from_sparse(n, {j: "X", j + 1: "X"}), 0.25))
                terms.append((PauliString.from_sparse(n, {j: "Y", j + 1: "Y"}), 0.25))
            else:
                terms.append((PauliString.from_sparse(n, {j: "X", j + 1: "X"}), 0.5))
        for j, hj in enumerate(self.h):
            terms.append((PauliString.from_sparse(n, {j: "Z"}), 0.5 * hj))
        return SparsePauliOp.from_list(n, terms)


def build_quadratic(model: ChainModel) -> np.ndarray:
    """Antisymmetric 2n x 2n matrix A with H = (i/4) sum A_ab gamma_a gamma_b.

    A term c * (-i gamma_a gamma_b), a < b, contributes A_ab = -2c, A_ba = 2c.
    """
    if model.kind not in KINDS:
        raise ValueError(f"unsupported chain kind {model.kind!r}")
    n = model.n
    A = np.zeros((2 * n, 2 * n))

    def put(a, b, c):
        A[a, b] += -2.0 * c
        A[b, a] += 2.0 * c

    for j, hj in enumerate(model.h):
        put(2 * j, 2 * j + 1, 0.5 * hj)
    for j in range(n - 1):
        if model.kind == "xy":
            # X_j X_{j+1} = -i g_{2j+1} g_{2j+2};  Y_j Y_{j+1} = i g_{2j} g_{2j+3}
            put(2 * j + 1, 2 * j + 2, 0.25)
            put(2 * j, 2 * j + 3, -0.25)
        else:
            put(2 * j + 1, 2 * j + 2, 0.5)
    return A


@lru_cache(maxsize=8)
def _spectral(model: ChainModel):
    A = build_quadratic(model)
    return np.linalg.eigh(1j * A)


def single_particle_energies(model: ChainModel) -> np.ndarray:
    """Eigenvalues of iA (they come in +- pairs)."""
    return _spectral(model)[0].astype(float)


def majorana_rotation(model: ChainModel, t: float) -> np.ndarray:
    """R(t) = exp(tA) = V exp(-i t Lambda) V^dagger with iA = V Lambda V^dagger."""
    if t == 0:
        return np.eye(2 * model.n)
    w, v = _spectral(model)
    R = (v * phases(w, t)) @ v.conj().T
    return np.ascontiguousarray(R.real)


def bilinear_pauli(n: int, b: int, c: int) -> tuple[float, PauliString]:
    """(sign, P) with -i gamma_b gamma_c = sign * P for b < c."""
    if not 0 <= b < c < 2 * n:
        raise ValueError("need 0 <= b < c < 2n")
    j, l = b // 2, c // 2
    if j == l:
        return 1.0, PauliString.from_sparse(n, {j: "Z"})
    sign, first = (-1.0, "Y") if b % 2 == 0 else (1.0, "X")
    ops = {j: first, l: "X" if c % 2 == 0 else "Y"}
    for m in range(j + 1, l):
        ops[m] = "Z"
    return sign, PauliString.from_sparse(n, ops)


def _site_weights(R: np.ndarray, i: int) -> np.ndarray:
    r1, r2 = R[2 * i], R[2 * i + 1]
    return np.outer(r1, r2) - np.outer(r2, r1)


def heisenberg_Z(model: ChainModel, i: int, t: float) -> SparsePauliOp:
    """Z_i(t) = e^{itH} Z_i e^{-itH} expanded in Pauli words (site index 0-based)."""
    n = model.n
    if not 0 <= i < n:
        raise IndexError(f"site {i} outside 0..{n - 1}")
    W = _site_weights(majorana_rotation(model, t), i)
    terms = []
    bs, cs = np.nonzero(np.triu(np.abs(W) >= PRUNE, k=1))
    for b, c in zip(bs, cs):
        sign, p = bilinear_pauli(n, int(b), int(c))
        terms.append((p, sign * W[b, c]))
    return SparsePauliOp.from_list(n, terms)


def expectation_Z_t(model: ChainModel, i: int, t: float, state) -> float:
    """<s| Z_i(t) |s> for a product state via the Pauli expansion."""
    bloch = np.asarray(getattr(state, "bloch", state), dtype=float)
    return heisenberg_Z(model, i, t).expectation_product(bloch)


def majorana_correlations(bloch: np.ndarray) -> np.ndarray:
    """M_bc = <-i gamma_b gamma_c> for a batch of product states.

    ``bloch`` has shape (N, n, 3); the result has shape (N, 2n, 2n) and is
    antisymmetric with zero diagonal.
    """
    bloch = np.asarray(bloch, dtype=float)
    if bloch.ndim == 2:
        bloch = bloch[None]
    N, n, _ = bloch.shape
    x, y, z = bloch[..., 0], bloch[..., 1], bloch[..., 2]
    u = np.stack([-y, x], axis=-1)  # left endpoint factor, indexed by b parity
    v = np.stack([x, y], axis=-1)  # right endpoint factor, indexed by c parity
    M = np.zeros((N, 2 * n, 2 * n))
    for j in range(n):
        M[:, 2 * j, 2 * j + 1] = z[:, j]
        if j == n - 1:
            break
        # string of Z between j and l, for l = j+1 .. n-1
        between = np.cumprod(np.concatenate([np.ones((N, 1)), z[:, j + 1 : n - 1]], axis=1), axis=1)
        block = u[:, j, :, None, None] * (between[:, None, :, None] * v[:, None, j + 1 :, :])
        M[:, 2 * j : 2 * j + 2, 2 * j + 2 :] = block.reshape(N, 2, -1)
    return M - M.transpose(0, 2, 1)


def z_expectations(model: ChainModel, t: float, bloch: np.ndarray, chunk: int = 1000) -> np.ndarray:
    """<Z_i(t)> for every site and every product state in an (N, n, 3) batch.

    Returns an (N, n) array computed as (R M R^T)_{2i, 2i+1}.
    """
    bloch = np.asarray(bloch, dtype=float)
    if bloch.ndim == 2:
        bloch = bloch[None]
    if bloch.shape[1] != model.n:
        raise ValueError("state width does not match the chain")
    R = majorana_rotation(model, t)
    even, odd = R[0::2], R[1::2]
    out = np.empty(bloch.shape[:2])
    for s in range(0, bloch.shape[0], chunk):
        M = majorana_correlations(bloch[s : s + chunk])
        out[s : s + chunk] = np.einsum("ib,Nbc,ic->Ni", even, M, odd, optimize=True)
    return out


def z_expectations_provider(model: ChainModel, t: float, provider) -> np.ndarray:
    """<Z_i(t)> for a general state known through Pauli expectations.

    ``provider(P)`` must return Tr(P rho) for a :class:`PauliString`.
    """
    n = model.n
    M = np.zeros((2 * n, 2 * n))
    for b in range(2 * n):
        for c in range(b + 1, 2 * n):
            sign, p = bilinear_pauli(n, b, c)
            M[b, c] = sign * provider(p)
            M[c, b] = -M[b, c]
    R = majorana_rotation(model, t)
    return np.einsum("ib,bc,ic->i", R[0::2], M, R[1::2])


def z_observable_site(op: SparsePauliOp) -> int | None:
    """Site i if ``op`` is exactly Z_i, else None."""
    if len(op) != 1:
        return None
    (w, c), = op.items()
    p = PauliString(w)
    if c != 1.0 or p.weight != 1 or p.letters[p.support[0]] != "Z":
        return None
    return p.support[0]


class FermionBackend:
    """Expectation-only backend: exact <Z_i(t)> on evolved product inputs."""

    supports_sampling = False

    def __init__(self, model: ChainModel, t: float):
        self.model = model
        self.t = float(t)
        self.n = model.n

    def describe(self) -> dict:
        return {"backend": "free-fermion", "model": self.model.to_json(), "t": self.t}

    def expectations(self, bloch_batch: np.ndarray, observables: dict[str, SparsePauliOp]):
        sites = {}
        for name, op in observables.items():
            i = z_observable_site(op)
            if i is None:
                raise UnsupportedModeError(f"free-fermion backend only evaluates single Z_i observables, got {name}")
            sites[name] = (i, next(iter(op)))
        z = z_expectations(self.model, self.t, bloch_batch)
        return {name: {w: z[:, i]} for name, (i, w) in sites.items()}

    def sample(self, *args, **kwargs):
        raise UnsupportedModeError("free-fermion backend cannot sample measurement strings")
