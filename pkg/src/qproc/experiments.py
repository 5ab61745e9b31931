"""Desk-scale versions of the spin-chain learning experiments.

Training data: uniformly random stabilizer product inputs, evolved for time
t under an XY or Ising chain, with <Z_i> labels carrying 500-shot noise.
Models: one LASSO model per site, hyperparameters by two-fold grid search.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .fermion import ChainModel, FermionBackend, z_expectations, z_expectations_provider
from .learner import A_GRID, LearnedObservable, cross_validate
from .pauli import PauliString, SparsePauliOp
from .shadows import chunk_rng, collect_process_shadow
from .states import LABEL_CODE, STAB_BLOCH, domain_wall, rotating_labels

#: k = 4 local features at n = 50 need ~9k columns; the default grid stops at 3
K_GRID = (1, 2, 3)
TEST_SEED_OFFSET = 7919


def z_observables(n: int) -> dict[str, SparsePauliOp]:
    return {f"Z_{i + 1}": SparsePauliOp.single(n, {i: "Z"}) for i in range(n)}


def chain_dataset(model: ChainModel, t: float, N: int, shots: int = 500, seed: int = 0):
    """Expectation-mode dataset; returns (shadow, Bloch inputs, (N, n) labels)."""
    backend = FermionBackend(model, t)
    obs = z_observables(model.n)
    shadow = collect_process_shadow(backend, N, "expectation", obs, shots, seed)
    Y = np.stack([shadow.y[f"Z_{i + 1}"] for i in range(model.n)], axis=1)
    return shadow, shadow.input_bloch(), Y


def train_chain(
    model: ChainModel,
    t: float,
    N: int,
    shots: int = 500,
    seed: int = 0,
    k_grid=K_GRID,
    a_grid=A_GRID,
    folds: int = 2,
    sites=None,
) -> list[LearnedObservable]:
    """Per-site LASSO models of <Z_i(t)> trained on random product inputs."""
    _, bloch, Y = chain_dataset(model, t, N, shots, seed)
    sites = list(range(model.n)) if sites is None else list(sites)
    res = cross_validate(bloch, Y[:, sites], k_grid=k_grid, a_grid=a_grid, folds=folds, seed=seed)
    return [r.model for r in res]


def random_test_states(n: int, size: int, seed: int) -> np.ndarray:
    rng = chunk_rng(seed + TEST_SEED_OFFSET, 0)
    return STAB_BLOCH[rng.integers(0, 6, size=(size, n))]


def heldout_rmse(models: list[LearnedObservable], model: ChainModel, t: float, test_bloch: np.ndarray, sites=None) -> float:
    """Root-mean-square error over all (state, site) pairs against exact values."""
    sites = list(range(model.n)) if sites is None else list(sites)
    exact = z_expectations(model, t, test_bloch)[:, sites]
    pred = np.stack([m.predict_batch(test_bloch) for m in models], axis=1)
    return float(np.sqrt(np.mean((pred - exact) ** 2)))


def _chain(kind: str, n: int, field: str, field_seed: int) -> ChainModel:
    if field == "homogeneous":
        return ChainModel.homogeneous(kind, n)
    return ChainModel.disordered(kind, n, seed=field_seed)


def fig2b(n=50, kind="xy", field="homogeneous", t=1e6, Ns=(100, 1000, 10000), seeds=(0,), test_size=200, shots=500, k_grid=K_GRID):
    """RMSE against training-set size."""
    rows = []
    for seed in seeds:
        chain = _chain(kind, n, field, seed)
        test = random_test_states(n, test_size, seed)
        for N in Ns:
            models = train_chain(chain, t, N, shots, seed, k_grid)
            rows.append({"seed": seed, "N": N, "rmse": heldout_rmse(models, chain, t, test)})
    return rows


def fig2c(n=50, kind="xy", field="homogeneous", ts=tuple(10.0**e for e in range(7)), N=10000, seeds=(0,), test_size=200, shots=500, k_grid=K_GRID):
    """RMSE against evolution time."""
    rows = []
    for seed in seeds:
        chain = _chain(kind, n, field, seed)
        test = random_test_states(n, test_size, seed)
        for t in ts:
            models = train_chain(chain, t, N, shots, seed, k_grid)
            rows.append({"seed": seed, "t": t, "rmse": heldout_rmse(models, chain, t, test)})
    return rows


def fig2d(ns=(10, 20, 30, 40, 50), kind="xy", field="homogeneous", t=1e6, N=10000, seeds=(0,), test_size=200, shots=500, k_grid=K_GRID):
    """RMSE against system size."""
    rows = []
    for seed in seeds:
        for n in ns:
            chain = _chain(kind, n, field, seed)
            test = random_test_states(n, test_size, seed)
            models = train_chain(chain, t, N, shots, seed, k_grid)
            rows.append({"seed": seed, "n": n, "rmse": heldout_rmse(models, chain, t, test)})
    return rows


def fig3(n=50, ts=(0.0, 1.0, 2.0, 5.0, 10.0, 1e6), N=10000, seed=0, shots=500, k_grid=K_GRID):
    """Predicted and exact <Z_i(t)> on the domain-wall input."""
    chain = ChainModel.homogeneous("xy", n)
    wall = domain_wall(n).bloch
    rows = []
    for t in ts:
        models = train_chain(chain, t, N, shots, seed, k_grid)
        exact = z_expectations(chain, t, wall)[0]
        for i, m in enumerate(models):
            rows.append({"site": i + 1, "t": t, "predicted": m.predict(wall), "exact": float(exact[i])})
    return rows


# -- the GHZ-like entangled input ------------------------------------------------


def ghz_like_statevector(n: int, m: int | None = None) -> np.ndarray:
    """Dense |psi_e>: the even-parity superposition of X-basis strings on the
    first m qubits (default n/2) times the rotating product on the rest."""
    from .dense import _check_n
    from .states import ProductState

    m = n // 2 if m is None else m
    _check_n(n)
    plus = np.array([1.0, 1.0]) / math.sqrt(2)
    minus = np.array([1.0, -1.0]) / math.sqrt(2)
    left = np.zeros(2**m, dtype=complex)
    for s in itertools.product((0, 1), repeat=m):  # 1 marks a right-pointing spin
        if sum(s) % 2:
            continue
        vec = np.ones(1)
        for bit in s:
            vec = np.kron(vec, plus if bit else minus)
        left += vec
    left /= math.sqrt(2 ** (m - 1))
    if m == n:
        return left
    right = ProductState.from_labels(rotating_labels(n - m)).statevector()
    return np.kron(left, right)


def ghz_like_expectation(p: PauliString, m: int | None = None) -> float:
    """Closed-form Tr(P psi_e) for the GHZ-like state on n = len(P) qubits.

    The left block equals (|0..0> + (-1)^m |1..1>)/sqrt2 in the Z basis, so a
    Pauli string restricted to it has expectation
      (1 + (-1)^{#Z}) / 2             if it has only I and Z,
      (-1)^m (-1)^{#Y/2}  (#Y even)    if it has X or Y on every block qubit,
      0                                otherwise.
    The right block is a product state with known Bloch vectors.
    """
    n = p.n
    m = n // 2 if m is None else m
    left = p.letters[:m]
    flips = sum(c in "XY" for c in left)
    if flips == 0:
        val = 1.0 if left.count("Z") % 2 == 0 else 0.0
    elif flips == m:
        ny = left.count("Y")
        val = 0.0 if ny % 2 else (-1.0) ** m * (-1.0) ** (ny // 2)
    else:
        return 0.0
    if val == 0.0:
        return 0.0
    codes = [LABEL_CODE[lab] for lab in rotating_labels(n - m)]
    for c, code in zip(p.letters[m:], codes):
        if c != "I":
            val *= STAB_BLOCH[code]["XYZ".index(c)]
    return float(val)


def ghz_like_provider(n: int, m: int | None = None):
    """Callable P -> Tr(P psi_e) on n qubits."""

    def provider(p: PauliString) -> float:
        if p.n != n:
            raise ValueError("Pauli word has the wrong length")
        return ghz_like_expectation(p, m)

    return provider


def fig4(n=50, ts=(0.0, 1.0, 2.0, 5.0, 10.0, 1e6), N=10000, seed=0, shots=500, k_grid=K_GRID, m=None):
    """Predicted and exact <Z_i(t)> on the GHZ-like input."""
    chain = ChainModel.homogeneous("xy", n)
    prov = ghz_like_provider(n, m)
    rows = []
    for t in ts:
        models = train_chain(chain, t, N, shots, seed, k_grid)
        exact = z_expectations_provider(chain, t, prov)
        for i, mdl in enumerate(models):
            rows.append({"site": i + 1, "t": t, "predicted": mdl.predict(prov), "exact": float(exact[i])})
    return rows
