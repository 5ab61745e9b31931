"""Constants and checks for lower bounds on the spectral norm by Pauli-p norms.

    (1/3) C(k)   ||H||_{Pauli, 2k/(k+1)} <= ||H||     for k-local H
    (1/3) C(k,d) ||H||_{Pauli, 1}        <= ||H||     for k-local H of degree d

The Pauli norms include the identity coefficient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .dense import MAX_QUBITS, DenseSizeError, to_dense, to_sparse
from .pauli import SparsePauliOp, degree, pauli_p_norm

KINDS = ("general-k-local", "bounded-degree", "expansion")
TOL = 1e-12


@dataclass(frozen=True)
class NormConstant:
    kind: str
    params: dict
    value: float


def _check_params(**params):
    for name, v in params.items():
        if v is None or int(v) != v or v < 1:
            raise ValueError(f"{name} must be an integer >= 1, got {v!r}")


def constant(kind: str, k: int | None = None, d: int | None = None, c_e: int | None = None, d_e: int | None = None) -> float:
    """Closed-form constants.

    expansion:        sqrt(2 k!) / (c_e^{1/(2 d_e)} k^{k+1.5+1/r} (sqrt6 + 2 sqrt3)^k), r = 2d_e/(d_e+1)
    general-k-local:  the expansion constant with c_e = 4^k, d_e = k
    bounded-degree:   sqrt(2 k!) / (sqrt(d) k^{k+2.5} (2 sqrt6 + 4 sqrt3)^k)
    """
    if kind == "general-k-local":
        _check_params(k=k)
        return constant("expansion", k=k, c_e=4**k, d_e=k)
    if kind == "expansion":
        _check_params(k=k, c_e=c_e, d_e=d_e)
        r = 2.0 * d_e / (d_e + 1.0)
        num = math.sqrt(2.0 * math.factorial(k))
        den = c_e ** (1.0 / (2 * d_e)) * k ** (k + 1.5 + 1.0 / r) * (math.sqrt(6) + 2 * math.sqrt(3)) ** k
        return num / den
    if kind == "bounded-degree":
        _check_params(k=k, d=d)
        num = math.sqrt(2.0 * math.factorial(k))
        den = math.sqrt(d) * k ** (k + 2.5) * (2 * math.sqrt(6) + 4 * math.sqrt(3)) ** k
        return num / den
    raise ValueError(f"unknown constant kind {kind!r}; expected one of {KINDS}")


def norm_constant(kind: str, **params) -> NormConstant:
    return NormConstant(kind, dict(params), constant(kind, **params))


def spectral_norm(O: SparsePauliOp) -> float:
    """Largest |eigenvalue| (dense for n <= 9, sparse Lanczos up to n = 12)."""
    if O.n > MAX_QUBITS:
        raise DenseSizeError(f"spectral norm is computed densely; n = {O.n} exceeds {MAX_QUBITS}")
    if len(O) == 0:
        return 0.0
    if O.n <= 9:
        w = np.linalg.eigvalsh(to_dense(O))
        return float(max(abs(w[0]), abs(w[-1])))
    w = scipy.sparse.linalg.eigsh(to_sparse(O), k=1, which="LM", tol=1e-14, return_eigenvectors=False)
    return float(np.abs(w).max())


@dataclass(frozen=True)
class InequalityReport:
    kind: str
    k: int
    d: int
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + TOL


def verify_inequality(O: SparsePauliOp, kind: str = "general-k-local", groups=None) -> InequalityReport:
    """Compare (1/3) C ||O||_Pauli,p against the spectral norm.

    k is the maximal weight; d is the maximal number of terms touching a qubit.
    ``groups`` optionally lists the few-body terms (each a collection of
    qubit indices) when the degree should count terms instead of Pauli words.
    """
    k = max(O.max_weight(), 1)
    if groups is not None:
        counts = [0] * O.n
        for g in groups:
            for q in set(g):
                counts[q] += 1
        d = max(max(counts, default=0), 1)
    else:
        d = max(degree(O), 1)
    if kind == "general-k-local":
        lhs = constant(kind, k=k) / 3.0 * pauli_p_norm(O, 2.0 * k / (k + 1.0))
    elif kind == "bounded-degree":
        lhs = constant(kind, k=k, d=d) / 3.0 * pauli_p_norm(O, 1.0)
    else:
        raise ValueError(f"unsupported inequality kind {kind!r}")
    return InequalityReport(kind, k, d, lhs, spectral_norm(O))
