"""Random product states that beat the Haar average of a k-local Hamiltonian.

The optimizer works slice by slice: pick the homogeneous weight-kappa part
with the largest l_r mass, draw kappa-1 Haar replicas per qubit, optimize the
last replica locally against the sign-averaged field beta, then scan the
one-parameter family rho(t) and sample a pure product state from the best
mixed member.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .pauli import ExpansionProfile, PauliString, SparsePauliOp, pauli_p_norm
from .states import ProductState, sample_haar_qubit

GRID_POINTS = 10001


class NothingToOptimize(ValueError):
    pass


@dataclass(frozen=True)
class SliceDecomposition:
    alpha_I: float
    slices: dict[int, SparsePauliOp]
    kappa_star: int
    r: float

    @property
    def k(self) -> int:
        return max(self.slices, default=0)

    def reconstruct(self, n: int) -> SparsePauliOp:
        out = SparsePauliOp(n, {"I" * n: self.alpha_I})
        for op in self.slices.values():
            out = out + op
        return out


@dataclass
class PolarizationDraw:
    replicas: np.ndarray  # (kappa*, n, 3) Bloch vectors; the last replica is optimized
    sigma: np.ndarray  # (kappa*,) signs
    beta: np.ndarray  # (n, 3)


@dataclass
class OptResult:
    state: ProductState
    value: float
    direction: str
    t_star: float
    margin: float
    family_value: float

    def to_json(self) -> dict:
        return {
            "state": self.state.bloch.tolist(),
            "value": self.value,
            "direction": self.direction,
            "t_star": self.t_star,
            "margin": self.margin,
        }


def slice_masses(H: SparsePauliOp, r: float) -> dict[int, float]:
    """sum_{|P| = kappa} |alpha_P|^r for each non-identity weight kappa."""
    return {
        kappa: math.fsum(abs(c) ** r for c in op.terms.values())
        for kappa, op in H.weight_slices().items()
        if kappa > 0
    }


def select_slice(H: SparsePauliOp, r: float) -> SliceDecomposition:
    """Pick the slice with the largest l_r mass (ties go to the smallest kappa)."""
    slices = {k: op for k, op in H.weight_slices().items() if k > 0}
    if not slices:
        raise NothingToOptimize("Hamiltonian has no non-identity term")
    masses = slice_masses(H, r)
    best = max(masses.values())
    kappa_star = min(k for k, m in masses.items() if m == best)
    return SliceDecomposition(H.identity_coeff, slices, kappa_star, float(r))


def _sign_patterns(m: int) -> np.ndarray:
    return np.array(list(itertools.product((1.0, -1.0), repeat=m))).reshape(-1, m)


def compute_beta(H_kappa: SparsePauliOp, replicas: np.ndarray) -> np.ndarray:
    """The (n, 3) table beta_{i,p} for a homogeneous weight-kappa operator.

    ``replicas`` holds the kappa-1 fixed replica Bloch vectors, shape
    (kappa-1, n, 3).  The sign average over {+-1}^{kappa-1} is enumerated
    exactly.  For kappa = 1 there is nothing to average and beta is just the
    single-site coefficient table.
    """
    n = H_kappa.n
    beta = np.zeros((n, 3))
    replicas = np.asarray(replicas, dtype=float).reshape(-1, n, 3)
    m = replicas.shape[0]
    paulis = H_kappa.paulis()
    if paulis and any(p.weight != m + 1 for p in paulis):
        raise ValueError("operator is not homogeneous of weight len(replicas) + 1")
    if m == 0:
        for p in paulis:
            beta[p.support[0], p.codes[0] - 1] += H_kappa[p]
        return beta
    for sigma in _sign_patterns(m):
        sign = float(np.prod(sigma))
        # Bloch vector of I/2 + (1/m) sum_s sigma_s (psi_s - I/2) on every qubit
        field = np.tensordot(sigma, replicas, axes=1) / m
        for p in paulis:
            coeff = H_kappa[p]
            comps = [field[site, code - 1] for site, code in zip(p.support, p.codes)]
            for pos, (site, code) in enumerate(zip(p.support, p.codes)):
                rest = math.prod(comps[:pos] + comps[pos + 1 :])
                beta[site, code - 1] += sign * coeff * rest
    return beta / 2**m


def local_optimize(beta_row) -> np.ndarray:
    """Unit Bloch vector maximizing sum_p beta_p <p>; (0,0,1) for a null field."""
    beta_row = np.asarray(beta_row, dtype=float)
    norm = np.linalg.norm(beta_row)
    if norm < 1e-14:
        return np.array([0.0, 0.0, 1.0])
    return beta_row / norm


def family_bloch(draw: PolarizationDraw, t: float = 1.0) -> np.ndarray:
    """Per-qubit Bloch vectors of rho(t) = prod_j (I/2 + (t/kappa) sum_s sigma_s (psi_sj - I/2))."""
    kappa = draw.replicas.shape[0]
    return t * np.tensordot(draw.sigma, draw.replicas, axes=1) / kappa


def family_polynomial(dec: SliceDecomposition, draw: PolarizationDraw) -> np.ndarray:
    """Coefficients a_0..a_k of f(t) = Tr(H rho(t)); a_kappa = Tr(H_kappa rho(1))."""
    coeffs = np.zeros(dec.k + 1)
    coeffs[0] = dec.alpha_I
    b = family_bloch(draw, 1.0)
    for kappa, op in dec.slices.items():
        coeffs[kappa] = op.expectation_product(b)
    return coeffs


def sweep_t(coeffs, points: int = GRID_POINTS) -> float:
    """Grid maximizer of |f(t) - f(0)| on [-1, 1].

    Ties go to the smallest |t| and then to the smaller t.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    grid = np.linspace(-1.0, 1.0, points)
    vals = np.abs(np.polynomial.polynomial.polyval(grid, coeffs) - coeffs[0])
    best = vals.max()
    cand = np.nonzero(vals >= best - 1e-14 * max(1.0, best))[0]
    order = sorted(cand, key=lambda j: (abs(grid[j]), grid[j]))
    return float(grid[order[0]])


def sample_from_bloch(b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pure states drawn qubit-wise from the eigendecomposition of mixed factors.

    A factor with Bloch vector b has eigenvectors +-b/|b| with weights
    (1 +- |b|)/2; a maximally mixed factor yields a Haar-random direction.
    """
    b = np.asarray(b, dtype=float)
    out = np.empty_like(b)
    for j, vec in enumerate(b):
        r = np.linalg.norm(vec)
        u = rng.random()
        if r < 1e-15:
            out[j] = sample_haar_qubit(rng)
            continue
        direction = vec / r
        out[j] = direction if u < (1.0 + min(r, 1.0)) / 2.0 else -direction
    return out


def default_profile(H: SparsePauliOp) -> ExpansionProfile:
    """Profile of a general k-local operator: c_e = 4^k, d_e = k."""
    k = max(H.max_weight(), 1)
    return ExpansionProfile(c_e=4**k, d_e=k)


def draw_family(H: SparsePauliOp, dec: SliceDecomposition, rng: np.random.Generator) -> PolarizationDraw:
    n = H.n
    m = dec.kappa_star - 1
    fixed = sample_haar_qubit(rng, m * n).reshape(m, n, 3) if m else np.zeros((0, n, 3))
    beta = compute_beta(dec.slices[dec.kappa_star], fixed)
    last = np.array([local_optimize(row) for row in beta])
    replicas = np.concatenate([fixed, last[None]], axis=0)
    sigma = rng.choice(np.array([1.0, -1.0]), size=dec.kappa_star)
    return PolarizationDraw(replicas, sigma, beta)


def optimize(H: SparsePauliOp, profile: ExpansionProfile | None = None, rng: np.random.Generator | None = None) -> OptResult:
    """One run of the randomized approximation algorithm."""
    rng = np.random.default_rng() if rng is None else rng
    profile = default_profile(H) if profile is None else profile
    dec = select_slice(H, profile.r)
    draw = draw_family(H, dec, rng)
    coeffs = family_polynomial(dec, draw)
    t_star = sweep_t(coeffs)
    fam = float(np.polynomial.polynomial.polyval(t_star, coeffs))
    state = ProductState(sample_from_bloch(family_bloch(draw, t_star), rng))
    value = H.expectation_product(state.bloch)
    return OptResult(
        state=state,
        value=value,
        direction="max" if fam - dec.alpha_I > 0 else "min",
        t_star=t_star,
        margin=value - dec.alpha_I,
        family_value=fam,
    )


def guaranteed_margin(H: SparsePauliOp, profile: ExpansionProfile | None = None) -> float:
    """C(c_e, d_e, k) * (sum_{P != I} |alpha_P|^r)^{1/r}."""
    from .norms import constant

    profile = default_profile(H) if profile is None else profile
    k = max(H.max_weight(), 1)
    rest = SparsePauliOp(H.n, {w: c for w, c in H.items() if w != "I" * H.n})
    c = constant("expansion", c_e=profile.c_e, d_e=profile.d_e, k=k)
    return c * pauli_p_norm(rest, profile.r) if len(rest) else 0.0


# -- polarization ---------------------------------------------------------------


def polarize(O: SparsePauliOp) -> SparsePauliOp:
    """Lift a homogeneous k-local operator on n qubits to n*k qubits.

    Replica s of qubit i is qubit s*n + i; every ordering of the support
    over the replicas gets weight 1/k!.
    """
    n = O.n
    ks = {PauliString(w).weight for w in O}
    if len(ks) > 1 or 0 in ks:
        raise ValueError("polarization needs a homogeneous operator of positive weight")
    k = ks.pop() if ks else 1
    terms = []
    scale = 1.0 / math.factorial(k)
    for w, c in O.items():
        p = PauliString(w)
        for perm in itertools.permutations(range(k)):
            ops = {perm[s] * n + site: p.letters[site] for s, site in enumerate(p.support)}
            terms.append((PauliString.from_sparse(n * k, ops), c * scale))
    return SparsePauliOp.from_list(n * k, terms)


def polarization_rhs(O: SparsePauliOp, replicas: np.ndarray, t: float) -> float:
    """(k^k/k!) E_sigma[sigma_1..sigma_k Tr(O prod_i {I/2 + (t/k) sum_s sigma_s (rho_si - I/2)})].

    ``replicas`` holds Bloch vectors of the k replica factors, shape (k, n, 3).
    """
    replicas = np.asarray(replicas, dtype=float)
    k = replicas.shape[0]
    total = 0.0
    for sigma in _sign_patterns(k):
        b = (t / k) * np.tensordot(sigma, replicas, axes=1)
        total += float(np.prod(sigma)) * O.expectation_product(b)
    return k**k / math.factorial(k) * total / 2**k


def random_local_hamiltonian(
    n: int, k: int, rng: np.random.Generator, density: float = 1.0, homogeneous: bool = False, identity: bool = True
) -> SparsePauliOp:
    """Random operator with coefficients uniform in [-1, 1] on Pauli words of
    weight <= k (exactly k when ``homogeneous``); each word is kept with
    probability ``density``."""
    from .pauli import enumerate_paulis

    terms = {}
    for p in enumerate_paulis(n, k):
        if homogeneous and p.weight != k:
            continue
        if p.weight == 0 and not identity:
            continue
        if rng.random() < density:
            terms[p] = rng.uniform(-1.0, 1.0)
    if not any(PauliString(str(p)).weight for p in terms):
        p = next(q for q in enumerate_paulis(n, k) if q.weight == k)
        terms[p] = rng.uniform(0.5, 1.0)
    return SparsePauliOp(n, terms)
