import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_op
from qproc.dense import pauli_expectation, to_dense
from qproc.hamopt import (
    GRID_POINTS,
    NothingToOptimize,
    PolarizationDraw,
    SliceDecomposition,
    compute_beta,
    default_profile,
    family_bloch,
    family_polynomial,
    guaranteed_margin,
    local_optimize,
    optimize,
    polarization_rhs,
    polarize,
    random_local_hamiltonian,
    sample_from_bloch,
    select_slice,
    slice_masses,
    sweep_t,
)
from qproc.norms import constant
from qproc.pauli import ExpansionProfile, PauliString, SparsePauliOp, pauli_p_norm
from qproc.states import ProductState, sample_haar_qubit


def mixed_product_density(bloch):
    I = np.eye(2)
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0, -1.0])
    rho = np.ones((1, 1))
    for x, y, z in bloch:
        rho = np.kron(rho, (I + x * X + y * Y + z * Z) / 2)
    return rho


def reduced_term(H, site, code):
    """H_{kappa,i,p}: terms with letter p at site i, that letter replaced by I."""
    letter = "XYZ"[code]
    out = {}
    for w, c in H.items():
        if w[site] == letter:
            out[w[:site] + "I" + w[site + 1 :]] = c
    return SparsePauliOp(H.n, out)


class TestSlices:
    def test_prefers_large_slice(self):
        H = SparsePauliOp(2, {"ZI": 1.0, "ZZ": 0.1})
        assert select_slice(H, 1.0).kappa_star == 1

    def test_homogeneous(self, rng):
        H = random_local_hamiltonian(4, 2, rng, homogeneous=True, identity=False)
        assert select_slice(H, 4 / 3).kappa_star == 2

    def test_tie_goes_to_smaller(self):
        H = SparsePauliOp(2, {"ZI": 1.0, "XX": 1.0})
        assert select_slice(H, 1.5).kappa_star == 1

    def test_identity_only_rejected(self):
        with pytest.raises(NothingToOptimize):
            select_slice(SparsePauliOp(2, {"II": 3.0}), 1.0)

    def test_reconstructs(self, rng):
        H = random_op(4, 3, rng)
        assert select_slice(H, 1.5).reconstruct(4).approx_equal(H, 1e-14)

    def test_best_slice_carries_a_kth_of_the_mass(self, rng):
        for _ in range(100):
            k = int(rng.integers(1, 4))
            H = random_op(4, k, rng, density=0.4)
            r = default_profile(H).r
            dec = select_slice(H, r)
            masses = slice_masses(H, r)
            assert H.max_weight() * masses[dec.kappa_star] >= sum(masses.values()) - 1e-12


class TestBeta:
    def test_one_local(self):
        H = SparsePauliOp(3, {"IXI": 0.7})
        beta = compute_beta(H, np.zeros((0, 3, 3)))
        expected = np.zeros((3, 3))
        expected[1, 0] = 0.7
        np.testing.assert_array_equal(beta, expected)

    def test_zz_folds_to_replica(self, rng):
        rep = sample_haar_qubit(rng, 2)[None]
        beta = compute_beta(SparsePauliOp(2, {"ZZ": 1.0}), rep)
        assert beta[0, 2] == pytest.approx(rep[0, 1, 2], abs=1e-15)
        assert beta[1, 2] == pytest.approx(rep[0, 0, 2], abs=1e-15)
        assert np.count_nonzero(beta) == 2

    @pytest.mark.parametrize("kappa", [2, 3])
    def test_equals_scaled_polarized_expectation(self, kappa, rng):
        n = 3
        H = random_local_hamiltonian(n, kappa, rng, homogeneous=True, identity=False)
        reps = sample_haar_qubit(rng, (kappa - 1) * n).reshape(kappa - 1, n, 3)
        beta = compute_beta(H, reps)
        m = kappa - 1
        scale = math.factorial(m) / m**m
        for i in range(n):
            for code in range(3):
                Hip = reduced_term(H, i, code)
                if len(Hip) == 0:
                    assert beta[i, code] == 0.0
                    continue
                # the qubit i factor is the identity; drop it before polarizing
                keep = [j for j in range(n) if j != i]
                small = SparsePauliOp(n - 1, {"".join(w[j] for j in keep): c for w, c in Hip.items()})
                pol = polarize(small)
                val = pol.expectation_product(reps[:, keep, :].reshape(-1, 3))
                assert beta[i, code] == pytest.approx(scale * val, abs=1e-12)

    def test_rejects_wrong_replica_count(self, rng):
        with pytest.raises(ValueError):
            compute_beta(SparsePauliOp(2, {"ZZ": 1.0}), np.zeros((0, 2, 3)))


class TestLocalOptimize:
    def test_examples(self):
        np.testing.assert_allclose(local_optimize([0, 0, 2]), [0, 0, 1])
        np.testing.assert_allclose(local_optimize([1, 1, 0]), [2**-0.5, 2**-0.5, 0])
        np.testing.assert_array_equal(local_optimize([0, 0, 0]), [0, 0, 1])

    @given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3))
    def test_value_bound(self, beta):
        beta = np.array(beta)
        v = local_optimize(beta)
        value = float(beta @ v)
        if np.linalg.norm(beta) >= 1e-14:
            assert value == pytest.approx(np.linalg.norm(beta), rel=1e-12)
        assert value >= np.abs(beta).sum() / math.sqrt(3) - 1e-12


class TestFamily:
    def test_polynomial_matches_direct_trace(self, rng):
        for _ in range(5):
            H = random_op(3, 3, rng)
            dec = select_slice(H, default_profile(H).r)
            kap = dec.kappa_star
            reps = sample_haar_qubit(rng, kap * 3).reshape(kap, 3, 3)
            draw = PolarizationDraw(reps, rng.choice([-1.0, 1.0], kap), np.zeros((3, 3)))
            coeffs = family_polynomial(dec, draw)
            Hd = to_dense(H)
            for t in rng.uniform(-1, 1, 5):
                direct = np.trace(Hd @ mixed_product_density(family_bloch(draw, t))).real
                assert np.polynomial.polynomial.polyval(t, coeffs) == pytest.approx(direct, abs=1e-10)

    def test_constant_operator(self):
        dec = SliceDecomposition(0.4, {}, 1, 1.0)
        draw = PolarizationDraw(np.zeros((1, 2, 3)), np.ones(1), np.zeros((2, 3)))
        np.testing.assert_array_equal(family_polynomial(dec, draw), [0.4])

    def test_markov_coefficient_bound(self, rng):
        grid = np.linspace(-1, 1, 2001)
        for _ in range(30):
            H = random_op(3, 3, rng)
            dec = select_slice(H, 1.5)
            kap = dec.kappa_star
            reps = sample_haar_qubit(rng, kap * 3).reshape(kap, 3, 3)
            draw = PolarizationDraw(reps, rng.choice([-1.0, 1.0], kap), np.zeros((3, 3)))
            c = family_polynomial(dec, draw)
            sup = np.abs(np.polynomial.polynomial.polyval(grid, c)).max()
            assert np.all(np.abs(c) <= (1 + math.sqrt(2)) ** dec.k * sup + 1e-12)


class TestSweep:
    def test_linear(self):
        t = sweep_t([0.0, 1.0])
        assert abs(t) == 1.0 and t == -1.0

    def test_negative_square(self):
        assert sweep_t([0.0, 0.0, -1.0]) == -1.0

    def test_grid_includes_endpoints(self):
        assert GRID_POINTS == 10001
        assert sweep_t([0.0, 0.0, 0.0, 1.0]) == -1.0

    def test_cubic_against_critical_points(self, rng):
        for _ in range(50):
            c = rng.uniform(-1, 1, 4)
            crit = np.roots([3 * c[3], 2 * c[2], c[1]])
            cands = [-1.0, 1.0] + [r.real for r in crit if abs(r.imag) < 1e-12 and -1 <= r.real <= 1]
            g = lambda t: abs(np.polynomial.polynomial.polyval(t, c) - c[0])  # noqa: E731
            best = max(g(t) for t in cands)
            assert g(sweep_t(c)) == pytest.approx(best, abs=1e-6)


class TestOptimize:
    def test_single_z_is_exact(self, rng):
        H = SparsePauliOp(1, {"Z": 1.0})
        for _ in range(50):
            assert abs(optimize(H, rng=rng).value) == pytest.approx(1.0, abs=1e-12)

    def test_zz_margin(self):
        rng = np.random.default_rng(8)
        H = SparsePauliOp(2, {"ZZ": 1.0})
        margins = np.array([abs(optimize(H, ExpansionProfile(16, 2), rng).margin) for _ in range(2000)])
        bound = constant("expansion", k=2, c_e=16, d_e=2)
        assert margins.mean() - 3 * margins.std() / math.sqrt(2000) >= bound
        assert guaranteed_margin(H) == pytest.approx(bound)

    def test_shift_invariance(self, rng):
        H = random_op(3, 2, rng)
        shifted = H + SparsePauliOp(3, {"III": 2.5})
        a = [optimize(H, rng=np.random.default_rng(s)).margin for s in range(20)]
        b = [optimize(shifted, rng=np.random.default_rng(s)).margin for s in range(20)]
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_result_invariants(self, rng):
        H = random_op(4, 3, rng)
        for _ in range(30):
            res = optimize(H, rng=rng)
            ProductState(res.state.bloch)  # validates unit norms
            assert abs(res.t_star) <= 1
            assert res.value == pytest.approx(H.expectation_product(res.state.bloch))
            assert res.margin == pytest.approx(res.value - H.identity_coeff)
            assert (res.direction == "max") == (res.family_value - H.identity_coeff > 0)
            assert set(res.to_json()) == {"state", "value", "direction", "t_star", "margin"}

    def test_sampling_respects_mixture(self):
        rng = np.random.default_rng(9)
        b = np.array([[0.0, 0.0, 0.4]])
        draws = np.array([sample_from_bloch(b, rng)[0, 2] for _ in range(20000)])
        assert np.mean(draws) == pytest.approx(0.4, abs=0.02)
        assert set(np.round(draws, 12)) == {-1.0, 1.0}


class TestPolarization:
    def test_identity_small(self, rng):
        for k in (1, 2, 3):
            n = 2
            O = random_local_hamiltonian(n, k, rng, homogeneous=True, identity=False) if k <= n else None
            if O is None:
                continue
            reps = sample_haar_qubit(rng, k * n).reshape(k, n, 3)
            t = rng.uniform(-1, 1)
            pol = polarize(O)
            psi = ProductState(reps.reshape(-1, 3)).statevector()
            lhs = t**k * sum(c * pauli_expectation(PauliString(w), psi) for w, c in pol.items())
            assert lhs == pytest.approx(polarization_rhs(O, reps, t), abs=1e-10)

    def test_frobenius(self, rng):
        O = random_local_hamiltonian(3, 2, rng, homogeneous=True, identity=False)
        pol = polarize(O)
        lhs = np.trace(to_dense(O) @ to_dense(O)).real / 2**3
        rhs = math.factorial(2) * np.trace(to_dense(pol) @ to_dense(pol)).real / 2**6
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert pauli_p_norm(O, 2) ** 2 == pytest.approx(2 * pauli_p_norm(pol, 2) ** 2, rel=1e-12)

    def test_rejects_inhomogeneous(self):
        with pytest.raises(ValueError):
            polarize(SparsePauliOp(2, {"ZI": 1.0, "ZZ": 1.0}))


def test_random_hamiltonian_shape(rng):
    H = random_local_hamiltonian(5, 2, rng, homogeneous=True, identity=False)
    assert {PauliString(w).weight for w in H} == {2}
    assert all(-1 <= c <= 1 for _, c in H.items())
