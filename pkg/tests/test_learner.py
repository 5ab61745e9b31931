import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import Lasso

from conftest import all_stab_products, random_op
from qproc.dense import DenseBackend, DenseChannel, partial_trace, pauli_expectation
from qproc.learner import (
    FilterStats,
    LearnedObservable,
    LearnerConfig,
    cross_validate,
    estimate_stats,
    eta_grid,
    filter_coefficients,
    lasso_fit,
    lasso_objective,
    lasso_solve,
    learn_observable,
    learn_process,
    predict,
)
from qproc.pauli import PauliString, SparsePauliOp, batch_expectation, enumerate_paulis, pauli_features, truncate
from qproc.shadows import collect_process_shadow
from qproc.states import STAB_BLOCH, ProductState, sample_stab_codes


def d0_inputs(n, N, seed):
    return STAB_BLOCH[sample_stab_codes(n, np.random.default_rng(seed), size=N)]


def stats(beta, x):
    return FilterStats([PauliString("Z")], np.array([x]), np.array([beta]))


class TestConfig:
    def test_cutoffs(self):
        assert LearnerConfig(eps=0.1).weight_cutoff() == math.ceil(math.log(10) / math.log(1.5))
        assert LearnerConfig(mode="observable-2", eps=0.1).weight_cutoff() == math.ceil(math.log(20) / math.log(1.5))

    def test_filter_scales_positive(self):
        for mode in ("observable-1", "observable-2", "process-1", "process-2"):
            assert LearnerConfig(mode=mode, k=2).filter_scale(5) > 0

    def test_observable_2_scale(self):
        assert LearnerConfig(mode="observable-2", eps=0.2, k=3).filter_scale(4) == pytest.approx(0.2 / (6 * 4**3))

    def test_validation(self):
        with pytest.raises(ValueError):
            LearnerConfig(eps=1.5)
        with pytest.raises(ValueError):
            LearnerConfig(mode="lasso")
        with pytest.raises(ValueError):
            LearnerConfig(k=0)

    def test_eta_grid(self):
        g = eta_grid(0.5, 0.01)
        assert g[0] == 0.5 and len(g) == math.ceil(math.log2(100)) + 1
        np.testing.assert_allclose(g[1:] / g[:-1], 2.0)


class TestStats:
    def test_extract_z(self):
        bloch = d0_inputs(3, 20000, 1)
        y = bloch[:, 0, 2]
        st_ = estimate_stats(bloch, y, [PauliString("ZII"), PauliString("XII")])
        assert st_.x_hat[0] == pytest.approx(1 / 3, abs=0.02)
        assert st_.beta_hat[0] == pytest.approx(1 / 3, abs=0.02)
        assert abs(st_.x_hat[1]) < 0.02

    def test_zero_labels(self):
        bloch = d0_inputs(2, 50, 2)
        st_ = estimate_stats(bloch, np.zeros(50), enumerate_paulis(2, 2))
        assert np.all(st_.x_hat == 0)

    def test_exact_enumeration(self, rng):
        O = random_op(2, 2, rng, density=1.0)
        bloch = all_stab_products(2)
        paulis = enumerate_paulis(2, 2)
        st_ = estimate_stats(bloch, batch_expectation(O, bloch), paulis)
        for p, x, b in zip(paulis, st_.x_hat, st_.beta_hat):
            assert x == pytest.approx(3.0 ** -p.weight * O[p], abs=1e-14)
            assert b == pytest.approx(3.0 ** -p.weight, abs=1e-14)

    def test_analytic_beta(self):
        st_ = estimate_stats(d0_inputs(3, 10, 3), np.ones(10), enumerate_paulis(3, 2), analytic_beta=True)
        np.testing.assert_array_equal(st_.beta_hat, [3.0 ** -p.weight for p in st_.paulis])

    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_stats(np.zeros((0, 2, 3)), np.zeros(0), enumerate_paulis(2, 1))


class TestFilter:
    def test_small_weight_branch(self):
        assert filter_coefficients(stats(1 / 9, 0.5), 1.0, 0.1)[0] == 0.0

    def test_small_influence_branch(self):
        assert filter_coefficients(stats(1 / 3, 0.05), 1.0, 0.01)[0] == 0.0

    def test_kept_branch(self):
        assert filter_coefficients(stats(1 / 3, 0.3), 1.0, 0.01)[0] == pytest.approx(0.9)

    def test_eta_none_skips_second_rule(self):
        assert filter_coefficients(stats(1 / 3, 0.05), None, 0.01)[0] == pytest.approx(0.15)

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            filter_coefficients(stats(0.5, 0.1), 1.0, 0.0)

    @settings(max_examples=300)
    @given(
        st.floats(-1, 1),
        st.floats(0, 1),
        st.floats(-1, 1),
        st.floats(-1, 1),
        st.sampled_from([1e-3, 1e-2, 0.05, 0.2]),
        st.sampled_from([1.0, 3.0]),
    )
    def test_small_weight_lemma(self, a, beta, ux, ub, eps, eta):
        alpha = eta * a
        x = alpha * beta
        x_hat = x + 0.999 * ux * eta * eps
        b_hat = beta + 0.999 * ub * eps
        got = filter_coefficients(FilterStats([PauliString("Z")], np.array([x_hat]), np.array([b_hat])), None, eps)[0]
        assert beta * (got - alpha) ** 2 <= 3 * eta**2 * eps * (1 + 1e-9)


class TestLearnObservable:
    def test_planted_z(self):
        n, N = 3, 2000
        bloch = d0_inputs(n, N, 4)
        y = bloch[:, 0, 2]
        model = learn_observable(bloch, y, LearnerConfig(eps=0.1))
        coeffs = model.coefficients
        assert 0.9 <= coeffs["ZII"] <= 1.1
        assert all(abs(c) <= 0.1 for w, c in coeffs.items() if w != "ZII")
        assert model.theta_hat == 1.0

    def test_identity_observable(self):
        bloch = d0_inputs(3, 2000, 5)
        model = learn_observable(bloch, np.ones(2000), LearnerConfig(eps=0.3))
        pred = model.predict_batch(d0_inputs(3, 1000, 6))
        assert np.mean((pred - 1) ** 2) < 1e-12

    def test_zero_labels(self):
        model = learn_observable(d0_inputs(2, 40, 7), np.zeros(40))
        assert model.theta_hat == 0.0 and len(model.coefficients) == 0

    def test_truncation_error_bound(self, rng):
        O = SparsePauliOp(3, {"ZII": 0.5, "XXI": 0.3, "YZX": 0.6})
        bloch = all_stab_products(3)
        y = batch_expectation(O, bloch)
        model = learn_observable(bloch, y, LearnerConfig(mode="observable-2", k=2, eps_tilde=1e-6))
        assert model.coefficients.approx_equal(truncate(O, 2), 1e-12)
        mse = np.mean((model.predict_batch(bloch) - y) ** 2)
        from qproc.norms import spectral_norm

        assert mse <= (2 / 3) ** 2 * spectral_norm(O) ** 2
        assert mse == pytest.approx(0.6**2 / 27, abs=1e-12)

    def test_needs_ten_samples(self):
        with pytest.raises(ValueError):
            learn_observable(d0_inputs(2, 5, 1), np.zeros(5))

    def test_clipping_never_hurts(self, rng):
        for _ in range(20):
            theta = rng.uniform(0.2, 1)
            y = rng.uniform(-theta, theta, 200)
            raw = y + rng.normal(0, 0.5, 200)
            model = LearnedObservable(SparsePauliOp(1), theta)
            assert np.all((model._clip(raw) - y) ** 2 <= (raw - y) ** 2 + 1e-15)


class TestLearnProcess:
    def test_identity_channel(self):
        backend = DenseBackend(DenseChannel.identity(3))
        sh = collect_process_shadow(backend, 6000, "snapshot", seed=8)
        O = SparsePauliOp.single(3, {0: "Z"})
        model = learn_process(sh, O, LearnerConfig(mode="process-1", k=1, eps_tilde=0.01))
        assert model.coefficients["ZII"] == pytest.approx(1.0, abs=0.1)
        assert abs(model.predict(ProductState.from_labels(["X+", "Z+", "Z+"]))) < 0.15

    def test_bit_flip_channel(self):
        X = np.array([[0, 1], [1, 0]])
        backend = DenseBackend(DenseChannel.from_unitary(np.kron(X, np.eye(4))))
        sh = collect_process_shadow(backend, 6000, "snapshot", seed=9)
        model = learn_process(sh, SparsePauliOp.single(3, {0: "Z"}), LearnerConfig(mode="process-2", k=1, eps_tilde=0.01))
        assert model.coefficients["ZII"] == pytest.approx(-1.0, abs=0.1)
        assert sum(abs(c) for w, c in model.coefficients.items() if w != "ZII") < 0.2

    def test_huge_scale_gives_zero_model(self):
        sh = collect_process_shadow(DenseBackend(DenseChannel.identity(2)), 200, "snapshot", seed=1)
        model = learn_process(sh, SparsePauliOp.single(2, {0: "Z"}), LearnerConfig(mode="process-1", k=2, eps_tilde=10.0))
        assert len(model.coefficients) == 0
        assert model.predict(ProductState.from_labels(["Z+", "Z+"])) == 0.0

    def test_expectation_mode_labels(self):
        obs = {"Z_1": SparsePauliOp.single(2, {0: "Z"})}
        sh = collect_process_shadow(DenseBackend(DenseChannel.identity(2)), 3000, "expectation", obs, seed=2)
        model = learn_process(sh, obs["Z_1"], LearnerConfig(mode="process-1", k=1, eps_tilde=0.01), label="Z_1")
        assert model.coefficients["ZI"] == pytest.approx(1.0, abs=0.05)

    def test_qubit_mismatch(self):
        sh = collect_process_shadow(DenseBackend(DenseChannel.identity(2)), 10, "snapshot", seed=1)
        with pytest.raises(ValueError):
            learn_process(sh, SparsePauliOp.single(3, {0: "Z"}))


class TestPredict:
    def test_zero_model(self):
        assert predict(LearnedObservable(SparsePauliOp(2)), ProductState.from_labels(["Z+", "X-"])) == 0.0

    def test_single_z(self):
        model = LearnedObservable(SparsePauliOp.single(3, {0: "Z"}))
        assert model.predict(ProductState.from_labels(["Z+"] * 3)) == 1.0

    def test_entangled_via_reduced_states(self, rng):
        n = 9
        psi = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
        psi /= np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        model = LearnedObservable(random_op(n, 2, rng, density=0.05))

        def from_rdm(p):
            sup = list(p.support)
            if not sup:
                return 1.0
            red = partial_trace(rho, sup)
            return pauli_expectation(PauliString("".join(p.letters[i] for i in sup)), red)

        exact = lambda p: pauli_expectation(p, psi)  # noqa: E731
        assert predict(model, from_rdm) == pytest.approx(predict(model, exact), abs=1e-12)

    def test_missing_provider_entry(self):
        model = LearnedObservable(SparsePauliOp(2, {"ZI": 1.0, "XX": 0.5}))
        with pytest.raises(KeyError):
            predict(model, {"ZI": 1.0})

    def test_clipped_prediction(self):
        model = LearnedObservable(SparsePauliOp(1, {"Z": 2.0}), 0.5)
        assert model.predict(ProductState.from_labels(["Z+"])) == 0.5

    def test_json_round_trip(self, tmp_path):
        for theta in (math.inf, 0.75):
            model = LearnedObservable(SparsePauliOp(2, {"ZI": 0.25, "XY": -1.5}), theta, {"k": 2})
            model.save(tmp_path / "m.json")
            back = LearnedObservable.load(tmp_path / "m.json")
            assert back.coefficients == model.coefficients and back.theta_hat == theta and back.config == {"k": 2}


class TestLasso:
    def test_unregularized_recovery(self, rng):
        X = rng.standard_normal((300, 20))
        w_true = np.zeros(20)
        w_true[[2, 7, 11]] = [1.0, -0.5, 0.25]
        y = X @ w_true
        w, _ = lasso_solve(X.T @ X / 300, X.T @ y / 300, 0.0, tol=1e-12)
        np.testing.assert_allclose(w, w_true, atol=1e-6)

    def test_large_penalty_is_zero(self, rng):
        X = rng.standard_normal((100, 10))
        y = rng.standard_normal(100)
        w, _ = lasso_solve(X.T @ X / 100, X.T @ y / 100, 1e6)
        assert np.all(w == 0)

    def test_objective_monotone(self, rng):
        X = rng.choice([-1.0, 0.0, 1.0], size=(200, 40))
        y = X[:, :3] @ [1.0, -1.0, 0.5] + 0.1 * rng.standard_normal(200)
        G, q, yy = X.T @ X / 200, X.T @ y / 200, y @ y / 200
        _, objs = lasso_solve(G, q, 0.01, history=True, yy=yy)
        assert np.all(np.diff(objs) <= 1e-13)
        assert objs[-1] == pytest.approx(0.5 * np.mean((y - X @ _) ** 2) + 0.01 * np.abs(_).sum())

    @pytest.mark.parametrize("a", [1e-4, 1e-3, 2**-5])
    def test_matches_sklearn(self, a, rng):
        n = 6
        bloch = d0_inputs(n, 2000, 11)
        paulis = enumerate_paulis(n, 2, local=True)
        X = pauli_features(paulis, bloch)[:, 1:]
        y = bloch[:, 2, 2] * 0.7 - 0.4 * bloch[:, 1, 0] * bloch[:, 2, 0] + 0.05 * rng.standard_normal(2000)
        N = len(y)
        w, _ = lasso_solve(X.T @ X / N, X.T @ y / N, a, tol=1e-10)
        ref = Lasso(alpha=a, fit_intercept=False, tol=1e-12, max_iter=100_000).fit(X, y).coef_
        G, q, yy = X.T @ X / N, X.T @ y / N, y @ y / N
        assert lasso_objective(G, q, yy, w, a) <= lasso_objective(G, q, yy, ref, a) + 1e-10
        np.testing.assert_allclose(w, ref, atol=1e-5)

    def test_lasso_fit_model(self):
        bloch = d0_inputs(5, 1000, 12)
        y = 0.8 * bloch[:, 1, 2] * bloch[:, 2, 2]
        model = lasso_fit(bloch, y, 2, 1e-4)
        assert model.coefficients["IZZII"] == pytest.approx(0.8, abs=0.01)
        assert model.config["k"] == 2

    def test_negative_penalty(self):
        with pytest.raises(ValueError):
            lasso_solve(np.eye(2), np.ones(2), -1.0)


class TestCrossValidate:
    def test_planted_two_local(self):
        n = 6
        bloch = d0_inputs(n, 3000, 13)
        truth = SparsePauliOp(n, {"IZZIII": 0.6, "IIIXYI": -0.4, "ZIIIII": 0.3})
        y = batch_expectation(truth, bloch)
        res = cross_validate(bloch, y, k_grid=(1, 2, 3), seed=0)
        assert res.k >= 2
        test = d0_inputs(n, 500, 14)
        rmse = np.sqrt(np.mean((res.model.predict_batch(test) - batch_expectation(truth, test)) ** 2))
        assert rmse < 0.02

    def test_pure_noise(self):
        bloch = d0_inputs(5, 1000, 15)
        y = 0.1 * np.random.default_rng(16).standard_normal(1000)
        res = cross_validate(bloch, y, k_grid=(1, 2), seed=1)
        coeffs = np.array(list(res.model.coefficients.terms.values()) or [0.0])
        assert np.abs(coeffs).max() < 0.05

    def test_deterministic(self):
        bloch = d0_inputs(4, 400, 17)
        y = bloch[:, 0, 2] + 0.2 * np.random.default_rng(18).standard_normal(400)
        a = cross_validate(bloch, y, k_grid=(1, 2), seed=3)
        b = cross_validate(bloch, y, k_grid=(1, 2), seed=3)
        assert (a.k, a.a) == (b.k, b.a) and a.model.coefficients == b.model.coefficients

    def test_ties_prefer_small_k_large_a(self):
        bloch = d0_inputs(3, 100, 19)
        res = cross_validate(bloch, np.zeros(100), k_grid=(1, 2), a_grid=(0.1, 0.01), seed=0)
        assert (res.k, res.a) == (1, 0.1)

    def test_multi_target_matches_single(self):
        bloch = d0_inputs(4, 600, 20)
        Y = np.stack([bloch[:, 0, 2], bloch[:, 1, 0] * bloch[:, 2, 0]], axis=1)
        multi = cross_validate(bloch, Y, k_grid=(1, 2), seed=2)
        for j in range(2):
            single = cross_validate(bloch, Y[:, j], k_grid=(1, 2), seed=2)
            assert (single.k, single.a) == (multi[j].k, multi[j].a)
            assert single.model.coefficients.approx_equal(multi[j].model.coefficients, 1e-12)

    def test_argument_checks(self):
        bloch = d0_inputs(2, 3, 1)
        with pytest.raises(ValueError):
            cross_validate(bloch, np.zeros(3), folds=1)
        with pytest.raises(ValueError):
            cross_validate(bloch, np.zeros(3), folds=4)
