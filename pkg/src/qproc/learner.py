"""Learning low-weight Pauli models of an unknown observable or process.

Three estimators share one model type, :class:`LearnedObservable`:

* filtered coefficient extraction from (state, label) pairs,
* the same extraction driven by process shadows (analytic beta = 3^-|P|),
* an l1-regularized least-squares fit (LASSO) with a k/a grid search.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .norms import constant
from .pauli import PauliString, SparsePauliOp, batch_expectation, enumerate_paulis, pauli_features, pauli_p_norm

MODES = ("observable-1", "observable-2", "process-1", "process-2")


@dataclass
class LearnerConfig:
    """Hyperparameters.  ``k`` and ``eps_tilde`` are derived from the
    accuracy targets unless given explicitly."""

    mode: str = "observable-1"
    eps: float = 0.1
    eps_prime: float = 0.1
    delta: float = 0.05
    k: int | None = None
    eps_tilde: float | None = None
    train_fraction: float = 0.8
    local: bool = False
    kappa: int = 1  # few-body size of the target observable (process modes)
    d: int = 1  # its degree (process modes)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown learner mode {self.mode!r}; expected one of {MODES}")
        if not (0 < self.eps < 1 and 0 < self.eps_prime < 1):
            raise ValueError("eps and eps_prime must lie in (0, 1)")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.eps_tilde is not None and self.eps_tilde <= 0:
            raise ValueError("eps_tilde must be positive")

    def weight_cutoff(self) -> int:
        if self.k is not None:
            return self.k
        target = 2.0 / self.eps if self.mode.endswith("2") else 1.0 / self.eps
        return math.ceil(math.log(target) / math.log(1.5))

    def filter_scale(self, n: int) -> float:
        """The filter scale eps_tilde for this mode."""
        if self.eps_tilde is not None:
            return self.eps_tilde
        k = self.weight_cutoff()
        if self.mode == "observable-1":
            return (self.eps_prime / 12) ** (k + 1) * (constant("general-k-local", k=k) / 3) ** (2 * k)
        if self.mode == "observable-2":
            return self.eps / (6 * n**k)
        ckd = constant("bounded-degree", k=self.kappa, d=self.d) / 3
        if self.mode == "process-1":
            ck = constant("general-k-local", k=k) / 3
            return (self.eps_prime / (6 * 2**k)) ** (k + 1) * ckd**2 * ck ** (2 * k)
        return self.eps / (9 * 2 ** (k + 1) * n**k) * ckd**2


@dataclass
class FilterStats:
    paulis: list[PauliString]
    x_hat: np.ndarray
    beta_hat: np.ndarray


@dataclass
class LearnedObservable:
    """h(rho) = sum_P alpha_P Tr(P rho), clipped to [-theta_hat, theta_hat]."""

    coefficients: SparsePauliOp
    theta_hat: float = math.inf
    config: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.coefficients.n

    @property
    def clipped(self) -> bool:
        return math.isfinite(self.theta_hat)

    def _clip(self, v):
        return np.clip(v, -self.theta_hat, self.theta_hat) if self.clipped else v

    def predict(self, state) -> float:
        return predict(self, state)

    def predict_batch(self, bloch: np.ndarray) -> np.ndarray:
        """Predictions for an (N, n, 3) batch of product states."""
        return self._clip(batch_expectation(self.coefficients, bloch))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "coefficients": self.coefficients.to_json_list(),
            "theta_hat": self.theta_hat if self.clipped else None,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LearnedObservable":
        n = d.get("n") or len(d["coefficients"][0]["p"])
        coeffs = SparsePauliOp.from_json_list(d["coefficients"], n)
        theta = d.get("theta_hat")
        return cls(coeffs, math.inf if theta is None else float(theta), d.get("config", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path) -> "LearnedObservable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def predict(model: LearnedObservable, state) -> float:
    """Evaluate a model on a product state, a Bloch array, or a provider.

    A provider is a callable ``P -> Tr(P rho)`` or a mapping from Pauli words
    to expectations; every stored word must be available.
    """
    if callable(state) or isinstance(state, dict):
        get = state if callable(state) else (lambda p: state[str(p)])
        total = 0.0
        for w, c in model.coefficients.items():
            try:
                val = get(PauliString(w))
            except KeyError as exc:
                raise KeyError(f"state provider has no expectation for {w}") from exc
            total += c * val
        return float(model._clip(total))
    bloch = np.asarray(getattr(state, "bloch", state), dtype=float)
    return float(model._clip(model.coefficients.expectation_product(bloch)))


# -- filtered coefficient extraction -------------------------------------------


def estimate_stats(bloch: np.ndarray, y: np.ndarray, paulis: list[PauliString], analytic_beta: bool = False) -> FilterStats:
    """x_P = mean(Tr(P rho) y) and beta_P = mean(Tr(P rho)^2) over the data.

    With ``analytic_beta`` the second moment is replaced by its value 3^-|P|
    under uniformly random stabilizer product inputs.
    """
    bloch = np.asarray(bloch, dtype=float)
    y = np.asarray(y, dtype=float)
    if bloch.shape[0] == 0:
        raise ValueError("cannot estimate statistics from empty data")
    X = pauli_features(paulis, bloch)
    x_hat = X.T @ y / len(y)
    if analytic_beta:
        beta = np.array([3.0 ** -p.weight for p in paulis])
    else:
        beta = np.mean(X * X, axis=0)
    return FilterStats(list(paulis), x_hat, beta)


def filter_coefficients(stats: FilterStats, eta: float | None, eps_tilde: float) -> np.ndarray:
    """Filtered estimates alpha_P.

    alpha = 0 when beta <= 2 eps_tilde; alpha = 0 when |x|/sqrt(beta) <=
    2 eta sqrt(eps_tilde); otherwise x/beta.  ``eta=None`` applies only the
    first (small-weight) rule.
    """
    if eps_tilde <= 0:
        raise ValueError("eps_tilde must be positive")
    x, b = stats.x_hat, stats.beta_hat
    keep = b > 2 * eps_tilde
    safe_b = np.where(keep, b, 1.0)
    if eta is not None:
        if eta <= 0:
            raise ValueError("eta must be positive")
        keep &= np.abs(x) / np.sqrt(safe_b) > 2 * eta * math.sqrt(eps_tilde)
    return np.where(keep, x / safe_b, 0.0)


def _as_op(n: int, paulis, alpha) -> SparsePauliOp:
    return SparsePauliOp(n, {p: a for p, a in zip(paulis, alpha) if a != 0.0})


def eta_grid(theta_hat: float, eps_tilde: float) -> np.ndarray:
    R = math.ceil(math.log2(math.ceil(1.0 / eps_tilde)))
    return theta_hat * 2.0 ** np.arange(R + 1)


def learn_observable(bloch: np.ndarray, y: np.ndarray, config: LearnerConfig | None = None) -> LearnedObservable:
    """Learn h(rho) ~ Tr(O rho) from product states and labels.

    ``observable-1`` splits train/validation, picks eta on the validation set
    and clips at the training-label maximum; ``observable-2`` uses all data,
    the small-weight filter only and no clipping.
    """
    config = config or LearnerConfig()
    bloch = np.asarray(bloch, dtype=float)
    y = np.asarray(y, dtype=float)
    N, n = bloch.shape[:2]
    if N < 10:
        raise ValueError("need at least 10 samples")
    if config.mode not in ("observable-1", "observable-2"):
        raise ValueError(f"learn_observable does not run mode {config.mode!r}")
    k = config.weight_cutoff()
    paulis = enumerate_paulis(n, k, local=config.local)
    eps_t = config.filter_scale(n)
    meta = {**asdict(config), "k": k, "eps_tilde": eps_t}
    if config.mode == "observable-2":
        stats = estimate_stats(bloch, y, paulis)
        alpha = filter_coefficients(stats, None, eps_t)
        return LearnedObservable(_as_op(n, paulis, alpha), math.inf, meta)

    n_tr = int(round(config.train_fraction * N))
    ytr, yval = y[:n_tr], y[n_tr:]
    theta = float(np.max(np.abs(ytr)))
    if theta == 0.0:
        return LearnedObservable(SparsePauliOp(n), 0.0, {**meta, "eta": None})
    stats = estimate_stats(bloch[:n_tr], ytr, paulis)
    Xval = pauli_features(paulis, bloch[n_tr:])
    best = (math.inf, None, None)
    for eta in eta_grid(theta, eps_t):
        alpha = filter_coefficients(stats, eta, eps_t)
        pred = np.clip(Xval @ alpha, -theta, theta)
        mse = float(np.mean((pred - yval) ** 2)) if len(yval) else 0.0
        if mse < best[0]:
            best = (mse, eta, alpha)
    _, eta, alpha = best
    return LearnedObservable(_as_op(n, paulis, alpha), theta, {**meta, "eta": float(eta), "val_mse": best[0]})


def learn_process(shadow, observable: SparsePauliOp, config: LearnerConfig | None = None, label: str | None = None) -> LearnedObservable:
    """Learn h(rho, O) ~ Tr(O E(rho)) from a process shadow.

    Labels come from shadow estimates of ``observable`` (snapshot mode) or
    from the stored noisy expectations ``label`` (expectation mode).  The
    filter uses eta = ||O||_Pauli,1 and beta = 3^-|P|; the model is unclipped.
    """
    config = config or LearnerConfig(mode="process-1")
    if config.mode not in ("process-1", "process-2"):
        raise ValueError(f"learn_process does not run mode {config.mode!r}")
    if observable.n != shadow.n:
        raise ValueError(f"observable acts on {observable.n} qubits, shadow on {shadow.n}")
    if len(shadow) == 0:
        raise ValueError("empty shadow")
    y = shadow.labels_for(label if shadow.mode == "expectation" else observable)
    k = config.weight_cutoff()
    n = shadow.n
    paulis = enumerate_paulis(n, k, local=config.local)
    eps_t = config.filter_scale(n)
    eta = pauli_p_norm(observable, 1)
    meta = {**asdict(config), "k": k, "eps_tilde": eps_t, "eta": eta}
    if eta == 0:
        return LearnedObservable(SparsePauliOp(n), math.inf, meta)
    stats = estimate_stats(shadow.input_bloch(), y, paulis, analytic_beta=True)
    alpha = filter_coefficients(stats, eta, eps_t)
    return LearnedObservable(_as_op(n, paulis, alpha), math.inf, meta)


# -- LASSO ----------------------------------------------------------------------

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 10_000


@njit(cache=True)
def _cd_pass(G, grad, w, a, only_active):
    biggest = 0.0
    for j in range(w.shape[0]):
        if only_active and w[j] == 0.0:
            continue
        d = G[j, j]
        if d <= 0.0:
            continue
        wj = w[j]
        rho = grad[j] + d * wj
        if rho > a:
            new = (rho - a) / d
        elif rho < -a:
            new = (rho + a) / d
        else:
            new = 0.0
        delta = new - wj
        if delta != 0.0:
            w[j] = new
            for i in range(w.shape[0]):
                grad[i] -= G[j, i] * delta  # G is symmetric; rows are contiguous
            if abs(delta) > biggest:
                biggest = abs(delta)
    return biggest


@njit(cache=True)
def _cd_kernel(G, q, w, a, tol, max_sweeps):
    """Cyclic coordinate descent on 1/2 w'Gw - q'w + a|w|_1 (in place).

    Keeps grad = q - G w current with column updates.  After each full sweep
    the nonzero coordinates are iterated alone until they settle; the run
    stops once a full sweep moves no coordinate by more than ``tol``.
    """
    grad = q - G @ w
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if _cd_pass(G, grad, w, a, False) < tol:
            break
        while sweeps < max_sweeps:
            sweeps += 1
            if _cd_pass(G, grad, w, a, True) < tol:
                break
    return sweeps


def lasso_objective(G: np.ndarray, q: np.ndarray, yy: float, w: np.ndarray, a: float) -> float:
    """(1/2N)|y - Xw|^2 + a|w|_1 written through G = X'X/N, q = X'y/N, yy = y'y/N."""
    return 0.5 * (yy - 2 * q @ w + w @ G @ w) + a * np.abs(w).sum()


def lasso_solve(G, q, a, w0=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, history: bool = False, yy: float = 0.0):
    """Minimize the LASSO objective given Gram statistics.

    Returns (w, sweeps) or, with ``history``, (w, objective-per-sweep).
    """
    if a < 0:
        raise ValueError("regularization strength must be non-negative")
    G = np.ascontiguousarray(G, dtype=float)
    q = np.asarray(q, dtype=float)
    w = np.zeros_like(q) if w0 is None else np.array(w0, dtype=float)
    if not history:
        sweeps = _cd_kernel(G, q, w, float(a), float(tol), int(max_sweeps))
        return w, sweeps
    objs = [lasso_objective(G, q, yy, w, a)]
    for _ in range(max_sweeps):
        before = w.copy()
        _cd_kernel(G, q, w, float(a), float(tol), 1)
        objs.append(lasso_objective(G, q, yy, w, a))
        if np.max(np.abs(w - before)) < tol:
            break
    return w, np.array(objs)


def lasso_fit(bloch: np.ndarray, y: np.ndarray, k: int, a: float, local: bool = True) -> LearnedObservable:
    """LASSO over Pauli features of weight <= k (chain-local when ``local``)."""
    bloch = np.asarray(bloch, dtype=float)
    y = np.asarray(y, dtype=float)
    n = bloch.shape[1]
    paulis = enumerate_paulis(n, k, local=local)
    X = pauli_features(paulis, bloch)
    N = len(y)
    w, sweeps = lasso_solve(X.T @ X / N, X.T @ y / N, a)
    return LearnedObservable(_as_op(n, paulis, w), math.inf, {"method": "lasso", "k": k, "a": a, "local": local, "sweeps": sweeps})


K_GRID = (1, 2, 3, 4)
A_GRID = tuple(2.0 ** -e for e in range(15, 2, -1))


@dataclass
class CVResult:
    k: int
    a: float
    model: LearnedObservable
    scores: dict  # (k, a) -> mean fold RMSE


def _fold_ids(N: int, folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ids = np.arange(N) % folds
    rng.shuffle(ids)
    return ids


def cross_validate(
    bloch: np.ndarray,
    y: np.ndarray,
    k_grid=K_GRID,
    a_grid=A_GRID,
    folds: int = 2,
    seed: int = 0,
    local: bool = True,
) -> CVResult | list[CVResult]:
    """Grid search over (k, a) by mean fold RMSE, then refit on all data.

    Ties go to the smaller k, then the larger a.  ``y`` may be an (N, m)
    array of targets sharing the same inputs; one result per column is
    returned in that case.  Features for smaller k are sub-blocks of the
    largest-k design, so each fold needs a single Gram matrix.
    """
    bloch = np.asarray(bloch, dtype=float)
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = y[:, None] if single else y
    N, n = bloch.shape[:2]
    if folds < 2:
        raise ValueError("need at least two folds")
    if N < folds:
        raise ValueError("fewer samples than folds")
    k_grid = sorted(set(int(k) for k in k_grid))
    a_desc = sorted(set(float(a) for a in a_grid), reverse=True)
    kmax = k_grid[-1]
    paulis = enumerate_paulis(n, kmax, local=local)
    weights = np.array([p.weight for p in paulis])
    cols = {k: np.nonzero(weights <= k)[0] for k in k_grid}
    X = pauli_features(paulis, bloch)
    ids = _fold_ids(N, folds, seed)
    m = Y.shape[1]
    sq_err = np.zeros((len(k_grid), len(a_desc), m, folds))
    for f in range(folds):
        tr, va = ids != f, ids == f
        Xtr, Xva = X[tr], X[va]
        G = Xtr.T @ Xtr / tr.sum()
        Q = Xtr.T @ Y[tr] / tr.sum()
        for ki, k in enumerate(k_grid):
            c = cols[k]
            Gk = np.ascontiguousarray(G[np.ix_(c, c)])
            Xv = Xva[:, c]
            for t in range(m):
                w = np.zeros(len(c))
                for ai, a in enumerate(a_desc):
                    w, _ = lasso_solve(Gk, Q[c, t], a, w0=w)
                    resid = Xv @ w - Y[va, t]
                    sq_err[ki, ai, t, f] = np.sqrt(np.mean(resid**2))
    rmse = sq_err.mean(axis=3)
    Gfull = X.T @ X / N
    Qfull = X.T @ Y / N
    results = []
    for t in range(m):
        best = None
        for ki, k in enumerate(k_grid):
            for ai, a in enumerate(a_desc):  # a descending: first hit of a tie is the larger a
                s = rmse[ki, ai, t]
                if best is None or s < best[0]:
                    best = (s, ki, ai)
        _, ki, ai = best
        k, a = k_grid[ki], a_desc[ai]
        c = cols[k]
        w, sweeps = lasso_solve(np.ascontiguousarray(Gfull[np.ix_(c, c)]), Qfull[c, t], a)
        model = LearnedObservable(
            _as_op(n, [paulis[j] for j in c], w),
            math.inf,
            {"method": "lasso-cv", "k": k, "a": a, "folds": folds, "seed": seed, "local": local, "cv_rmse": float(rmse[ki, ai, t])},
        )
        scores = {(kk, aa): float(rmse[i, j, t]) for i, kk in enumerate(k_grid) for j, aa in enumerate(a_desc)}
        results.append(CVResult(k, a, model, scores))
    return results[0] if single else results
