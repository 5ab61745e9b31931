"""Randomized Pauli measurements, classical shadows and their estimators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pauli import PauliString, SparsePauliOp, pauli_features
from .states import STAB_BLOCH, codes_to_labels, label_codes, outcome_code

#: rows per RNG substream; fixed so that datasets do not depend on batching
CHUNK = 1000


class UnsupportedModeError(RuntimeError):
    """The backend cannot provide what the requested dataset mode needs."""


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent generator for rows ``chunk*CHUNK ...`` of a dataset."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


@dataclass
class StateShadow:
    """Snapshots of a state as an (N, n) array of stab_1 label codes."""

    snapshots: np.ndarray

    def __post_init__(self):
        self.snapshots = np.atleast_2d(label_codes(self.snapshots))

    @property
    def n(self) -> int:
        return self.snapshots.shape[1]

    def __len__(self) -> int:
        return self.snapshots.shape[0]


@dataclass
class ProcessShadow:
    """Dataset of input product states paired with outputs.

    In snapshot mode ``outputs`` holds measured stab_1 codes; in expectation
    mode ``y`` maps observable ids to noisy label vectors.
    """

    n: int
    mode: str
    inputs: np.ndarray
    outputs: np.ndarray | None = None
    y: dict[str, np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("snapshot", "expectation"):
            raise ValueError(f"unknown dataset mode {self.mode!r}")
        self.inputs = label_codes(self.inputs).reshape(-1, self.n)
        if self.mode == "snapshot":
            out = np.zeros((0, self.n), np.int8) if self.outputs is None else self.outputs
            self.outputs = label_codes(out).reshape(-1, self.n)
            if self.outputs.shape != self.inputs.shape:
                raise ValueError("inputs and outputs differ in shape")
        else:
            self.y = {k: np.asarray(v, dtype=float) for k, v in (self.y or {}).items()}

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def input_bloch(self) -> np.ndarray:
        return STAB_BLOCH[self.inputs]

    def output_shadow(self) -> StateShadow:
        if self.mode != "snapshot":
            raise UnsupportedModeError("expectation-mode data has no measurement snapshots")
        return StateShadow(self.outputs)

    def labels_for(self, observable: SparsePauliOp | str) -> np.ndarray:
        """Per-row labels y_l(O): shadow estimates or stored noisy expectations."""
        if self.mode == "expectation":
            if not isinstance(observable, str):
                raise TypeError("expectation-mode data is addressed by observable id")
            return self.y[observable]
        if isinstance(observable, str):
            raise TypeError("snapshot-mode data needs an operator")
        if observable.n != self.n:
            raise ValueError("observable and dataset act on different qubit counts")
        return shadow_values(self.outputs, observable)

    def subset(self, idx) -> "ProcessShadow":
        idx = np.asarray(idx)
        if self.mode == "snapshot":
            return ProcessShadow(self.n, self.mode, self.inputs[idx], self.outputs[idx], meta=self.meta)
        return ProcessShadow(self.n, self.mode, self.inputs[idx], y={k: v[idx] for k, v in self.y.items()}, meta=self.meta)

    # -- JSON lines ---------------------------------------------------------
    def header(self) -> dict:
        return {"n": self.n, "mode": self.mode, **self.meta}

    def iter_lines(self):
        yield json.dumps(self.header(), sort_keys=True)
        for row in range(len(self)):
            rec = {"in": codes_to_labels(self.inputs[row])}
            if self.mode == "snapshot":
                rec["out"] = codes_to_labels(self.outputs[row])
            else:
                rec["y"] = {k: float(v[row]) for k, v in self.y.items()}
            yield json.dumps(rec)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.iter_lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "ProcessShadow":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ValueError(f"{path}: empty dataset file")
        head = json.loads(lines[0])
        n, mode = int(head.pop("n")), head.pop("mode")
        rows = [json.loads(s) for s in lines[1:] if s.strip()]
        inputs = np.array([label_codes(r["in"]) for r in rows], dtype=np.int8).reshape(-1, n)
        if mode == "snapshot":
            outputs = np.array([label_codes(r["out"]) for r in rows], dtype=np.int8).reshape(-1, n)
            return cls(n, mode, inputs, outputs, meta=head)
        keys = list(rows[0]["y"]) if rows else []
        y = {k: np.array([r["y"][k] for r in rows]) for k in keys}
        return cls(n, mode, inputs, y=y, meta=head)


def random_bases(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    shape = (n,) if size is None else (size, n)
    return rng.integers(0, 3, size=shape).astype(np.int8)


def randomized_pauli_measure(backend, state, rng: np.random.Generator) -> np.ndarray:
    """Measure every qubit of E(state) in a uniformly random Pauli basis.

    Returns the stab_1 outcome codes (one per qubit).
    """
    if not getattr(backend, "supports_sampling", False):
        raise UnsupportedModeError(f"{type(backend).__name__} cannot sample measurement outcomes")
    bloch = np.asarray(getattr(state, "bloch", state), dtype=float)
    bases = random_bases(bloch.shape[0], rng)
    return backend.sample(bloch, bases, rng)


def _binomial_mean(rng: np.random.Generator, exact: np.ndarray, shots: int) -> np.ndarray:
    """Mean of ``shots`` +-1 outcomes with expectation ``exact``."""
    p = np.clip((1.0 + exact) / 2.0, 0.0, 1.0)
    return 2.0 * rng.binomial(shots, p) / shots - 1.0


def collect_process_shadow(
    backend,
    N: int,
    mode: str = "snapshot",
    observables: dict[str, SparsePauliOp] | None = None,
    shots: int = 500,
    seed: int = 0,
) -> ProcessShadow:
    """Generate N experiments with uniformly random stab_1 product inputs.

    Rows are produced in chunks of :data:`CHUNK`, each driven by its own
    substream of ``seed``, so the dataset depends only on (backend, N, mode,
    observables, shots, seed).
    """
    n = backend.n
    meta = {"seed": int(seed), "channel": backend.describe()}
    if mode == "snapshot":
        if not getattr(backend, "supports_sampling", False):
            raise UnsupportedModeError(f"{type(backend).__name__} only supports expectation mode")
    elif mode == "expectation":
        if not observables:
            raise ValueError("expectation mode needs at least one observable")
        if shots < 1:
            raise ValueError("shots must be positive")
        meta["shots"] = int(shots)
    else:
        raise ValueError(f"unknown dataset mode {mode!r}")

    inputs, outputs = [], []
    ys: dict[str, list[np.ndarray]] = {k: [] for k in (observables or {})}
    for chunk, start in enumerate(range(0, N, CHUNK)):
        rng = chunk_rng(seed, chunk)
        m = min(CHUNK, N - start)
        codes = rng.integers(0, 6, size=(m, n)).astype(np.int8)
        inputs.append(codes)
        bloch = STAB_BLOCH[codes]
        if mode == "snapshot":
            bases = random_bases(n, rng, m)
            if hasattr(backend, "sample_batch"):
                outputs.append(backend.sample_batch(bloch, bases, rng))
            else:
                outputs.append(np.array([backend.sample(b, s, rng) for b, s in zip(bloch, bases)], dtype=np.int8))
        else:
            exact = backend.expectations(bloch, observables)
            for name, op in observables.items():
                total = np.zeros(m)
                for w, c in sorted(op.items()):
                    if w == "I" * n:
                        total += c
                    else:
                        total += c * _binomial_mean(rng, exact[name][w], shots)
                ys[name].append(total)
    inputs = np.concatenate(inputs) if inputs else np.zeros((0, n), np.int8)
    if mode == "snapshot":
        outputs = np.concatenate(outputs) if outputs else np.zeros((0, n), np.int8)
        return ProcessShadow(n, mode, inputs, outputs, meta=meta)
    y = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in ys.items()}
    return ProcessShadow(n, mode, inputs, y=y, meta=meta)


def shadow_values(snapshots: np.ndarray, op: SparsePauliOp) -> np.ndarray:
    """Single-snapshot estimates sum_Q a_Q prod_{i in dom Q} 3 <s_i|Q_i|s_i>.

    Off-support qubits contribute Tr(3|s><s| - I) = 1, so only the support of
    each Q enters the product.
    """
    codes = np.atleast_2d(label_codes(snapshots))
    if codes.shape[1] != op.n:
        raise ValueError("snapshot width does not match observable")
    paulis = op.paulis()
    if not paulis:
        return np.zeros(codes.shape[0])
    coeffs = np.array([op[p] for p in paulis])
    return pauli_features(paulis, 3.0 * STAB_BLOCH[codes]) @ coeffs


def shadow_estimate(shadow, op: SparsePauliOp) -> float:
    """Mean of the single-snapshot estimators over a shadow."""
    snaps = shadow.snapshots if isinstance(shadow, StateShadow) else shadow
    if isinstance(shadow, ProcessShadow):
        snaps = shadow.output_shadow().snapshots
    snaps = np.atleast_2d(label_codes(snaps))
    if snaps.shape[0] == 0:
        raise ValueError("cannot estimate from an empty shadow")
    return float(np.mean(shadow_values(snaps, op)))


def shadow_norm_pauli(p: PauliString | str) -> float:
    """Shadow norm 3^{|P|/2} of a Pauli observable."""
    p = PauliString(str(p))
    return 3.0 ** (p.weight / 2)


def single_qubit_outcome_distribution(bloch) -> list[tuple[int, float]]:
    """All six (outcome code, probability) pairs of a random-basis measurement
    on a single-qubit state with the given Bloch vector."""
    bloch = np.asarray(bloch, dtype=float)
    out = []
    for basis in range(3):
        comp = bloch[basis]
        for bit in (0, 1):
            sign = 1 - 2 * bit
            out.append((outcome_code(basis, bit), (1 + sign * comp) / 6.0))
    return out
