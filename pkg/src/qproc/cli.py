"""Command-line harness: ``python -m qproc <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("qproc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


class NumericFailure(Exception):
    pass


# -- helpers ------------------------------------------------------------------


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _overlay(cfg: dict, pairs: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    return cfg


def _config(args) -> dict:
    cfg = _load_json(args.config) if getattr(args, "config", None) else {}
    cfg = _overlay(cfg, getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _seed(cfg: dict) -> int:
    if "seed" not in cfg:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config)")
    seed = cfg["seed"]
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def config_digest(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:16]


def provenance_record(cfg: dict) -> dict:
    return {"version": __version__, "config_sha256": config_digest(cfg), "seed": cfg.get("seed")}


def provenance(cfg: dict) -> str:
    return f"# qproc {__version__} config_sha256={config_digest(cfg)} seed={cfg.get('seed')}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(rows: list[dict], out, cfg: dict, columns: list[str] | None = None) -> None:
    """CSV with a provenance comment, '.' decimals and 17 significant digits."""
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    buf.write(provenance(cfg) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    _emit(buf.getvalue(), out)


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _set_threads(n):
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# -- channel / observable specs ---------------------------------------------------


def build_backend(spec: dict):
    """Backend from a channel description.

    {"type": "identity", "n": 4}
    {"type": "hamiltonian", "terms": [{"p": "XX", "c": 1.0}], "t": 1.0}
    {"type": "chain", "model": {"kind": "xy", "n": 50, "field": {...}}, "t": 1e6}
    {"type": "unitary-file", "path": "u.npy"}
    """
    from .dense import DenseBackend, DenseChannel
    from .fermion import ChainModel, FermionBackend
    from .pauli import SparsePauliOp

    kind = spec.get("type")
    try:
        if kind == "identity":
            return DenseBackend(DenseChannel.identity(int(spec["n"])))
        if kind == "hamiltonian":
            return DenseBackend(DenseChannel.from_hamiltonian(SparsePauliOp.from_json_list(spec["terms"]), float(spec["t"])))
        if kind == "unitary-file":
            return DenseBackend(DenseChannel.from_unitary(np.load(spec["path"])))
        if kind == "chain":
            model = ChainModel.from_json(spec["model"])
            t = float(spec["t"])
            if spec.get("backend", "fermion") == "dense":
                return DenseBackend(DenseChannel.from_hamiltonian(model.hamiltonian(), t))
            return FermionBackend(model, t)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete channel spec: missing {exc}") from exc
    except (ValueError, OSError) as exc:
        raise ConfigError(f"invalid channel spec: {exc}") from exc
    raise ConfigError(f"unknown channel type {kind!r}")


def parse_observables(spec, n: int) -> dict:
    """Observable ids "Z_i" (1-based), "all-z", or {"id": [terms]} maps."""
    from .pauli import SparsePauliOp

    if spec in (None, "all-z"):
        return {f"Z_{i + 1}": SparsePauliOp.single(n, {i: "Z"}) for i in range(n)}
    out = {}
    if isinstance(spec, dict):
        for name, terms in spec.items():
            out[name] = SparsePauliOp.from_json_list(terms, n)
        return out
    for name in spec:
        if not (isinstance(name, str) and name.startswith("Z_") and name[2:].isdigit()):
            raise ConfigError(f"cannot parse observable id {name!r}")
        i = int(name[2:]) - 1
        if not 0 <= i < n:
            raise ConfigError(f"observable {name} outside 1..{n}")
        out[name] = SparsePauliOp.single(n, {i: "Z"})
    return out


# -- commands -------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    from .shadows import collect_process_shadow

    cfg = _config(args)
    seed = _seed(cfg)
    if "channel" not in cfg:
        raise ConfigError("config needs a \"channel\" section")
    backend = build_backend(cfg["channel"])
    ds = cfg.get("dataset", {})
    N = int(ds.get("N", 100))
    mode = ds.get("mode", "snapshot")
    if N < 0:
        raise ConfigError("dataset.N must be non-negative")
    obs = parse_observables(cfg.get("observables"), backend.n) if mode == "expectation" else None
    try:
        shadow = collect_process_shadow(backend, N, mode, obs, int(ds.get("shots", 500)), seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output path (--out)")
    shadow.meta["provenance"] = provenance_record(cfg)
    shadow.save(out)
    log.info("wrote %d rows to %s", N, out)
    return EXIT_OK


def _observable_for(cfg, n):
    from .pauli import SparsePauliOp

    obs = cfg.get("observable", "Z_1")
    if isinstance(obs, str):
        return obs, parse_observables([obs], n)[obs]
    return "custom", SparsePauliOp.from_json_list(obs, n)


def cmd_learn(args) -> int:
    from .learner import A_GRID, LearnerConfig, cross_validate, learn_process
    from .shadows import ProcessShadow

    cfg = _config(args)
    data = args.data or cfg.get("data")
    if not data:
        raise ConfigError("no dataset (--data)")
    try:
        shadow = ProcessShadow.load(data)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{data}: {exc}") from exc
    lc = dict(cfg.get("learner", {}))
    method = lc.pop("method", "lasso-cv")
    label, op = _observable_for(cfg, shadow.n)
    if method == "lasso-cv":
        y = shadow.labels_for(label if shadow.mode == "expectation" else op)
        res = cross_validate(
            shadow.input_bloch(),
            y,
            k_grid=lc.get("k_grid", (1, 2, 3)),
            a_grid=lc.get("a_grid", A_GRID),
            folds=int(lc.get("folds", 2)),
            seed=int(cfg.get("seed", 0)),
            local=bool(lc.get("local", True)),
        )
        model = res.model
    elif method in ("process-1", "process-2"):
        try:
            conf = LearnerConfig(mode=method, **lc)
        except TypeError as exc:
            raise ConfigError(f"bad learner option: {exc}") from exc
        model = learn_process(shadow, op, conf, label=label)
    else:
        raise ConfigError(f"unknown learner method {method!r}")
    if not all(math.isfinite(c) for c in model.coefficients.terms.values()):
        raise NumericFailure("non-finite coefficient in learned model")
    model.config["observable"] = label
    model.config["provenance"] = provenance_record(cfg)
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output path (--out)")
    model.save(out)
    return EXIT_OK


def _read_states(path) -> np.ndarray:
    from .states import STAB_BLOCH, label_codes

    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if "in" in rec:
            rows.append(STAB_BLOCH[label_codes(rec["in"])])
        elif "bloch" in rec:
            rows.append(np.asarray(rec["bloch"], dtype=float))
    return np.array(rows)


def cmd_predict(args) -> int:
    from .learner import LearnedObservable

    cfg = _config(args)
    if not args.model or not args.states:
        raise ConfigError("predict needs --model and --states")
    model = LearnedObservable.load(args.model)
    try:
        bloch = _read_states(args.states)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{args.states}: {exc}") from exc
    if bloch.size and bloch.shape[1] != model.n:
        raise ConfigError("states and model act on different qubit counts")
    pred = model.predict_batch(bloch) if bloch.size else np.zeros(0)
    if not np.all(np.isfinite(pred)):
        raise NumericFailure("non-finite prediction")
    cfg.setdefault("model", str(args.model))
    write_csv([{"index": i, "prediction": float(p)} for i, p in enumerate(pred)], args.out, cfg)
    return EXIT_OK


def cmd_optimize(args) -> int:
    from .hamopt import NothingToOptimize, guaranteed_margin, optimize
    from .pauli import ExpansionProfile, SparsePauliOp

    cfg = _config(args)
    seed = int(cfg.get("seed", 0))
    path = args.hamiltonian or cfg.get("hamiltonian")
    if not path:
        raise ConfigError("optimize needs --hamiltonian")
    spec = _load_json(path)
    terms = spec["terms"] if isinstance(spec, dict) else spec
    try:
        H = SparsePauliOp.from_json_list(terms)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    profile = None
    if isinstance(spec, dict) and "profile" in spec:
        profile = ExpansionProfile(int(spec["profile"]["c_e"]), int(spec["profile"]["d_e"]))
    rng = np.random.default_rng(seed)
    runs = int(args.runs or cfg.get("runs", 100))
    try:
        results = [optimize(H, profile, rng) for _ in range(runs)]
    except NothingToOptimize as exc:
        raise ConfigError(str(exc)) from exc
    margins = np.array([abs(r.margin) for r in results])
    best = max(results, key=lambda r: abs(r.margin))
    report = {
        "runs": runs,
        "seed": seed,
        "mean_abs_margin": float(margins.mean()),
        "stderr": float(margins.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0,
        "theorem_bound": guaranteed_margin(H, profile),
        "best": best.to_json(),
        "provenance": provenance_record(cfg),
    }
    _emit(json.dumps(report, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_verify_norms(args) -> int:
    from .hamopt import random_local_hamiltonian
    from .norms import verify_inequality

    cfg = _config(args)
    seed = int(cfg.get("seed", 0))
    k, n, trials = int(args.k), int(args.n), int(args.trials)
    if not (1 <= k <= n <= 12):
        raise ConfigError("need 1 <= k <= n <= 12")
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(trials):
        H = random_local_hamiltonian(n, k, rng)
        rep = verify_inequality(H, args.kind)
        rows.append({"instance_id": i, "k": rep.k, "d": rep.d, "lhs": rep.lhs, "rhs": rep.rhs, "holds": rep.holds})
    cfg.update({"k": k, "n": n, "trials": trials, "kind": args.kind})
    write_csv(rows, args.out, cfg)
    bad = sum(not r["holds"] for r in rows)
    if bad:
        log.warning("%d violations", bad)
    return EXIT_OK


def cmd_reproduce_fig(args) -> int:
    from . import experiments as ex

    cfg = _config(args)
    seed = int(cfg.get("seed", 0))
    which = args.which
    opts = dict(cfg.get("figure", {}))
    if which in ("3", "4") and "seeds" in opts:
        raise ConfigError("figures 3 and 4 take a single seed")
    try:
        if which == "2b":
            rows = ex.fig2b(seeds=opts.pop("seeds", (seed,)), **opts)
        elif which == "2c":
            rows = ex.fig2c(seeds=opts.pop("seeds", (seed,)), **opts)
        elif which == "2d":
            rows = ex.fig2d(seeds=opts.pop("seeds", (seed,)), **opts)
        elif which == "3":
            rows = ex.fig3(seed=seed, **opts)
        elif which == "4":
            rows = ex.fig4(seed=seed, **opts)
        else:
            raise ConfigError(f"unknown figure {which!r}")
    except TypeError as exc:
        raise ConfigError(f"bad figure option: {exc}") from exc
    cfg["figure_id"] = which
    write_csv(rows, args.out, cfg)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .fermion import ChainModel, z_expectations
    from .learner import lasso_solve
    from .states import STAB_BLOCH

    cfg = _config(args)
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    out = {}
    chain = ChainModel.homogeneous("xy", 50)
    bloch = STAB_BLOCH[rng.integers(0, 6, (1000, 50))]
    t0 = time.perf_counter()
    z_expectations(chain, 1e6, bloch)
    out["z_expectations_n50_1000_states_s"] = time.perf_counter() - t0
    X = rng.choice([-1.0, 0.0, 1.0], size=(2000, 500))
    y = X[:, :5].sum(1) + 0.1 * rng.standard_normal(2000)
    lasso_solve(X.T @ X / 2000, X.T @ y / 2000, 1e-3)  # compile
    t0 = time.perf_counter()
    lasso_solve(X.T @ X / 2000, X.T @ y / 2000, 1e-4)
    out["lasso_500_features_s"] = time.perf_counter() - t0
    out["provenance"] = provenance_record(cfg)
    _emit(json.dumps(out, indent=1) + "\n", args.out)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qproc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"qproc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
        return sp

    common(sub.add_parser("gen-data", help="generate a process-shadow dataset")).set_defaults(func=cmd_gen_data)
    sp = common(sub.add_parser("learn", help="train a model from a dataset"))
    sp.add_argument("--data")
    sp.set_defaults(func=cmd_learn)
    sp = common(sub.add_parser("predict", help="evaluate a model on states"))
    sp.add_argument("--model")
    sp.add_argument("--states")
    sp.set_defaults(func=cmd_predict)
    sp = common(sub.add_parser("optimize", help="random product-state optimizer"))
    sp.add_argument("--hamiltonian")
    sp.add_argument("--runs", type=int)
    sp.set_defaults(func=cmd_optimize)
    sp = common(sub.add_parser("verify-norms", help="norm inequality sweep"))
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--kind", default="general-k-local", choices=("general-k-local", "bounded-degree"))
    sp.set_defaults(func=cmd_verify_norms)
    sp = common(sub.add_parser("reproduce-fig", help="regenerate figure data as CSV"))
    sp.add_argument("--which", required=True, choices=("2b", "2c", "2d", "3", "4"))
    sp.set_defaults(func=cmd_reproduce_fig)
    common(sub.add_parser("bench", help="time the core kernels")).set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _set_threads(args.threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
