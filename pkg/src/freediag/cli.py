"""Command-line entry point and experiment drivers.

Subcommands
-----------
gen         sample a matrix model and write it in the binary ``HMX1`` format
moments     rooted moments of the free sum (walk and combinatorial routes)
resolvent   diagonal Cauchy transforms at one point, per root, as CSV
theorem-a   scalar-point convergence experiment for dense models
theorem-b   diagonal-point convergence experiment for sparse bounded models
verify      lemma suite, assumption checks or the Markov-bound check

Experiments are driven by a TOML file.  Every output embeds the SHA-256 of
the resolved configuration (after command-line overrides) so a record can be
traced back to the exact inputs that produced it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import freesum as fs
from . import resolvent as rv
from . import verify as vf
from .errors import ConvergenceError, FreediagError, ParameterError
from .models import FAMILIES, HermitianMatrix, ModelSpec, generate, permute_conjugate

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("freediag")

SCHEMA_VERSION = "1.0"
CSV_COLUMNS = ["config_hash", "experiment", "N", "point", "trials", "metric_mean", "metric_se",
               "bound", "wall_time", "seed"]

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "load_config",
    "config_hash",
    "parse_complex",
    "run_theorem_a",
    "run_theorem_b",
    "run_verify",
    "fit_exponent",
    "theorem_a_bound",
    "theorem_b_bound",
    "theorem_b_exponent",
    "write_csv",
    "write_json",
    "main",
]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def parse_complex(value) -> complex:
    """Accept numbers, ``[re, im]`` pairs and strings like ``"8i"`` or ``"1+2j"``."""
    if isinstance(value, (int, float, complex)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        s = value.strip().replace(" ", "").replace("i", "j")
        try:
            return complex(s)
        except ValueError:
            pass
    raise ParameterError(f"cannot read {value!r} as a complex number")


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(obj[k]) for k in sorted(obj)}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_hash(cfg: dict) -> str:
    blob = json.dumps(_canonical(cfg), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


_MODEL_KEYS = {"family", "p", "h", "eps", "atom", "C", "weights", "moment_M", "moment_c", "Np"}


def _model_spec(d: dict, N: int, seed: int) -> ModelSpec:
    unknown = set(d) - _MODEL_KEYS
    if unknown:
        raise ParameterError(f"unknown model keys {sorted(unknown)}")
    kw = {k: v for k, v in d.items() if k != "Np"}
    if "Np" in d:
        kw["p"] = _resolve_Np(d["Np"], N) / N
    if kw.get("moment_M") == "loglog":
        kw["moment_M"] = _speed(N, "loglog")
    return ModelSpec(N=int(N), seed=int(seed), **kw)


def _resolve_Np(v, N: int) -> float:
    if isinstance(v, str):
        if v == "log2":
            return math.log(N) ** 2
        if v == "log":
            return math.log(N)
        raise ParameterError(f"unknown Np recipe {v!r}")
    return float(v)


def _speed(N: int, M) -> float:
    if M == "loglog":
        return math.log(N) / math.log(math.log(N))
    return float(M)


@dataclass
class ExperimentConfig:
    """Resolved experiment description.

    ``raw`` keeps the full dictionary (the hash is taken over it); the other
    fields are parsed views.
    """

    experiment: str
    model_a: dict
    model_b: dict
    N: List[int]
    trials: int
    seed: int
    points: List[complex]
    diagonal: Optional[dict]
    solver: dict
    constants: dict
    raw: dict
    output: Optional[str] = None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        kind = raw.get("experiment")
        if kind not in ("theorem_a", "theorem_b", "lemma_suite", "assumptions", "markov"):
            raise ParameterError(f"unknown experiment kind {kind!r}")
        grid = raw.get("grid", {})
        ma = dict(raw.get("model_a", {}))
        mb = dict(raw.get("model_b", ma))
        for m in (ma, mb):
            if m and m.get("family") not in FAMILIES:
                raise ParameterError(f"unknown model family {m.get('family')!r}")
        ev = raw.get("eval", {})
        points = [parse_complex(z) for z in ev.get("z", [])]
        return cls(
            experiment=kind,
            model_a=ma,
            model_b=mb,
            N=[int(n) for n in grid.get("N", [])],
            trials=int(grid.get("trials", 1)),
            seed=int(grid.get("seed", 0)),
            points=points,
            diagonal=ev.get("diagonal"),
            solver=dict(raw.get("solver", {})),
            constants=dict(raw.get("constants", {})),
            raw=raw,
            output=raw.get("output"),
        )


def load_config(path, seed: Optional[int] = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    if seed is not None:
        raw.setdefault("grid", {})["seed"] = int(seed)
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    config_hash: str
    experiment: str
    N: int
    point: str
    trials: int
    metric_mean: float
    metric_se: float
    bound: float
    wall_time: float
    seed: int
    extra: Dict[str, object] = field(default_factory=dict)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _point_label(D) -> str:
    if isinstance(D, dict):
        return f"diag:{D.get('kind')}[{D.get('low')},{D.get('high')}]"
    z = complex(D)
    return f"{z.real:g}{z.imag:+g}i"


def _trial_seeds(base: int, N: int, k: int):
    s = np.random.SeedSequence([int(base), int(N), int(k)]).generate_state(3, dtype=np.uint64)
    return [int(v) for v in s]


def _sample_pair(cfg: ExperimentConfig, N: int, k: int):
    sa, sb, sp_ = _trial_seeds(cfg.seed, N, k)
    A = generate(_model_spec(cfg.model_a, N, sa))
    B = permute_conjugate(generate(_model_spec(cfg.model_b, N, sb)), sp_)
    return A, B


def _solver_damping(solver: dict):
    d = solver.get("damping", "default")
    if d == "default":
        return None
    if d == "adaptive":
        return "adaptive"
    return float(d)


def _sum_matrix(A: HermitianMatrix, B: HermitianMatrix) -> HermitianMatrix:
    if A.is_sparse or B.is_sparse:
        return HermitianMatrix((A.to_sparse() + B.to_sparse()).tocsr(), check=False)
    return HermitianMatrix(A.data + B.data, check=False)


def _map_trials(fn, n: int, threads: int):
    if threads <= 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(n)))


def _mean_se(vals) -> tuple:
    v = np.asarray(vals, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else float("nan")
    return float(v.mean()), se


def fit_exponent(Ns: Sequence[int], metrics: Sequence[float]) -> float:
    """Least-squares slope of ``log(metric)`` against ``log(N)``."""
    x = np.log(np.asarray(Ns, dtype=float))
    y = np.log(np.asarray(metrics, dtype=float))
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# theorem A
# ---------------------------------------------------------------------------

def theorem_a_bound(z_abs: float, r0: float, c: float, M: float) -> float:
    """``4/|z|^2 (r0/|z|)^(2cM)``."""
    return 4.0 / z_abs ** 2 * (r0 / z_abs) ** (2.0 * c * M)


def _measured_C(X: HermitianMatrix, M: float) -> float:
    m = max(1, int(round(M)))
    val = vf.frobenius_power(X, m)
    return val ** (1.0 / m) if val > 0 else 0.0


def run_theorem_a(cfg: ExperimentConfig, threads: int = 1) -> List[RunRecord]:
    """Scalar-point experiment: ``(1/N) ||G_{A+B}(z) - G_{a+b}(z)||_F^2``.

    ``constants`` declares ``c``, ``M`` (a number or ``"loglog"``) and ``C``
    (a number or ``"measured"``); ``r0 = max(4C, 2c^2)^(1/2)``.
    """
    if not cfg.points:
        raise ParameterError("theorem_a needs eval.z")
    const = cfg.constants
    c = float(const.get("c", 0.125))
    M_decl = const.get("M", "loglog")
    C_decl = const.get("C", 4.0)
    method = cfg.solver.get("method", "subordination")
    tol = float(cfg.solver.get("tol", rv.FIXED_POINT_TOL))
    damping = _solver_damping(cfg.solver)
    records = []
    for N in cfg.N:
        M = _speed(N, M_decl)
        for z in cfg.points:
            if z.imag <= 0:
                raise ParameterError(f"z = {z} is not in the upper half-plane")
            t0 = time.perf_counter()

            def trial(k, N=N, z=z, M=M):
                A, B = _sample_pair(cfg, N, k)
                G = rv.cauchy_matrix(_sum_matrix(A, B), z, check=False).entries
                try:
                    if method == "subordination":
                        Gf = rv.cauchy_freesum_subordination(A, B, z, tol=tol, damping=damping)
                    elif method == "series":
                        Gf = rv.cauchy_freesum_series(A, B, z, int(cfg.solver.get("M_terms", 16)))
                    else:
                        raise ParameterError(f"theorem_a: unknown solver {method!r}")
                except ConvergenceError as exc:
                    raise ConvergenceError(f"{exc} at N={N}, z={z}, trial={k}",
                                           exc.residual, exc.iterations) from exc
                cm = max(_measured_C(A, M), _measured_C(B, M)) if C_decl == "measured" else math.nan
                return rv.frobenius_metric(G, Gf), cm, Gf.info.get("iterations", 0)

            out = _map_trials(trial, cfg.trials, threads)
            metrics = [o[0] for o in out]
            C_val = max(o[1] for o in out) if C_decl == "measured" else float(C_decl)
            r0 = math.sqrt(max(4.0 * C_val, 2.0 * c * c))
            if abs(z) <= r0:
                raise ParameterError(f"|z| = {abs(z):.4g} must exceed r0 = {r0:.4g}", offending=(N, z))
            mean, se = _mean_se(metrics)
            records.append(RunRecord(cfg.hash, "theorem_a", N, _point_label(z), cfg.trials, mean, se,
                                     theorem_a_bound(abs(z), r0, c, M), time.perf_counter() - t0, cfg.seed,
                                     {"C": C_val, "r0": r0, "c": c, "M": M,
                                      "iterations_mean": float(np.mean([o[2] for o in out]))}))
            log.info("theorem_a N=%d z=%s metric=%.3e", N, z, mean)
    return records


# ---------------------------------------------------------------------------
# theorem B
# ---------------------------------------------------------------------------

def theorem_b_exponent(C: float, d: float) -> float:
    """``2 log(2C/d) / (1 + 2 log C)``."""
    return 2.0 * math.log(2.0 * C / d) / (1.0 + 2.0 * math.log(C))


def theorem_b_bound(C: float, d: float, N: int) -> float:
    """``(6/d^2) N^(2 log(2C/d) / (1 + 2 log C))``."""
    return 6.0 / d ** 2 * float(N) ** theorem_b_exponent(C, d)


def _diagonal_point(cfg: ExperimentConfig, N: int, z: Optional[complex]) -> rv.DiagonalPoint:
    if z is not None:
        return rv.DiagonalPoint.scalar(z, N)
    rec = cfg.diagonal or {}
    if rec.get("kind") != "uniform_imag":
        raise ParameterError("eval.diagonal.kind must be 'uniform_imag'")
    lo, hi = float(rec["low"]), float(rec["high"])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, N, 17])))
    return rv.DiagonalPoint(1j * rng.uniform(lo, hi, size=N))


def run_theorem_b(cfg: ExperimentConfig, threads: int = 1) -> List[RunRecord]:
    """Diagonal-point experiment for sparse bounded models.

    The free-sum transform comes from the subordination iteration; on the
    first trial of every ``(N, D)`` pair it is cross-checked against the
    truncated-section solve at ``solver.cross_check_roots`` roots.  The
    declared sparsity constant ``constants.C`` enters the bound; the
    hypothesis ``min Im D > ||A|| + ||B||`` is checked on every trial.
    """
    C = float(cfg.constants.get("C", 2.0))
    tol = float(cfg.solver.get("tol", rv.FIXED_POINT_TOL))
    damping = _solver_damping(cfg.solver)
    depth = int(cfg.solver.get("depth", 6))
    n_cross = int(cfg.solver.get("cross_check_roots", 3))
    pts = list(cfg.points) if cfg.points else [None]
    records = []
    for N in cfg.N:
        for z in pts:
            D = _diagonal_point(cfg, N, z)
            d = D.min_abs
            t0 = time.perf_counter()

            def trial(k, N=N, D=D):
                A, B = _sample_pair(cfg, N, k)
                eta0 = A.op_norm + B.op_norm
                if D.min_imag <= eta0:
                    raise ParameterError(f"min Im D = {D.min_imag:.4g} <= ||A|| + ||B|| = {eta0:.4g}",
                                         offending=(N, k))
                G = rv.cauchy_matrix(_sum_matrix(A, B), D, check=False).entries
                Gf = rv.cauchy_freesum_subordination(A, B, D, tol=tol, damping=damping, norms=(A.op_norm, B.op_norm))
                cross = None
                if k == 0 and n_cross > 0:
                    roots = list(range(min(n_cross, N)))
                    Gt = rv.cauchy_freesum_truncated(A, B, D, depth, roots=roots, norms=(A.op_norm, B.op_norm))
                    diff = float(np.max(np.abs(Gt.entries - Gf.entries[roots])))
                    cross = {"max_diff": diff, "allowed": max(Gt.bound, 1e-6),
                             "ok": bool(diff <= max(Gt.bound, 1e-6))}
                return rv.frobenius_metric(G, Gf), cross

            out = _map_trials(trial, cfg.trials, threads)
            metrics = [o[0] for o in out]
            cross = next((o[1] for o in out if o[1] is not None), None)
            mean, se = _mean_se(metrics)
            label = _point_label(z if z is not None else cfg.diagonal)
            records.append(RunRecord(cfg.hash, "theorem_b", N, label, cfg.trials, mean, se,
                                     theorem_b_bound(C, d, N), time.perf_counter() - t0, cfg.seed,
                                     {"C": C, "d": d, "exponent": theorem_b_exponent(C, d), "cross_check": cross}))
            log.info("theorem_b N=%d %s metric=%.3e", N, label, mean)
    return records


def summarize(records: List[RunRecord]) -> dict:
    """Per evaluation point: strict monotonicity and fitted exponent over the N grid."""
    out = {}
    for label in dict.fromkeys(r.point for r in records):
        rs = sorted((r for r in records if r.point == label), key=lambda r: r.N)
        Ns = [r.N for r in rs]
        ms = [r.metric_mean for r in rs]
        entry = {
            "N": Ns,
            "metric": ms,
            "strictly_decreasing": all(b < a for a, b in zip(ms, ms[1:])),
            "fitted_exponent": fit_exponent(Ns, ms),
            "below_bound": all(r.metric_mean <= r.bound for r in rs),
        }
        if rs and "exponent" in rs[0].extra:
            entry["theoretical_exponent"] = rs[0].extra["exponent"]
        out[label] = entry
    return out


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def run_verify(cfg: ExperimentConfig) -> dict:
    """Dispatch the lemma suite, assumption checks or the Markov-bound check."""
    raw = cfg.raw
    if cfg.experiment == "lemma_suite":
        opts = raw.get("lemma_suite", {})
        rep = vf.lemma_suite(seed=cfg.seed, trace_seeds=int(opts.get("trace_seeds", 50)), N=int(opts.get("N", 5)))
        return {"kind": "lemma_suite", "passed": rep.passed, "results": rep.to_dict()["results"]}
    if cfg.experiment == "assumptions":
        reports = []
        for chk in raw.get("check", []):
            kind = chk.get("kind")
            for N in chk.get("N", cfg.N):
                spec = _model_spec(chk["model"], int(N), cfg.seed)
                if chk.get("M") == "loglog_Np":
                    Np = float(spec.p * N)
                    M = math.log(Np) / math.log(math.log(Np))
                else:
                    M = _speed(int(N), chk.get("M", "loglog"))
                if kind == "frobenius":
                    r = vf.check_frobenius(spec, max(1, int(round(M))), int(chk.get("trials", 20)),
                                           C=chk.get("C"))
                elif kind == "injective_growth":
                    size = int(chk.get("tree_vertices", 3))
                    sampler = lambda rng, size=size: vf.sample_double_tree(rng, size)
                    sampler.__name__ = f"double_tree_{size}"
                    r = vf.check_injective_growth(spec, sampler, M, float(chk.get("c", 1.0)),
                                                  int(chk.get("trials", 10)), h_max=chk.get("h_max"))
                else:
                    raise ParameterError(f"unknown assumption check {kind!r}")
                d = r.to_dict()
                d["expect"] = chk.get("expect")
                reports.append(d)
        return {"kind": "assumptions", "passed": all(
            (r["passed"] == (r["expect"] != "fail")) for r in reports), "reports": reports}
    if cfg.experiment == "markov":
        opts = raw.get("markov", {})
        rows = []
        passed = True
        for C in opts.get("C", [1]):
            rep = vf.markov_bound_check(opts.get("family", "sparse_bounded"), int(C), cfg.N or (500, 1000),
                                        kappa=opts.get("kappa"), ns=opts.get("n"),
                                        seeds=int(cfg.trials), seed0=cfg.seed)
            rows.append(rep.to_dict())
            passed &= rep.passed
        return {"kind": "markov", "passed": bool(passed), "reports": rows}
    raise ParameterError(f"run_verify cannot run {cfg.experiment!r}")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def write_csv(records: List[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def _jsonable(obj):
    return vf._jsonable(obj)


def write_json(payload: dict, path, cfg_hash: str, kind: str, config: Optional[dict] = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config_hash": cfg_hash,
        "tool_version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": config,
        "payload": payload,
    }
    doc = _jsonable(doc)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return doc


def schema_path() -> Path:
    return Path(__file__).with_name("schemas") / "report.schema.json"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="override the configured base seed")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent trials")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--N", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--C", type=int)
    p.add_argument("--weights", choices=("unit", "signs"))


def _flag_model(args, prefix_seed: int = 0) -> ModelSpec:
    if args.family is None or args.N is None:
        raise ParameterError("--family and --N are required without --config")
    kw = {k: getattr(args, k) for k in ("p", "h", "C", "weights") if getattr(args, k) is not None}
    seed = args.seed if args.seed is not None else 0
    return ModelSpec(args.family, args.N, seed=seed + prefix_seed, **kw)


def _pair_from_args(args):
    if args.config:
        cfg = load_config(args.config, args.seed)
        N = cfg.N[0] if cfg.N else args.N
        return _sample_pair(cfg, N, 0)
    A = generate(_flag_model(args, 0))
    B = permute_conjugate(generate(_flag_model(args, 1)), (args.seed or 0) + 2)
    return A, B


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freediag", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a model and save it")
    _add_common(p)
    _add_model(p)
    p.add_argument("--name", default="matrix.hmx", help="file name inside --out")

    p = sub.add_parser("moments", help="rooted moments of the free sum")
    _add_common(p)
    _add_model(p)
    p.add_argument("--root", type=int, default=0)
    p.add_argument("--m", type=int, default=4, help="highest moment order")

    p = sub.add_parser("resolvent", help="Cauchy transforms at one point")
    _add_common(p)
    _add_model(p)
    p.add_argument("--z", default="8i", help="spectral parameter, e.g. 8i")
    p.add_argument("--method", choices=("subordination", "truncated", "series", "all"), default="subordination")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--M-terms", type=int, default=16)
    p.add_argument("--roots", type=int, default=None, help="number of roots for truncated/series (default all)")

    for name in ("theorem-a", "theorem-b", "verify"):
        p = sub.add_parser(name, help=f"run the {name} experiment from a config")
        _add_common(p)
    return ap


def _cmd_gen(args) -> int:
    if args.config:
        cfg = load_config(args.config, args.seed)
        spec = _model_spec(cfg.model_a, cfg.N[0], cfg.seed)
    else:
        spec = _flag_model(args)
    X = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X.save(out / args.name)
    print(f"wrote {out / args.name}: N={X.N} storage={X.storage} ||X||={X.op_norm:.6g}")
    return 0


def _cmd_moments(args) -> int:
    A, B = _pair_from_args(args)
    op = fs.FreeSumOperator(A, B, args.root)
    walk = fs.rooted_moments(op, args.m)
    girth = fs.colored_girth(A, B, args.root, args.m)
    w = csv.writer(sys.stdout)
    w.writerow(["m", "walk_re", "walk_im", "combinatorial_re", "combinatorial_im", "matrix_re", "matrix_im"])
    S = _sum_matrix(A, B).to_dense()
    P = np.eye(S.shape[0])
    for m in range(args.m + 1):
        comb = fs.rooted_moment_combinatorial(A, B, args.root, m) if m <= 6 else complex("nan")
        mat = P[args.root, args.root]
        w.writerow([m, walk[m].real, walk[m].imag, comb.real, comb.imag, mat.real, mat.imag])
        P = P @ S
    print(f"# colored girth R({args.root}) capped at {args.m}: {girth}", file=sys.stderr)
    return 0


def _cmd_resolvent(args) -> int:
    A, B = _pair_from_args(args)
    z = parse_complex(args.z)
    N = A.N
    roots = list(range(N if args.roots is None else min(args.roots, N)))
    cols = {"matrix": rv.cauchy_matrix(_sum_matrix(A, B), z).entries[roots]}
    methods = ("subordination", "truncated", "series") if args.method == "all" else (args.method,)
    for m in methods:
        if m == "subordination":
            cols[m] = rv.cauchy_freesum_subordination(A, B, z, damping="adaptive").entries[roots]
        elif m == "truncated":
            cols[m] = rv.cauchy_freesum_truncated(A, B, z, args.depth, roots=roots).entries
        else:
            cols[m] = rv.cauchy_freesum_series(A, B, z, args.M_terms, roots=roots).entries
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "resolvent.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["root"] + [f"{k}_{part}" for k in cols for part in ("re", "im")])
        for t, r in enumerate(roots):
            w.writerow([r] + [x for k in cols for x in (cols[k][t].real, cols[k][t].imag)])
    print(f"wrote {path}")
    return 0


def _cmd_experiment(args, kind: str) -> int:
    if not args.config:
        raise ParameterError(f"{kind} needs --config")
    cfg = load_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.output or cfg.experiment
    if kind in ("theorem_a", "theorem_b"):
        if cfg.experiment != kind:
            raise ParameterError(f"config experiment is {cfg.experiment!r}, expected {kind!r}")
        runner = run_theorem_a if kind == "theorem_a" else run_theorem_b
        records = runner(cfg, threads=args.threads)
        write_csv(records, out / f"{stem}.csv")
        payload = {"records": [asdict(r) for r in records], "summary": summarize(records)}
        write_json(payload, out / f"{stem}.json", cfg.hash, kind, cfg.raw)
        for label, s in payload["summary"].items():
            print(f"{label}: metric={['%.3e' % m for m in s['metric']]} "
                  f"exponent={s['fitted_exponent']:.3f} decreasing={s['strictly_decreasing']}")
        return 0
    payload = run_verify(cfg)
    write_json(payload, out / f"{stem}.json", cfg.hash, payload["kind"], cfg.raw)
    print(f"{payload['kind']}: {'pass' if payload['passed'] else 'FAIL'}")
    return 0 if payload["passed"] else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "moments":
            return _cmd_moments(args)
        if args.command == "resolvent":
            return _cmd_resolvent(args)
        if args.command == "theorem-a":
            return _cmd_experiment(args, "theorem_a")
        if args.command == "theorem-b":
            return _cmd_experiment(args, "theorem_b")
        return _cmd_experiment(args, "verify")
    except FreediagError as exc:
        print(f"freediag: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
