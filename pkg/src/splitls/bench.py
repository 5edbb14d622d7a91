"""Benchmark command line.

``bench run`` solves one synthetic instance and writes ``trace.csv`` and
``summary.json``; ``bench compare`` repeats over seeds and engines and
writes a table of oracle counts. Configuration files are TOML::

    family = "sparse_lsq"          # sparse_lsq | spca | consensus_spca | mpc
    algorithm = "drs_ls"           # drs | drs_ls | admm | admm_ls
    engine = "lbfgs(5)"
    step_policy = "fraction"       # fraction | explicit | adaptive
    step_fraction = 0.95           # of the stepsize bound (penalty: inverse)
    # gamma = 0.01 / beta = 10.0   # used by step_policy = "explicit"
    lam = 1.0
    c_fraction = 0.5
    epsilon = 1e-6
    max_iters = 5000
    i_max = 10
    seed = 0

    [dims]
    m = 100
    n = 500

Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import ConfigError, SplitError
from .admm import AdmmConfig, admm_ls_solve, admm_solve, default_penalty
from .directions import make_engine
from .drs import DrsConfig, drs_ls_solve, drs_solve, default_stepsize
from . import problems as P

SCHEMA = 1
CSV_COLUMNS = ["k", "res_norm", "merit", "tau", "backtracks", "oracle_calls", "time_s"]
ALGORITHMS = ("drs", "drs_ls", "admm", "admm_ls")
FAMILIES = ("sparse_lsq", "spca", "consensus_spca", "mpc")
POLICIES = ("fraction", "explicit", "adaptive")

_DEFAULTS = {
    "family": "sparse_lsq", "algorithm": "drs_ls", "engine": "lbfgs(5)",
    "step_policy": "fraction", "step_fraction": 0.95, "gamma": None,
    "beta": None, "lam": 1.0, "c_fraction": 0.5, "epsilon": 1e-6,
    "max_iters": 5000, "i_max": 10, "seed": 0, "dims": {},
}


@dataclass
class RunConfig:
    family: str = "sparse_lsq"
    algorithm: str = "drs_ls"
    engine: str = "lbfgs(5)"
    step_policy: str = "fraction"
    step_fraction: float = 0.95
    gamma: float = None
    beta: float = None
    lam: float = 1.0
    c_fraction: float = 0.5
    epsilon: float = 1e-6
    max_iters: int = 5000
    i_max: float = 10
    seed: int = 0
    dims: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**_DEFAULTS, **{k: v for k, v in d.items() if v is not None}}
        merged["dims"] = dict(merged["dims"])
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.algorithm.startswith("admm") and self.family != "consensus_spca":
            raise ConfigError("ADMM algorithms are available for consensus_spca only")
        if self.step_policy not in POLICIES:
            raise ConfigError(f"step_policy must be one of {POLICIES}")
        if not 0 < float(self.lam) < 2:
            raise ConfigError(f"lam must lie in (0, 2), got {self.lam}")
        if not 0 < float(self.step_fraction):
            raise ConfigError("step_fraction must be positive")
        if not 0 < float(self.c_fraction) < 1:
            raise ConfigError("c_fraction must lie in (0, 1)")
        if float(self.epsilon) < 0 or int(self.max_iters) < 0:
            raise ConfigError("epsilon and max_iters must be nonnegative")
        if self.step_policy == "explicit":
            key = "beta" if self.algorithm.startswith("admm") else "gamma"
            val = getattr(self, key)
            if val is None or not float(val) > 0:
                raise ConfigError(f"explicit step policy needs a positive {key}")
        make_engine(self.engine)

    def problem_key(self):
        return (self.family, json.dumps(self.dims, sort_keys=True))


def load_config(path, overrides=None) -> RunConfig:
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------- running

def _build(cfg: RunConfig):
    spec = P.generate_synthetic(cfg.family, cfg.dims, cfg.seed)
    if cfg.algorithm.startswith("admm"):
        return spec, None
    if cfg.family == "sparse_lsq":
        prob = P.build_sparse_lsq(spec)
        s0 = np.zeros(prob.dim)
    elif cfg.family == "spca":
        prob = P.build_spca(spec)
        s0 = np.full(prob.dim, 1.0 / prob.dim)
    elif cfg.family == "consensus_spca":
        prob = P.consensus_spca_as_drs(spec)
        s0 = np.full(prob.dim, 1.0 / np.sqrt(spec.spca.W.shape[1]))
    else:
        prob = P.build_mpc(spec)
        s0 = np.zeros(prob.dim)
    return prob, s0


def execute(cfg: RunConfig, engine=None):
    """Run one configuration; returns ``(report, objective)``."""
    engine = engine or cfg.engine
    adaptive = cfg.step_policy == "adaptive"
    if cfg.algorithm.startswith("admm"):
        spec = P.generate_synthetic(cfg.family, cfg.dims, cfg.seed)
        prob0 = P.build_consensus_spca(spec)
        beta = cfg.beta if cfg.step_policy != "fraction" else None
        if cfg.step_policy == "fraction":
            beta = default_penalty(prob0.regime, cfg.lam, cfg.step_fraction)
        prob = P.build_consensus_spca(spec, None if adaptive else beta, cfg.lam)
        n = spec.spca.W.shape[1]
        z = np.full(n, 1.0 / np.sqrt(n))
        init = (np.tile(z, spec.N), np.zeros(spec.N * n), z)
        if cfg.algorithm == "admm":
            rep = admm_solve(prob, init, beta, cfg.lam, cfg.epsilon, cfg.max_iters)
        else:
            acfg = AdmmConfig(lam=cfg.lam, beta=beta, epsilon=cfg.epsilon,
                              max_iters=cfg.max_iters, i_max=cfg.i_max,
                              adaptive=adaptive, c_fraction=cfg.c_fraction,
                              beta_fraction=cfg.step_fraction)
            rep = admm_ls_solve(prob, init, acfg, engine)
        st = rep.state
        return rep, float(prob.f_value(np.tile(st.z, spec.N)) + prob.g_value(st.z))
    prob, s0 = _build(cfg)
    gamma = cfg.gamma if cfg.step_policy != "fraction" else None
    if cfg.step_policy == "fraction":
        gamma = default_stepsize(prob.regime, cfg.lam, cfg.step_fraction)
    if cfg.algorithm == "drs":
        rep = drs_solve(prob, s0, gamma, cfg.lam, cfg.epsilon, cfg.max_iters)
    else:
        dcfg = DrsConfig(lam=cfg.lam, gamma=gamma, epsilon=cfg.epsilon,
                         max_iters=cfg.max_iters, i_max=cfg.i_max,
                         adaptive=adaptive, c_fraction=cfg.c_fraction,
                         gamma_fraction=cfg.step_fraction)
        rep = drs_ls_solve(prob, s0, dcfg, engine)
    return rep, float(prob.phi(rep.state.v))


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in report.trace:
        w.writerow([rec.k, repr(rec.res_norm), repr(rec.merit),
                    "" if np.isnan(rec.tau) else repr(rec.tau),
                    rec.backtracks, rec.oracle_calls, f"{rec.time_s:.6f}"])
    return buf.getvalue()


def _certificate_dict(cert):
    if cert is None:
        return None
    out = {}
    for k, v in vars(cert).items():
        if isinstance(v, np.ndarray) or v is None:
            continue
        out[k] = v
    return out


def summary_dict(cfg: RunConfig, report, objective):
    return {
        "schema": SCHEMA,
        "config": {k: v for k, v in vars(cfg).items()},
        **report.summary(),
        "objective": objective,
        "oracle_calls": report.trace[-1].oracle_calls if report.trace else 0,
        "certificate": _certificate_dict(report.certificate),
    }


def cmd_run(cfg: RunConfig, out):
    rep, obj = execute(cfg)
    _atomic_write(os.path.join(out, "trace.csv"), trace_csv(rep))
    _atomic_write(os.path.join(out, "summary.json"),
                  json.dumps(summary_dict(cfg, rep, obj), indent=2, default=float))
    print(f"{cfg.family}/{cfg.algorithm}/{rep.engine}: {rep.status} after "
          f"{rep.iterations} iterations, {rep.trace[-1].oracle_calls} oracle calls")
    return 0


def _quartiles(vals):
    vals = [v for v in vals if np.isfinite(v)]
    if not vals:
        return (np.nan, np.nan, np.nan)
    q = np.percentile(vals, [25, 50, 75])
    return tuple(float(x) for x in q)


def cmd_compare(cfgs, engines, seeds, out, threads=None):
    """Median and quartiles of oracle calls to convergence per engine."""
    if not cfgs:
        raise ConfigError("at least one configuration is required")
    keys = {c.problem_key() for c in cfgs}
    if len(keys) > 1:
        raise ConfigError("configurations describe different problems")
    if not engines:
        raise ConfigError("at least one engine is required")
    base = cfgs[0]
    threads = threads or int(os.environ.get("BENCH_THREADS", "1") or 1)
    jobs = []
    for eng in engines:
        for i in range(seeds):
            c = RunConfig.from_dict({**vars(base), "engine": eng,
                                     "seed": int(base.seed) + i})
            jobs.append((eng, i, c))

    def work(job):
        eng, i, c = job
        try:
            rep, obj = execute(c)
            calls = rep.trace[-1].oracle_calls if rep.converged else np.nan
            return eng, i, calls, obj, rep.status
        except SplitError as exc:
            return eng, i, np.nan, np.nan, f"Error: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(work, jobs))
    ref_eng = "nominal" if "nominal" in engines else engines[0]
    ref_obj = {i: obj for eng, i, _, obj, _ in results if eng == ref_eng}
    rows = []
    for eng in engines:
        mine = [r for r in results if r[0] == eng]
        q1, med, q3 = _quartiles([r[2] for r in mine])
        rel = [(r[3] - ref_obj[r[1]]) / max(abs(ref_obj[r[1]]), 1e-300)
               for r in mine if np.isfinite(r[3]) and np.isfinite(ref_obj.get(r[1], np.nan))]
        rows.append({
            "engine": eng, "runs": len(mine),
            "converged": sum(r[4] == "Converged" for r in mine),
            "calls_q1": q1, "calls_median": med, "calls_q3": q3,
            "rel_objective_median": float(np.median(rel)) if rel else np.nan,
        })
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _atomic_write(os.path.join(out, "compare.csv"), buf.getvalue())
    _atomic_write(os.path.join(out, "summary.json"), json.dumps(
        {"schema": SCHEMA, "config": vars(base), "seeds": seeds, "rows": rows},
        indent=2, default=float))
    print(f"{'engine':<14}{'conv':>6}{'q1':>10}{'median':>10}{'q3':>10}{'rel.obj':>12}")
    for r in rows:
        print(f"{r['engine']:<14}{r['converged']:>6}{r['calls_q1']:>10.1f}"
              f"{r['calls_median']:>10.1f}{r['calls_q3']:>10.1f}"
              f"{r['rel_objective_median']:>12.3g}")
    return rows


def _parser():
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="solve one instance")
    r.add_argument("--config")
    r.add_argument("--engine")
    r.add_argument("--algorithm")
    r.add_argument("--family")
    r.add_argument("--gamma", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--lam", type=float)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--max-iters", type=int, dest="max_iters")
    r.add_argument("--step-policy", dest="step_policy")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    c = sub.add_parser("compare", help="compare engines over seeds")
    c.add_argument("--config", action="append")
    c.add_argument("--engines", required=True)
    c.add_argument("--seeds", type=int, default=20)
    c.add_argument("--out", required=True)
    return ap


def main(argv=None):
    ap = _parser()
    args = ap.parse_args(argv)
    try:
        if args.cmd == "run":
            ov = {k: getattr(args, k) for k in
                  ("engine", "algorithm", "family", "gamma", "beta", "lam",
                   "epsilon", "max_iters", "step_policy", "seed")}
            if ov["gamma"] is not None or ov["beta"] is not None:
                ov["step_policy"] = ov["step_policy"] or "explicit"
            cfg = load_config(args.config, ov)
            return cmd_run(cfg, args.out)
        cfgs = [load_config(p) for p in (args.config or [])]
        engines = [e.strip() for e in args.engines.split(",") if e.strip()]
        if not cfgs:
            ap.error("compare needs at least one --config")
        if args.seeds < 1:
            raise ConfigError("--seeds must be at least 1")
        cmd_compare(cfgs, engines, args.seeds, args.out)
        return 0
    except ConfigError as exc:
        print(f"bench: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (SplitError, OSError) as exc:
        print(f"bench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
