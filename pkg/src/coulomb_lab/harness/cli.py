"""Command line entry point: ``coulomb-lab {equilibrium,sample,verify,estimate,report}``.

Every run writes into ``<out>/<command>-<digest>``, where the digest covers
the command, the config, the seed, the thread count and the tool version. An
existing run directory is never written into again.

Exit codes
----------
0  success
1  a verified contract or acceptance check failed
2  malformed config or potential (schema error)
3  missing equilibrium artifact
4  empty sample file
5  dimension mismatch
6  solver did not converge
7  any other library error
"""

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .. import __version__
from ..equilibrium import GridSpec, solve_equilibrium, solve_thermal_equilibrium
from ..errors import (
    CoulombLabError,
    DimensionMismatch,
    EmptySampleSet,
    MissingArtifact,
    NonConvergence,
    SchemaError,
)
from ..estimators import (
    _jsonable,
    bulk_windows,
    confinement_profile,
    count_in_ball,
    estimate_rho1,
    estimate_rho2,
    extreme_radius,
    poisson_tests,
    subharmonicity_test,
    vacuum_tail,
)
from ..potential import load_potential_spec, potential_from_dict
from ..sampler import GasParams, SampleSet, sample_chains
from . import acceptance
from .io import load_equilibrium, load_thermal, save_equilibrium, save_thermal
from .manifest import RunManifest, Timer, run_directory
from .report import write_report
from .schema import load_config
from .verify import run_verify

EXIT_OK, EXIT_CONTRACT, EXIT_SCHEMA, EXIT_ARTIFACT, EXIT_EMPTY, EXIT_DIM, EXIT_NONCONV, EXIT_OTHER = range(8)

log = logging.getLogger("coulomb_lab")


def resolve_threads(value):
    """--threads, else COULOMB_LAB_THREADS, else 1."""
    if value is None:
        env = os.environ.get("COULOMB_LAB_THREADS")
        if env is not None:
            try:
                value = int(env)
            except ValueError as exc:
                raise SchemaError(f"COULOMB_LAB_THREADS must be an integer, got {env!r}") from exc
    value = 1 if value is None else int(value)
    if value < 1:
        raise SchemaError("thread count must be >= 1")
    return value


def _apply_threads(n):
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _path(base, p):
    return p if os.path.isabs(p) else os.path.join(base, p)


def _potential(cfg, base):
    if "potential" in cfg:
        return potential_from_dict(cfg["potential"])
    if "potentialFile" in cfg:
        return load_potential_spec(_path(base, cfg["potentialFile"]))
    raise SchemaError("config needs 'potential' or 'potentialFile'")


def _grid(doc):
    return None if doc is None else GridSpec(doc.get("h"), doc.get("extent"), doc.get("geometry", "auto"))


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
    return path


def _start(command, cfg, args, threads):
    m = RunManifest(command, cfg, seed=args.seed, threads=threads)
    run_dir, existed = run_directory(args.out, m)
    return m, run_dir, existed


def _finish(m, run_dir, paths, timer, params=None, schedule=None):
    for p in paths:
        m.record(p, run_dir)
    m.wallClock = timer.seconds
    m.params = params
    m.schedule = schedule
    m.write(run_dir)
    print(run_dir)


def _strip_seconds(logdoc):
    return {k: v for k, v in (logdoc or {}).items() if k != "seconds"}


# ----------------------------------------------------------------------------
# subcommands


def cmd_equilibrium(args, cfg, base, threads):
    m, run_dir, existed = _start("equilibrium", cfg, args, threads)
    if existed:
        print(run_dir)
        return EXIT_OK
    p = _potential(cfg, base)
    with Timer() as timer:
        eq = solve_equilibrium(p, grid=_grid(cfg.get("grid")), tol=cfg.get("tol", 1e-9),
                               method=cfg.get("method", "auto"))
        timings = {"equilibrium": eq.log.get("seconds")}
        eq.log = _strip_seconds(eq.log)
        paths = list(save_equilibrium(eq, run_dir))
        logs = {"equilibrium": eq.log}
        th = cfg.get("thermal")
        if th:
            for theta in th["theta"]:
                t = solve_thermal_equilibrium(p, theta=theta, grid=_grid(th.get("grid")), eq=eq,
                                              tol=th.get("tol", 1e-8))
                paths += save_thermal(t, run_dir, name=f"thermal_theta{theta:g}")
                logs[f"thermal_theta{theta:g}"] = {"residual": t.residual, "iterations": len(t.history)}
        paths.append(_dump(logs, os.path.join(run_dir, "solver_log.json")))
    _finish(m, run_dir, paths, timer, schedule={"timings": timings})
    return EXIT_OK


def cmd_sample(args, cfg, base, threads):
    p = _potential(cfg, base)
    init = cfg.get("init", "equilibrium")
    eq = th = None
    N, beta = cfg["N"], cfg["beta"]
    params = GasParams(N, beta, p.dim, p)
    art = cfg.get("equilibriumArtifact")
    if init == "thermal":
        if art is None:
            raise MissingArtifact("init 'thermal' needs 'equilibriumArtifact'")
        th = load_thermal(_path(base, art), name=f"thermal_theta{params.theta:g}")
    elif init == "equilibrium":
        eq = load_equilibrium(_path(base, art)) if art else solve_equilibrium(p)
    params = GasParams(N, beta, p.dim, p, equilibrium=eq, thermal=th)
    m, run_dir, existed = _start("sample", cfg, args, threads)
    if existed:
        print(run_dir)
        return EXIT_OK
    chains = cfg.get("chains", 1)
    sched = cfg.get("schedule", {})
    schedule = {"burnIn": sched.get("burnIn", 200 * N), "thin": sched.get("thin", N),
                "samples": -(-cfg["samples"] // chains)}
    with Timer() as timer:
        S = sample_chains(params, schedule, seed=args.seed, chains=chains, threads=threads)
        path = os.path.join(run_dir, "samples.bin")
        S.save(path)
        diag = {k: S.header[k] for k in ("acceptance", "autocorrelation", "chains", "samples")}
        dpath = _dump(diag, os.path.join(run_dir, "diagnostics.json"))
    _finish(m, run_dir, [path, dpath], timer, params=params.to_dict(), schedule=schedule)
    return EXIT_OK


def _only_list(only):
    return [s.strip() for s in only.split(",") if s.strip()] if only else None


def _print_verify(doc):
    failed = []
    if "criteria" in doc:
        for r in doc["criteria"]:
            print(f"criterion {r['id']:2d} {'PASS' if r['passed'] else 'FAIL'}  {r['title']}")
            failed += [(f"criterion {r['id']}", c["name"]) for c in r["checks"] if not c["passed"]]
    else:
        for g, cs in doc.items():
            for c in cs:
                print(f"{g:10s} {c['name']:40s} {c['value']:.3e} < {c['threshold']:g}  "
                      f"{'PASS' if c['passed'] else 'FAIL'}")
                if not c["passed"]:
                    failed.append((g, c["name"]))
    return failed


def cmd_verify(args, cfg, base, threads):
    cfg = cfg or {"schemaVersion": 1, "kind": "verify"}
    only = _only_list(args.only)
    # --only changes what runs, so it is part of the run's identity
    m, run_dir, existed = _start("verify", dict(cfg, _only=only), args, threads)
    name = "acceptance.json" if cfg["kind"] == "acceptance" else "verify.json"
    if existed:
        with open(os.path.join(run_dir, name)) as fh:
            doc = json.load(fh)
        print(run_dir)
    else:
        with Timer() as timer:
            if cfg["kind"] == "acceptance":
                crit = json.loads(json.dumps(cfg["criteria"]))
                ids = [int(k) for k in crit]
                if only:
                    try:
                        want = [int(k) for k in only]
                    except ValueError as exc:
                        raise SchemaError(f"--only takes criterion ids for an acceptance config, got {only}") from exc
                    missing = [k for k in want if k not in ids]
                    if missing:
                        raise SchemaError(f"criteria {missing} are not in this config")
                    ids = want
                for k in ids:
                    crit[str(k)].setdefault("threads", threads)
                doc = {"criteria": _jsonable(acceptance.run_criteria(sorted(ids), crit))}
            else:
                doc = _jsonable(run_verify(only or cfg.get("groups"), seed=args.seed))
            out = _dump(doc, os.path.join(run_dir, name))
        _finish(m, run_dir, [out], timer)
    failed = _print_verify(doc)
    if failed:
        print(f"first failing contract: {failed[0][0]}: {failed[0][1]}", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_OK


def _check_dim(vec, dim, what):
    if np.asarray(vec, dtype=float).reshape(-1).size != dim:
        raise DimensionMismatch(f"{what} has dimension {np.asarray(vec).size}, samples are {dim}-dimensional")


def _run_estimator(spec, S, eq, params):
    name = spec["name"]
    d = S.dim
    if name == "rho1":
        est = estimate_rho1(S, GridSpec(spec.get("h", 0.5), spec.get("extent")))
        return {"kind": "rho1", "summary": {"integral": est.integral, "leakage": est.leakage, "h": est.h},
                "table": est.to_table()}
    if name == "count_in_ball":
        rows = []
        for c, r in spec["balls"]:
            _check_dim(c, d, "ball center")
            rows.append(count_in_ball(S, c, r, spec.get("gammas", ())).to_dict())
        return {"kind": "count_in_ball", "summary": {"balls": len(rows)}, "table": rows}
    if name == "rho2":
        for c in spec["centers"]:
            _check_dim(c, d, "rho2 center")
        return estimate_rho2(S, spec["centers"], spec["radialBins"], spec.get("eps", 0.5)).to_dict()
    if name == "subharmonicity":
        for c, _ in spec["balls"]:
            _check_dim(c, d, "ball center")
        rho = estimate_rho1(S, GridSpec(spec.get("h", 0.5), spec.get("extent")))
        return subharmonicity_test(rho, eq, params, spec["balls"], nsigma=spec.get("nsigma", 3.0)).to_dict()
    if name == "confinement":
        return confinement_profile(S, eq, params, shell_width=spec.get("shellWidth", 0.5)).to_dict()
    if name == "extreme_radius":
        rep = extreme_radius(S, beta=params.beta)
        rep.summary.pop("maxima")
        return rep.to_dict()
    if name == "vacuum_tail":
        return vacuum_tail(S, eq, params, np.asarray(spec.get("gammas", np.linspace(0.05, 3.0, 60)))).to_dict()
    if name == "poisson":
        if d != 2:
            raise DimensionMismatch("bulk windows are two-dimensional")
        return poisson_tests(S, bulk_windows(eq, S.N, side=spec.get("side", 1.0))).to_dict()
    raise SchemaError(f"unknown estimator {name!r}")


def _table_csv(table):
    buf = io.StringIO()
    if table:
        keys = list(table[0].keys())
        w = csv.DictWriter(buf, fieldnames=keys)
        w.writeheader()
        for row in table:
            w.writerow({k: json.dumps(_jsonable(row.get(k))) if isinstance(row.get(k), (list, dict, np.ndarray))
                        else _jsonable(row.get(k)) for k in keys})
    return buf.getvalue()


def cmd_estimate(args, cfg, base, threads):
    paths = cfg["samples"] if isinstance(cfg["samples"], list) else [cfg["samples"]]
    sets = []
    for p in paths:
        p = _path(base, p)
        if os.path.isdir(p):
            p = os.path.join(p, "samples.bin")
        if not os.path.exists(p):
            raise SchemaError(f"sample file {p} not found")
        sets.append(SampleSet.load(p))
    if len({(s.N, s.dim) for s in sets}) > 1:
        raise DimensionMismatch("sample files differ in N or dimension")
    S = sets[0] if len(sets) == 1 else SampleSet(np.concatenate([s.positions for s in sets]), dict(sets[0].header))
    hdr_params = S.header.get("params") or {}
    if "potential" in cfg or "potentialFile" in cfg:
        pot = _potential(cfg, base)
    elif "potential" in hdr_params:
        pot = potential_from_dict(hdr_params["potential"])
    else:
        raise SchemaError("no potential in config or sample header")
    if pot.dim != S.dim:
        raise DimensionMismatch(f"potential is {pot.dim}-dimensional, samples are {S.dim}-dimensional")
    beta = cfg.get("beta", hdr_params.get("beta"))
    if beta is None:
        raise SchemaError("beta missing from config and sample header")
    art = cfg.get("equilibriumArtifact")
    eq = load_equilibrium(_path(base, art)) if art else solve_equilibrium(pot)
    if eq.dim != S.dim:
        raise DimensionMismatch("equilibrium artifact and samples differ in dimension")
    params = GasParams(S.N, beta, S.dim, pot)
    m, run_dir, existed = _start("estimate", cfg, args, threads)
    if existed:
        print(run_dir)
        return EXIT_OK
    written, index = [], []
    with Timer() as timer:
        for k, spec in enumerate(cfg["estimators"]):
            rep = _jsonable(_run_estimator(spec, S, eq, params))
            stem = f"{k:02d}_{spec['name']}"
            jp = _dump(rep, os.path.join(run_dir, stem + ".json"))
            cp = os.path.join(run_dir, stem + ".csv")
            with open(cp, "w") as fh:
                fh.write(_table_csv(rep.get("table", [])))
            written += [jp, cp]
            index.append({"estimator": spec["name"], "json": os.path.basename(jp), "csv": os.path.basename(cp)})
        written.append(_dump({"samples": S.M, "N": S.N, "dim": S.dim, "reports": index},
                             os.path.join(run_dir, "index.json")))
    _finish(m, run_dir, written, timer, params=params.to_dict())
    return EXIT_OK


def cmd_report(args, cfg, base, threads):
    os.makedirs(args.out, exist_ok=True)
    path = write_report(args.inputs or [args.out], os.path.join(args.out, "report.md"))
    print(path)
    return EXIT_OK


COMMANDS = {"equilibrium": cmd_equilibrium, "sample": cmd_sample, "verify": cmd_verify,
            "estimate": cmd_estimate, "report": cmd_report}
EXPECTED_KIND = {"equilibrium": ("equilibrium",), "sample": ("sample",), "verify": ("verify", "acceptance"),
                 "estimate": ("estimate",)}


def build_parser():
    ap = argparse.ArgumentParser(prog="coulomb-lab", description="Coulomb gas numerical laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, default=None, help="defaults to the config's seed, else 0")
        sp.add_argument("--threads", type=int, default=None, help="defaults to $COULOMB_LAB_THREADS, else 1")
        sp.add_argument("--only", default=None, help="comma-separated groups (verify) or criterion ids (acceptance)")
        sp.add_argument("--out", default="runs", help="output root")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "report":
            sp.add_argument("inputs", nargs="*", help="run directories or roots to summarize")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        threads = resolve_threads(args.threads)
        _apply_threads(threads)
        cfg, base = None, os.getcwd()
        if args.config:
            cfg, base = load_config(args.config)
            if args.command in EXPECTED_KIND and cfg["kind"] not in EXPECTED_KIND[args.command]:
                raise SchemaError(f"'{args.command}' cannot run a config of kind {cfg['kind']!r}")
        elif args.command not in ("verify", "report"):
            raise SchemaError(f"'{args.command}' needs --config")
        if args.seed is None:
            args.seed = (cfg or {}).get("seed", 0)
        return COMMANDS[args.command](args, cfg, base, threads)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except EmptySampleSet as exc:
        print(f"empty sample file: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except DimensionMismatch as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIM
    except NonConvergence as exc:
        print(f"solver did not converge: {exc} (residual {exc.residual})", file=sys.stderr)
        return EXIT_NONCONV
    except (CoulombLabError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
