"""Command-line front end.

    multisparse generate --scenario S.toml --out data.csv
    multisparse train --method msgp --data data.csv --out model.zip
    multisparse simulate --scenario S.toml [--model model.zip] --out log.csv
    multisparse bench --sizes 3000,6000,12000 --out bench.json
    multisparse eval --scenario train.toml --test-scenario test.toml --out report.json

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 divergence.
"""

import argparse
import logging
import sys
import time
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from multisparse.archive import load_archive, save_archive
from multisparse.bench import (COMPLEXITY, UNCACHED, BenchConfig, BenchReport, median_latency,
                               run_bench, uncached_latency)
from multisparse.errors import (ConfigError, ContractError, IllConditionedKernel,
                                OptimizationFailed, SimulationDiverged)
from multisparse.gp import Dataset
from multisparse.pipeline import (METHODS, evaluate, generate,
                                  method_config_from_dict, read_dataset, train_residual,
                                  write_dataset, write_log)
from multisparse.quadsim import ResidualModel
from multisparse.scenario import load_scenario, tomllib

log = logging.getLogger("multisparse")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGED = 0, 2, 3, 4


def _load_toml(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _method_config(args):
    return method_config_from_dict(_load_toml(args.config).get("method", {}))


def _print_nmse(label, nmse):
    if nmse is None:
        print(f"{label}: no data (horizon shorter than the trim window)")
    else:
        print(f"{label}: NMSE x={nmse[0]:.12g} y={nmse[1]:.12g} z={nmse[2]:.12g}")


def cmd_generate(args):
    sc = load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    try:
        sim_log, Q, Y = generate(sc, seed)
    except SimulationDiverged as exc:
        if getattr(exc, "partial_log", None) is not None and args.log:
            write_log(args.log, exc.partial_log)
        raise
    write_dataset(args.out, sim_log.t, Q, Y)
    if args.log:
        write_log(args.log, sim_log)
    print(f"wrote {len(sim_log)} rows to {args.out}")
    return EXIT_OK


def cmd_train(args):
    cfg = _method_config(args)
    _, Q, Y = read_dataset(args.data)
    if Q.shape[0] == 0:
        raise ConfigError(f"{args.data} has no rows")
    seed = 0 if args.seed is None else args.seed
    model = train_residual(args.method, Q, Y, cfg, seed, report=print)
    save_archive(args.out, model)
    print(f"trained {args.method} on {Q.shape[0]} rows in "
          f"{model.info['timing']['train_s']:.2f} s; archive {args.out}")
    return EXIT_OK


def cmd_simulate(args):
    sc = load_scenario(args.scenario)
    model = None
    if args.model:
        model = load_archive(args.model)
        if not isinstance(model, ResidualModel):
            raise ConfigError(f"{args.model} does not hold a residual model bundle")
        if args.method and args.method != model.method:
            raise ConfigError(f"archive holds {model.method}, not {args.method}")
    label = model.method if model else "nominal"
    try:
        sim_log, nmse = evaluate(sc, model)
    except SimulationDiverged as exc:
        partial = getattr(exc, "partial_log", None)
        if partial is not None and args.out:
            write_log(args.out, partial)
        last = partial.t[-1] if partial is not None and len(partial) else sc.t0
        print(f"diverged at t={exc.t}; last good sample t={last}", file=sys.stderr)
        raise
    if args.out:
        write_log(args.out, sim_log)
    _print_nmse(label, nmse)
    return EXIT_OK


def _sizes(text):
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"--sizes must be comma-separated integers: {text!r}") from exc
    if not sizes or list(sizes) != sorted(sizes) or sizes[0] < 2:
        raise ConfigError("--sizes must be ascending integers >= 2")
    return sizes


def _bench_config(args):
    doc = _load_toml(args.config).get("bench", {})
    known = {f.name for f in fields(BenchConfig)} - {"opt", "sizes", "cached", "uncached"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown bench config keys: {sorted(unknown)}")
    cfg = replace(BenchConfig(), **doc)
    kw = {}
    if args.sizes:
        kw["sizes"] = _sizes(args.sizes)
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.mode == "cached":
        kw["uncached"] = False
    elif args.mode == "uncached":
        kw["cached"] = False
    if args.methods:
        kw["methods"] = _methods(args.methods)
    if args.timeout is not None:
        kw["timeout_s"] = args.timeout
    return replace(cfg, **kw)


def _methods(text):
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
    return methods


def cmd_bench(args):
    cfg = _bench_config(args)
    master = None
    if args.data:
        _, Q, Y = read_dataset(args.data)
        master = Dataset(Q, Y[:, 0])
    try:
        report = run_bench(cfg, master)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json())
    return EXIT_OK


def cmd_eval(args):
    """Train every method on one scenario, fly the test scenario with each."""
    train_sc = load_scenario(args.scenario)
    test_sc = load_scenario(args.test_scenario)
    cfg = _method_config(args)
    methods = _methods(args.methods) if args.methods else METHODS
    seed = train_sc.seed if args.seed is None else args.seed
    _, Q, Y = generate(train_sc, seed)
    print(f"training data: {Q.shape[0]} rows")
    _, nominal = evaluate(test_sc)
    _print_nmse("nominal", nominal)
    nmse = {"nominal": None if nominal is None else nominal.tolist()}
    cells = []
    rng = np.random.default_rng(seed)
    Qtest = Q[rng.choice(Q.shape[0], size=min(1000, Q.shape[0]), replace=False)]
    for method in methods:
        model = train_residual(method, Q, Y, cfg, seed)
        try:
            _, err = evaluate(test_sc, model)
        except SimulationDiverged as exc:
            print(f"{method}: diverged at t={exc.t}")
            err = None
        _print_nmse(method, err)
        nmse[method] = None if err is None else err.tolist()
        reg = model.regressors[0]
        med, reps = uncached_latency(lambda q: UNCACHED[method](reg, q), Qtest,
                                      budget=5.0, max_repeats=50, timeout=120.0)
        cells.append({"method": method, "sizes": model.info["sizes"],
                      "train_s": model.info["timing"]["train_s"],
                      "cached_ms": 1e3 * median_latency(lambda q: reg.predict_mean(q[None, :]),
                                                         Qtest),
                      "uncached_ms": None if med is None else 1e3 * med,
                      "uncached_repeats": reps, "status": "ok", "note": ""})
    report = BenchReport(cells, {m: COMPLEXITY[m] for m in methods},
                         {"train_scenario": train_sc.name, "test_scenario": test_sc.name,
                          "seed": seed, "method": cfg.__dict__}, nmse)
    if args.out:
        Path(args.out).write_text(report.to_json())
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="multisparse", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a scenario and write residual data")
    g.add_argument("--scenario", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--log", help="also write the closed-loop log")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit six residual regressors and archive them")
    t.add_argument("--method", required=True, choices=METHODS)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="TOML with a [method] table")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="closed loop with an optional learned residual")
    s.add_argument("--scenario", required=True)
    s.add_argument("--model")
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="prediction latency against training size")
    b.add_argument("--sizes")
    b.add_argument("--methods")
    b.add_argument("--data", help="master dataset CSV (first target column is used)")
    b.add_argument("--config", help="TOML with a [bench] table")
    b.add_argument("--out")
    b.add_argument("--seed", type=int)
    b.add_argument("--timeout", type=float, help="per-cell budget in seconds")
    mode = b.add_mutually_exclusive_group()
    mode.add_argument("--cached", dest="mode", action="store_const", const="cached")
    mode.add_argument("--uncached", dest="mode", action="store_const", const="uncached")
    b.set_defaults(func=cmd_bench, mode=None)

    e = sub.add_parser("eval", help="train on one scenario and compare methods on another")
    e.add_argument("--scenario", required=True, help="training scenario")
    e.add_argument("--test-scenario", required=True)
    e.add_argument("--methods")
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_eval)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t = time.perf_counter()
    try:
        code = args.func(args)
    except SimulationDiverged as exc:
        print(f"error: simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IllConditionedKernel, OptimizationFailed, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - t)
    return code


if __name__ == "__main__":
    sys.exit(main())
