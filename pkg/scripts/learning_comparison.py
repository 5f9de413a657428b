"""Train each regressor on one scenario and fly the paired test scenario.

    python scripts/learning_comparison.py --pair wind --methods spgp,msgp
"""

import argparse
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from multisparse.pipeline import METHODS, MethodConfig, evaluate, generate, train_residual
from multisparse.scenario import load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
PAIRS = {
    "wind": ("wind_train", "wind_test"),
    "mass_inertia": ("mass_inertia_train", "mass_inertia_test"),
    "combined": ("combined_train", "combined_test"),
}


@dataclass
class ComparisonConfig:
    pair: str = "wind"
    methods: tuple = ("spgp", "msgp")
    seed: int = 0
    method: MethodConfig = field(default_factory=MethodConfig)


def run(cfg):
    train_name, test_name = PAIRS[cfg.pair]
    train = load_scenario(SCENARIOS / f"{train_name}.toml")
    test = load_scenario(SCENARIOS / f"{test_name}.toml")
    _, Q, Y = generate(train, cfg.seed)
    print(f"{train_name}: {Q.shape[0]} training rows")
    rows = {"nominal": evaluate(test)[1]}
    for method in cfg.methods:
        model = train_residual(method, Q, Y, cfg.method, cfg.seed, report=print)
        rows[method] = evaluate(test, model)[1]
    print(f"\n{test_name}      NMSE x      NMSE y      NMSE z")
    for name, v in rows.items():
        print(f"{name:12s} " + " ".join(f"{x:11.4g}" for x in v))
    return {k: np.asarray(v).tolist() for k, v in rows.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pair", choices=sorted(PAIRS), default="wind")
    ap.add_argument("--methods", default="spgp,msgp")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()
    methods = tuple(m for m in args.methods.split(",") if m)
    bad = set(methods) - set(METHODS)
    if bad:
        ap.error(f"unknown methods {sorted(bad)}")
    cfg = ComparisonConfig(args.pair, methods, args.seed)
    nmse = run(cfg)
    if args.out:
        doc = {"config": asdict(cfg), "nmse": nmse}
        Path(args.out).write_text(json.dumps(doc, indent=1))


if __name__ == "__main__":
    main()
