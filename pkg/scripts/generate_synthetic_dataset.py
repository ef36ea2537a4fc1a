from __future__ import annotations

import argparse
from pathlib import Path

from mean_field_dml.artifacts import write_json
from mean_field_dml.datasets import SyntheticSpec, generate_synthetic, save_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description="Generate a labelled Gaussian-cluster dataset")
    parser.add_argument("--num-classes", type=int, default=16)
    parser.add_argument("--per-class", type=int, default=50)
    parser.add_argument("--feature-dim", type=int, default=64)
    parser.add_argument("--noise-sigma", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", choices=["csv", "bin"], default="csv")
    parser.add_argument("--output", type=Path, default=Path("data/synthetic.csv"))
    args = parser.parse_args()

    spec = SyntheticSpec(
        num_classes=args.num_classes,
        per_class=args.per_class,
        feature_dim=args.feature_dim,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    save_dataset(generate_synthetic(spec), args.output, args.format)
    write_json(args.output.with_suffix(".json"), {"format": args.format, "synthetic": spec.as_dict()})


if __name__ == "__main__":
    main()
