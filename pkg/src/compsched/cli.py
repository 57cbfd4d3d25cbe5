"""Command line front end: one subcommand per experiment kind.

Each subcommand takes --config <file>, --seed <u64> and --out <dir>; outputs
are CSV tables plus a JSON run manifest in the output directory.
"""
from __future__ import annotations

import argparse
import os

from . import anglestats, harness


def _load_config(args) -> harness.ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = harness.parse_config(fh.read())
    else:
        cfg = harness.ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.drops is not None:
        cfg.drops = args.drops
    return cfg


def _add_common(sub):
    sub.add_argument("--config", help="experiment config file (key = value lines)")
    sub.add_argument("--seed", type=int, help="master seed override")
    sub.add_argument("--drops", type=int, help="drop count override")
    sub.add_argument("--out", required=True, help="output directory")


def cmd_angle_pdf(args) -> None:
    cfg = _load_config(args)
    cfg.experiment = "angle-pdf"
    os.makedirs(args.out, exist_ok=True)
    tables = harness.run_angle_pdf(cfg)
    for (d1, d2), t in tables.items():
        tag = f"d1_{d1:g}_d2_{d2:g}".replace("-", "m")
        anglestats.pdf_table_to_csv(os.path.join(args.out, f"angle_pdf_mc_{tag}.csv"),
                                    t["x"], t["mc"])
        anglestats.pdf_table_to_csv(
            os.path.join(args.out, f"angle_pdf_semianalytic_{tag}.csv"),
            t["x"], t["semianalytic"])
    harness.write_manifest(os.path.join(args.out, "manifest.json"), cfg)


def cmd_tightness(args) -> None:
    cfg = _load_config(args)
    cfg.experiment = "tightness"
    os.makedirs(args.out, exist_ok=True)
    table = harness.run_tightness(cfg)
    harness.write_tightness_csv(os.path.join(args.out, "tightness.csv"), table)
    harness.write_manifest(os.path.join(args.out, "manifest.json"), cfg)


def cmd_sweep(args) -> None:
    cfg = _load_config(args)
    cfg.experiment = "sweep"
    os.makedirs(args.out, exist_ok=True)
    rows = harness.run_threshold_sweep(cfg)
    harness.write_sweep_csv(os.path.join(args.out, "sweep.csv"), rows)
    harness.write_manifest(os.path.join(args.out, "manifest.json"), cfg)


def cmd_campaign(args) -> None:
    cfg = _load_config(args)
    cfg.experiment = "campaign"
    os.makedirs(args.out, exist_ok=True)
    records = harness.run_cdf_campaign(cfg)
    bits = {}
    for name, rec in records.items():
        rec.to_csv(os.path.join(args.out, f"throughput_{name}.csv"))
        if rec.codebook_bits is not None:
            bits[name] = rec.codebook_bits
    harness.write_metrics_csv(os.path.join(args.out, "metrics.csv"), records)
    harness.write_manifest(os.path.join(args.out, "manifest.json"), cfg,
                           extra={"codebook_bits": bits} if bits else None)


def cmd_delay(args) -> None:
    cfg = _load_config(args)
    cfg.experiment = "delay"
    os.makedirs(args.out, exist_ok=True)
    records = harness.run_delay_campaign(cfg)
    for speed, per_sched in records.items():
        for name, rec in per_sched.items():
            rec.to_csv(os.path.join(args.out, f"throughput_{name}_v{speed:g}.csv"))
    harness.write_manifest(os.path.join(args.out, "manifest.json"), cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="compsched",
                                     description="CoMP scheduling simulator")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("angle-pdf", cmd_angle_pdf), ("tightness", cmd_tightness),
                     ("sweep", cmd_sweep), ("campaign", cmd_campaign),
                     ("delay", cmd_delay)):
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(func=fn)
    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
