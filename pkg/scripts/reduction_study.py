"""Hardy-operator verdicts against grid Sobolev ratios for each reduction row.

Usage: python3 scripts/reduction_study.py [--config configs/quick.json] [--out-dir results/]
"""
import argparse
import sys

from rilab import cli_reports as cr


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None, help="JSON config; the built-in default if omitted")
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("--format", choices=["csv", "json"], default="csv")
    args = ap.parse_args(argv)
    cfg = cr.load_config(args.config)
    recs = cr.run_reduction_study({"seed": cfg.get("seed", 0), "reductions": cfg.get("reductions", {})}, cr.config_hash(cfg))
    for r in recs:
        print(f"{r.row_id:24s} {r.verdict:10s} {r.wall_time:7.2f}s", file=sys.stderr)
    cr.emit(recs, args.format, args.out_dir, "reduction_study")
    return 0 if all(r.passed for r in recs) else 1


if __name__ == "__main__":
    sys.exit(main())
