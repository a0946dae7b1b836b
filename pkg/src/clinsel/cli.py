"""Command line entry point: ``clinsel run|generate|validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .dataset import write_csv
from .errors import ClinselError, ConfigError
from .pipeline import emit_report, results_rows, run_pipeline
from .synthgen import generate

log = logging.getLogger("clinsel")


def _parser():
    p = argparse.ArgumentParser(prog="clinsel", description=__doc__)
    p.add_argument("--version", action="version", version=f"clinsel {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=None, help="worker threads (results do not depend on it)")

    run = sub.add_parser("run", help="run the full protocol and write reports")
    common(run)
    run.add_argument("--dump-imputations", action="store_true", help="also write every completed dataset")
    run.add_argument("--output-dir", default=None)

    gen = sub.add_parser("generate", help="write a synthetic cohort CSV")
    common(gen)
    gen.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="check a config file without running anything")
    common(val)
    return p


def _print_table(report, outcome):
    print(f"\n{outcome}")
    print(f"{'Model':<22}{'AUC':>8}  Selected features (order)")
    for r in results_rows(report, outcome):
        auc = "-" if r["auc"] != r["auc"] else f"{r['auc']:.3f}"
        print(f"{r['model']:<22}{auc:>8}  {r['selected_features'].replace(';', ', ') or '(none)'}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(
            args.config,
            seed=args.seed,
            jobs=args.jobs,
            dump_imputations=True if getattr(args, "dump_imputations", False) else None,
            output_dir=getattr(args, "output_dir", None),
        )
        if args.command == "validate":
            print(f"{args.config}: ok")
            return 0
        if args.command == "generate":
            if cfg.generator is None:
                raise ConfigError("generate needs 'input = generator' or generator.* keys in the config")
            write_csv(generate(cfg.generator), args.out, na_token=cfg.na_token)
            print(f"wrote {args.out}")
            return 0
        report = run_pipeline(cfg)
        out = cfg.resolved_output_dir()
        manifest = emit_report(report, out)
        for outcome in cfg.outcomes:
            _print_table(report, outcome)
        print(f"\nwrote {len(manifest)} files to {out}")
        return 0
    except ClinselError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
