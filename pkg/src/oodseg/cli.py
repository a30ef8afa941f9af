"""Command-line interface: run, eval, sweep, baseline.

Configuration precedence, lowest to highest: built-in Cityscapes defaults,
config file (`key = value` lines, keys matching the flag names), --profile,
explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import OodsegError
from .metrics import evaluate_dataset
from .pipeline import (
    PROFILES,
    PipelineConfig,
    SweepGrid,
    run_baseline,
    run_dataset,
    run_sample,
    sweep,
    write_outputs,
)
from .tensor_io import FEATURES_SUFFIX, load_features, load_logits, load_mask
from .upsample import MODES as UPSAMPLE_MODES
from .ood_classifier import SCORE_MODES

# Flag name -> (PipelineConfig field, coercion)
_CONFIG_KEYS = {
    "k": ("k", int),
    "tau": ("tau", float),
    "ratio-threshold": ("ratio_threshold", float),
    "seed": ("seed", int),
    "upsample": ("upsample_mode", str),
    "score": ("score_mode", str),
    "kmeans-max-iter": ("kmeans_max_iter", int),
    "kmeans-tol": ("kmeans_tol", float),
}


def _add_config_flags(parser):
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument("--profile", choices=sorted(PROFILES))
    parser.add_argument("--k", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--ratio-threshold", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--upsample", choices=UPSAMPLE_MODES)
    parser.add_argument("--score", choices=SCORE_MODES)
    parser.add_argument("--kmeans-max-iter", type=int)
    parser.add_argument("--kmeans-tol", type=float)


def parse_config_file(path: Path) -> dict:
    """Parse `key = value` lines; '#' starts a comment; keys match flag names."""
    overrides = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        field, coerce = _CONFIG_KEYS[key]
        overrides[field] = coerce(value)
    return overrides


def build_config(args) -> PipelineConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    if getattr(args, "profile", None):
        values.update(PROFILES[args.profile])
    for flag, (field, _) in _CONFIG_KEYS.items():
        cli_value = getattr(args, flag.replace("-", "_"), None)
        if cli_value is not None:
            values[field] = cli_value
    return PipelineConfig(**values)


def _cmd_run(args) -> int:
    config = build_config(args)
    features = load_features(args.features)
    logits = load_logits(args.logits)
    result = run_sample(features, logits, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = Path(args.features).name
    if name.endswith(FEATURES_SUFFIX):
        name = name[: -len(FEATURES_SUFFIX)]
    else:
        name = Path(args.features).stem
    write_outputs(out_dir, name, result)
    ood_clusters = [s.cluster for s in result.stats if s.is_ood]
    print(f"{name}: {int(result.mask.sum())} OoD pixels, clusters flagged: {ood_clusters}")
    if args.gt:
        gt = load_mask(args.gt)
        report = evaluate_dataset([(result.score_map, gt)])
        print(f"{name}: ap={report.ap:.6f} fpr95={report.fpr_at_95_tpr:.6f} "
              f"(n_pos={report.n_pos}, n_neg={report.n_neg})")
    return 0


def _cmd_eval(args) -> int:
    config = build_config(args)
    report = run_dataset(
        args.dataset, config, args.out, jobs=args.jobs, skip_bad=args.skip_bad
    )
    print(f"ap={report.ap:.6f} fpr95={report.fpr_at_95_tpr:.6f} "
          f"(n_pos={report.n_pos}, n_neg={report.n_neg})")
    return 0


def _parse_list(text: str, coerce):
    return [coerce(part) for part in text.split(",") if part.strip()]


def _cmd_sweep(args) -> int:
    base = build_config(args)
    grid = SweepGrid(
        k_values=_parse_list(args.grid_k, int),
        tau_values=_parse_list(args.grid_tau, float),
        ratio_values=_parse_list(args.grid_ratio_threshold, float),
    )
    rows = sweep(args.dataset, grid, base, args.out)
    for config, report in rows:
        print(f"k={config.k} tau={config.tau} T={config.ratio_threshold} "
              f"ap={report.ap:.6f} fpr95={report.fpr_at_95_tpr:.6f}")
    return 0


def _cmd_baseline(args) -> int:
    report = run_baseline(args.dataset, args.out, jobs=args.jobs)
    print(f"baseline ap={report.ap:.6f} fpr95={report.fpr_at_95_tpr:.6f} "
          f"(n_pos={report.n_pos}, n_neg={report.n_neg})")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodseg",
        description="Training-free OoD segmentation from pre-extracted features and logits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="score a single sample")
    p_run.add_argument("--features", required=True, type=Path)
    p_run.add_argument("--logits", required=True, type=Path)
    p_run.add_argument("--gt", type=Path)
    p_run.add_argument("--out", required=True, type=Path)
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="score and evaluate a dataset directory")
    p_eval.add_argument("--dataset", required=True, type=Path)
    p_eval.add_argument("--out", required=True, type=Path)
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--skip-bad", action="store_true",
                        help="log and continue past broken samples")
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid-search K, tau, and T")
    p_sweep.add_argument("--dataset", required=True, type=Path)
    p_sweep.add_argument("--out", required=True, type=Path)
    p_sweep.add_argument("--k", dest="grid_k", required=True,
                         help="comma-separated K values, e.g. 4,5,6")
    p_sweep.add_argument("--tau", dest="grid_tau", required=True,
                         help="comma-separated tau values")
    p_sweep.add_argument("--ratio-threshold", dest="grid_ratio_threshold", required=True,
                         help="comma-separated T values")
    p_sweep.add_argument("--config", type=Path)
    p_sweep.add_argument("--profile", choices=sorted(PROFILES))
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--upsample", choices=UPSAMPLE_MODES)
    p_sweep.add_argument("--score", choices=SCORE_MODES)
    p_sweep.add_argument("--kmeans-max-iter", type=int)
    p_sweep.add_argument("--kmeans-tol", type=float)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_base = sub.add_parser("baseline", help="no-clustering -max_logit reference")
    p_base.add_argument("--dataset", required=True, type=Path)
    p_base.add_argument("--out", required=True, type=Path)
    p_base.add_argument("--jobs", type=int, default=1)
    p_base.set_defaults(func=_cmd_baseline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except OodsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
