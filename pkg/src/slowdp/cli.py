"""Command-line interface.

Subcommands: sample, privatize, policy-eval, bounds, calibrate, experiment,
synth-data.  Mechanism and noise arguments accept either inline JSON or a
path to a JSON file.  Exit code 0 on success; any error prints one
diagnostic line to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .bounds import additive_prediction_interval, transform_prediction_interval
from .distributions import RngStream, noise_from_json, noise_sample
from .errors import SlowDPError
from .harness import (
    ExperimentConfig,
    calibrate,
    load_csv,
    run_experiment,
    synth_dataset,
    write_dataset_csv,
    write_report_csvs,
)
from .mechanisms import (
    AdditiveMechanism,
    TransformationMechanism,
    UnitSplitGaussian,
    mechanism_from_json,
    mechanism_to_json,
    privatize,
)
from .policy import (
    DifferingPair,
    PolicyFlavor,
    bounded_additive_prdp,
    bounded_transform_policy,
    policy_for_mechanism,
    prdp_to_przcdp,
)


def _load_json_arg(text: str):
    """Inline JSON object, or a path to a file containing one."""
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    return json.loads(Path(text).read_text())


def _parse_values(args) -> list:
    values = []
    if args.values:
        values.extend(float(v) for v in args.values.split(","))
    if args.values_file:
        with open(args.values_file) as handle:
            values.extend(float(line) for line in handle if line.strip())
    if not values:
        raise SlowDPError("no record values given (use --values or --values-file)")
    return values


def _cmd_sample(args) -> int:
    noise = noise_from_json(_load_json_arg(args.noise))
    rng = RngStream(seed=args.seed, stream_id=args.stream)
    draws = noise_sample(noise, rng, size=args.n)
    for value in draws:
        print(repr(float(value)))
    return 0


def _cmd_privatize(args) -> int:
    mech = mechanism_from_json(_load_json_arg(args.mechanism))
    rng = RngStream(seed=args.seed, stream_id=args.stream)
    out = privatize(mech, args.q, rng)
    if args.clamp:
        out = max(out, 0.0)
    print(repr(float(out)))
    return 0


def _cmd_policy_eval(args) -> int:
    mech = mechanism_from_json(_load_json_arg(args.mechanism))
    values = _parse_values(args)
    writer = csv.writer(sys.stdout)
    writer.writerow(["value", "prdp_loss", "przcdp_loss"])

    bounded = args.pair_delta is not None or args.pair_ratio is not None
    if bounded and args.pair_delta is not None and args.pair_ratio is not None:
        raise SlowDPError("give at most one of --pair-delta / --pair-ratio")

    for value in values:
        if bounded:
            other = value + args.pair_delta if args.pair_delta is not None \
                else value * args.pair_ratio
            pair = DifferingPair(value, max(other, 0.0))
            if isinstance(mech, TransformationMechanism):
                prdp, przcdp = None, bounded_transform_policy(
                    mech.transform, mech.sigma, pair)
            elif isinstance(mech, AdditiveMechanism):
                prdp = bounded_additive_prdp(mech.noise, pair)
                przcdp = prdp_to_przcdp(prdp)
            else:
                raise SlowDPError(
                    "bounded-neighbor policies cover transformation and "
                    "additive mechanisms only")
        else:
            policy = policy_for_mechanism(mech)
            przcdp = policy.przcdp_loss(value)
            prdp = policy.prdp_loss(value) if policy.flavor is PolicyFlavor.PRDP \
                else None
        writer.writerow([repr(value),
                         "" if prdp is None else repr(float(prdp)),
                         repr(float(przcdp))])
    return 0


def _cmd_bounds(args) -> int:
    mech = mechanism_from_json(_load_json_arg(args.mechanism))
    if isinstance(mech, TransformationMechanism):
        interval = transform_prediction_interval(
            mech.transform, mech.sigma, mech.estimator, args.q, args.coverage)
    elif isinstance(mech, AdditiveMechanism):
        interval = additive_prediction_interval(mech.noise, args.q, args.coverage)
    elif isinstance(mech, UnitSplitGaussian):
        from .distributions import GaussianNoise
        interval = additive_prediction_interval(GaussianNoise(mech.sigma),
                                                args.q, args.coverage)
    else:
        raise SlowDPError(f"no interval rule for {mech!r}")
    print(json.dumps({"lo": interval.lo, "hi": interval.hi,
                      "coverage": interval.coverage}))
    return 0


def _cmd_calibrate(args) -> int:
    mech = mechanism_from_json(_load_json_arg(args.mechanism))
    solved = calibrate(mech, target_sd=args.target_sd, reference_q=args.reference_q)
    print(json.dumps(mechanism_to_json(solved)))
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(_load_json_arg(args.config))
    if args.seed is not None:
        import dataclasses
        cfg = dataclasses.replace(cfg, seed=args.seed)
    ds = load_csv(args.data, cfg.group_columns, cfg.value_column)
    report = run_experiment(ds, cfg)
    paths = write_report_csvs(report, args.out)
    if not args.no_plots:
        from .plots import render_report_figures
        paths.update(render_report_figures(report, args.out))
    print(f"wrote {len(paths)} report files to {args.out} "
          f"({len(report.groups)} groups, {report.record_values.size} records; "
          f"losses: {report.loss_convention})")
    return 0


def _cmd_synth_data(args) -> int:
    ds = synth_dataset(n_records=args.records, n_groups=args.groups, seed=args.seed,
                       value_median=args.value_median,
                       outlier_frac=args.outlier_frac,
                       outlier_scale=args.outlier_scale)
    write_dataset_csv(ds, args.out)
    print(f"wrote {len(ds.records)} synthetic records "
          f"({len(set(k for k, _ in ds.records))} groups) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slowdp",
        description="Slowly scaling per-record differential privacy toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw from a noise distribution")
    p.add_argument("--noise", required=True, help="noise spec JSON or path")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("privatize", help="privatize one query value")
    p.add_argument("--mechanism", required=True, help="mechanism JSON or path")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--clamp", action="store_true",
                   help="clamp the release at zero (post-processing)")
    p.set_defaults(fn=_cmd_privatize)

    p = sub.add_parser("policy-eval",
                       help="per-record privacy losses for a mechanism")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--values", help="comma-separated record values")
    p.add_argument("--values-file", help="file with one record value per line")
    p.add_argument("--pair-delta", type=float, default=None,
                   help="bounded mode: differing pair r' = r + delta")
    p.add_argument("--pair-ratio", type=float, default=None,
                   help="bounded mode: differing pair r' = ratio * r")
    p.set_defaults(fn=_cmd_policy_eval)

    p = sub.add_parser("bounds", help="prediction interval for a mechanism")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--coverage", type=float, default=0.95)
    p.set_defaults(fn=_cmd_bounds)

    p = sub.add_parser("calibrate",
                       help="solve a mechanism parameter for a target sd")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--target-sd", type=float, required=True)
    p.add_argument("--reference-q", type=float, default=0.0,
                   help="query value at which transformation mechanisms are "
                        "calibrated (e.g. the attribute median)")
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("experiment", help="run the group-by-sum pipeline")
    p.add_argument("--data", required=True, help="input CSV with header")
    p.add_argument("--config", required=True, help="experiment config JSON or path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--no-plots", action="store_true",
                   help="skip rendering figures next to the CSVs")
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("synth-data",
                       help="generate a synthetic (non-confidential) dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--records", type=int, default=100_000)
    p.add_argument("--groups", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--value-median", type=float, default=100.0)
    p.add_argument("--outlier-frac", type=float, default=0.003)
    p.add_argument("--outlier-scale", type=float, default=1000.0)
    p.set_defaults(fn=_cmd_synth_data)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SlowDPError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
