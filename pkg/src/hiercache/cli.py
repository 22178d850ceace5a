"""Command-line surface: gen, corrupt, encode, run, report, paramcount.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import json
import sys

import numpy as np

from .adapt import AdaptParams
from .cache import param_count
from .datagen import CorruptionType, ShiftSpec, corrupt, gen_stream
from .encoding import encode_cloud
from .errors import EngineError, FormatError, ParameterError
from .fileio import (load_bank, load_stream, read_report_rows, save_bank,
                     save_stream, summarize_rows, write_report_csv,
                     write_report_summary)
from .pipeline import EngineConfig, Mode, run_stream

_CONFIG_KEYS = {"k_shots", "parts", "alpha_g", "alpha_l", "beta_g", "beta_l",
                "tau", "mode", "seed", "admit_before_compute"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{message}\n\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="hiercache",
                     description="Streaming test-time adaptation over embedding "
                                 "streams with a hierarchical feature cache.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate a synthetic shifted stream and bank")
    p.add_argument("--classes", type=int, default=ShiftSpec.class_count)
    p.add_argument("--dim", type=int, default=ShiftSpec.dim)
    p.add_argument("--samples-per-class", type=int, default=ShiftSpec.samples_per_class)
    p.add_argument("--sigma", type=float, default=ShiftSpec.intra_class_noise,
                   help="intra-class feature noise")
    p.add_argument("--delta", type=float, default=ShiftSpec.shift_magnitude,
                   help="systematic shift magnitude along one fixed direction")
    p.add_argument("--patches", type=int, default=ShiftSpec.patch_count)
    p.add_argument("--patch-noise", type=float, default=ShiftSpec.patch_noise)
    p.add_argument("--tau", type=float, default=0.01, help="bank softmax temperature")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream-out", required=True)
    p.add_argument("--bank-out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("corrupt", help="apply one atomic corruption to a cloud (.npy)")
    p.add_argument("--in", dest="infile", required=True, help="input (N,3) .npy cloud")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in CorruptionType])
    p.add_argument("--severity", type=int, default=2, help="severity level 1..5")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("encode", help="encode cloud files (.npy) into a feature stream")
    p.add_argument("clouds", nargs="+", help="input (N,3) .npy cloud files")
    p.add_argument("--out", required=True)
    p.add_argument("--keypoints", type=int, default=64, help="FPS key points per cloud")
    p.add_argument("--neighbors", type=int, default=32, help="kNN patch size")
    p.add_argument("--dim", type=int, default=64, help="encoded feature dimension")
    p.add_argument("--classes", type=int, default=0,
                   help="class count stamped into the stream header (0 = unknown)")
    p.add_argument("--seed", type=int, default=0, help="projection seed")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("run", help="run the adaptation engine over a stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--config", help="JSON config; explicit flags override it")
    p.add_argument("--k-shots", type=int, default=None, help="per-class cache capacity")
    p.add_argument("--parts", type=int, default=None, help="part centers per object")
    p.add_argument("--alpha-g", type=float, default=None)
    p.add_argument("--alpha-l", type=float, default=None)
    p.add_argument("--beta-g", type=float, default=None)
    p.add_argument("--beta-l", type=float, default=None)
    p.add_argument("--tau", type=float, default=None,
                   help="override the bank's softmax temperature")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--admit-before-compute", action=argparse.BooleanOptionalAction,
                   default=None, help="admit the sample before computing its logits")
    p.add_argument("--csv-out", required=True)
    p.add_argument("--summary-out")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="summarize a run CSV; optionally check a summary")
    p.add_argument("--csv", required=True)
    p.add_argument("--summary", help="summary JSON to cross-check against")
    p.add_argument("--series-out", help="write plot-ready accuracy/entropy series JSON")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("paramcount", help="itemized size of a full hierarchical cache")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--k-shots", type=int, default=3)
    p.add_argument("--parts", type=int, default=3)
    p.add_argument("--dim", type=int, required=True)
    p.set_defaults(func=_cmd_paramcount)

    return parser


def _load_cloud(path) -> np.ndarray:
    try:
        cloud = np.load(path)
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read cloud file {path}: {exc}") from exc
    return np.asarray(cloud, dtype=np.float64)


def _cmd_gen(args) -> None:
    spec = ShiftSpec(class_count=args.classes, dim=args.dim,
                     samples_per_class=args.samples_per_class,
                     intra_class_noise=args.sigma, shift_magnitude=args.delta,
                     patch_count=args.patches, patch_noise=args.patch_noise,
                     seed=args.seed)
    samples, bank = gen_stream(spec, tau=args.tau)
    save_stream(args.stream_out, samples, class_count=bank.num_classes)
    save_bank(args.bank_out, bank)
    print(f"wrote {len(samples)} samples to {args.stream_out} and "
          f"{bank.num_classes}-class bank to {args.bank_out}")


def _cmd_corrupt(args) -> None:
    cloud = _load_cloud(args.infile)
    out = corrupt(cloud, args.kind, args.severity, args.seed)
    np.save(args.out, out)
    print(f"{args.kind} severity {args.severity}: {cloud.shape[0]} -> "
          f"{out.shape[0]} points, wrote {args.out}")


def _cmd_encode(args) -> None:
    samples = []
    for i, path in enumerate(args.clouds):
        cloud = _load_cloud(path)
        samples.append(encode_cloud(cloud, key_points=args.keypoints,
                                    neighbors=args.neighbors, dim=args.dim,
                                    proj_seed=args.seed, sample_id=i))
    save_stream(args.out, samples, class_count=args.classes)
    print(f"encoded {len(samples)} clouds into {args.out}")


def _resolve_run_config(args) -> EngineConfig:
    file_cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _CONFIG_KEYS
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    params = AdaptParams(
        alpha_global=pick(args.alpha_g, "alpha_g", 4.0),
        alpha_local=pick(args.alpha_l, "alpha_l", 4.0),
        beta_global=pick(args.beta_g, "beta_g", 3.0),
        beta_local=pick(args.beta_l, "beta_l", 3.0))
    return EngineConfig(
        shots_per_class=pick(args.k_shots, "k_shots", 3),
        parts_per_object=pick(args.parts, "parts", 3),
        params=params,
        tau=pick(args.tau, "tau", None),
        mode=Mode(pick(args.mode, "mode", Mode.HIERARCHICAL.value)),
        admit_before_compute=pick(args.admit_before_compute,
                                  "admit_before_compute", True),
        seed=pick(args.seed, "seed", 0))


def _cmd_run(args) -> None:
    config = _resolve_run_config(args)
    bank = load_bank(args.bank)
    with load_stream(args.stream) as reader:
        if reader.dim != bank.dim:
            raise FormatError(f"stream dim {reader.dim} does not match "
                              f"bank dim {bank.dim}")
        if reader.class_count and reader.class_count != bank.num_classes:
            raise FormatError(f"stream declares {reader.class_count} classes, "
                              f"bank has {bank.num_classes}")
        report = run_stream(iter(reader), config, bank)
    write_report_csv(report, args.csv_out)
    if args.summary_out:
        echo = {
            "k_shots": config.shots_per_class,
            "parts": config.parts_per_object,
            "alpha_g": config.params.alpha_global,
            "alpha_l": config.params.alpha_local,
            "beta_g": config.params.beta_global,
            "beta_l": config.params.beta_local,
            "tau": config.tau,
            "mode": config.mode.value,
            "seed": config.seed,
            "admit_before_compute": config.admit_before_compute,
        }
        write_report_summary(report, args.summary_out, config_echo=echo)
    acc = ("n/a" if report.final_accuracy != report.final_accuracy
           else f"{report.final_accuracy:.4f}")
    print(f"mode={config.mode.value} samples={report.sample_count} "
          f"accuracy={acc} mean_top5_entropy={report.mean_top5_entropy:.4f} "
          f"throughput={report.throughput:.1f}/s")


def _cmd_report(args) -> None:
    rows = read_report_rows(args.csv)
    summary = summarize_rows(rows)
    print(f"samples             {summary['sample_count']}")
    acc = summary["final_accuracy"]
    print(f"final accuracy      {'n/a' if acc != acc else f'{acc:.6f}'}")
    print(f"mean top-5 entropy  {summary['mean_top5_entropy']:.6f}")
    print(f"mean zs entropy    {summary['mean_zs_entropy']:.6f}")
    counts = summary["admissions"]
    print("admissions          " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    print(f"accuracy series     {len(summary['accuracy_series'])} points "
          f"(first 5 samples discarded)")

    if args.summary:
        with open(args.summary) as fh:
            stored = json.load(fh)
        checks = [
            ("final_accuracy", summary["final_accuracy"]),
            ("mean_top5_entropy", summary["mean_top5_entropy"]),
            ("mean_zs_entropy", summary["mean_zs_entropy"]),
            ("sample_count", summary["sample_count"]),
        ]
        for key, recomputed in checks:
            stored_value = stored.get(key)
            same = (stored_value == recomputed
                    or (stored_value != stored_value and recomputed != recomputed))
            if not same:
                raise FormatError(f"summary mismatch for {key}: stored "
                                  f"{stored_value}, recomputed {recomputed}")
        print("summary check       ok")

    if args.series_out:
        payload = {
            "accuracy": {"start_sample": 6, "values": summary["accuracy_series"]},
            "mean_top5_entropy": {"start_sample": 1, "values": summary["entropy_series"]},
        }
        with open(args.series_out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"series written      {args.series_out}")


def _cmd_paramcount(args) -> None:
    breakdown = param_count(args.classes, args.k_shots, args.parts, args.dim)
    print(f"cache size for C={args.classes} classes, K={args.k_shots} shots, "
          f"m={args.parts} parts, d={args.dim} dims")
    rows = [
        ("global features", breakdown.global_features),
        ("global labels", breakdown.global_labels),
        ("global entropies", breakdown.global_entropies),
        ("local features", breakdown.local_features),
        ("local labels", breakdown.local_labels),
        ("total", breakdown.total),
    ]
    for name, value in rows:
        print(f"  {name:<17} {value:>15,}")
    print(f"  (total ~{breakdown.total / 1e6:.1f}M scalars)")


def cli(argv) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:     # --help
        return 0 if exc.code in (0, None) else 1
    try:
        args.func(args)
    except (EngineError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
