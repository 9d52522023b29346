"""
Command line of the pair upsampler.

Exit codes: 0 success, 1 usage or config error, 2 data / file / checkpoint error,
3 numerical failure (training divergence).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from loguru import logger

from . import geometry, pairing
from .common import exceptions
from .common.enums import CloudFormats, ShapeKinds
from .common.parser import parse_key_values, read_cloud, read_jsonl, write_cloud, write_jsonl
from .common.utils import derive_seed
from .config import TrainConfig
from .pool import PooledUpsampler
from .training.checkpoint import load_checkpoint, save_checkpoint
from .training.dataset import as_shape, build_toy_dataset, dataset_from_clouds
from .training.evaluation import EMD_LIMIT, evaluate, format_rows, metric_report
from .training.runner import Trainer, format_log
from .types import AnalyticShape, Dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

MANIFEST = "manifest.jsonl"
PRESETS = {"desk": TrainConfig.desk, "full": TrainConfig.full, "denoise": TrainConfig.denoise}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        logger.error(f"{self.prog}: {message}")
        raise SystemExit(EXIT_USAGE)


def configure_logging(verbose: bool = False):
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO", format="{level}: {message}")


def _shape(spec: str) -> AnalyticShape:
    try:
        return as_shape(spec)
    except (ValueError, exceptions.InvalidArgumentError) as e:
        raise exceptions.ConfigError("shape", f"{e} (valid shapes: {', '.join(ShapeKinds.codes())})") from None


def _non_negative(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _train_config(args: argparse.Namespace) -> TrainConfig:
    config = PRESETS[args.preset]()
    if args.config:
        config = TrainConfig.from_file(args.config, config)
    if args.set:
        config = TrainConfig.from_mapping(parse_key_values("\n".join(args.set), "--set"), config)
    return config


def _load_data_dir(data_dir: Path, config: TrainConfig) -> Dataset:
    entries = []
    for record in read_jsonl(data_dir / MANIFEST):
        entries.append((_shape(record["shape"]), read_cloud(data_dir / record["file"])))
    logger.info(f"Loaded {len(entries)} clouds from {data_dir}.")
    model = config.model
    return dataset_from_clouds(entries, config.pairs_per_shape, model.n, model.r, config.seed, config.val_fraction)


def _toy_dataset(config: TrainConfig) -> Dataset:
    model = config.model
    return build_toy_dataset(config.shapes, config.pairs_per_shape, model.n, model.r, config.seed,
                             config.sparse_points, config.val_fraction)


def cmd_gen_data(args: argparse.Namespace):
    shapes = [_shape(spec) for spec in args.shapes]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for index, shape in enumerate(shapes):
        for copy in range(args.count):
            seed = derive_seed(args.seed, index, copy)
            name = f"{index:02d}_{shape.kind.code}_{copy:03d}{args.format}"
            write_cloud(out_dir / name, geometry.sample_analytic_surface(shape, args.points, seed))
            records.append({"file": name, "shape": shape.spec, "kind": shape.kind.code, "params": shape.params,
                            "points": args.points, "seed": seed})
    write_jsonl(out_dir / MANIFEST, records)
    logger.info(f"Wrote {len(records)} clouds and {MANIFEST} to {out_dir}.")


def cmd_select_pairs(args: argparse.Namespace):
    cloud = read_cloud(args.input)
    if args.patch_size < 1:
        raise exceptions.InvalidArgumentError("patch_size", args.patch_size, "must be at least 1")
    if args.patch_size > len(cloud):
        raise exceptions.InvalidArgumentError("patch_size", args.patch_size, f"cloud has only {len(cloud)} points")
    patch_set = pairing.build_patch_set(cloud, args.patch_size)
    pairs = pairing.select_adjacent_pairs(patch_set, args.candidates, args.eps, args.min_pts)
    records = [{"patch": pair.primary_index, "seed": pair.primary.seed_index, "partner": pair.partner_index,
                "partner_seed": pair.adjacent.seed_index, "overlap": pair.overlap_count,
                "clusters": pair.cluster_count, "degenerate": pair.degenerate} for pair in pairs]
    write_jsonl(args.out, records)
    logger.info(f"Wrote {len(records)} pairs to {args.out}.")


def cmd_train(args: argparse.Namespace):
    config = _train_config(args)
    dataset = _load_data_dir(Path(args.data_dir), config) if args.data_dir else _toy_dataset(config)
    logger.info(f"Training on {dataset}.")
    trainer = Trainer(config, dataset, workers=args.workers)
    checkpoint, log = trainer.run()
    save_checkpoint(checkpoint, None, args.out)
    log_path = Path(args.log) if args.log else Path(args.out).with_suffix(".csv")
    log_path.write_text(format_log(log), encoding="utf-8")
    logger.info(f"Wrote {args.out} (best epoch {checkpoint.meta.get('best_epoch')}) and {log_path}.")
    print(f"final val_cd {log[-1]['val_cd']!r}")


def cmd_upsample(args: argparse.Namespace):
    checkpoint = load_checkpoint(args.checkpoint)
    rate = checkpoint.config.model.r
    if args.rate is not None and args.rate != rate:
        raise exceptions.ConfigMismatchError("r", rate, args.rate)
    cloud = read_cloud(args.input)
    upsampler = PooledUpsampler(checkpoint.params, args.workers)
    coarse, refined = upsampler.upsample_cloud(cloud, args.candidates)
    out = Path(args.out)
    write_cloud(out, refined)
    logger.info(f"Wrote {len(refined)} points to {out}.")
    if args.emit_coarse:
        coarse_path = out.with_name(f"{out.stem}_coarse{out.suffix}")
        write_cloud(coarse_path, coarse)
        logger.info(f"Wrote {len(coarse)} coarse points to {coarse_path}.")


def cmd_eval(args: argparse.Namespace):
    shape = _shape(args.shape) if args.shape else None
    prediction, truth = read_cloud(args.pred), read_cloud(args.gt)
    report = metric_report(prediction.points, truth.points, shape)
    if report.emd is None:
        reason = "point counts differ" if len(prediction) != len(truth) else f"more than {EMD_LIMIT} points"
        logger.warning(f"EMD skipped: {reason}.")
    text = "metric,value\n" + "".join(f"{name},{value!r}\n" for name, value in report.items())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote metrics to {args.out}.")
    else:
        sys.stdout.write(text)


def cmd_benchmark(args: argparse.Namespace):
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = _toy_dataset(checkpoint.config)
    rows = evaluate(checkpoint, dataset, args.noise, args.whole_shapes, args.workers, args.seed)
    text = format_rows(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(rows)} rows to {args.out}.")
    else:
        sys.stdout.write(text)


def cmd_noise(args: argparse.Namespace):
    cloud = read_cloud(args.input)
    write_cloud(args.out, geometry.add_relative_noise(cloud, args.level, args.seed))
    logger.info(f"Wrote {len(cloud)} points with noise level {args.level:g} to {args.out}.")


def _schema_help() -> str:
    lines = ["run config keys (key = value, desk defaults):"]
    lines += [f"  {key} = {';'.join(value) if isinstance(value, list) else value}"
              for key, value in TrainConfig.schema().items()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pair-upsampler", description="Patch-pair point cloud upsampling.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = commands.add_parser("gen-data", help="sample clouds from analytic shapes")
    gen.add_argument("--shapes", nargs="+", required=True,
                     help=f"shape specs such as torus:R=0.7,r=0.3 ({', '.join(ShapeKinds.codes())})")
    gen.add_argument("--count", type=int, default=1, help="clouds per shape")
    gen.add_argument("--points", type=int, default=2048, help="points per cloud")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--format", choices=[f.suffix for f in CloudFormats], default=CloudFormats.XYZ.suffix)
    gen.add_argument("--out-dir", required=True)
    gen.set_defaults(handler=cmd_gen_data)

    select = commands.add_parser("select-pairs", help="cover a cloud with patches and pair them")
    select.add_argument("--input", required=True)
    select.add_argument("--patch-size", type=_positive_int, default=256)
    select.add_argument("--candidates", type=int, default=pairing.DEFAULT_CANDIDATES)
    select.add_argument("--eps", type=float, default=None, help="clustering radius (scale-adaptive by default)")
    select.add_argument("--min-pts", type=int, default=pairing.DEFAULT_MIN_PTS)
    select.add_argument("--out", required=True, help="JSON-lines pair manifest")
    select.set_defaults(handler=cmd_select_pairs)

    train = commands.add_parser("train", help="train an upsampler", epilog=_schema_help(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    train.add_argument("--config", help="key=value run config")
    train.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    train.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    train.add_argument("--data-dir", help=f"directory written by gen-data (with {MANIFEST}); "
                                          "shapes of the config are sampled when omitted")
    train.add_argument("--workers", type=int, default=1)
    train.add_argument("--log", help="training log CSV (default: checkpoint path with .csv suffix)")
    train.add_argument("--out", required=True, help="checkpoint path")
    train.set_defaults(handler=cmd_train)

    upsample = commands.add_parser("upsample", help="upsample a sparse cloud")
    upsample.add_argument("--input", required=True)
    upsample.add_argument("--checkpoint", required=True)
    upsample.add_argument("--rate", type=int, default=None, help="must match the checkpoint")
    upsample.add_argument("--candidates", type=int, default=pairing.DEFAULT_CANDIDATES)
    upsample.add_argument("--workers", type=int, default=4)
    upsample.add_argument("--emit-coarse", action="store_true", help="also write <out>_coarse")
    upsample.add_argument("--out", required=True)
    upsample.set_defaults(handler=cmd_upsample)

    ev = commands.add_parser("eval", help="compare a predicted cloud with ground truth (values ×10³)")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--shape", help="analytic shape for the point-to-surface distance")
    ev.add_argument("--out", help="CSV path (stdout by default)")
    ev.set_defaults(handler=cmd_eval)

    bench = commands.add_parser("benchmark", help="evaluate a checkpoint on its toy dataset across noise levels")
    bench.add_argument("--checkpoint", required=True)
    bench.add_argument("--noise", type=_non_negative, nargs="+", default=[0.0, 0.005, 0.01, 0.02])
    bench.add_argument("--whole-shapes", action="store_true")
    bench.add_argument("--workers", type=int, default=4)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", help="CSV path (stdout by default)")
    bench.set_defaults(handler=cmd_benchmark)

    noise = commands.add_parser("noise", help="add Gaussian noise relative to the bounding radius")
    noise.add_argument("--input", required=True)
    noise.add_argument("--level", type=_non_negative, required=True)
    noise.add_argument("--seed", type=int, default=0)
    noise.add_argument("--out", required=True)
    noise.set_defaults(handler=cmd_noise)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    configure_logging(args.verbose)
    try:
        args.handler(args)
    except exceptions.ConfigError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except exceptions.DivergenceError as e:
        logger.error(str(e))
        return EXIT_NUMERICAL
    except (exceptions.UpsamplerError, OSError, json.JSONDecodeError, KeyError) as e:
        logger.error(str(e) if not isinstance(e, KeyError) else f"missing manifest field {e}")
        logger.debug("TRACEBACK", exc_info=True)
        return EXIT_DATA
    return EXIT_OK
