"""Train and evaluate convolutional-code decoders from the command line.

Exit codes: 0 success, 2 usage/config/input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .channel import MAX_SEED, modulate
from .coding import CodeSpec, encode, interleave
from .gridmap import grid_spec_for
from .losses import nve
from .nn.unet import count_params
from .pipeline.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .pipeline.config import ConfigError, ExperimentConfig, load_experiment_config, with_overrides
from .pipeline.profiling import layer_table, measure_latency
from .pipeline.sweep import ber_sweep, make_decoder, read_sweep_csv, write_sweep_csv, UNetDecoder
from .pipeline.train import TrainingDiverged, train
from .plot import ber_svg
from .viterbi import build_trellis, viterbi_decode

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _read_numbers(path: str, kind) -> list:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            for token in line.split("#", 1)[0].split():
                try:
                    value = kind(token)
                except ValueError:
                    raise UsageError(f"{path}:{lineno}: malformed value {token!r}") from None
                if kind is int and value not in (0, 1):
                    raise UsageError(f"{path}:{lineno}: expected a bit, got {token!r}")
                values.append(value)
    if not values:
        raise UsageError(f"{path}: no input values")
    return values


def _write_lines(values, path: str | None) -> None:
    text = "".join(f"{v}\n" for v in values)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _experiment(args) -> ExperimentConfig:
    if not args.config:
        raise UsageError("this command needs --config")
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg = with_overrides(cfg, seed=args.seed)
    return cfg


def _code_from(args) -> CodeSpec:
    if args.config:
        return load_experiment_config(args.config).train.code
    try:
        return CodeSpec.from_octal(args.generators.split(","), args.memory)
    except ValueError as exc:
        raise UsageError(f"bad code: {exc}") from None


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_encode(args) -> int:
    code = _code_from(args)
    bits = _read_numbers(args.input, int)
    flat = interleave(encode(code, bits))
    if args.symbols:
        _write_lines((repr(float(s)) for s in modulate(flat)), args.output)
    else:
        _write_lines(flat.tolist(), args.output)
    return EXIT_OK


def cmd_viterbi(args) -> int:
    code = _code_from(args)
    symbols = _read_numbers(args.input, float)
    try:
        msg, _ = viterbi_decode(build_trellis(code), np.array(symbols))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_lines(msg.tolist(), args.output)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _experiment(args)

    def progress(row):
        print(f"epoch {row.epoch}/{cfg.train.epochs} loss {row.mean_loss:.6f} "
              f"batch_ber {row.mean_batch_ber:.6f}")

    ckpt, logs = train(cfg.train, on_epoch=progress)
    ckpt_path = _out_path(args, cfg.output.checkpoint)
    save_checkpoint(ckpt, ckpt_path)
    log_path = _out_path(args, cfg.output.train_log)
    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,mean_loss,mean_batch_ber\n")
        for row in logs:
            fh.write(f"{row.epoch},{row.mean_loss!r},{row.mean_batch_ber!r}\n")
    print(f"wrote {ckpt_path} ({ckpt.param_count} parameters) and {log_path}")
    return EXIT_OK


def _unet_decoder(args, cfg: ExperimentConfig) -> UNetDecoder:
    path = args.checkpoint or os.path.join(args.out, cfg.output.checkpoint)
    ckpt = load_checkpoint(path)
    t = cfg.train
    expected = grid_spec_for(t.block_length, t.code.memory, t.net.depth)
    if ckpt.grid != expected or ckpt.config.code != t.code:
        raise UsageError(f"grid mismatch: checkpoint {ckpt.grid} vs config {expected}")
    return UNetDecoder(ckpt.model(), ckpt.grid)


def cmd_sweep(args) -> int:
    cfg = _experiment(args)
    t, s = cfg.train, cfg.sweep
    points = []
    for kind in args.decoder or ["viterbi"]:
        decoder = _unet_decoder(args, cfg) if kind == "unet" else make_decoder(kind, t.code)
        points += ber_sweep(
            decoder, t.code, t.block_length, s.snr_list_db,
            min_bits=s.min_bits, min_errors=s.min_errors, max_bits=s.max_bits,
            seed=t.seed, workers=args.workers,
        )
    csv_path = _out_path(args, cfg.output.sweep_csv)
    write_sweep_csv(points, csv_path)
    for p in points:
        rep = p.report
        print(f"{p.decoder:8s} {p.snr_db:6.2f} dB  ber {p.ber:.6g}  ({rep.bit_errors}/{rep.bits_counted})")
    if not args.no_svg:
        series = {}
        for p in points:
            series.setdefault(f"{p.decoder} {p.code}", []).append((p.snr_db, p.ber))
        with open(_out_path(args, cfg.output.sweep_svg), "w", encoding="utf-8") as fh:
            fh.write(ber_svg(series))
    print(f"wrote {csv_path}")
    return EXIT_OK


def cmd_nve(args) -> int:
    try:
        nnd, vit = read_sweep_csv(args.nnd_csv), read_sweep_csv(args.viterbi_csv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if [p.snr_db for p in nnd] != [p.snr_db for p in vit]:
        raise UsageError("SNR grids differ between the two CSV files")
    value = nve([p.ber for p in nnd], [p.ber for p in vit], [p.report.bits_counted for p in vit])
    print(f"NVE = {value!r}")
    name = load_experiment_config(args.config).output.report if args.config else "nve_report.txt"
    report = args.report or os.path.join(args.out, name)
    if os.path.dirname(report):
        os.makedirs(os.path.dirname(report), exist_ok=True)
    with open(report, "a", encoding="utf-8") as fh:
        fh.write(f"{args.nnd_csv},{args.viterbi_csv},{value!r}\n")
    return EXIT_OK


def cmd_info(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model = ckpt.model()
    print(f"config: depth={model.cfg.depth} base_channels={model.cfg.base_channels} "
          f"code={ckpt.config.code.label} L={ckpt.grid.L} grid={ckpt.grid.side}x{ckpt.grid.side} "
          f"step={ckpt.step}")
    print(f"{'layer':32s} {'shape':>20s} {'params':>10s}")
    for name, shape, size in layer_table(model):
        print(f"{name:32s} {str(shape):>20s} {size:10d}")
    print(f"parameters: {count_params(model)}")
    decoder = UNetDecoder(model, ckpt.grid)
    block = np.ones(2 * ckpt.grid.valid_steps)
    lat = measure_latency(decoder, block, n_blocks=args.blocks)
    print(f"timing: median latency per block {lat['median_single_s']:.6e} s; "
          f"batched {lat['batched_per_block_s']:.6e} s/block over {lat['n_blocks']} blocks")
    print(f"environment: {lat['environment']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="unsigned 64-bit seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="experiment config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="communet", parents=[common], description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def code_flags(p):
        p.add_argument("--generators", default="7,5", help="octal generators, e.g. 7,5")
        p.add_argument("--memory", type=int, default=2)

    p = sub.add_parser("encode", parents=[common], help="encode bits (one per line)")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--symbols", action="store_true", help="write BPSK symbols instead of bits")
    code_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("viterbi", parents=[common], help="decode received symbols (one per line)")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    code_flags(p)
    p.set_defaults(func=cmd_viterbi)

    p = sub.add_parser("train", parents=[common], help="train a U-Net decoder")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", parents=[common], help="BER sweep to CSV and SVG")
    p.add_argument("--decoder", action="append", choices=("unet", "viterbi", "uncoded"))
    p.add_argument("--checkpoint")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("nve", parents=[common], help="normalized validation error of two sweeps")
    p.add_argument("nnd_csv")
    p.add_argument("viterbi_csv")
    p.add_argument("--report")
    p.set_defaults(func=cmd_nve)

    p = sub.add_parser("info", parents=[common], help="parameter count and latency of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--blocks", type=int, default=100)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name, default in (("seed", None), ("config", None), ("out", ".")):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except (UsageError, ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
