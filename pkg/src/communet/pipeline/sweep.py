"""BER-versus-SNR sweeps for the Viterbi baseline, uncoded BPSK and U-Net models."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..channel import add_awgn, hard_decision, make_rng, modulate, noise_sigma
from ..coding import CodeSpec
from ..gridmap import GridSpec, from_output_grid, grid_spec_for, to_input_grid
from ..losses import BerReport, ber, hard_bits
from ..nn.unet import UNet
from ..viterbi import build_trellis, viterbi_decode_batch
from .data import transmit

SWEEP_STREAM = 4
CSV_HEADER = ("decoder", "code", "snr_db", "bits", "bit_errors", "ber")


class ViterbiDecoder:
    name = "viterbi"

    def __init__(self, code: CodeSpec):
        self.code = code
        self.trellis = build_trellis(code)

    def __call__(self, received: np.ndarray) -> np.ndarray:
        return viterbi_decode_batch(self.trellis, received)[0]


class UNetDecoder:
    """Hard decisions from a U-Net; only the first ``L`` output cells are read."""

    name = "unet"

    def __init__(self, model: UNet, grid: GridSpec):
        self.model = model
        self.grid = grid

    def probabilities(self, received: np.ndarray) -> np.ndarray:
        x = to_input_grid(received, self.grid).astype(self.model.dtype)
        return from_output_grid(self.model.forward(x).data, self.grid)

    def __call__(self, received: np.ndarray) -> np.ndarray:
        return hard_bits(self.probabilities(received))


class UncodedDecoder:
    """Plain BPSK with a zero threshold; ``received`` has one symbol per bit."""

    name = "uncoded"

    def __call__(self, received: np.ndarray) -> np.ndarray:
        return hard_decision(received)


def make_decoder(kind: str, code: CodeSpec, model: UNet | None = None, L: int | None = None):
    if kind == "viterbi":
        return ViterbiDecoder(code)
    if kind == "uncoded":
        return UncodedDecoder()
    if kind == "unet":
        if model is None or L is None:
            raise ValueError("unet decoder needs a model and a block length")
        return UNetDecoder(model, grid_spec_for(L, code.memory, model.cfg.depth))
    raise ValueError(f"unknown decoder {kind!r}, expected viterbi, unet or uncoded")


@dataclass(frozen=True)
class SweepPoint:
    decoder: str
    code: str
    snr_db: float
    report: BerReport

    @property
    def ber(self) -> float:
        return self.report.ber


def _simulate_point(decoder, code, L, snr_db, min_bits, min_errors, max_bits, rng, blocks):
    uncoded = isinstance(decoder, UncodedDecoder)
    total = None
    while True:
        msgs = rng.integers(0, 2, size=(blocks, L), dtype=np.uint8)
        if uncoded:
            received = add_awgn(modulate(msgs), noise_sigma(snr_db, 1.0), rng)
        else:
            received = transmit(code, msgs, snr_db, rng)
        rep = ber(decoder(received), msgs)
        total = rep if total is None else total.merge(rep)
        if total.bits_counted >= min_bits and (
            total.bit_errors >= min_errors or total.bits_counted >= max_bits
        ):
            return total


def _point_task(args):
    decoder, code, L, snr, i, seed, min_bits, min_errors, max_bits, blocks = args
    rng = make_rng(seed, SWEEP_STREAM, i)
    return _simulate_point(decoder, code, L, snr, min_bits, min_errors, max_bits, rng, blocks)


def ber_sweep(
    decoder,
    code: CodeSpec,
    L: int,
    snr_list_db,
    min_bits: int = 100_000,
    min_errors: int = 100,
    max_bits: int | None = None,
    seed: int = 0,
    blocks_per_batch: int | None = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """Measure BER at each SNR point.

    Each point draws from its own stream ``(seed, point index)`` and keeps
    simulating batches until it has ``min_bits`` bits and either
    ``min_errors`` errors or ``max_bits`` bits (default ``10 * min_bits``).
    Results do not depend on ``workers``.
    """
    if min_bits < 10**4:
        raise ValueError(f"min_bits must be >= 10000, got {min_bits}")
    if isinstance(decoder, str):
        decoder = make_decoder(decoder, code)
    max_bits = 10 * min_bits if max_bits is None else max(max_bits, min_bits)
    if blocks_per_batch is None:
        blocks_per_batch = max(1, min(1000, -(-min_bits // L)))
    tasks = [
        (decoder, code, L, float(snr), i, seed, min_bits, min_errors, max_bits, blocks_per_batch)
        for i, snr in enumerate(snr_list_db)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_point_task, tasks))
    else:
        reports = [_point_task(t) for t in tasks]
    label = "none" if isinstance(decoder, UncodedDecoder) else code.label
    return [SweepPoint(decoder.name, label, float(s), r) for s, r in zip(snr_list_db, reports)]


def format_sweep_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        rep = p.report
        w.writerow([p.decoder, p.code, repr(p.snr_db), rep.bits_counted, rep.bit_errors, repr(p.ber)])
    return buf.getvalue()


def write_sweep_csv(points, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_sweep_csv(points))


def read_sweep_csv(path) -> list[SweepPoint]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_sweep_csv(fh.read())


def parse_sweep_csv(text: str) -> list[SweepPoint]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"bad sweep CSV header, expected {','.join(CSV_HEADER)}")
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"line {lineno}: expected {len(CSV_HEADER)} columns, got {len(row)}")
        dec, code, snr, bits, errors, ber_value = row
        rep = BerReport(int(bits), int(errors))
        if abs(rep.ber - float(ber_value)) > 1e-12:
            raise ValueError(f"line {lineno}: ber column disagrees with bit_errors / bits")
        points.append(SweepPoint(dec, code, float(snr), rep))
    return points
