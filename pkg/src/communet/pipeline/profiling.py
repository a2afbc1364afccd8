"""Parameter counts and decode latency, the analogue of a params/latency table."""

from __future__ import annotations

import os
import platform
import statistics
import time

import numpy as np

from ..nn.unet import UNet, count_params, layer_shapes


def layer_table(model: UNet) -> list[tuple[str, tuple[int, ...], int]]:
    """``(name, shape, size)`` for every parameter tensor."""
    return [(name, tuple(shape), int(np.prod(shape))) for name, shape in layer_shapes(model.cfg)]


def environment() -> str:
    return (
        f"{platform.machine()} {platform.system()} python {platform.python_version()} "
        f"numpy {np.__version__} cpus {os.cpu_count()}"
    )


def measure_latency(decode, block: np.ndarray, n_blocks: int = 100, repeats: int = 20) -> dict:
    """Time a decoder on fixed-size blocks.

    ``decode`` maps a (N, symbols) array to decisions; ``block`` is one
    received block.  Reports the median single-block latency over
    ``repeats`` calls and the per-block time of one batched call of
    ``n_blocks`` blocks, both in seconds.
    """
    block = np.asarray(block).reshape(1, -1)
    decode(block)  # warm-up
    singles = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        decode(block)
        singles.append(time.perf_counter() - t0)
    batch = np.repeat(block, n_blocks, axis=0)
    t0 = time.perf_counter()
    decode(batch)
    batched = time.perf_counter() - t0
    return {
        "median_single_s": statistics.median(singles),
        "batched_per_block_s": batched / n_blocks,
        "n_blocks": n_blocks,
        "environment": environment(),
    }


__all__ = ["count_params", "layer_table", "measure_latency", "environment"]
