"""Embedding of noisy codewords into square two-channel grids.

Channel ``c`` carries coded stream ``c`` so that the input cell for trellis
step ``t`` sits at the same row-major position as target bit ``t``.  The
first ``L + v`` cells of the input are valid, the first ``L`` cells of the
target are valid, and padding is 0.0 (an erasure under the BPSK mapping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import deinterleave


@dataclass(frozen=True)
class GridSpec:
    L: int
    v: int
    side: int
    depth: int

    @property
    def valid_steps(self) -> int:
        return self.L + self.v

    @property
    def depth_divisor(self) -> int:
        return 1 << self.depth

    @property
    def input_mask(self) -> np.ndarray:
        return _prefix_mask(self.side, self.valid_steps)

    @property
    def target_mask(self) -> np.ndarray:
        return _prefix_mask(self.side, self.L)


def _prefix_mask(side: int, n: int) -> np.ndarray:
    mask = np.zeros(side * side, dtype=bool)
    mask[:n] = True
    return mask.reshape(side, side)


def grid_spec_for(L: int, v: int, depth: int) -> GridSpec:
    """Smallest square side that is a multiple of ``2**depth`` and holds ``L + v`` cells."""
    if L < 1 or v < 0 or depth < 0:
        raise ValueError(f"invalid grid parameters L={L}, v={v}, depth={depth}")
    step = 1 << depth
    side = step
    while side * side < L + v:
        side += step
    return GridSpec(L, v, side, depth)


def to_input_grid(received, gs: GridSpec) -> np.ndarray:
    """Map received symbols to grids.

    ``received`` has shape (2(L+v),) or (N, 2(L+v)); the result has shape
    (2, side, side) or (N, 2, side, side) respectively.
    """
    received = np.asarray(received)
    single = received.ndim == 1
    if single:
        received = received[None]
    if received.shape[-1] != 2 * gs.valid_steps:
        raise ValueError(
            f"length mismatch: got {received.shape[-1]} symbols, grid expects {2 * gs.valid_steps}"
        )
    n = received.shape[0]
    streams = np.swapaxes(deinterleave(received), 1, 2)  # (N, 2, L+v)
    dtype = received.dtype if received.dtype.kind == "f" else np.float64
    flat = np.zeros((n, 2, gs.side * gs.side), dtype=dtype)
    flat[:, :, :gs.valid_steps] = streams
    grid = flat.reshape(n, 2, gs.side, gs.side)
    return grid[0] if single else grid


def from_input_grid(grid, gs: GridSpec) -> np.ndarray:
    """Recover interleaved received symbols from the valid input cells."""
    grid = np.asarray(grid)
    single = grid.ndim == 3
    if single:
        grid = grid[None]
    flat = grid.reshape(grid.shape[0], 2, -1)[:, :, :gs.valid_steps]
    out = np.swapaxes(flat, 1, 2).reshape(grid.shape[0], -1)
    return out[0] if single else out


def to_target_grid(msgs, gs: GridSpec) -> np.ndarray:
    """Message bits row-major in one channel: (1, side, side) or (N, 1, side, side)."""
    msgs = np.asarray(msgs)
    single = msgs.ndim == 1
    if single:
        msgs = msgs[None]
    if msgs.shape[-1] != gs.L:
        raise ValueError(f"length mismatch: got {msgs.shape[-1]} bits, grid expects {gs.L}")
    flat = np.zeros((msgs.shape[0], 1, gs.side * gs.side), dtype=np.float64)
    flat[:, 0, :gs.L] = msgs
    grid = flat.reshape(msgs.shape[0], 1, gs.side, gs.side)
    return grid[0] if single else grid


def from_output_grid(prob_grid, gs: GridSpec) -> np.ndarray:
    """Read per-bit probabilities ``p_1..p_L`` from the first ``L`` cells."""
    prob_grid = np.asarray(prob_grid)
    single = prob_grid.ndim == 3
    if single:
        prob_grid = prob_grid[None]
    if prob_grid.shape[1:] != (1, gs.side, gs.side):
        raise ValueError(
            f"shape mismatch: got {prob_grid.shape[1:]}, expected {(1, gs.side, gs.side)}"
        )
    p = prob_grid.reshape(prob_grid.shape[0], -1)[:, :gs.L]
    return p[0] if single else p
