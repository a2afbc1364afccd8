"""Rate-1/2 feedforward convolutional codes with zero-tail termination.

Tap convention: bit ``v`` of a generator multiplies the current input and
bit 0 multiplies the oldest delayed input, so the octal pair ``(7, 5)``
with memory 2 is the textbook code with impulse responses 111 and 101.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class CodeSpec:
    """A rate-1/2 feedforward convolutional code.

    Parameters
    ----------
    generators : tuple of two ints
        Binary tap masks (usually written in octal).
    memory : int
        Number of delay elements ``v``; the trellis has ``2**v`` states.
    """

    generators: tuple[int, int]
    memory: int

    def __post_init__(self):
        gens = tuple(int(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        if len(gens) != 2:
            raise ValueError(f"rate-1/2 code needs exactly 2 generators, got {len(gens)}")
        if self.memory < 0:
            raise ValueError(f"memory must be >= 0, got {self.memory}")
        width = self.memory + 1
        for g in gens:
            if g < 0 or g >= (1 << width):
                raise ValueError(
                    f"generator/memory mismatch: {oct(g)} does not fit in {width} bits"
                )
        if not any((g >> self.memory) & 1 for g in gens):
            raise ValueError("no generator taps the current input")

    @classmethod
    def from_octal(cls, generators: Sequence[str], memory: int) -> "CodeSpec":
        return cls(tuple(int(str(g), 8) for g in generators), int(memory))

    @property
    def rate(self) -> float:
        return 0.5

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    @property
    def label(self) -> str:
        return "(" + ",".join(format(g, "o") for g in self.generators) + ")"

    def taps(self) -> np.ndarray:
        """Tap matrix of shape (2, v+1); column ``k`` multiplies ``u[t-k]``."""
        v = self.memory
        return np.array(
            [[(g >> (v - k)) & 1 for k in range(v + 1)] for g in self.generators],
            dtype=np.uint8,
        )


# Classical codes by memory, used as defaults. Not taken from any reference set.
STANDARD_CODES = {
    1: CodeSpec((0o3, 0o1), 1),
    2: CodeSpec((0o7, 0o5), 2),
    3: CodeSpec((0o17, 0o15), 3),
    4: CodeSpec((0o23, 0o35), 4),
    6: CodeSpec((0o133, 0o171), 6),
}


def _check_bits(bits: np.ndarray) -> None:
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("message bits must be 0 or 1")


def encode_batch(spec: CodeSpec, msgs) -> np.ndarray:
    """Encode a batch of messages.

    Parameters
    ----------
    msgs : array_like, shape (N, L)

    Returns
    -------
    np.ndarray of uint8, shape (N, L + v, 2)
    """
    msgs = np.asarray(msgs)
    if msgs.ndim != 2:
        raise ValueError(f"expected (N, L) messages, got shape {msgs.shape}")
    if msgs.shape[1] == 0:
        raise ValueError("empty message")
    _check_bits(msgs)
    v = spec.memory
    n, L = msgs.shape
    # zero history before t=0 and v zero tail bits after
    padded = np.zeros((n, L + 2 * v), dtype=np.uint8)
    padded[:, v:v + L] = msgs
    taps = spec.taps()
    steps = L + v
    out = np.zeros((n, steps, 2), dtype=np.uint8)
    for k in range(v + 1):
        # u[t-k] for t in [0, L+v)
        delayed = padded[:, v - k:v - k + steps]
        for j in range(2):
            if taps[j, k]:
                out[:, :, j] ^= delayed
    return out


def encode(spec: CodeSpec, msg: Sequence[int]) -> np.ndarray:
    """Encode one message into ``L + v`` output pairs, shape (L + v, 2)."""
    msg = np.asarray(msg).reshape(-1)
    if msg.size == 0:
        raise ValueError("empty message")
    return encode_batch(spec, msg[None, :])[0]


def interleave(pairs) -> np.ndarray:
    """Flatten ``(..., steps, 2)`` pairs to ``[b0(0), b1(0), b0(1), ...]``."""
    pairs = np.asarray(pairs)
    return pairs.reshape(*pairs.shape[:-2], -1)


def deinterleave(flat) -> np.ndarray:
    """Inverse of :func:`interleave`."""
    flat = np.asarray(flat)
    if flat.shape[-1] % 2:
        raise ValueError(f"interleaved length must be even, got {flat.shape[-1]}")
    return flat.reshape(*flat.shape[:-1], -1, 2)
