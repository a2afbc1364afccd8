"""Training data: fixed random messages, noise drawn fresh at train time."""

from __future__ import annotations

import numpy as np

from ..channel import add_awgn, make_rng, modulate, noise_sigma
from ..coding import CodeSpec, encode_batch, interleave

DATA_STREAM = 0


def gen_dataset(code: CodeSpec, L: int, num_samples: int, seed: int) -> np.ndarray:
    """``num_samples`` i.i.d. uniform messages of length ``L``, shape (num_samples, L).

    The code does not influence the bits; it is accepted so datasets are
    always described alongside the code they feed.
    """
    if L < 1 or num_samples < 1:
        raise ValueError(f"need L >= 1 and num_samples >= 1, got {L}, {num_samples}")
    rng = make_rng(seed, DATA_STREAM)
    return rng.integers(0, 2, size=(num_samples, L), dtype=np.uint8)


def transmit(code: CodeSpec, msgs: np.ndarray, eb_n0_db: float, rng: np.random.Generator) -> np.ndarray:
    """Encode, BPSK-modulate and pass through AWGN; returns (N, 2(L+v)) received values."""
    sym = modulate(interleave(encode_batch(code, msgs)))
    return add_awgn(sym, noise_sigma(eb_n0_db, code.rate), rng)
