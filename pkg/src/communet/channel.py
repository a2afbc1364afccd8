"""BPSK modulation and an AWGN channel parameterised by Eb/N0.

SNR is always Eb/N0 in dB per *information* bit, so the code rate enters the
noise standard deviation.  Noise comes from numpy's ziggurat normal sampler
driven by a Philox (counter-based) bit generator; independent streams are
split off a ``SeedSequence``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

MAX_SEED = 2**64 - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator for ``seed`` and an optional spawn-key path.

    Different keys give statistically independent streams, so parallel
    workers can each own one without coordination.
    """
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def modulate(bits) -> np.ndarray:
    """Map 0 -> +1.0 and 1 -> -1.0."""
    bits = np.asarray(bits)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("modulate expects bits in {0, 1}")
    return 1.0 - 2.0 * bits.astype(np.float64)


def hard_decision(symbols) -> np.ndarray:
    """Threshold at zero: negative symbols decode to 1."""
    return (np.asarray(symbols) < 0).astype(np.uint8)


def noise_sigma(eb_n0_db: float, rate: float) -> float:
    """Noise std for unit-energy symbols: sqrt(1 / (2 * rate * Eb/N0))."""
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    if not math.isfinite(eb_n0_db):
        raise ValueError(f"SNR must be finite, got {eb_n0_db}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (eb_n0_db / 10.0)))


def add_awgn(symbols, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    symbols = np.asarray(symbols, dtype=np.float64)
    if sigma == 0:
        return symbols.copy()
    return symbols + sigma * rng.standard_normal(symbols.shape)


def q_function(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2.0))


def uncoded_bpsk_ber(eb_n0_db):
    """Theoretical hard-decision BER of uncoded BPSK, Q(sqrt(2 Eb/N0))."""
    ebn0 = 10.0 ** (np.asarray(eb_n0_db, dtype=np.float64) / 10.0)
    return q_function(np.sqrt(2.0 * ebn0))
