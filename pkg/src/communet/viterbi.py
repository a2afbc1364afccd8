"""Soft-decision Viterbi decoding on a zero-terminated trellis.

The branch metric is the squared Euclidean distance between received values
and the BPSK image of the branch output, which is exact maximum likelihood
for AWGN.  When two paths into a state have equal metric, the one through
the lower-numbered predecessor survives (then the lower input bit, which
only matters for the single-state v=0 trellis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import modulate
from .coding import CodeSpec, encode_batch

ORACLE_MAX_LENGTH = 20


@dataclass(frozen=True)
class Trellis:
    spec: CodeSpec
    next_state: np.ndarray  # (S, 2)
    outputs: np.ndarray  # (S, 2, 2) output pair per (state, input)
    pred_state: np.ndarray  # (S, 2) incoming branches, ordered by (prev, input)
    pred_input: np.ndarray  # (S, 2)

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]


def build_trellis(spec: CodeSpec) -> Trellis:
    v = spec.memory
    n_states = 1 << v
    next_state = np.zeros((n_states, 2), dtype=np.int64)
    outputs = np.zeros((n_states, 2, 2), dtype=np.uint8)
    incoming = [[] for _ in range(n_states)]
    for s in range(n_states):
        for u in (0, 1):
            reg = (u << v) | s
            nxt = reg >> 1
            next_state[s, u] = nxt
            for j, g in enumerate(spec.generators):
                outputs[s, u, j] = bin(g & reg).count("1") & 1
            incoming[nxt].append((s, u))
    pred_state = np.zeros((n_states, 2), dtype=np.int64)
    pred_input = np.zeros((n_states, 2), dtype=np.int64)
    for s, branches in enumerate(incoming):
        assert len(branches) == 2
        for b, (p, u) in enumerate(sorted(branches)):
            pred_state[s, b] = p
            pred_input[s, b] = u
    for arr in (next_state, outputs, pred_state, pred_input):
        arr.setflags(write=False)
    return Trellis(spec, next_state, outputs, pred_state, pred_input)


def _split_received(trellis: Trellis, received: np.ndarray) -> tuple[np.ndarray, int]:
    v = trellis.spec.memory
    n_sym = received.shape[-1]
    if n_sym % 2:
        raise ValueError(f"received length {n_sym} is not a multiple of 2")
    steps = n_sym // 2
    L = steps - v
    if L < 1:
        raise ValueError(f"received length {n_sym} too short for memory {v}")
    return received.reshape(received.shape[0], steps, 2), L


def viterbi_decode_batch(trellis: Trellis, received) -> tuple[np.ndarray, np.ndarray]:
    """Decode N blocks at once.

    Parameters
    ----------
    received : array_like, shape (N, 2 * (L + v))

    Returns
    -------
    msgs : np.ndarray of uint8, shape (N, L)
    metrics : np.ndarray, shape (N,)
        Squared Euclidean distance of each chosen codeword.
    """
    received = np.asarray(received, dtype=np.float64)
    if received.ndim != 2:
        raise ValueError(f"expected (N, symbols) array, got shape {received.shape}")
    r, L = _split_received(trellis, received)
    n, steps, _ = r.shape
    S = trellis.num_states
    ps, pi = trellis.pred_state, trellis.pred_input
    # BPSK image of each incoming branch, (S, 2, 2)
    branch_sym = modulate(trellis.outputs[ps, pi])

    metric = np.full((n, S), np.inf)
    metric[:, 0] = 0.0
    decisions = np.empty((steps, n, S), dtype=np.uint8)
    for t in range(steps):
        diff = r[:, t, None, None, :] - branch_sym[None]
        bm = np.einsum("nsbj,nsbj->nsb", diff, diff)
        cand = metric[:, ps] + bm
        choice = np.argmin(cand, axis=2)  # first minimum = lower predecessor
        decisions[t] = choice
        metric = np.take_along_axis(cand, choice[..., None], axis=2)[..., 0]

    state = np.zeros(n, dtype=np.int64)
    inputs = np.empty((n, steps), dtype=np.uint8)
    rows = np.arange(n)
    for t in range(steps - 1, -1, -1):
        b = decisions[t, rows, state]
        inputs[:, t] = pi[state, b]
        state = ps[state, b]
    return inputs[:, :L], metric[:, 0]


def viterbi_decode(trellis: Trellis, received) -> tuple[np.ndarray, float]:
    """Decode a single block; returns ``(message, path_metric)``."""
    received = np.asarray(received, dtype=np.float64).reshape(1, -1)
    msgs, metrics = viterbi_decode_batch(trellis, received)
    return msgs[0], float(metrics[0])


def all_messages(L: int) -> np.ndarray:
    """All 2**L messages in lexicographic order, shape (2**L, L)."""
    idx = np.arange(1 << L, dtype=np.int64)
    shifts = np.arange(L - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def brute_force_ml(spec: CodeSpec, received, chunk: int = 1 << 14) -> np.ndarray:
    """Exhaustive ML decoding; ties go to the lexicographically smallest message."""
    received = np.asarray(received, dtype=np.float64).reshape(-1)
    if received.size % 2:
        raise ValueError(f"received length {received.size} is not a multiple of 2")
    L = received.size // 2 - spec.memory
    if L < 1:
        raise ValueError(f"received length {received.size} too short for memory {spec.memory}")
    if L > ORACLE_MAX_LENGTH:
        raise ValueError(f"oracle limit: L={L} exceeds {ORACLE_MAX_LENGTH}")
    msgs = all_messages(L)
    best_d, best_i = np.inf, -1
    for start in range(0, len(msgs), chunk):
        cw = modulate(encode_batch(spec, msgs[start:start + chunk]).reshape(-1, received.size))
        d = np.sum((cw - received) ** 2, axis=1)
        i = int(np.argmin(d))
        # strict < keeps the earlier chunk on exact ties
        if d[i] < best_d:
            best_d, best_i = d[i], start + i
    return msgs[best_i]
